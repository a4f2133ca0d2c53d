#pragma once

#include <string>

#include "rectiwarp/geometry.hpp"

namespace rectiwarp {

// Middlebury-style binary flow files: 4-byte magic "PIEH", u32 width, u32
// height, then interleaved little-endian 32-bit float (u,v) pairs in
// row-major order. Round-trips are bit-exact at 32-bit precision.
FlowField read_flow(const std::string &path);
void write_flow(const FlowField &flow, const std::string &path);

} // namespace rectiwarp
