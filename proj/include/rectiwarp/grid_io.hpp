#pragma once

#include <string>

#include "rectiwarp/tps.hpp"

namespace rectiwarp {

// Binary grid files: 4-byte magic "TPSG", u32 kind (0 = control grid,
// 1 = sampling grid), u32 cols/width, u32 rows/height, then row-major
// little-endian 32-bit float (x,y) pairs. Round-trips are bit-exact at
// 32-bit precision.
ControlGrid read_control_grid(const std::string &path);
void write_control_grid(const ControlGrid &grid, const std::string &path);

SamplingGrid read_sampling_grid(const std::string &path);
void write_sampling_grid(const SamplingGrid &grid, const std::string &path);

} // namespace rectiwarp
