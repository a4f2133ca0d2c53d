#pragma once

#include <string>

#include "rectiwarp/image.hpp"

namespace rectiwarp {

// Lossless raster I/O. The format is chosen by extension: .png (libpng,
// gray or RGB), .pgm/.ppm (binary, maxval 255 or 65535, 16-bit big-endian
// per the netpbm convention). Values are quantized with round-half-even
// and map back as v / maxval, so write-then-read is exact at the stored
// bit depth.
Image read_image(const std::string &path);
void write_image(const Image &img, const std::string &path, int bit_depth = 8);

// Masks stored as single-channel rasters; nonzero reads as 1.
Mask read_mask(const std::string &path);
void write_mask(const Mask &mask, const std::string &path);

// Round-half-even quantization of v in [0,1] to an integer in [0, maxval].
unsigned quantize_unit(double v, unsigned maxval);

} // namespace rectiwarp
