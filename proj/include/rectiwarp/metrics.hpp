#pragma once

#include "rectiwarp/geometry.hpp"
#include "rectiwarp/image.hpp"

namespace rectiwarp {

// Peak signal-to-noise ratio in dB with peak value 1.0; identical images
// return the 100 dB cap. The masked overload restricts the mean squared
// error to mask-1 pixels.
double psnr(const Image &a, const Image &b);
double psnr(const Image &a, const Image &b, const Mask &valid);

// Mean structural similarity over non-overlapping 8x8 windows (stride =
// window), constants C1 = 0.01^2 and C2 = 0.03^2, computed per channel and
// averaged. The masked overload drops masked-out pixels from each window's
// statistics; windows with no valid pixel are skipped.
double ssim(const Image &a, const Image &b, int window = 8);
double ssim(const Image &a, const Image &b, const Mask &valid, int window = 8);

// All-one prompt for border-preserving tasks (T1, T4); the validity mask
// itself for boundary tasks (T2, T3).
Mask prompt_from_validity(const Mask &validity, Task task);

} // namespace rectiwarp
