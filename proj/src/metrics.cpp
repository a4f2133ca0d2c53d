#include "rectiwarp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rectiwarp {

namespace {

constexpr double kPsnrCap = 100.0;

void require_pair(const Image &a, const Image &b, const char *who) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(who) + ": image shapes differ");
    }
}

double psnr_from_mse(double mse) {
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

} // namespace

double psnr(const Image &a, const Image &b) {
    require_pair(a, b, "psnr");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return psnr_from_mse(acc / static_cast<double>(a.data.size()));
}

double psnr(const Image &a, const Image &b, const Mask &valid) {
    require_pair(a, b, "psnr");
    if (valid.width != a.width || valid.height != a.height) {
        throw std::invalid_argument("psnr: mask shape differs");
    }
    double acc = 0.0;
    std::size_t terms = 0;
    for (int y = 0; y < a.height; ++y) {
        for (int x = 0; x < a.width; ++x) {
            if (!valid.at(x, y)) continue;
            for (int c = 0; c < a.channels; ++c) {
                const double d = a.at(x, y, c) - b.at(x, y, c);
                acc += d * d;
            }
            terms += static_cast<std::size_t>(a.channels);
        }
    }
    if (terms == 0) {
        throw std::invalid_argument("psnr: mask selects no pixels");
    }
    return psnr_from_mse(acc / static_cast<double>(terms));
}

namespace {

double ssim_impl(const Image &a, const Image &b, const Mask *valid, int window) {
    constexpr double C1 = 0.01 * 0.01;
    constexpr double C2 = 0.03 * 0.03;
    double channel_acc = 0.0;
    for (int c = 0; c < a.channels; ++c) {
        double window_acc = 0.0;
        std::size_t windows = 0;
        for (int wy = 0; wy < a.height; wy += window) {
            for (int wx = 0; wx < a.width; wx += window) {
                const int ye = std::min(wy + window, a.height);
                const int xe = std::min(wx + window, a.width);
                double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
                int n = 0;
                for (int y = wy; y < ye; ++y) {
                    for (int x = wx; x < xe; ++x) {
                        if (valid && !valid->at(x, y)) continue;
                        const double va = a.at(x, y, c);
                        const double vb = b.at(x, y, c);
                        sa += va;
                        sb += vb;
                        saa += va * va;
                        sbb += vb * vb;
                        sab += va * vb;
                        ++n;
                    }
                }
                if (n == 0) continue; // no valid pixel: window skipped
                const double inv = 1.0 / n;
                const double mu_a = sa * inv;
                const double mu_b = sb * inv;
                const double var_a = saa * inv - mu_a * mu_a;
                const double var_b = sbb * inv - mu_b * mu_b;
                const double cov = sab * inv - mu_a * mu_b;
                const double num = (2.0 * mu_a * mu_b + C1) * (2.0 * cov + C2);
                const double den = (mu_a * mu_a + mu_b * mu_b + C1) * (var_a + var_b + C2);
                window_acc += num / den;
                ++windows;
            }
        }
        if (windows == 0) {
            throw std::invalid_argument("ssim: no window contains a valid pixel");
        }
        channel_acc += window_acc / static_cast<double>(windows);
    }
    return channel_acc / static_cast<double>(a.channels);
}

} // namespace

double ssim(const Image &a, const Image &b, int window) {
    require_pair(a, b, "ssim");
    if (window < 1) {
        throw std::invalid_argument("ssim: window must be >= 1");
    }
    return ssim_impl(a, b, nullptr, window);
}

double ssim(const Image &a, const Image &b, const Mask &valid, int window) {
    require_pair(a, b, "ssim");
    if (valid.width != a.width || valid.height != a.height) {
        throw std::invalid_argument("ssim: mask shape differs");
    }
    if (window < 1) {
        throw std::invalid_argument("ssim: window must be >= 1");
    }
    return ssim_impl(a, b, &valid, window);
}

Mask prompt_from_validity(const Mask &validity, Task task) {
    switch (task) {
    case Task::T2:
    case Task::T3:
        return validity; // the prompt marks the irregular boundary
    case Task::T1:
    case Task::T4:
        return Mask::all_one(validity.width, validity.height);
    }
    throw std::invalid_argument("prompt_from_validity: invalid task");
}

} // namespace rectiwarp
