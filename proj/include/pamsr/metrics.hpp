#pragma once

#include "pamsr/image.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace pamsr::metrics {

/// Returned by psnr() for identical images.
inline constexpr double kPsnrCap = 100.0;

/// 10 log10(1 / MSE) with peak 1.0.
double psnr(const Image& ref, const Image& test);

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

/// Normalized 1-D Gaussian window.
std::vector<double> gaussian_window(int size, double sigma);

/// Mean local SSIM over all positions where the window fits entirely.
double ssim(const Image& ref, const Image& test, const SsimParams& params = {});

struct SsimGradient {
    double value = 0.0;
    std::vector<double> grad; // d(mean SSIM) / d(first argument), row-major
};

/// SSIM(a, b) and its gradient with respect to a. This is the single SSIM
/// implementation behind both the metric and the training loss.
SsimGradient ssim_with_gradient(std::span<const double> a, std::span<const double> b, int rows, int cols,
                                const SsimParams& params = {});

/// Full width at half maximum of a peaked profile after subtracting its
/// minimum, with linear interpolation of the half-max crossings.
/// Throws std::domain_error("unresolved peak") if a side never crosses.
double fwhm(std::span<const double> profile, double pitch);

/// (mean(signal) - mean(background)) / std(background), population std.
double cnr(const Image& image, std::span<const std::uint8_t> signal_mask,
           std::span<const std::uint8_t> background_mask);

/// Separable Keys bicubic (a = -0.5) with mirror boundaries; pixel centres
/// map as src = (dst + 0.5) / factor - 0.5.
Image bicubic_upscale(const Image& image, int factor);

/// Frames per second for an Nx x Ny raster at pulse repetition rate f_p.
double scan_rate(double pulse_rate_hz, long nx, long ny);

/// Highest pulse repetition rate that lets the deepest echo return: v / d.
double critical_prr(double sound_speed, double depth);

double speedup_factor(int down_x, int down_y);

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0; // sample standard deviation (n - 1)
    std::size_t count = 0;
};

MeanSd mean_sd(std::span<const double> values);

} // namespace pamsr::metrics
