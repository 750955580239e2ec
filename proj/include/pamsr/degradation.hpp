#pragma once

#include "pamsr/image.hpp"
#include "pamsr/psf.hpp"

#include <cstdint>

namespace pamsr::degradation {

struct DegradationConfig {
    int down_x = 4;
    int down_y = 4;
    double noise_sigma = 0.01;
    std::uint64_t rng_seed = 0;
    // decimation phase; 0 keeps samples 0, d, 2d, ...
    int offset_x = 0;
    int offset_y = 0;

    void validate() const;
    void validate_for(const Image& image) const;
};

/// Same-size convolution with reflective (mirror, edge not repeated) boundary.
Image convolve2d(const Image& image, const psf::PsfKernel& kernel);

/// Keeps every d-th sample per axis starting at the given offsets.
Image decimate(const Image& image, int down_x, int down_y, int offset_x = 0, int offset_y = 0);

/// Adds i.i.d. N(0, sigma^2) noise and clamps to [0, 1]. Deterministic per seed.
Image add_awgn(const Image& image, double sigma, std::uint64_t seed);

/// y = (h conv x) decimated by (d_x, d_y), plus AWGN.
Image degrade(const Image& image, const psf::PsfKernel& kernel, const DegradationConfig& config);

/// Per-item seed for batch synthesis.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) { return seed ^ index; }

} // namespace pamsr::degradation
