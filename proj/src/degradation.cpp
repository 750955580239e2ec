#include "pamsr/degradation.hpp"
#include "pamsr/kernels.hpp"

#include <algorithm>
#include <random>
#include <string>

namespace pamsr::degradation {

void DegradationConfig::validate() const
{
    if (down_x < 1 || down_y < 1)
        throw std::invalid_argument("DegradationConfig: downsampling factors must be >= 1");
    if (!(noise_sigma >= 0.0 && noise_sigma < 1.0))
        throw std::invalid_argument("DegradationConfig: noise_sigma must lie in [0, 1)");
    if (offset_x < 0 || offset_x >= down_x || offset_y < 0 || offset_y >= down_y)
        throw std::invalid_argument("DegradationConfig: decimation offset must lie in [0, d)");
}

void DegradationConfig::validate_for(const Image& image) const
{
    validate();
    if (image.cols() % down_x != 0 || image.rows() % down_y != 0)
        throw std::invalid_argument("DegradationConfig: factors " + std::to_string(down_x) + "x" +
                                    std::to_string(down_y) + " do not divide image " + std::to_string(image.rows()) +
                                    "x" + std::to_string(image.cols()));
}

Image convolve2d(const Image& image, const psf::PsfKernel& kernel)
{
    if (kernel.size < 1 || kernel.size % 2 == 0 ||
        kernel.values.size() != static_cast<std::size_t>(kernel.size) * kernel.size)
        throw std::invalid_argument("convolve2d: kernel must be odd-sized and square");
    if (kernel.radius() >= image.rows() || kernel.radius() >= image.cols())
        throw std::invalid_argument("convolve2d: kernel (" + std::to_string(kernel.size) + "x" +
                                    std::to_string(kernel.size) + ") larger than image (" +
                                    std::to_string(image.rows()) + "x" + std::to_string(image.cols()) + ")");
    Image out(image.rows(), image.cols());
    kernels::convolve2d_reflect(image.pixels(), image.rows(), image.cols(), kernel.values, kernel.size, out.pixels());
    return out;
}

Image decimate(const Image& image, int down_x, int down_y, int offset_x, int offset_y)
{
    DegradationConfig cfg;
    cfg.down_x = down_x;
    cfg.down_y = down_y;
    cfg.offset_x = offset_x;
    cfg.offset_y = offset_y;
    cfg.validate_for(image);

    Image out(image.rows() / down_y, image.cols() / down_x);
    for (int r = 0; r < out.rows(); ++r)
        for (int c = 0; c < out.cols(); ++c)
            out(r, c) = image(r * down_y + offset_y, c * down_x + offset_x);
    return out;
}

Image add_awgn(const Image& image, double sigma, std::uint64_t seed)
{
    if (sigma < 0.0)
        throw std::invalid_argument("add_awgn: sigma must be >= 0");
    if (sigma == 0.0)
        return image;
    // Single sequential stream: the draw order is the pixel order.
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    Image out = image;
    for (double& v : out.pixels())
        v = std::clamp(v + noise(rng), 0.0, 1.0);
    return out;
}

Image degrade(const Image& image, const psf::PsfKernel& kernel, const DegradationConfig& config)
{
    config.validate_for(image);
    const Image blurred = convolve2d(image, kernel);
    const Image sampled = decimate(blurred, config.down_x, config.down_y, config.offset_x, config.offset_y);
    return add_awgn(sampled, config.noise_sigma, config.rng_seed);
}

} // namespace pamsr::degradation
