#include "pamsr/image.hpp"

#include <algorithm>
#include <numeric>

namespace pamsr {

Image::Image(int rows, int cols, double fill)
    : rows_(rows), cols_(cols)
{
    if (rows < 0 || cols < 0)
        throw std::invalid_argument("Image: negative dimensions");
    px_.assign(static_cast<std::size_t>(rows) * cols, fill);
}

Image::Image(int rows, int cols, std::vector<double> pixels)
    : rows_(rows), cols_(cols), px_(std::move(pixels))
{
    if (rows < 0 || cols < 0 || px_.size() != static_cast<std::size_t>(rows) * cols)
        throw std::invalid_argument("Image: pixel count does not match dimensions");
}

double Image::min() const
{
    return px_.empty() ? 0.0 : *std::min_element(px_.begin(), px_.end());
}

double Image::max() const
{
    return px_.empty() ? 0.0 : *std::max_element(px_.begin(), px_.end());
}

double Image::mean() const
{
    if (px_.empty())
        return 0.0;
    return std::accumulate(px_.begin(), px_.end(), 0.0) / static_cast<double>(px_.size());
}

} // namespace pamsr
