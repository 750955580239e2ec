#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pamsr {

// Row-major single-channel intensity grid. All imaging code works on
// normalized intensities in [0, 1] stored as double.
class Image {
public:
    Image() = default;
    Image(int rows, int cols, double fill = 0.0);
    Image(int rows, int cols, std::vector<double> pixels);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return px_.size(); }
    bool empty() const { return px_.empty(); }

    double& operator()(int r, int c) { return px_[static_cast<std::size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const { return px_[static_cast<std::size_t>(r) * cols_ + c]; }

    std::span<double> pixels() { return px_; }
    std::span<const double> pixels() const { return px_; }

    double min() const;
    double max() const;
    double mean() const;

    bool same_shape(const Image& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }
    bool operator==(const Image& other) const = default;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> px_;
};

inline void require_same_shape(const Image& a, const Image& b, const char* what)
{
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()) + ")");
}

// Mirror index into [0, n) without repeating the edge sample (-1 -> 1, n -> n-2).
inline int reflect_index(int i, int n)
{
    if (n == 1)
        return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0)
        i += period;
    return i < n ? i : period - i;
}

} // namespace pamsr
