#pragma once

// Data-parallel (OpenMP) compute kernels. Each kernel has a serial
// counterpart in kernels_reference.hpp that tests and benchmarks compare
// against. Every parallel loop partitions output elements only, so results
// are bit-identical for any thread count.

#include <cstddef>
#include <span>

namespace pamsr::kernels {

struct ConvShape {
    int batch = 1;
    int in_channels = 1;
    int in_h = 1;
    int in_w = 1;
    int out_channels = 1;
    int kernel = 3;
    int stride = 1;
    int pad = 1;

    int out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
    int out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
    std::size_t in_size() const { return static_cast<std::size_t>(batch) * in_channels * in_h * in_w; }
    std::size_t out_size() const { return static_cast<std::size_t>(batch) * out_channels * out_h() * out_w(); }
    std::size_t weight_size() const { return static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel; }
};

/// y = conv(x, w) + b. Weight layout [out, in, k, k]; bias may be null.
template <class T>
void conv2d_forward(const ConvShape& s, const T* x, const T* w, const T* b, T* y);

/// dx = conv^T(dy). Overwrites dx.
template <class T>
void conv2d_backward_data(const ConvShape& s, const T* w, const T* dy, T* dx);

/// dw += dy * x^T, db += sum(dy). db may be null.
template <class T>
void conv2d_backward_weight(const ConvShape& s, const T* x, const T* dy, T* dw, T* db);

/// Sub-pixel rearrangement: out[n, c, h*r + i, w*r + j] = in[n, c*r*r + i*r + j, h, w].
/// `channels` is the input channel count and must be divisible by r*r.
template <class T>
void pixel_shuffle(const T* x, int batch, int channels, int h, int w, int r, T* y);

/// Exact inverse of pixel_shuffle; `channels` is the input channel count of
/// the forward shuffle.
template <class T>
void pixel_unshuffle(const T* y, int batch, int channels, int h, int w, int r, T* x);

/// Same-size 2-D convolution with mirror boundaries; kernel is ksize x ksize (odd).
void convolve2d_reflect(std::span<const double> image, int rows, int cols, std::span<const double> kernel, int ksize,
                        std::span<double> out);

/// Separable correlation with a symmetric 1-D window over the "valid" region:
/// out is (rows - n + 1) x (cols - n + 1).
void filter_valid(std::span<const double> image, int rows, int cols, std::span<const double> window,
                  std::span<double> out);

/// Adjoint of filter_valid: scatters a valid-region map back to full size
/// (overwrites out).
void filter_valid_adjoint(std::span<const double> valid, int rows, int cols, std::span<const double> window,
                          std::span<double> out);

} // namespace pamsr::kernels
