#pragma once

// Straightforward serial implementations kept as the ground truth for the
// parallel kernels in kernels.hpp.

#include "pamsr/kernels.hpp"

namespace pamsr::reference {

using kernels::ConvShape;

template <class T>
void conv2d_forward(const ConvShape& s, const T* x, const T* w, const T* b, T* y);

template <class T>
void conv2d_backward(const ConvShape& s, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db);

template <class T>
void pixel_shuffle(const T* x, int batch, int channels, int h, int w, int r, T* y);

void convolve2d_reflect(std::span<const double> image, int rows, int cols, std::span<const double> kernel, int ksize,
                        std::span<double> out);

/// Mean SSIM with a full 2-D window evaluated pixel by pixel (no separable
/// filtering, no shared intermediate maps).
double ssim(std::span<const double> a, std::span<const double> b, int rows, int cols, int window, double sigma,
            double k1, double k2, double dynamic_range);

} // namespace pamsr::reference
