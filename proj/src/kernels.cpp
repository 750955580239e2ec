#include "pamsr/kernels.hpp"
#include "pamsr/image.hpp"

#include <cblas.h>

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace pamsr::kernels {

namespace {

void gemm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, int m, int n, int k, float alpha, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc)
{
    cblas_sgemm(CblasRowMajor, ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void gemm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc)
{
    cblas_dgemm(CblasRowMajor, ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

bool is_pointwise(const ConvShape& s)
{
    return s.kernel == 1 && s.stride == 1 && s.pad == 0;
}

// col[(c*k + ky)*k + kx][oy*ow + ox] = x[c][oy*s - p + ky][ox*s - p + kx]
template <class T>
void im2col(const ConvShape& s, const T* x, T* col)
{
    const int oh = s.out_h(), ow = s.out_w(), k = s.kernel;
    for (int c = 0; c < s.in_channels; ++c) {
        const T* plane = x + static_cast<std::size_t>(c) * s.in_h * s.in_w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                T* dst = col + (static_cast<std::size_t>(c * k + ky) * k + kx) * oh * ow;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * s.stride - s.pad + ky;
                    T* row = dst + static_cast<std::size_t>(oy) * ow;
                    if (iy < 0 || iy >= s.in_h) {
                        std::fill(row, row + ow, T(0));
                        continue;
                    }
                    const T* src = plane + static_cast<std::size_t>(iy) * s.in_w;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * s.stride - s.pad + kx;
                        row[ox] = (ix >= 0 && ix < s.in_w) ? src[ix] : T(0);
                    }
                }
            }
        }
    }
}

template <class T>
void col2im(const ConvShape& s, const T* col, T* x)
{
    const int oh = s.out_h(), ow = s.out_w(), k = s.kernel;
    std::fill(x, x + static_cast<std::size_t>(s.in_channels) * s.in_h * s.in_w, T(0));
    for (int c = 0; c < s.in_channels; ++c) {
        T* plane = x + static_cast<std::size_t>(c) * s.in_h * s.in_w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const T* src = col + (static_cast<std::size_t>(c * k + ky) * k + kx) * oh * ow;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * s.stride - s.pad + ky;
                    if (iy < 0 || iy >= s.in_h)
                        continue;
                    T* dst = plane + static_cast<std::size_t>(iy) * s.in_w;
                    const T* row = src + static_cast<std::size_t>(oy) * ow;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * s.stride - s.pad + kx;
                        if (ix >= 0 && ix < s.in_w)
                            dst[ix] += row[ox];
                    }
                }
            }
        }
    }
}

std::size_t col_size(const ConvShape& s)
{
    return static_cast<std::size_t>(s.in_channels) * s.kernel * s.kernel * s.out_h() * s.out_w();
}

} // namespace

template <class T>
void conv2d_forward(const ConvShape& s, const T* x, const T* w, const T* b, T* y)
{
    const int ohw = s.out_h() * s.out_w();
    const int kdim = s.in_channels * s.kernel * s.kernel;
    const std::size_t in_stride = static_cast<std::size_t>(s.in_channels) * s.in_h * s.in_w;
    const std::size_t out_stride = static_cast<std::size_t>(s.out_channels) * ohw;
    const bool pointwise = is_pointwise(s);

#pragma omp parallel
    {
        std::vector<T> col(pointwise ? 0 : col_size(s));
#pragma omp for schedule(static)
        for (int n = 0; n < s.batch; ++n) {
            const T* xn = x + n * in_stride;
            T* yn = y + n * out_stride;
            const T* cols = xn;
            if (!pointwise) {
                im2col(s, xn, col.data());
                cols = col.data();
            }
            for (int o = 0; o < s.out_channels; ++o)
                std::fill(yn + static_cast<std::size_t>(o) * ohw, yn + static_cast<std::size_t>(o + 1) * ohw,
                          b ? b[o] : T(0));
            gemm(CblasNoTrans, CblasNoTrans, s.out_channels, ohw, kdim, T(1), w, kdim, cols, ohw, T(1), yn, ohw);
        }
    }
}

template <class T>
void conv2d_backward_data(const ConvShape& s, const T* w, const T* dy, T* dx)
{
    const int ohw = s.out_h() * s.out_w();
    const int kdim = s.in_channels * s.kernel * s.kernel;
    const std::size_t in_stride = static_cast<std::size_t>(s.in_channels) * s.in_h * s.in_w;
    const std::size_t out_stride = static_cast<std::size_t>(s.out_channels) * ohw;
    const bool pointwise = is_pointwise(s);

#pragma omp parallel
    {
        std::vector<T> col(pointwise ? 0 : col_size(s));
#pragma omp for schedule(static)
        for (int n = 0; n < s.batch; ++n) {
            T* target = pointwise ? dx + n * in_stride : col.data();
            gemm(CblasTrans, CblasNoTrans, kdim, ohw, s.out_channels, T(1), w, kdim, dy + n * out_stride, ohw, T(0),
                 target, ohw);
            if (!pointwise)
                col2im(s, col.data(), dx + n * in_stride);
        }
    }
}

template <class T>
void conv2d_backward_weight(const ConvShape& s, const T* x, const T* dy, T* dw, T* db)
{
    const int ohw = s.out_h() * s.out_w();
    const int kdim = s.in_channels * s.kernel * s.kernel;
    const std::size_t in_stride = static_cast<std::size_t>(s.in_channels) * s.in_h * s.in_w;
    const std::size_t out_stride = static_cast<std::size_t>(s.out_channels) * ohw;
    const std::size_t wsize = s.weight_size();
    const bool pointwise = is_pointwise(s);

    // Per-sample partials reduced in sample order keep the sum independent
    // of the thread count.
    std::vector<T> partial(static_cast<std::size_t>(s.batch) * wsize);
#pragma omp parallel
    {
        std::vector<T> col(pointwise ? 0 : col_size(s));
#pragma omp for schedule(static)
        for (int n = 0; n < s.batch; ++n) {
            const T* cols = x + n * in_stride;
            if (!pointwise) {
                im2col(s, x + n * in_stride, col.data());
                cols = col.data();
            }
            gemm(CblasNoTrans, CblasTrans, s.out_channels, kdim, ohw, T(1), dy + n * out_stride, ohw, cols, ohw, T(0),
                 partial.data() + n * wsize, kdim);
        }
    }
    for (int n = 0; n < s.batch; ++n) {
        const T* p = partial.data() + n * wsize;
        for (std::size_t i = 0; i < wsize; ++i)
            dw[i] += p[i];
    }
    if (db) {
        for (int n = 0; n < s.batch; ++n) {
            for (int o = 0; o < s.out_channels; ++o) {
                const T* g = dy + n * out_stride + static_cast<std::size_t>(o) * ohw;
                T acc = 0;
                for (int i = 0; i < ohw; ++i)
                    acc += g[i];
                db[o] += acc;
            }
        }
    }
}

template <class T>
void pixel_shuffle(const T* x, int batch, int channels, int h, int w, int r, T* y)
{
    if (r < 1 || channels % (r * r) != 0)
        throw std::invalid_argument("pixel_shuffle: channel count not divisible by r^2");
    const int oc = channels / (r * r);
    const int oh = h * r, ow = w * r;
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < batch; ++n) {
        for (int c = 0; c < oc; ++c) {
            T* dst = y + (static_cast<std::size_t>(n) * oc + c) * oh * ow;
            for (int i = 0; i < r; ++i) {
                for (int j = 0; j < r; ++j) {
                    const T* src = x + (static_cast<std::size_t>(n) * channels + c * r * r + i * r + j) * h * w;
                    for (int yy = 0; yy < h; ++yy)
                        for (int xx = 0; xx < w; ++xx)
                            dst[static_cast<std::size_t>(yy * r + i) * ow + xx * r + j] = src[yy * w + xx];
                }
            }
        }
    }
}

template <class T>
void pixel_unshuffle(const T* y, int batch, int channels, int h, int w, int r, T* x)
{
    if (r < 1 || channels % (r * r) != 0)
        throw std::invalid_argument("pixel_unshuffle: channel count not divisible by r^2");
    const int oc = channels / (r * r);
    const int oh = h * r, ow = w * r;
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < batch; ++n) {
        for (int c = 0; c < oc; ++c) {
            const T* src = y + (static_cast<std::size_t>(n) * oc + c) * oh * ow;
            for (int i = 0; i < r; ++i) {
                for (int j = 0; j < r; ++j) {
                    T* dst = x + (static_cast<std::size_t>(n) * channels + c * r * r + i * r + j) * h * w;
                    for (int yy = 0; yy < h; ++yy)
                        for (int xx = 0; xx < w; ++xx)
                            dst[yy * w + xx] = src[static_cast<std::size_t>(yy * r + i) * ow + xx * r + j];
                }
            }
        }
    }
}

void convolve2d_reflect(std::span<const double> image, int rows, int cols, std::span<const double> kernel, int ksize,
                        std::span<double> out)
{
    const int half = ksize / 2;
    // Precomputed mirrored index tables; the inner loop is then branch free.
    std::vector<int> row_idx(rows + 2 * half), col_idx(cols + 2 * half);
    for (int i = 0; i < rows + 2 * half; ++i)
        row_idx[i] = reflect_index(i - half, rows);
    for (int j = 0; j < cols + 2 * half; ++j)
        col_idx[j] = reflect_index(j - half, cols);

#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            double acc = 0.0;
            // convolution: out(r,c) = sum k(u,v) x(r + half - u, c + half - v)
            for (int u = 0; u < ksize; ++u) {
                const double* src = image.data() + static_cast<std::size_t>(row_idx[r + 2 * half - u]) * cols;
                const double* krow = kernel.data() + static_cast<std::size_t>(u) * ksize;
                const int* cidx = col_idx.data() + c + 2 * half;
                for (int v = 0; v < ksize; ++v)
                    acc += krow[v] * src[cidx[-v]];
            }
            out[static_cast<std::size_t>(r) * cols + c] = acc;
        }
    }
}

void filter_valid(std::span<const double> image, int rows, int cols, std::span<const double> window,
                  std::span<double> out)
{
    const int n = static_cast<int>(window.size());
    const int vr = rows - n + 1, vc = cols - n + 1;
    std::vector<double> tmp(static_cast<std::size_t>(rows) * vc);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        const double* src = image.data() + static_cast<std::size_t>(r) * cols;
        double* dst = tmp.data() + static_cast<std::size_t>(r) * vc;
        for (int c = 0; c < vc; ++c) {
            double acc = 0.0;
            for (int k = 0; k < n; ++k)
                acc += window[k] * src[c + k];
            dst[c] = acc;
        }
    }
#pragma omp parallel for schedule(static)
    for (int r = 0; r < vr; ++r) {
        double* dst = out.data() + static_cast<std::size_t>(r) * vc;
        for (int c = 0; c < vc; ++c)
            dst[c] = 0.0;
        for (int k = 0; k < n; ++k) {
            const double* src = tmp.data() + static_cast<std::size_t>(r + k) * vc;
            const double wk = window[k];
            for (int c = 0; c < vc; ++c)
                dst[c] += wk * src[c];
        }
    }
}

void filter_valid_adjoint(std::span<const double> valid, int rows, int cols, std::span<const double> window,
                          std::span<double> out)
{
    const int n = static_cast<int>(window.size());
    const int vr = rows - n + 1, vc = cols - n + 1;
    // Gather form of the scatter: each output row/column reads the valid
    // positions that touched it, so rows are independent.
    std::vector<double> tmp(static_cast<std::size_t>(rows) * vc);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        double* dst = tmp.data() + static_cast<std::size_t>(r) * vc;
        for (int c = 0; c < vc; ++c)
            dst[c] = 0.0;
        const int k_lo = std::max(0, r - vr + 1), k_hi = std::min(n - 1, r);
        for (int k = k_lo; k <= k_hi; ++k) {
            const double* src = valid.data() + static_cast<std::size_t>(r - k) * vc;
            const double wk = window[k];
            for (int c = 0; c < vc; ++c)
                dst[c] += wk * src[c];
        }
    }
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        const double* src = tmp.data() + static_cast<std::size_t>(r) * vc;
        double* dst = out.data() + static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) {
            const int k_lo = std::max(0, c - vc + 1), k_hi = std::min(n - 1, c);
            double acc = 0.0;
            for (int k = k_lo; k <= k_hi; ++k)
                acc += window[k] * src[c - k];
            dst[c] = acc;
        }
    }
}

template void conv2d_forward<float>(const ConvShape&, const float*, const float*, const float*, float*);
template void conv2d_forward<double>(const ConvShape&, const double*, const double*, const double*, double*);
template void conv2d_backward_data<float>(const ConvShape&, const float*, const float*, float*);
template void conv2d_backward_data<double>(const ConvShape&, const double*, const double*, double*);
template void conv2d_backward_weight<float>(const ConvShape&, const float*, const float*, float*, float*);
template void conv2d_backward_weight<double>(const ConvShape&, const double*, const double*, double*, double*);
template void pixel_shuffle<float>(const float*, int, int, int, int, int, float*);
template void pixel_shuffle<double>(const double*, int, int, int, int, int, double*);
template void pixel_unshuffle<float>(const float*, int, int, int, int, int, float*);
template void pixel_unshuffle<double>(const double*, int, int, int, int, int, double*);

} // namespace pamsr::kernels
