#include "pamsr/kernels_reference.hpp"
#include "pamsr/image.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace pamsr::reference {

template <class T>
void conv2d_forward(const ConvShape& s, const T* x, const T* w, const T* b, T* y)
{
    const int oh = s.out_h(), ow = s.out_w(), k = s.kernel;
    for (int n = 0; n < s.batch; ++n)
        for (int o = 0; o < s.out_channels; ++o)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    T acc = b ? b[o] : T(0);
                    for (int c = 0; c < s.in_channels; ++c)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int iy = oy * s.stride - s.pad + ky;
                                const int ix = ox * s.stride - s.pad + kx;
                                if (iy < 0 || iy >= s.in_h || ix < 0 || ix >= s.in_w)
                                    continue;
                                acc += w[((o * s.in_channels + c) * k + ky) * k + kx] *
                                       x[((static_cast<std::size_t>(n) * s.in_channels + c) * s.in_h + iy) * s.in_w + ix];
                            }
                    y[((static_cast<std::size_t>(n) * s.out_channels + o) * oh + oy) * ow + ox] = acc;
                }
}

template <class T>
void conv2d_backward(const ConvShape& s, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db)
{
    const int oh = s.out_h(), ow = s.out_w(), k = s.kernel;
    if (dx)
        std::fill(dx, dx + s.in_size(), T(0));
    for (int n = 0; n < s.batch; ++n)
        for (int o = 0; o < s.out_channels; ++o)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    const T g = dy[((static_cast<std::size_t>(n) * s.out_channels + o) * oh + oy) * ow + ox];
                    if (db)
                        db[o] += g;
                    for (int c = 0; c < s.in_channels; ++c)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int iy = oy * s.stride - s.pad + ky;
                                const int ix = ox * s.stride - s.pad + kx;
                                if (iy < 0 || iy >= s.in_h || ix < 0 || ix >= s.in_w)
                                    continue;
                                const std::size_t xi =
                                    ((static_cast<std::size_t>(n) * s.in_channels + c) * s.in_h + iy) * s.in_w + ix;
                                const std::size_t wi = ((o * s.in_channels + c) * k + ky) * k + kx;
                                if (dw)
                                    dw[wi] += g * x[xi];
                                if (dx)
                                    dx[xi] += g * w[wi];
                            }
                }
}

template <class T>
void pixel_shuffle(const T* x, int batch, int channels, int h, int w, int r, T* y)
{
    if (channels % (r * r) != 0)
        throw std::invalid_argument("pixel_shuffle: channel count not divisible by r^2");
    const int oc = channels / (r * r);
    for (int n = 0; n < batch; ++n)
        for (int c = 0; c < oc; ++c)
            for (int oy = 0; oy < h * r; ++oy)
                for (int ox = 0; ox < w * r; ++ox) {
                    const int src_c = c * r * r + (oy % r) * r + (ox % r);
                    y[((static_cast<std::size_t>(n) * oc + c) * h * r + oy) * w * r + ox] =
                        x[((static_cast<std::size_t>(n) * channels + src_c) * h + oy / r) * w + ox / r];
                }
}

void convolve2d_reflect(std::span<const double> image, int rows, int cols, std::span<const double> kernel, int ksize,
                        std::span<double> out)
{
    const int half = ksize / 2;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (int u = 0; u < ksize; ++u)
                for (int v = 0; v < ksize; ++v) {
                    const int sr = reflect_index(r + half - u, rows);
                    const int sc = reflect_index(c + half - v, cols);
                    acc += kernel[static_cast<std::size_t>(u) * ksize + v] * image[static_cast<std::size_t>(sr) * cols + sc];
                }
            out[static_cast<std::size_t>(r) * cols + c] = acc;
        }
}

double ssim(std::span<const double> a, std::span<const double> b, int rows, int cols, int window, double sigma,
            double k1, double k2, double dynamic_range)
{
    const int half = window / 2;
    std::vector<double> w(static_cast<std::size_t>(window) * window);
    double wsum = 0.0;
    for (int i = 0; i < window; ++i)
        for (int j = 0; j < window; ++j) {
            const double di = i - half, dj = j - half;
            w[i * window + j] = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
            wsum += w[i * window + j];
        }
    for (double& v : w)
        v /= wsum;

    const double c1 = (k1 * dynamic_range) * (k1 * dynamic_range);
    const double c2 = (k2 * dynamic_range) * (k2 * dynamic_range);
    double total = 0.0;
    int count = 0;
    for (int r = 0; r + window <= rows; ++r)
        for (int c = 0; c + window <= cols; ++c) {
            double ma = 0, mb = 0;
            for (int i = 0; i < window; ++i)
                for (int j = 0; j < window; ++j) {
                    const std::size_t p = static_cast<std::size_t>(r + i) * cols + c + j;
                    ma += w[i * window + j] * a[p];
                    mb += w[i * window + j] * b[p];
                }
            double va = 0, vb = 0, cov = 0;
            for (int i = 0; i < window; ++i)
                for (int j = 0; j < window; ++j) {
                    const std::size_t p = static_cast<std::size_t>(r + i) * cols + c + j;
                    va += w[i * window + j] * (a[p] - ma) * (a[p] - ma);
                    vb += w[i * window + j] * (b[p] - mb) * (b[p] - mb);
                    cov += w[i * window + j] * (a[p] - ma) * (b[p] - mb);
                }
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    return total / count;
}

template void conv2d_forward<float>(const ConvShape&, const float*, const float*, const float*, float*);
template void conv2d_forward<double>(const ConvShape&, const double*, const double*, const double*, double*);
template void conv2d_backward<float>(const ConvShape&, const float*, const float*, const float*, float*, float*,
                                     float*);
template void conv2d_backward<double>(const ConvShape&, const double*, const double*, const double*, double*, double*,
                                      double*);
template void pixel_shuffle<float>(const float*, int, int, int, int, int, float*);
template void pixel_shuffle<double>(const double*, int, int, int, int, int, double*);

} // namespace pamsr::reference
