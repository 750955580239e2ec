#include "pamsr/metrics.hpp"
#include "pamsr/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace pamsr::metrics {

double psnr(const Image& ref, const Image& test)
{
    require_same_shape(ref, test, "psnr");
    if (ref.empty())
        throw std::invalid_argument("psnr: empty image");
    double sum = 0.0;
    const auto a = ref.pixels();
    const auto b = test.pixels();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    const double mse = sum / static_cast<double>(a.size());
    if (mse == 0.0)
        return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

std::vector<double> gaussian_window(int size, double sigma)
{
    if (size < 1 || size % 2 == 0 || sigma <= 0.0)
        throw std::invalid_argument("gaussian_window: size must be odd and positive, sigma > 0");
    std::vector<double> w(size);
    const int half = size / 2;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - half;
        w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += w[i];
    }
    for (double& v : w)
        v /= sum;
    return w;
}

namespace {

struct LocalStats {
    int vr = 0, vc = 0;
    std::vector<double> mu_a, mu_b, e_aa, e_bb, e_ab;
};

LocalStats local_stats(std::span<const double> a, std::span<const double> b, int rows, int cols,
                       const std::vector<double>& window)
{
    const int n = static_cast<int>(window.size());
    LocalStats s;
    s.vr = rows - n + 1;
    s.vc = cols - n + 1;
    const std::size_t vsize = static_cast<std::size_t>(s.vr) * s.vc;
    std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    for (auto* v : {&s.mu_a, &s.mu_b, &s.e_aa, &s.e_bb, &s.e_ab})
        v->resize(vsize);
    kernels::filter_valid(a, rows, cols, window, s.mu_a);
    kernels::filter_valid(b, rows, cols, window, s.mu_b);
    kernels::filter_valid(aa, rows, cols, window, s.e_aa);
    kernels::filter_valid(bb, rows, cols, window, s.e_bb);
    kernels::filter_valid(ab, rows, cols, window, s.e_ab);
    return s;
}

void check_ssim_input(std::size_t na, std::size_t nb, int rows, int cols, const SsimParams& p)
{
    if (na != nb || na != static_cast<std::size_t>(rows) * cols)
        throw std::invalid_argument("ssim: shape mismatch");
    if (rows < p.window || cols < p.window)
        throw std::invalid_argument("ssim: image " + std::to_string(rows) + "x" + std::to_string(cols) +
                                    " smaller than the " + std::to_string(p.window) + "x" + std::to_string(p.window) +
                                    " window");
}

} // namespace

SsimGradient ssim_with_gradient(std::span<const double> a, std::span<const double> b, int rows, int cols,
                                const SsimParams& p)
{
    check_ssim_input(a.size(), b.size(), rows, cols, p);
    const auto window = gaussian_window(p.window, p.sigma);
    const LocalStats s = local_stats(a, b, rows, cols, window);
    const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
    const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);

    const std::size_t vsize = s.mu_a.size();
    const double inv_n = 1.0 / static_cast<double>(vsize);
    std::vector<double> g_mu(vsize), g_aa(vsize), g_ab(vsize);
    double total = 0.0;
    for (std::size_t i = 0; i < vsize; ++i) {
        const double ma = s.mu_a[i], mb = s.mu_b[i];
        const double a1 = 2.0 * ma * mb + c1;
        const double a2 = 2.0 * (s.e_ab[i] - ma * mb) + c2;
        const double b1 = ma * ma + mb * mb + c1;
        const double b2 = (s.e_aa[i] - ma * ma) + (s.e_bb[i] - mb * mb) + c2;
        const double den = b1 * b2;
        const double value = a1 * a2 / den;
        total += value;
        g_mu[i] = inv_n * ((2.0 * mb * a2 - 2.0 * mb * a1) / den - value * (2.0 * ma / b1 - 2.0 * ma / b2));
        g_aa[i] = inv_n * (-value / b2);
        g_ab[i] = inv_n * (2.0 * a1 / den);
    }

    SsimGradient out;
    out.value = total * inv_n;
    out.grad.resize(a.size());
    std::vector<double> back_mu(a.size()), back_aa(a.size()), back_ab(a.size());
    kernels::filter_valid_adjoint(g_mu, rows, cols, window, back_mu);
    kernels::filter_valid_adjoint(g_aa, rows, cols, window, back_aa);
    kernels::filter_valid_adjoint(g_ab, rows, cols, window, back_ab);
    for (std::size_t i = 0; i < a.size(); ++i)
        out.grad[i] = back_mu[i] + 2.0 * a[i] * back_aa[i] + b[i] * back_ab[i];
    return out;
}

double ssim(const Image& ref, const Image& test, const SsimParams& p)
{
    require_same_shape(ref, test, "ssim");
    check_ssim_input(ref.size(), test.size(), ref.rows(), ref.cols(), p);
    const auto window = gaussian_window(p.window, p.sigma);
    const LocalStats s = local_stats(ref.pixels(), test.pixels(), ref.rows(), ref.cols(), window);
    const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
    const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
    double total = 0.0;
    for (std::size_t i = 0; i < s.mu_a.size(); ++i) {
        const double ma = s.mu_a[i], mb = s.mu_b[i];
        const double va = s.e_aa[i] - ma * ma;
        const double vb = s.e_bb[i] - mb * mb;
        const double cov = s.e_ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    return total / static_cast<double>(s.mu_a.size());
}

double fwhm(std::span<const double> profile, double pitch)
{
    const int n = static_cast<int>(profile.size());
    if (n < 3)
        throw std::invalid_argument("fwhm: profile needs at least 3 samples");
    int peak = 0;
    double lo = profile[0];
    for (int i = 1; i < n; ++i) {
        if (profile[i] > profile[peak])
            peak = i;
        lo = std::min(lo, profile[i]);
    }
    for (int i = 0; i < n; ++i)
        if (i != peak && profile[i] == profile[peak])
            throw std::invalid_argument("fwhm: global maximum is not unique");
    if (peak == 0 || peak == n - 1)
        throw std::invalid_argument("fwhm: maximum lies at a profile endpoint");

    const double half = lo + 0.5 * (profile[peak] - lo);
    int i = peak;
    while (i > 0 && profile[i] > half)
        --i;
    if (profile[i] > half)
        throw std::domain_error("fwhm: unresolved peak (no left half-max crossing)");
    const double left = i + (half - profile[i]) / (profile[i + 1] - profile[i]);

    int j = peak;
    while (j < n - 1 && profile[j] > half)
        ++j;
    if (profile[j] > half)
        throw std::domain_error("fwhm: unresolved peak (no right half-max crossing)");
    const double right = (j - 1) + (profile[j - 1] - half) / (profile[j - 1] - profile[j]);
    return (right - left) * pitch;
}

double cnr(const Image& image, std::span<const std::uint8_t> signal_mask, std::span<const std::uint8_t> background_mask)
{
    if (signal_mask.size() != image.size() || background_mask.size() != image.size())
        throw std::invalid_argument("cnr: mask size does not match image");
    double s_sum = 0.0, b_sum = 0.0;
    std::size_t s_n = 0, b_n = 0;
    const auto px = image.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
        if (signal_mask[i] && background_mask[i])
            throw std::invalid_argument("cnr: signal and background masks overlap");
        if (signal_mask[i]) {
            s_sum += px[i];
            ++s_n;
        }
        if (background_mask[i]) {
            b_sum += px[i];
            ++b_n;
        }
    }
    if (s_n == 0 || b_n == 0)
        throw std::invalid_argument("cnr: empty mask");
    const double s_mean = s_sum / static_cast<double>(s_n);
    const double b_mean = b_sum / static_cast<double>(b_n);
    double var = 0.0;
    for (std::size_t i = 0; i < px.size(); ++i)
        if (background_mask[i])
            var += (px[i] - b_mean) * (px[i] - b_mean);
    var /= static_cast<double>(b_n);
    if (var <= 0.0)
        throw std::domain_error("cnr: background has zero variance");
    return (s_mean - b_mean) / std::sqrt(var);
}

namespace {

double keys_weight(double x)
{
    constexpr double a = -0.5;
    x = std::abs(x);
    if (x <= 1.0)
        return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0)
        return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
    return 0.0;
}

struct Taps {
    int index[4];
    double weight[4];
};

std::vector<Taps> resample_taps(int in_size, int factor)
{
    std::vector<Taps> taps(static_cast<std::size_t>(in_size) * factor);
    for (int o = 0; o < in_size * factor; ++o) {
        const double src = (o + 0.5) / factor - 0.5;
        const int base = static_cast<int>(std::floor(src));
        const double t = src - base;
        for (int k = 0; k < 4; ++k) {
            taps[o].index[k] = reflect_index(base - 1 + k, in_size);
            taps[o].weight[k] = keys_weight(t - (k - 1));
        }
    }
    return taps;
}

} // namespace

Image bicubic_upscale(const Image& image, int factor)
{
    if (factor < 1)
        throw std::invalid_argument("bicubic_upscale: factor must be >= 1");
    if (image.empty())
        throw std::invalid_argument("bicubic_upscale: empty image");
    const auto row_taps = resample_taps(image.rows(), factor);
    const auto col_taps = resample_taps(image.cols(), factor);

    Image horizontal(image.rows(), image.cols() * factor);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < image.rows(); ++r)
        for (int c = 0; c < horizontal.cols(); ++c) {
            const Taps& t = col_taps[c];
            double acc = 0.0;
            for (int k = 0; k < 4; ++k)
                acc += t.weight[k] * image(r, t.index[k]);
            horizontal(r, c) = acc;
        }

    Image out(image.rows() * factor, image.cols() * factor);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < out.rows(); ++r) {
        const Taps& t = row_taps[r];
        for (int c = 0; c < out.cols(); ++c) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k)
                acc += t.weight[k] * horizontal(t.index[k], c);
            out(r, c) = acc;
        }
    }
    return out;
}

double scan_rate(double pulse_rate_hz, long nx, long ny)
{
    if (pulse_rate_hz <= 0.0 || nx <= 0 || ny <= 0)
        throw std::invalid_argument("scan_rate: inputs must be positive");
    return pulse_rate_hz / (static_cast<double>(nx) * static_cast<double>(ny));
}

double critical_prr(double sound_speed, double depth)
{
    if (sound_speed <= 0.0 || depth <= 0.0)
        throw std::invalid_argument("critical_prr: inputs must be positive");
    return sound_speed / depth;
}

double speedup_factor(int down_x, int down_y)
{
    if (down_x < 1 || down_y < 1)
        throw std::invalid_argument("speedup_factor: factors must be >= 1");
    return static_cast<double>(down_x) * static_cast<double>(down_y);
}

MeanSd mean_sd(std::span<const double> values)
{
    MeanSd out;
    out.count = values.size();
    if (values.empty())
        return out;
    double sum = 0.0;
    for (double v : values)
        sum += v;
    out.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values)
            ss += (v - out.mean) * (v - out.mean);
        out.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return out;
}

} // namespace pamsr::metrics
