#include "pamsr/kernels.hpp"
#include "pamsr/kernels_reference.hpp"

#include <doctest.h>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

using namespace pamsr;
using kernels::ConvShape;

namespace {

template <class T>
std::vector<T> random_vec(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    std::vector<T> v(n);
    for (auto& x : v)
        x = static_cast<T>(d(rng));
    return v;
}

template <class T>
double max_rel(const std::vector<T>& a, const std::vector<T>& b)
{
    double worst = 0.0, scale = 1e-12;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(double(a[i]) - double(b[i])));
        scale = std::max(scale, std::abs(double(b[i])));
    }
    return worst / scale;
}

const ConvShape kShapes[] = {
    {2, 3, 9, 11, 4, 3, 1, 1},
    {1, 5, 16, 16, 7, 3, 2, 1},
    {3, 4, 8, 8, 2, 1, 1, 0},
    {1, 2, 10, 10, 3, 4, 2, 1},
    {2, 1, 7, 5, 6, 5, 1, 2},
};

template <class T>
void check_conv(double tol)
{
    for (const auto& s : kShapes) {
        CAPTURE(s.in_channels);
        CAPTURE(s.kernel);
        CAPTURE(s.stride);
        const auto x = random_vec<T>(s.in_size(), 1);
        const auto w = random_vec<T>(s.weight_size(), 2);
        const auto b = random_vec<T>(s.out_channels, 3);
        const auto dy = random_vec<T>(s.out_size(), 4);

        std::vector<T> y(s.out_size()), y_ref(s.out_size());
        kernels::conv2d_forward(s, x.data(), w.data(), b.data(), y.data());
        reference::conv2d_forward(s, x.data(), w.data(), b.data(), y_ref.data());
        CHECK(max_rel(y, y_ref) < tol);

        std::vector<T> dx(s.in_size(), T(7)), dx_ref(s.in_size());
        std::vector<T> dw(s.weight_size(), T(0)), dw_ref(s.weight_size(), T(0));
        std::vector<T> db(s.out_channels, T(0)), db_ref(s.out_channels, T(0));
        kernels::conv2d_backward_data(s, w.data(), dy.data(), dx.data());
        kernels::conv2d_backward_weight(s, x.data(), dy.data(), dw.data(), db.data());
        reference::conv2d_backward(s, x.data(), w.data(), dy.data(), dx_ref.data(), dw_ref.data(), db_ref.data());
        CHECK(max_rel(dx, dx_ref) < tol);
        CHECK(max_rel(dw, dw_ref) < tol);
        CHECK(max_rel(db, db_ref) < tol);

        // weight gradients accumulate
        kernels::conv2d_backward_weight(s, x.data(), dy.data(), dw.data(), db.data());
        for (auto& v : dw_ref)
            v *= 2;
        CHECK(max_rel(dw, dw_ref) < tol);
    }
}

} // namespace

TEST_CASE("conv2d parallel vs reference")
{
    SUBCASE("double") { check_conv<double>(1e-12); }
    SUBCASE("float") { check_conv<float>(1e-5); }
}

TEST_CASE("conv2d adjoint identity")
{
    // <conv(x), dy> == <x, conv^T(dy)>
    const ConvShape s{2, 3, 12, 10, 5, 3, 2, 1};
    const auto x = random_vec<double>(s.in_size(), 5);
    const auto w = random_vec<double>(s.weight_size(), 6);
    const auto dy = random_vec<double>(s.out_size(), 7);
    std::vector<double> y(s.out_size()), dx(s.in_size());
    kernels::conv2d_forward(s, x.data(), w.data(), static_cast<const double*>(nullptr), y.data());
    kernels::conv2d_backward_data(s, w.data(), dy.data(), dx.data());
    const double lhs = std::inner_product(y.begin(), y.end(), dy.begin(), 0.0);
    const double rhs = std::inner_product(x.begin(), x.end(), dx.begin(), 0.0);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("conv2d is thread-count invariant")
{
    const ConvShape s{2, 16, 32, 32, 16, 3, 1, 1};
    const auto x = random_vec<float>(s.in_size(), 8);
    const auto w = random_vec<float>(s.weight_size(), 9);
    const auto dy = random_vec<float>(s.out_size(), 10);
    auto run = [&](int threads) {
        const int saved = omp_get_max_threads();
        omp_set_num_threads(threads);
        std::vector<float> y(s.out_size()), dx(s.in_size()), dw(s.weight_size(), 0.f);
        kernels::conv2d_forward(s, x.data(), w.data(), static_cast<const float*>(nullptr), y.data());
        kernels::conv2d_backward_data(s, w.data(), dy.data(), dx.data());
        kernels::conv2d_backward_weight(s, x.data(), dy.data(), dw.data(), static_cast<float*>(nullptr));
        omp_set_num_threads(saved);
        y.insert(y.end(), dx.begin(), dx.end());
        y.insert(y.end(), dw.begin(), dw.end());
        return y;
    };
    CHECK(run(1) == run(3));
}

TEST_CASE("pixel shuffle")
{
    SUBCASE("shape law and index oracle")
    {
        std::vector<int> x(4 * 8 * 8);
        std::iota(x.begin(), x.end(), 0);
        std::vector<double> xd(x.begin(), x.end()), y(xd.size());
        kernels::pixel_shuffle(xd.data(), 1, 4, 8, 8, 2, y.data());
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j)
                for (int di = 0; di < 2; ++di)
                    for (int dj = 0; dj < 2; ++dj)
                        CHECK(y[(2 * i + di) * 16 + (2 * j + dj)] == xd[((2 * di + dj) * 8 + i) * 8 + j]);
    }
    SUBCASE("bijective for r in {2, 3}")
    {
        for (int r : {2, 3})
            for (int mult : {1, 2, 5}) {
                const int c = r * r * mult, h = 5, w = 7, n = 2;
                const auto x = random_vec<float>(static_cast<std::size_t>(n) * c * h * w, 11 + r);
                std::vector<float> y(x.size()), back(x.size()), ref(x.size());
                kernels::pixel_shuffle(x.data(), n, c, h, w, r, y.data());
                reference::pixel_shuffle(x.data(), n, c, h, w, r, ref.data());
                CHECK(y == ref);
                kernels::pixel_unshuffle(y.data(), n, c, h, w, r, back.data());
                CHECK(back == x);
                std::vector<float> sx = x, sy = y;
                std::sort(sx.begin(), sx.end());
                std::sort(sy.begin(), sy.end());
                CHECK(sx == sy);
            }
    }
    SUBCASE("indivisible channels fail")
    {
        std::vector<float> x(3 * 4 * 4), y(x.size());
        CHECK_THROWS_AS(kernels::pixel_shuffle(x.data(), 1, 3, 4, 4, 2, y.data()), std::invalid_argument);
    }
}

TEST_CASE("convolve2d_reflect vs reference")
{
    for (int ksize : {1, 3, 7, 15}) {
        const int rows = 23, cols = 31;
        const auto img = random_vec<double>(rows * cols, 20 + ksize);
        const auto k = random_vec<double>(ksize * ksize, 40 + ksize);
        std::vector<double> a(img.size()), b(img.size());
        kernels::convolve2d_reflect(img, rows, cols, k, ksize, a);
        reference::convolve2d_reflect(img, rows, cols, k, ksize, b);
        CHECK(max_rel(a, b) < 1e-13);
    }
}

TEST_CASE("filter_valid adjoint")
{
    const int rows = 20, cols = 17;
    std::vector<double> win{0.1, 0.2, 0.4, 0.2, 0.1};
    const auto x = random_vec<double>(rows * cols, 50);
    const auto g = random_vec<double>((rows - 4) * (cols - 4), 51);
    std::vector<double> fx(g.size()), atg(x.size());
    kernels::filter_valid(x, rows, cols, win, fx);
    kernels::filter_valid_adjoint(g, rows, cols, win, atg);
    CHECK(std::inner_product(fx.begin(), fx.end(), g.begin(), 0.0) ==
          doctest::Approx(std::inner_product(x.begin(), x.end(), atg.begin(), 0.0)).epsilon(1e-12));
    // direct sum at one position
    double direct = 0.0;
    for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b)
            direct += win[a] * win[b] * x[(3 + a) * cols + (6 + b)];
    CHECK(fx[3 * (cols - 4) + 6] == doctest::Approx(direct).epsilon(1e-14));
}
