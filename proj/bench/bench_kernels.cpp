// Parallel kernels against their serial references.

#include "pamsr/kernels.hpp"
#include "pamsr/kernels_reference.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

using namespace pamsr;

namespace {

std::vector<float> random_floats(std::size_t n, unsigned seed)
{
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> d(-1.0f, 1.0f);
    std::vector<float> v(n);
    for (auto& x : v)
        x = d(rng);
    return v;
}

kernels::ConvShape conv_shape(int channels, int size) { return {4, channels, size, size, channels, 3, 1, 1}; }

void BM_conv_parallel(benchmark::State& st)
{
    const auto s = conv_shape(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)));
    auto x = random_floats(s.in_size(), 1), w = random_floats(s.weight_size(), 2), b = random_floats(s.out_channels, 3);
    std::vector<float> y(s.out_size());
    for (auto _ : st) {
        kernels::conv2d_forward(s, x.data(), w.data(), b.data(), y.data());
        benchmark::DoNotOptimize(y.data());
    }
    st.SetItemsProcessed(st.iterations() * static_cast<long>(s.out_size()));
}

void BM_conv_reference(benchmark::State& st)
{
    const auto s = conv_shape(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)));
    auto x = random_floats(s.in_size(), 1), w = random_floats(s.weight_size(), 2), b = random_floats(s.out_channels, 3);
    std::vector<float> y(s.out_size());
    for (auto _ : st) {
        reference::conv2d_forward(s, x.data(), w.data(), b.data(), y.data());
        benchmark::DoNotOptimize(y.data());
    }
    st.SetItemsProcessed(st.iterations() * static_cast<long>(s.out_size()));
}

void BM_conv_backward_parallel(benchmark::State& st)
{
    const auto s = conv_shape(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)));
    auto x = random_floats(s.in_size(), 1), w = random_floats(s.weight_size(), 2), dy = random_floats(s.out_size(), 4);
    std::vector<float> dx(s.in_size()), dw(s.weight_size()), db(s.out_channels);
    for (auto _ : st) {
        kernels::conv2d_backward_data(s, w.data(), dy.data(), dx.data());
        kernels::conv2d_backward_weight(s, x.data(), dy.data(), dw.data(), db.data());
        benchmark::DoNotOptimize(dw.data());
    }
}

void BM_conv_backward_reference(benchmark::State& st)
{
    const auto s = conv_shape(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)));
    auto x = random_floats(s.in_size(), 1), w = random_floats(s.weight_size(), 2), dy = random_floats(s.out_size(), 4);
    std::vector<float> dx(s.in_size()), dw(s.weight_size()), db(s.out_channels);
    for (auto _ : st) {
        reference::conv2d_backward(s, x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data());
        benchmark::DoNotOptimize(dw.data());
    }
}

void blur_args(benchmark::internal::Benchmark* b)
{
    b->Args({256, 31})->Args({256, 71});
}

void BM_blur_parallel(benchmark::State& st)
{
    const int n = static_cast<int>(st.range(0)), k = static_cast<int>(st.range(1));
    std::vector<double> img(static_cast<std::size_t>(n) * n, 0.5), ker(static_cast<std::size_t>(k) * k, 1.0 / (k * k)),
        out(img.size());
    for (auto _ : st) {
        kernels::convolve2d_reflect(img, n, n, ker, k, out);
        benchmark::DoNotOptimize(out.data());
    }
}

void BM_blur_reference(benchmark::State& st)
{
    const int n = static_cast<int>(st.range(0)), k = static_cast<int>(st.range(1));
    std::vector<double> img(static_cast<std::size_t>(n) * n, 0.5), ker(static_cast<std::size_t>(k) * k, 1.0 / (k * k)),
        out(img.size());
    for (auto _ : st) {
        reference::convolve2d_reflect(img, n, n, ker, k, out);
        benchmark::DoNotOptimize(out.data());
    }
}

void BM_shuffle_parallel(benchmark::State& st)
{
    auto x = random_floats(4 * 64 * 64 * 64, 5);
    std::vector<float> y(x.size());
    for (auto _ : st) {
        kernels::pixel_shuffle(x.data(), 4, 64, 64, 64, 2, y.data());
        benchmark::DoNotOptimize(y.data());
    }
}

void BM_shuffle_reference(benchmark::State& st)
{
    auto x = random_floats(4 * 64 * 64 * 64, 5);
    std::vector<float> y(x.size());
    for (auto _ : st) {
        reference::pixel_shuffle(x.data(), 4, 64, 64, 64, 2, y.data());
        benchmark::DoNotOptimize(y.data());
    }
}

} // namespace

BENCHMARK(BM_conv_parallel)->Args({16, 64})->Args({64, 64})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_conv_reference)->Args({16, 64})->Args({64, 64})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_conv_backward_parallel)->Args({16, 64})->Args({64, 64})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_conv_backward_reference)->Args({16, 64})->Args({64, 64})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_blur_parallel)->Apply(blur_args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_blur_reference)->Apply(blur_args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_shuffle_parallel)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_shuffle_reference)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
