#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pamsr::nn {

/// Dense NCHW tensor.
template <class T>
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, T fill = T(0))
        : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill)
    {
    }

    std::size_t size() const { return data.size(); }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    std::size_t sample() const { return static_cast<std::size_t>(c) * h * w; }
    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    T& at(int in, int ic, int iy, int ix) { return data[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix]; }
    T at(int in, int ic, int iy, int ix) const
    {
        return data[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix];
    }

    bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
    std::string shape_string() const
    {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) +
               ")";
    }
    void fill(T v) { std::fill(data.begin(), data.end(), v); }
};

template <class T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
};

} // namespace pamsr::nn
