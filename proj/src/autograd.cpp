#include "pamsr/autograd.hpp"
#include "pamsr/kernels.hpp"
#include "pamsr/metrics.hpp"

#include <stdexcept>

namespace pamsr::nn {

using kernels::ConvShape;

template <class T>
typename Graph<T>::Var Graph<T>::make(Tensor<T> value, bool needs_grad)
{
    auto node = std::make_unique<Node>();
    node->value = std::move(value);
    node->needs_grad = needs_grad && record_;
    nodes_.push_back(std::move(node));
    return nodes_.back().get();
}

template <class T>
Tensor<T>& Graph<T>::grad_of(Node& n)
{
    if (n.grad.data.empty())
        n.grad = Tensor<T>(n.value.n, n.value.c, n.value.h, n.value.w);
    return n.grad;
}

template <class T>
typename Graph<T>::Var Graph<T>::input(Tensor<T> value)
{
    return make(std::move(value), false);
}

template <class T>
typename Graph<T>::Var Graph<T>::param(Parameter<T>& p)
{
    Var v = make(p.value, true);
    v->param = &p;
    return v;
}

template <class T>
typename Graph<T>::Var Graph<T>::conv2d(Var x, Var weight, Var bias, int stride, int pad, const std::string& layer)
{
    const Tensor<T>& xv = x->value;
    const Tensor<T>& wv = weight->value;
    if (wv.c != xv.c || wv.h != wv.w)
        throw std::invalid_argument(layer + ": input " + xv.shape_string() + " does not match weight " +
                                    wv.shape_string());
    ConvShape s{xv.n, xv.c, xv.h, xv.w, wv.n, wv.h, stride, pad};
    if (s.out_h() < 1 || s.out_w() < 1)
        throw std::invalid_argument(layer + ": input " + xv.shape_string() + " too small for kernel");
    Tensor<T> y(xv.n, wv.n, s.out_h(), s.out_w());
    kernels::conv2d_forward(s, xv.ptr(), wv.ptr(), bias ? bias->value.ptr() : nullptr, y.ptr());

    Var out = make(std::move(y), x->needs_grad || weight->needs_grad || (bias && bias->needs_grad));
    if (out->needs_grad) {
        out->backward = [x, weight, bias, s](Node& self) {
            const T* dy = self.grad.ptr();
            if (weight->needs_grad || (bias && bias->needs_grad)) {
                kernels::conv2d_backward_weight(s, x->value.ptr(), dy, grad_of(*weight).ptr(),
                                                bias && bias->needs_grad ? grad_of(*bias).ptr() : nullptr);
            }
            if (x->needs_grad) {
                if (x->grad.data.empty()) {
                    grad_of(*x);
                    kernels::conv2d_backward_data(s, weight->value.ptr(), dy, x->grad.ptr());
                } else {
                    std::vector<T> tmp(x->value.size());
                    kernels::conv2d_backward_data(s, weight->value.ptr(), dy, tmp.data());
                    T* g = x->grad.ptr();
                    for (std::size_t i = 0; i < tmp.size(); ++i)
                        g[i] += tmp[i];
                }
            }
        };
    }
    return out;
}

template <class T>
typename Graph<T>::Var Graph<T>::conv_transpose2d(Var x, Var weight, Var bias, int stride, int pad,
                                                  const std::string& layer)
{
    const Tensor<T>& xv = x->value;
    const Tensor<T>& wv = weight->value; // [in, out, k, k]
    if (wv.n != xv.c || wv.h != wv.w)
        throw std::invalid_argument(layer + ": input " + xv.shape_string() + " does not match weight " +
                                    wv.shape_string());
    const int k = wv.h;
    const int oh = (xv.h - 1) * stride - 2 * pad + k;
    const int ow = (xv.w - 1) * stride - 2 * pad + k;
    // The adjoint conv maps the (out-channel, oh, ow) image to x's shape.
    ConvShape s{xv.n, wv.c, oh, ow, xv.c, k, stride, pad};
    if (oh < 1 || ow < 1 || s.out_h() != xv.h || s.out_w() != xv.w)
        throw std::invalid_argument(layer + ": inconsistent transposed-conv geometry for input " + xv.shape_string());

    Tensor<T> y(xv.n, wv.c, oh, ow);
    kernels::conv2d_backward_data(s, wv.ptr(), xv.ptr(), y.ptr());
    if (bias) {
        for (int n = 0; n < y.n; ++n)
            for (int c = 0; c < y.c; ++c) {
                T* p = y.ptr() + (static_cast<std::size_t>(n) * y.c + c) * y.plane();
                const T b = bias->value.data[c];
                for (std::size_t i = 0; i < y.plane(); ++i)
                    p[i] += b;
            }
    }

    Var out = make(std::move(y), x->needs_grad || weight->needs_grad || (bias && bias->needs_grad));
    if (out->needs_grad) {
        out->backward = [x, weight, bias, s](Node& self) {
            const Tensor<T>& dy = self.grad;
            if (weight->needs_grad)
                kernels::conv2d_backward_weight(s, dy.ptr(), x->value.ptr(), grad_of(*weight).ptr(),
                                                static_cast<T*>(nullptr));
            if (bias && bias->needs_grad) {
                T* db = grad_of(*bias).ptr();
                for (int n = 0; n < dy.n; ++n)
                    for (int c = 0; c < dy.c; ++c) {
                        const T* p = dy.ptr() + (static_cast<std::size_t>(n) * dy.c + c) * dy.plane();
                        T acc = 0;
                        for (std::size_t i = 0; i < dy.plane(); ++i)
                            acc += p[i];
                        db[c] += acc;
                    }
            }
            if (x->needs_grad) {
                std::vector<T> tmp(x->value.size());
                kernels::conv2d_forward(s, dy.ptr(), weight->value.ptr(), static_cast<const T*>(nullptr), tmp.data());
                T* g = grad_of(*x).ptr();
                for (std::size_t i = 0; i < tmp.size(); ++i)
                    g[i] += tmp[i];
            }
        };
    }
    return out;
}

template <class T>
typename Graph<T>::Var Graph<T>::leaky_relu(Var x, T slope)
{
    Tensor<T> y = x->value;
    T* p = y.ptr();
    const std::size_t n = y.size();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i)
        p[i] = p[i] > T(0) ? p[i] : slope * p[i];
    Var out = make(std::move(y), x->needs_grad);
    if (out->needs_grad) {
        out->backward = [x, slope](Node& self) {
            const T* xv = x->value.ptr();
            const T* dy = self.grad.ptr();
            T* dx = grad_of(*x).ptr();
            const std::size_t n = self.grad.size();
#pragma omp parallel for schedule(static)
            for (std::size_t i = 0; i < n; ++i)
                dx[i] += xv[i] > T(0) ? dy[i] : slope * dy[i];
        };
    }
    return out;
}

template <class T>
typename Graph<T>::Var Graph<T>::relu(Var x)
{
    return leaky_relu(x, T(0));
}

template <class T>
typename Graph<T>::Var Graph<T>::axpy(Var a, Var b, T alpha)
{
    if (!a->value.same_shape(b->value))
        throw std::invalid_argument("add: shape mismatch " + a->value.shape_string() + " vs " +
                                    b->value.shape_string());
    Tensor<T> y = a->value;
    T* p = y.ptr();
    const T* q = b->value.ptr();
    const std::size_t n = y.size();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i)
        p[i] += alpha * q[i];
    Var out = make(std::move(y), a->needs_grad || b->needs_grad);
    if (out->needs_grad) {
        out->backward = [a, b, alpha](Node& self) {
            const T* dy = self.grad.ptr();
            const std::size_t n = self.grad.size();
            if (a->needs_grad) {
                T* da = grad_of(*a).ptr();
#pragma omp parallel for schedule(static)
                for (std::size_t i = 0; i < n; ++i)
                    da[i] += dy[i];
            }
            if (b->needs_grad) {
                T* db = grad_of(*b).ptr();
#pragma omp parallel for schedule(static)
                for (std::size_t i = 0; i < n; ++i)
                    db[i] += alpha * dy[i];
            }
        };
    }
    return out;
}

template <class T>
typename Graph<T>::Var Graph<T>::add(Var a, Var b)
{
    return axpy(a, b, T(1));
}

template <class T>
typename Graph<T>::Var Graph<T>::mul(Var a, Var b)
{
    if (!a->value.same_shape(b->value))
        throw std::invalid_argument("mul: shape mismatch " + a->value.shape_string() + " vs " +
                                    b->value.shape_string());
    Tensor<T> y = a->value;
    T* p = y.ptr();
    const T* q = b->value.ptr();
    const std::size_t n = y.size();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i)
        p[i] *= q[i];
    Var out = make(std::move(y), a->needs_grad || b->needs_grad);
    if (out->needs_grad) {
        out->backward = [a, b](Node& self) {
            const T* dy = self.grad.ptr();
            const std::size_t n = self.grad.size();
            if (a->needs_grad) {
                T* da = grad_of(*a).ptr();
                const T* bv = b->value.ptr();
#pragma omp parallel for schedule(static)
                for (std::size_t i = 0; i < n; ++i)
                    da[i] += dy[i] * bv[i];
            }
            if (b->needs_grad) {
                T* db = grad_of(*b).ptr();
                const T* av = a->value.ptr();
#pragma omp parallel for schedule(static)
                for (std::size_t i = 0; i < n; ++i)
                    db[i] += dy[i] * av[i];
            }
        };
    }
    return out;
}

template <class T>
typename Graph<T>::Var Graph<T>::concat(const std::vector<Var>& parts)
{
    if (parts.empty())
        throw std::invalid_argument("concat: no inputs");
    const Tensor<T>& first = parts.front()->value;
    int channels = 0;
    bool needs = false;
    for (Var p : parts) {
        if (p->value.n != first.n || p->value.h != first.h || p->value.w != first.w)
            throw std::invalid_argument("concat: spatial/batch mismatch " + p->value.shape_string() + " vs " +
                                        first.shape_string());
        channels += p->value.c;
        needs = needs || p->needs_grad;
    }
    Tensor<T> y(first.n, channels, first.h, first.w);
    for (int n = 0; n < first.n; ++n) {
        T* dst = y.ptr() + n * y.sample();
        for (Var p : parts) {
            const T* src = p->value.ptr() + n * p->value.sample();
            std::copy(src, src + p->value.sample(), dst);
            dst += p->value.sample();
        }
    }
    Var out = make(std::move(y), needs);
    if (out->needs_grad) {
        out->backward = [parts](Node& self) {
            for (int n = 0; n < self.grad.n; ++n) {
                const T* src = self.grad.ptr() + n * self.grad.sample();
                for (Var p : parts) {
                    const std::size_t len = p->value.sample();
                    if (p->needs_grad) {
                        T* dst = grad_of(*p).ptr() + n * len;
                        for (std::size_t i = 0; i < len; ++i)
                            dst[i] += src[i];
                    }
                    src += len;
                }
            }
        };
    }
    return out;
}

template <class T>
typename Graph<T>::Var Graph<T>::pixel_shuffle(Var x, int r)
{
    const Tensor<T>& xv = x->value;
    if (r < 1 || xv.c % (r * r) != 0)
        throw std::invalid_argument("pixel_shuffle: " + std::to_string(xv.c) + " channels not divisible by " +
                                    std::to_string(r * r));
    Tensor<T> y(xv.n, xv.c / (r * r), xv.h * r, xv.w * r);
    kernels::pixel_shuffle(xv.ptr(), xv.n, xv.c, xv.h, xv.w, r, y.ptr());
    Var out = make(std::move(y), x->needs_grad);
    if (out->needs_grad) {
        out->backward = [x, r](Node& self) {
            const Tensor<T>& xv = x->value;
            std::vector<T> tmp(xv.size());
            kernels::pixel_unshuffle(self.grad.ptr(), xv.n, xv.c, xv.h, xv.w, r, tmp.data());
            T* g = grad_of(*x).ptr();
            for (std::size_t i = 0; i < tmp.size(); ++i)
                g[i] += tmp[i];
        };
    }
    return out;
}

template <class T>
typename Graph<T>::Var Graph<T>::composite_loss(Var pred, const Tensor<T>& target, double tau)
{
    const Tensor<T>& p = pred->value;
    if (!p.same_shape(target))
        throw std::invalid_argument("composite_loss: shape mismatch " + p.shape_string() + " vs " +
                                    target.shape_string());
    if (p.c != 1)
        throw std::invalid_argument("composite_loss: expects single-channel images");

    const std::size_t plane = p.plane();
    const double inv_total = 1.0 / static_cast<double>(p.size());
    double sq = 0.0;
    double ssim_sum = 0.0;
    std::vector<double> grad(p.size());
    std::vector<double> a(plane), b(plane);
    for (int n = 0; n < p.n; ++n) {
        const T* pa = p.ptr() + n * plane;
        const T* pb = target.ptr() + n * plane;
        for (std::size_t i = 0; i < plane; ++i) {
            a[i] = static_cast<double>(pa[i]);
            b[i] = static_cast<double>(pb[i]);
            const double d = a[i] - b[i];
            sq += d * d;
            grad[n * plane + i] = 2.0 * d * inv_total;
        }
        if (tau != 0.0) {
            const auto s = metrics::ssim_with_gradient(a, b, p.h, p.w);
            ssim_sum += s.value;
            const double scale = -tau / p.n;
            for (std::size_t i = 0; i < plane; ++i)
                grad[n * plane + i] += scale * s.grad[i];
        }
    }
    double loss = sq * inv_total;
    if (tau != 0.0)
        loss += tau * (1.0 - ssim_sum / p.n);

    Var out = make(Tensor<T>(1, 1, 1, 1, static_cast<T>(loss)), pred->needs_grad);
    if (out->needs_grad) {
        out->backward = [pred, grad = std::move(grad)](Node& self) {
            const double g0 = static_cast<double>(self.grad.data[0]);
            T* dst = grad_of(*pred).ptr();
            for (std::size_t i = 0; i < grad.size(); ++i)
                dst[i] += static_cast<T>(g0 * grad[i]);
        };
    }
    return out;
}

template <class T>
void Graph<T>::backward(Var out)
{
    if (!record_)
        throw std::logic_error("Graph::backward on a non-recording graph");
    if (!out->needs_grad)
        return;
    grad_of(*out).fill(T(1));
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        Node& n = **it;
        if (n.backward && !n.grad.data.empty())
            n.backward(n);
    }
    for (auto& node : nodes_) {
        if (!node->param || node->grad.data.empty())
            continue;
        Parameter<T>& p = *node->param;
        if (p.grad.data.empty())
            p.grad = Tensor<T>(p.value.n, p.value.c, p.value.h, p.value.w);
        for (std::size_t i = 0; i < p.grad.size(); ++i)
            p.grad.data[i] += node->grad.data[i];
    }
}

template class Graph<float>;
template class Graph<double>;

} // namespace pamsr::nn
