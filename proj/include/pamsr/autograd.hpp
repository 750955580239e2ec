#pragma once

#include "pamsr/tensor.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace pamsr::nn {

/// Reverse-mode tape. Nodes are appended in evaluation order, so running
/// their backward closures in reverse is a valid topological order. A graph
/// lives for one forward/backward pass.
template <class T>
class Graph {
public:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad; // allocated on first use
        bool needs_grad = false;
        Parameter<T>* param = nullptr;
        std::function<void(Node&)> backward;
    };
    using Var = Node*;

    /// With record = false no backward closures are kept (inference).
    explicit Graph(bool record = true) : record_(record) {}

    Var input(Tensor<T> value);
    Var param(Parameter<T>& p);

    Var conv2d(Var x, Var weight, Var bias, int stride, int pad, const std::string& layer);
    /// Weight layout [in, out, k, k]; output size (h - 1) * stride - 2 * pad + k.
    Var conv_transpose2d(Var x, Var weight, Var bias, int stride, int pad, const std::string& layer);
    Var relu(Var x);
    Var leaky_relu(Var x, T slope);
    Var add(Var a, Var b);
    /// a + alpha * b
    Var axpy(Var a, Var b, T alpha);
    Var mul(Var a, Var b);
    Var concat(const std::vector<Var>& parts);
    Var pixel_shuffle(Var x, int r);

    /// Scalar node: mean((pred - target)^2) + tau * (1 - mean_n SSIM(pred_n, target_n)).
    /// Single-channel images; SSIM uses the metrics module implementation.
    Var composite_loss(Var pred, const Tensor<T>& target, double tau);

    /// Seeds d(out)/d(out) = 1 and propagates, then adds leaf gradients into
    /// the bound Parameters' grad tensors.
    void backward(Var out);

    std::size_t size() const { return nodes_.size(); }

private:
    Var make(Tensor<T> value, bool needs_grad);
    static Tensor<T>& grad_of(Node& n);

    bool record_;
    std::vector<std::unique_ptr<Node>> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

} // namespace pamsr::nn
