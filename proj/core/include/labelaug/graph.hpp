#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "labelaug/tensor.hpp"

namespace labelaug {

/// Handle to a node recorded on a Graph.
struct Var {
    std::size_t id = std::numeric_limits<std::size_t>::max();
};

/// Per-sample, per-label loss weighting for weighted_bce_with_logits.
///
/// `pos_weight` (N, K) scales the positive-class term; `channel_mask` (N, K)
/// in {0, 1} removes a whole channel from the loss (absent landmark).
template <typename T>
struct BceWeights {
    Tensor<T> pos_weight;
    Tensor<T> channel_mask;

    /// Same weights for every sample, every channel enabled.
    static BceWeights broadcast(std::size_t n, std::span<const T> per_label);
};

/// Reverse-mode tape covering the layers a U-Net with pixel-wise loss needs.
///
/// Nodes are appended in evaluation order, so backward() is a reverse sweep.
/// Gradients of parameter leaves are accumulated into Parameter::grad.
/// A graph is single-use: build, backward, discard.
template <typename T>
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    /// Constant input. No gradient is tracked.
    Var constant(Tensor<T> value);
    /// Leaf whose gradient is kept on the graph (read it with grad()).
    Var leaf(Tensor<T> value);
    /// Leaf bound to a Parameter; backward() adds into param.grad.
    Var parameter(Parameter<T>& param);

    /// 3x3 same convolution, zero padding 1. weight (Cout, Cin, 3, 3), bias (Cout).
    Var conv2d(Var input, Var weight, Var bias);
    Var relu(Var input);
    /// 2x2 stride-2 max pooling. Ties route gradient to the first cell in row-major order.
    Var maxpool2(Var input);
    /// Nearest-neighbour 2x upsampling.
    Var upsample2(Var input);
    Var concat_channels(Var a, Var b);

    /// Mean over all N*K*H*W cells of
    ///   -mask * [ pos_weight * y * log(sigmoid(z)) + (1 - y) * log(1 - sigmoid(z)) ].
    /// Throws DataError on non-binary targets, NumericError on non-finite logits.
    Var weighted_bce_with_logits(Var logits, const Tensor<T>& targets, const BceWeights<T>& weights);

    const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
    /// Gradient of a node; zero-shaped if the node does not require grad.
    const Tensor<T>& grad(Var v) const { return nodes_.at(v.id).grad; }

    /// Backward from a scalar node (seed gradient 1).
    void backward(Var root);
    /// Backward with an explicit upstream gradient of the root's shape.
    void backward(Var root, const Tensor<T>& upstream);

    /// Smallest distance of any relu input to 0 or any maxpool window's
    /// runner-up to its max. Finite differences are only valid when a
    /// perturbation is well below this margin.
    T nondifferentiability_margin() const { return margin_; }

    std::size_t node_count() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        bool requires_grad = false;
        Parameter<T>* param = nullptr;
        std::function<void(Graph&, Node&)> backward;
    };

    Var push(Tensor<T> value, bool requires_grad, std::function<void(Graph&, Node&)> bw = {});
    Node& node(Var v) { return nodes_.at(v.id); }
    Tensor<T>& grad_buffer(Var v);

    std::vector<Node> nodes_;
    T margin_ = std::numeric_limits<T>::infinity();
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace labelaug
