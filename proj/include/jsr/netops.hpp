#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "jsr/tensor.hpp"

namespace jsr::ops {

// Minimal reverse-mode autodiff over Tensor. Ops build a graph of Nodes;
// backward() runs the tape in reverse topological order. Forward and backward
// are pure given (inputs, params), so concurrent evaluation on disjoint
// graphs is safe.

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily, same shape as value
    bool requires_grad = false;
    std::vector<Var> parents;
    std::function<void(Node&)> backprop;  // reads this->grad, accumulates into parents

    Tensor& ensure_grad() {
        if (grad.empty()) grad = Tensor(value.dims());
        return grad;
    }
};

Var leaf(Tensor value, bool requires_grad = false);

/// Backpropagates from a scalar root (seeds d(root)/d(root) = 1).
void backward(const Var& root);

// --- primitive ops ---

/// Cross-correlation. weights (Co, Ci/groups, kh, kw); bias (Co) or empty.
/// groups must be 1 (dense) or Ci==Co (depthwise).
Var conv2d(const Var& x, const Var& weights, const Var& bias, int64_t stride, int64_t pad,
           int64_t groups = 1);

/// Channel-wise normalization at every (n,h,w) position; gain/bias are (C).
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-6);

/// Splits channels in half and multiplies the halves elementwise.
Var simple_gate(const Var& x);

/// Simplified channel attention: global average pool, pointwise transform
/// (weights (C,C), bias (C)), then per-channel rescaling of x.
Var sca(const Var& x, const Var& weights, const Var& bias);

/// out[c, r*h+i, r*w+j] = x[c*r*r + i*r + j, h, w]; pure permutation.
Var pixel_shuffle(const Var& x, int64_t r);

Var relu(const Var& x);
Var add(const Var& a, const Var& b);
Var concat_channels(const Var& a, const Var& b);

/// 2x2 max pooling, stride 2 (encoder-downsampling ablation).
Var max_pool2x2(const Var& x);

/// Mean over all elements of (a-b)^2; returns a scalar (dims {1}).
Var mse(const Var& a, const Var& b);

// --- shape-checked forward helpers (no graph) ---

Tensor pixel_shuffle_forward(const Tensor& x, int64_t r);
Tensor pixel_unshuffle(const Tensor& x, int64_t r);

}  // namespace jsr::ops
