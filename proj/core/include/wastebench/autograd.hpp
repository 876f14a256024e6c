#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "wastebench/rng.hpp"
#include "wastebench/tensor.hpp"

namespace wastebench::nn {

// Define-by-run reverse-mode autodiff. Each op produces a Node whose
// backward_op reads the node's accumulated gradient and adds into the
// parents' gradients. Graphs are rebuilt every forward pass.

class Node;
using NodeRef = std::shared_ptr<Node>;

class Node {
public:
    Tensor value;
    Tensor grad;  // allocated on first accumulate
    bool requires_grad = false;
    std::vector<NodeRef> parents;
    std::function<void(Node&)> backward_op;

    void ensure_grad();
    // grad += g, skipped entirely when requires_grad is false.
    void accumulate(const Tensor& g);
    void accumulate_raw(const Scalar* g, std::int64_t n);
};

NodeRef make_leaf(Tensor value, bool requires_grad);
NodeRef make_constant(Tensor value);
// Degrades to a constant when grad is disabled or no parent requires it.
NodeRef make_op(Tensor value, std::vector<NodeRef> parents,
                std::function<void(Node&)> backward_op);

// Seeds root->grad with ones and runs the tape in reverse topological order.
// The root is usually the scalar loss.
void backward(const NodeRef& root);

bool grad_enabled();
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

// ---- elementwise / arithmetic ----
NodeRef add(const NodeRef& a, const NodeRef& b);
// x [B,...] + p [1,...] with p broadcast over dim 0
NodeRef add_broadcast0(const NodeRef& x, const NodeRef& p);
NodeRef scale(const NodeRef& x, Scalar s);
NodeRef relu(const NodeRef& x);
NodeRef relu6(const NodeRef& x);
NodeRef gelu(const NodeRef& x);
NodeRef silu(const NodeRef& x);
NodeRef dropout(const NodeRef& x, double p, CounterRng& rng, bool training);

// ---- reductions ----
NodeRef sum_all(const NodeRef& x);
NodeRef mean_all(const NodeRef& x);

// ---- shape plumbing (pure index maps) ----
NodeRef reshape(const NodeRef& x, Shape shape);
NodeRef concat_axis1(const std::vector<NodeRef>& xs);
NodeRef slice_lastdim(const NodeRef& x, std::int64_t start, std::int64_t len);
// [N,C,H,W] -> [N, H*W, C]
NodeRef chw_to_tokens(const NodeRef& x);
// [B,T,D] + [1,1,D] -> [B,T+1,D]
NodeRef prepend_token(const NodeRef& x, const NodeRef& token);
// [B,T,D] -> [B,D] at token index
NodeRef select_token(const NodeRef& x, std::int64_t index);
// [B,T,D] -> [B*heads, T, D/heads] and back
NodeRef split_heads(const NodeRef& x, int heads);
NodeRef merge_heads(const NodeRef& x, int heads);
// [N,C,H,W] -> [N*p*p, ceil(H/p)*ceil(W/p), C], zero-padding odd edges
NodeRef unfold_patches(const NodeRef& x, int patch);
// inverse of unfold_patches for the given original spatial size
NodeRef fold_patches(const NodeRef& x, std::int64_t n, std::int64_t c, std::int64_t h,
                     std::int64_t w, int patch);

// ---- dense algebra ----
// x [..., In] -> [..., Out] with w [Out, In], optional bias [Out]
NodeRef linear(const NodeRef& x, const NodeRef& w, const NodeRef& b);
// a [B,M,K] x b [B,K,N] -> [B,M,N]
NodeRef bmm(const NodeRef& a, const NodeRef& b);
// a [B,M,K] x b [B,N,K]^T -> [B,M,N]
NodeRef bmm_nt(const NodeRef& a, const NodeRef& b);

// ---- convolution / pooling ----
// x [N,C,H,W], w [O, C/groups, kh, kw], optional bias [O]
NodeRef conv2d(const NodeRef& x, const NodeRef& w, const NodeRef& b, int stride, int padding,
               int groups = 1);
NodeRef maxpool2d(const NodeRef& x, int kernel, int stride, int padding = 0);
NodeRef avgpool2d(const NodeRef& x, int kernel, int stride);
// [N,C,H,W] -> [N,C]
NodeRef global_avgpool(const NodeRef& x);

// ---- normalization ----
struct BatchNormState {
    Tensor running_mean;
    Tensor running_var;
    std::int64_t batches_seen = 0;
};
NodeRef batchnorm2d(const NodeRef& x, const NodeRef& gamma, const NodeRef& beta,
                    BatchNormState& state, bool training, double momentum = 0.1,
                    double eps = 1e-5);
// normalizes over the last dimension
NodeRef layernorm(const NodeRef& x, const NodeRef& gamma, const NodeRef& beta,
                  double eps = 1e-6);

// ---- softmax family ----
NodeRef softmax_lastdim(const NodeRef& x);
NodeRef log_softmax_lastdim(const NodeRef& x);

}  // namespace wastebench::nn
