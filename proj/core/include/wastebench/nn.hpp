#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "wastebench/autograd.hpp"
#include "wastebench/rng.hpp"
#include "wastebench/tensor.hpp"

namespace wastebench::nn {

struct ForwardCtx {
    bool training = false;
    CounterRng* rng = nullptr;  // consumed by dropout when training
};

struct ParamInfo {
    std::string name;
    NodeRef node;
};

// Named persistent state that is not a parameter (batch-norm running stats).
// The Tensor aliases the module's storage, so writes land in the module.
struct BufferInfo {
    std::string name;
    Tensor tensor;
};

// Composite pattern. Parameters live in leaf modules only; the depth-first
// registration order defines the canonical "parameterized layer" sequence
// that layer freezing and `describe` refer to.
class Module {
public:
    virtual ~Module() = default;

    virtual NodeRef forward(const NodeRef& x, ForwardCtx& ctx);

    void collect_params(const std::string& prefix, std::vector<ParamInfo>& out) const;
    void collect_buffers(const std::string& prefix, std::vector<BufferInfo>& out) const;

    // Leaf modules that own at least one parameter, canonical order.
    struct ParamLayer {
        std::string path;
        std::vector<ParamInfo> params;
    };
    void collect_param_layers(const std::string& prefix, std::vector<ParamLayer>& out) const;

protected:
    template <typename M>
    std::shared_ptr<M> add_child(std::string name, std::shared_ptr<M> child) {
        children_.emplace_back(std::move(name), child);
        return child;
    }
    NodeRef add_param(std::string name, Tensor init);
    void add_buffer(std::string name, Tensor tensor);

private:
    std::vector<std::pair<std::string, std::shared_ptr<Module>>> children_;
    std::vector<ParamInfo> params_;
    std::vector<BufferInfo> buffers_;
};

// ---- initializers (deterministic via CounterRng) ----
Tensor kaiming_normal(Shape shape, std::int64_t fan_in, CounterRng& rng);
Tensor uniform_fan_in(Shape shape, std::int64_t fan_in, CounterRng& rng);
Tensor trunc_normal(Shape shape, double stddev, CounterRng& rng);

// ---- leaf layers ----

class Conv2d : public Module {
public:
    Conv2d(int in_ch, int out_ch, int kernel, int stride, int padding, int groups, bool bias,
           CounterRng& rng);
    NodeRef forward(const NodeRef& x, ForwardCtx& ctx) override;

    int stride() const { return stride_; }

private:
    NodeRef weight_;
    NodeRef bias_;
    int stride_, padding_, groups_;
};

class Linear : public Module {
public:
    Linear(int in_dim, int out_dim, CounterRng& rng, bool bias = true);
    NodeRef forward(const NodeRef& x, ForwardCtx& ctx) override;

    NodeRef weight() const { return weight_; }
    NodeRef bias() const { return bias_; }

private:
    NodeRef weight_;
    NodeRef bias_;
};

class BatchNorm2d : public Module {
public:
    explicit BatchNorm2d(int channels, double momentum = 0.1, double eps = 1e-5);
    NodeRef forward(const NodeRef& x, ForwardCtx& ctx) override;

private:
    NodeRef gamma_;
    NodeRef beta_;
    BatchNormState state_;
    double momentum_, eps_;
};

class LayerNorm : public Module {
public:
    explicit LayerNorm(int dim, double eps = 1e-6);
    NodeRef forward(const NodeRef& x, ForwardCtx& ctx) override;

private:
    NodeRef gamma_;
    NodeRef beta_;
    double eps_;
};

// Single learnable tensor (ViT class token / positional embedding).
class ParamTensor : public Module {
public:
    ParamTensor(std::string name, Tensor init);
    NodeRef node() const { return node_; }

private:
    NodeRef node_;
};

enum class Act { None, Relu, Relu6, Gelu, Silu };
NodeRef apply_act(const NodeRef& x, Act act);

// Conv -> BatchNorm -> activation, the workhorse block of the CNN backbones.
class ConvBnAct : public Module {
public:
    ConvBnAct(int in_ch, int out_ch, int kernel, int stride, int padding, int groups, Act act,
              CounterRng& rng);
    NodeRef forward(const NodeRef& x, ForwardCtx& ctx) override;

private:
    std::shared_ptr<Conv2d> conv_;
    std::shared_ptr<BatchNorm2d> bn_;
    Act act_;
};

class Dropout : public Module {
public:
    explicit Dropout(double p) : p_(p) {}
    NodeRef forward(const NodeRef& x, ForwardCtx& ctx) override;

private:
    double p_;
};

class Sequential : public Module {
public:
    Sequential() = default;
    template <typename M>
    std::shared_ptr<M> push(std::shared_ptr<M> m) {
        auto named = add_child(std::to_string(size_++), m);
        steps_.push_back(m);
        return named;
    }
    NodeRef forward(const NodeRef& x, ForwardCtx& ctx) override;

private:
    std::vector<std::shared_ptr<Module>> steps_;
    int size_ = 0;
};

// Pre-norm multi-head self-attention (token input [B,T,D]).
class MultiheadAttention : public Module {
public:
    MultiheadAttention(int dim, int heads, CounterRng& rng);
    NodeRef forward(const NodeRef& x, ForwardCtx& ctx) override;

private:
    std::shared_ptr<Linear> qkv_;
    std::shared_ptr<Linear> proj_;
    int dim_, heads_;
};

// Pre-norm transformer encoder block: x + MHSA(LN(x)); x + MLP(LN(x)).
class TransformerBlock : public Module {
public:
    TransformerBlock(int dim, int heads, int mlp_hidden, Act mlp_act, CounterRng& rng);
    NodeRef forward(const NodeRef& x, ForwardCtx& ctx) override;

private:
    std::shared_ptr<LayerNorm> norm1_;
    std::shared_ptr<MultiheadAttention> attn_;
    std::shared_ptr<LayerNorm> norm2_;
    std::shared_ptr<Linear> fc1_;
    std::shared_ptr<Linear> fc2_;
    Act act_;
};

}  // namespace wastebench::nn
