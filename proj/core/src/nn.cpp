#include "wastebench/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace wastebench::nn {

NodeRef Module::forward(const NodeRef&, ForwardCtx&) {
    throw std::logic_error("Module::forward: module is not directly callable");
}

void Module::collect_params(const std::string& prefix, std::vector<ParamInfo>& out) const {
    for (const auto& p : params_)
        out.push_back({prefix.empty() ? p.name : prefix + "." + p.name, p.node});
    for (const auto& [name, child] : children_)
        child->collect_params(prefix.empty() ? name : prefix + "." + name, out);
}

void Module::collect_buffers(const std::string& prefix, std::vector<BufferInfo>& out) const {
    for (const auto& b : buffers_)
        out.push_back({prefix.empty() ? b.name : prefix + "." + b.name, b.tensor});
    for (const auto& [name, child] : children_)
        child->collect_buffers(prefix.empty() ? name : prefix + "." + name, out);
}

void Module::collect_param_layers(const std::string& prefix,
                                  std::vector<ParamLayer>& out) const {
    if (!params_.empty()) {
        ParamLayer layer;
        layer.path = prefix;
        for (const auto& p : params_)
            layer.params.push_back({prefix.empty() ? p.name : prefix + "." + p.name, p.node});
        out.push_back(std::move(layer));
    }
    for (const auto& [name, child] : children_)
        child->collect_param_layers(prefix.empty() ? name : prefix + "." + name, out);
}

NodeRef Module::add_param(std::string name, Tensor init) {
    NodeRef node = make_leaf(std::move(init), true);
    params_.push_back({std::move(name), node});
    return node;
}

void Module::add_buffer(std::string name, Tensor tensor) {
    buffers_.push_back({std::move(name), std::move(tensor)});
}

// ---- initializers ----

Tensor kaiming_normal(Shape shape, std::int64_t fan_in, CounterRng& rng) {
    Tensor t(std::move(shape));
    const Scalar std = std::sqrt(2.0 / static_cast<Scalar>(fan_in));
    Scalar* d = t.data();
    for (std::int64_t i = 0; i < t.size(); ++i) d[i] = std * rng.normal();
    return t;
}

Tensor uniform_fan_in(Shape shape, std::int64_t fan_in, CounterRng& rng) {
    Tensor t(std::move(shape));
    const Scalar bound = 1.0 / std::sqrt(static_cast<Scalar>(fan_in));
    Scalar* d = t.data();
    for (std::int64_t i = 0; i < t.size(); ++i) d[i] = rng.uniform(-bound, bound);
    return t;
}

Tensor trunc_normal(Shape shape, double stddev, CounterRng& rng) {
    Tensor t(std::move(shape));
    Scalar* d = t.data();
    for (std::int64_t i = 0; i < t.size(); ++i) {
        Scalar v;
        do {
            v = rng.normal();
        } while (std::abs(v) > 2.0);
        d[i] = v * stddev;
    }
    return t;
}

// ---- leaf layers ----

Conv2d::Conv2d(int in_ch, int out_ch, int kernel, int stride, int padding, int groups, bool bias,
               CounterRng& rng)
    : stride_(stride), padding_(padding), groups_(groups) {
    const std::int64_t fan_in = static_cast<std::int64_t>(in_ch / groups) * kernel * kernel;
    weight_ = add_param("weight",
                        kaiming_normal({out_ch, in_ch / groups, kernel, kernel}, fan_in, rng));
    if (bias) bias_ = add_param("bias", Tensor::zeros({out_ch}));
}

NodeRef Conv2d::forward(const NodeRef& x, ForwardCtx&) {
    return conv2d(x, weight_, bias_, stride_, padding_, groups_);
}

Linear::Linear(int in_dim, int out_dim, CounterRng& rng, bool bias) {
    weight_ = add_param("weight", uniform_fan_in({out_dim, in_dim}, in_dim, rng));
    if (bias) bias_ = add_param("bias", uniform_fan_in({out_dim}, in_dim, rng));
}

NodeRef Linear::forward(const NodeRef& x, ForwardCtx&) { return linear(x, weight_, bias_); }

BatchNorm2d::BatchNorm2d(int channels, double momentum, double eps)
    : momentum_(momentum), eps_(eps) {
    gamma_ = add_param("weight", Tensor::full({channels}, 1.0));
    beta_ = add_param("bias", Tensor::zeros({channels}));
    state_.running_mean = Tensor::zeros({channels});
    state_.running_var = Tensor::full({channels}, 1.0);
    add_buffer("running_mean", state_.running_mean);
    add_buffer("running_var", state_.running_var);
}

NodeRef BatchNorm2d::forward(const NodeRef& x, ForwardCtx& ctx) {
    return batchnorm2d(x, gamma_, beta_, state_, ctx.training, momentum_, eps_);
}

LayerNorm::LayerNorm(int dim, double eps) : eps_(eps) {
    gamma_ = add_param("weight", Tensor::full({dim}, 1.0));
    beta_ = add_param("bias", Tensor::zeros({dim}));
}

NodeRef LayerNorm::forward(const NodeRef& x, ForwardCtx&) {
    return layernorm(x, gamma_, beta_, eps_);
}

ParamTensor::ParamTensor(std::string name, Tensor init) {
    node_ = add_param(std::move(name), std::move(init));
}

NodeRef apply_act(const NodeRef& x, Act act) {
    switch (act) {
        case Act::None: return x;
        case Act::Relu: return relu(x);
        case Act::Relu6: return relu6(x);
        case Act::Gelu: return gelu(x);
        case Act::Silu: return silu(x);
    }
    return x;
}

ConvBnAct::ConvBnAct(int in_ch, int out_ch, int kernel, int stride, int padding, int groups,
                     Act act, CounterRng& rng)
    : act_(act) {
    conv_ = add_child("conv",
                      std::make_shared<Conv2d>(in_ch, out_ch, kernel, stride, padding, groups,
                                               /*bias=*/false, rng));
    bn_ = add_child("bn", std::make_shared<BatchNorm2d>(out_ch));
}

NodeRef ConvBnAct::forward(const NodeRef& x, ForwardCtx& ctx) {
    return apply_act(bn_->forward(conv_->forward(x, ctx), ctx), act_);
}

NodeRef Dropout::forward(const NodeRef& x, ForwardCtx& ctx) {
    if (!ctx.training || p_ <= 0.0) return x;
    if (!ctx.rng) throw std::logic_error("Dropout: training forward requires ctx.rng");
    return dropout(x, p_, *ctx.rng, true);
}

NodeRef Sequential::forward(const NodeRef& x, ForwardCtx& ctx) {
    NodeRef y = x;
    for (auto& m : steps_) y = m->forward(y, ctx);
    return y;
}

MultiheadAttention::MultiheadAttention(int dim, int heads, CounterRng& rng)
    : dim_(dim), heads_(heads) {
    qkv_ = add_child("qkv", std::make_shared<Linear>(dim, 3 * dim, rng));
    proj_ = add_child("proj", std::make_shared<Linear>(dim, dim, rng));
}

NodeRef MultiheadAttention::forward(const NodeRef& x, ForwardCtx& ctx) {
    NodeRef qkv = qkv_->forward(x, ctx);
    NodeRef q = split_heads(slice_lastdim(qkv, 0, dim_), heads_);
    NodeRef k = split_heads(slice_lastdim(qkv, dim_, dim_), heads_);
    NodeRef v = split_heads(slice_lastdim(qkv, 2 * dim_, dim_), heads_);
    const Scalar head_dim = static_cast<Scalar>(dim_ / heads_);
    NodeRef att = softmax_lastdim(scale(bmm_nt(q, k), 1.0 / std::sqrt(head_dim)));
    NodeRef out = merge_heads(bmm(att, v), heads_);
    return proj_->forward(out, ctx);
}

TransformerBlock::TransformerBlock(int dim, int heads, int mlp_hidden, Act mlp_act,
                                   CounterRng& rng)
    : act_(mlp_act) {
    norm1_ = add_child("norm1", std::make_shared<LayerNorm>(dim));
    attn_ = add_child("attn", std::make_shared<MultiheadAttention>(dim, heads, rng));
    norm2_ = add_child("norm2", std::make_shared<LayerNorm>(dim));
    fc1_ = add_child("mlp_fc1", std::make_shared<Linear>(dim, mlp_hidden, rng));
    fc2_ = add_child("mlp_fc2", std::make_shared<Linear>(mlp_hidden, dim, rng));
}

NodeRef TransformerBlock::forward(const NodeRef& x, ForwardCtx& ctx) {
    NodeRef h = add(x, attn_->forward(norm1_->forward(x, ctx), ctx));
    NodeRef m = fc2_->forward(apply_act(fc1_->forward(norm2_->forward(h, ctx), ctx), act_), ctx);
    return add(h, m);
}

}  // namespace wastebench::nn
