#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "models_internal.hpp"
#include "wastebench/autograd.hpp"

namespace wastebench::detail {

using namespace wastebench::nn;

namespace {

// torchvision-style channel rounding (divisor 8, never below 90% of target)
int make_divisible(double v, int divisor = 8) {
    int new_v = std::max(divisor, static_cast<int>(v + divisor / 2.0) / divisor * divisor);
    if (new_v < 0.9 * v) new_v += divisor;
    return new_v;
}

// ---------------------------------------------------------------------------
// toy_cnn: two conv stages + pooled 8-wide feature vector. Synthetic,
// deterministic (no batch norm), fast enough for desk-scale training.
// ---------------------------------------------------------------------------
class ToyCnn : public Backbone {
public:
    explicit ToyCnn(CounterRng& rng) {
        conv1_ = add_child("conv1", std::make_shared<Conv2d>(3, 8, 3, 4, 1, 1, true, rng));
        conv2_ = add_child("conv2", std::make_shared<Conv2d>(8, 8, 3, 4, 1, 1, true, rng));
    }
    NodeRef features(const NodeRef& x, ForwardCtx& ctx) override {
        NodeRef h = relu(conv1_->forward(x, ctx));
        h = relu(conv2_->forward(h, ctx));
        return global_avgpool(h);
    }
    int feature_width() const override { return 8; }

private:
    std::shared_ptr<Conv2d> conv1_, conv2_;
};

// ---------------------------------------------------------------------------
// MobileNetV2 (width multipliers 0.5 / 1.0)
// ---------------------------------------------------------------------------
class InvertedResidual : public Module {
public:
    InvertedResidual(int in_ch, int out_ch, int stride, int expand_ratio, Act act,
                     CounterRng& rng)
        : use_residual_(stride == 1 && in_ch == out_ch) {
        const int hidden = static_cast<int>(std::lround(in_ch * static_cast<double>(expand_ratio)));
        if (expand_ratio != 1)
            expand_ = add_child("expand", std::make_shared<ConvBnAct>(in_ch, hidden, 1, 1, 0, 1,
                                                                      act, rng));
        depthwise_ = add_child(
            "depthwise", std::make_shared<ConvBnAct>(hidden, hidden, 3, stride, 1, hidden, act, rng));
        project_ = add_child("project", std::make_shared<ConvBnAct>(hidden, out_ch, 1, 1, 0, 1,
                                                                    Act::None, rng));
    }
    NodeRef forward(const NodeRef& x, ForwardCtx& ctx) override {
        NodeRef h = expand_ ? expand_->forward(x, ctx) : x;
        h = project_->forward(depthwise_->forward(h, ctx), ctx);
        return use_residual_ ? add(x, h) : h;
    }

private:
    std::shared_ptr<ConvBnAct> expand_, depthwise_, project_;
    bool use_residual_;
};

class MobileNetV2 : public Backbone {
public:
    MobileNetV2(double width_mult, CounterRng& rng) {
        struct StageCfg {
            int t, c, n, s;
        };
        static constexpr StageCfg cfg[] = {{1, 16, 1, 1},  {6, 24, 2, 2},  {6, 32, 3, 2},
                                           {6, 64, 4, 2},  {6, 96, 3, 1},  {6, 160, 3, 2},
                                           {6, 320, 1, 1}};
        int in_ch = make_divisible(32 * width_mult);
        width_ = make_divisible(1280 * std::max(1.0, width_mult));
        trunk_ = add_child("features", std::make_shared<Sequential>());
        trunk_->push(std::make_shared<ConvBnAct>(3, in_ch, 3, 2, 1, 1, Act::Relu6, rng));
        for (const auto& stage : cfg) {
            const int out_ch = make_divisible(stage.c * width_mult);
            for (int i = 0; i < stage.n; ++i) {
                trunk_->push(std::make_shared<InvertedResidual>(in_ch, out_ch, i == 0 ? stage.s : 1,
                                                                stage.t, Act::Relu6, rng));
                in_ch = out_ch;
            }
        }
        trunk_->push(std::make_shared<ConvBnAct>(in_ch, width_, 1, 1, 0, 1, Act::Relu6, rng));
    }
    NodeRef features(const NodeRef& x, ForwardCtx& ctx) override {
        return global_avgpool(trunk_->forward(x, ctx));
    }
    int feature_width() const override { return width_; }
    double head_dropout() const override { return 0.2; }

private:
    std::shared_ptr<Sequential> trunk_;
    int width_ = 0;
};

// ---------------------------------------------------------------------------
// DenseNet121
// ---------------------------------------------------------------------------
class DenseLayer : public Module {
public:
    DenseLayer(int in_ch, int growth, CounterRng& rng) {
        bn1_ = add_child("norm1", std::make_shared<BatchNorm2d>(in_ch));
        conv1_ = add_child("conv1", std::make_shared<Conv2d>(in_ch, 4 * growth, 1, 1, 0, 1, false, rng));
        bn2_ = add_child("norm2", std::make_shared<BatchNorm2d>(4 * growth));
        conv2_ = add_child("conv2",
                           std::make_shared<Conv2d>(4 * growth, growth, 3, 1, 1, 1, false, rng));
    }
    NodeRef forward(const NodeRef& x, ForwardCtx& ctx) override {
        NodeRef h = conv1_->forward(relu(bn1_->forward(x, ctx)), ctx);
        h = conv2_->forward(relu(bn2_->forward(h, ctx)), ctx);
        return concat_axis1({x, h});
    }

private:
    std::shared_ptr<BatchNorm2d> bn1_, bn2_;
    std::shared_ptr<Conv2d> conv1_, conv2_;
};

class Transition : public Module {
public:
    Transition(int in_ch, int out_ch, CounterRng& rng) {
        bn_ = add_child("norm", std::make_shared<BatchNorm2d>(in_ch));
        conv_ = add_child("conv", std::make_shared<Conv2d>(in_ch, out_ch, 1, 1, 0, 1, false, rng));
    }
    NodeRef forward(const NodeRef& x, ForwardCtx& ctx) override {
        return avgpool2d(conv_->forward(relu(bn_->forward(x, ctx)), ctx), 2, 2);
    }

private:
    std::shared_ptr<BatchNorm2d> bn_;
    std::shared_ptr<Conv2d> conv_;
};

class DenseNet121 : public Backbone {
public:
    explicit DenseNet121(CounterRng& rng) {
        constexpr int growth = 32;
        static constexpr int block_sizes[] = {6, 12, 24, 16};
        stem_conv_ = add_child("conv0", std::make_shared<Conv2d>(3, 64, 7, 2, 3, 1, false, rng));
        stem_bn_ = add_child("norm0", std::make_shared<BatchNorm2d>(64));
        int ch = 64;
        int block_idx = 1;
        for (int b = 0; b < 4; ++b) {
            auto block = add_child("denseblock" + std::to_string(block_idx),
                                   std::make_shared<Sequential>());
            for (int i = 0; i < block_sizes[b]; ++i) {
                block->push(std::make_shared<DenseLayer>(ch, growth, rng));
                ch += growth;
            }
            blocks_.push_back(block);
            if (b < 3) {
                transitions_.push_back(add_child("transition" + std::to_string(block_idx),
                                                 std::make_shared<Transition>(ch, ch / 2, rng)));
                ch /= 2;
            }
            ++block_idx;
        }
        final_bn_ = add_child("norm5", std::make_shared<BatchNorm2d>(ch));
        width_ = ch;  // 1024
    }
    NodeRef features(const NodeRef& x, ForwardCtx& ctx) override {
        NodeRef h = relu(stem_bn_->forward(stem_conv_->forward(x, ctx), ctx));
        h = maxpool2d(h, 3, 2, 1);
        for (std::size_t b = 0; b < blocks_.size(); ++b) {
            h = blocks_[b]->forward(h, ctx);
            if (b < transitions_.size()) h = transitions_[b]->forward(h, ctx);
        }
        return global_avgpool(relu(final_bn_->forward(h, ctx)));
    }
    int feature_width() const override { return width_; }

private:
    std::shared_ptr<Conv2d> stem_conv_;
    std::shared_ptr<BatchNorm2d> stem_bn_, final_bn_;
    std::vector<std::shared_ptr<Sequential>> blocks_;
    std::vector<std::shared_ptr<Transition>> transitions_;
    int width_ = 0;
};

// ---------------------------------------------------------------------------
// SqueezeNet 1.0
// ---------------------------------------------------------------------------
class Fire : public Module {
public:
    Fire(int in_ch, int squeeze, int expand1, int expand3, CounterRng& rng) {
        squeeze_ = add_child("squeeze", std::make_shared<Conv2d>(in_ch, squeeze, 1, 1, 0, 1, true, rng));
        expand1_ = add_child("expand1x1",
                             std::make_shared<Conv2d>(squeeze, expand1, 1, 1, 0, 1, true, rng));
        expand3_ = add_child("expand3x3",
                             std::make_shared<Conv2d>(squeeze, expand3, 3, 1, 1, 1, true, rng));
    }
    NodeRef forward(const NodeRef& x, ForwardCtx& ctx) override {
        NodeRef s = relu(squeeze_->forward(x, ctx));
        return concat_axis1({relu(expand1_->forward(s, ctx)), relu(expand3_->forward(s, ctx))});
    }

private:
    std::shared_ptr<Conv2d> squeeze_, expand1_, expand3_;
};

class SqueezeNet : public Backbone {
public:
    explicit SqueezeNet(CounterRng& rng) {
        conv1_ = add_child("conv1", std::make_shared<Conv2d>(3, 96, 7, 2, 0, 1, true, rng));
        fires_.push_back(add_child("fire2", std::make_shared<Fire>(96, 16, 64, 64, rng)));
        fires_.push_back(add_child("fire3", std::make_shared<Fire>(128, 16, 64, 64, rng)));
        fires_.push_back(add_child("fire4", std::make_shared<Fire>(128, 32, 128, 128, rng)));
        fires_.push_back(add_child("fire5", std::make_shared<Fire>(256, 32, 128, 128, rng)));
        fires_.push_back(add_child("fire6", std::make_shared<Fire>(256, 48, 192, 192, rng)));
        fires_.push_back(add_child("fire7", std::make_shared<Fire>(384, 48, 192, 192, rng)));
        fires_.push_back(add_child("fire8", std::make_shared<Fire>(384, 64, 256, 256, rng)));
        fires_.push_back(add_child("fire9", std::make_shared<Fire>(512, 64, 256, 256, rng)));
    }
    NodeRef features(const NodeRef& x, ForwardCtx& ctx) override {
        NodeRef h = maxpool2d(relu(conv1_->forward(x, ctx)), 3, 2);
        h = fires_[0]->forward(h, ctx);
        h = fires_[1]->forward(h, ctx);
        h = maxpool2d(fires_[2]->forward(h, ctx), 3, 2);
        h = fires_[3]->forward(h, ctx);
        h = fires_[4]->forward(h, ctx);
        h = fires_[5]->forward(h, ctx);
        h = maxpool2d(fires_[6]->forward(h, ctx), 3, 2);
        h = fires_[7]->forward(h, ctx);
        return global_avgpool(h);
    }
    int feature_width() const override { return 512; }
    double head_dropout() const override { return 0.5; }

private:
    std::shared_ptr<Conv2d> conv1_;
    std::vector<std::shared_ptr<Fire>> fires_;
};

// ---------------------------------------------------------------------------
// GoogLeNet (batch-norm variant, no aux heads)
// ---------------------------------------------------------------------------
class Inception : public Module {
public:
    Inception(int in_ch, int c1, int c3r, int c3, int c5r, int c5, int pool_proj,
              CounterRng& rng) {
        b1_ = add_child("branch1", std::make_shared<ConvBnAct>(in_ch, c1, 1, 1, 0, 1, Act::Relu, rng));
        b2a_ = add_child("branch2a", std::make_shared<ConvBnAct>(in_ch, c3r, 1, 1, 0, 1, Act::Relu, rng));
        b2b_ = add_child("branch2b", std::make_shared<ConvBnAct>(c3r, c3, 3, 1, 1, 1, Act::Relu, rng));
        b3a_ = add_child("branch3a", std::make_shared<ConvBnAct>(in_ch, c5r, 1, 1, 0, 1, Act::Relu, rng));
        b3b_ = add_child("branch3b", std::make_shared<ConvBnAct>(c5r, c5, 3, 1, 1, 1, Act::Relu, rng));
        b4_ = add_child("branch4",
                        std::make_shared<ConvBnAct>(in_ch, pool_proj, 1, 1, 0, 1, Act::Relu, rng));
    }
    NodeRef forward(const NodeRef& x, ForwardCtx& ctx) override {
        NodeRef y1 = b1_->forward(x, ctx);
        NodeRef y2 = b2b_->forward(b2a_->forward(x, ctx), ctx);
        NodeRef y3 = b3b_->forward(b3a_->forward(x, ctx), ctx);
        NodeRef y4 = b4_->forward(maxpool2d(x, 3, 1, 1), ctx);
        return concat_axis1({y1, y2, y3, y4});
    }

private:
    std::shared_ptr<ConvBnAct> b1_, b2a_, b2b_, b3a_, b3b_, b4_;
};

class GoogLeNet : public Backbone {
public:
    explicit GoogLeNet(CounterRng& rng) {
        conv1_ = add_child("conv1", std::make_shared<ConvBnAct>(3, 64, 7, 2, 3, 1, Act::Relu, rng));
        conv2_ = add_child("conv2", std::make_shared<ConvBnAct>(64, 64, 1, 1, 0, 1, Act::Relu, rng));
        conv3_ = add_child("conv3", std::make_shared<ConvBnAct>(64, 192, 3, 1, 1, 1, Act::Relu, rng));
        i3a_ = add_child("inception3a", std::make_shared<Inception>(192, 64, 96, 128, 16, 32, 32, rng));
        i3b_ = add_child("inception3b", std::make_shared<Inception>(256, 128, 128, 192, 32, 96, 64, rng));
        i4a_ = add_child("inception4a", std::make_shared<Inception>(480, 192, 96, 208, 16, 48, 64, rng));
        i4b_ = add_child("inception4b", std::make_shared<Inception>(512, 160, 112, 224, 24, 64, 64, rng));
        i4c_ = add_child("inception4c", std::make_shared<Inception>(512, 128, 128, 256, 24, 64, 64, rng));
        i4d_ = add_child("inception4d", std::make_shared<Inception>(512, 112, 144, 288, 32, 64, 64, rng));
        i4e_ = add_child("inception4e", std::make_shared<Inception>(528, 256, 160, 320, 32, 128, 128, rng));
        i5a_ = add_child("inception5a", std::make_shared<Inception>(832, 256, 160, 320, 32, 128, 128, rng));
        i5b_ = add_child("inception5b", std::make_shared<Inception>(832, 384, 192, 384, 48, 128, 128, rng));
    }
    NodeRef features(const NodeRef& x, ForwardCtx& ctx) override {
        NodeRef h = maxpool2d(conv1_->forward(x, ctx), 3, 2);
        h = conv3_->forward(conv2_->forward(h, ctx), ctx);
        h = maxpool2d(h, 3, 2);
        h = i3b_->forward(i3a_->forward(h, ctx), ctx);
        h = maxpool2d(h, 3, 2);
        h = i4a_->forward(h, ctx);
        h = i4b_->forward(h, ctx);
        h = i4c_->forward(h, ctx);
        h = i4d_->forward(h, ctx);
        h = i4e_->forward(h, ctx);
        h = maxpool2d(h, 3, 2);
        h = i5b_->forward(i5a_->forward(h, ctx), ctx);
        return global_avgpool(h);
    }
    int feature_width() const override { return 1024; }
    double head_dropout() const override { return 0.2; }

private:
    std::shared_ptr<ConvBnAct> conv1_, conv2_, conv3_;
    std::shared_ptr<Inception> i3a_, i3b_, i4a_, i4b_, i4c_, i4d_, i4e_, i5a_, i5b_;
};

// ---------------------------------------------------------------------------
// MobileViT-XS: MV2 stages interleaved with transformer blocks that attend
// over 2x2 patch sequences.
// ---------------------------------------------------------------------------
class MobileVitBlock : public Module {
public:
    MobileVitBlock(int channels, int dim, int depth, CounterRng& rng) : dim_(dim) {
        local_ = add_child("local",
                           std::make_shared<ConvBnAct>(channels, channels, 3, 1, 1, 1, Act::Silu, rng));
        proj_in_ = add_child("proj_in", std::make_shared<Conv2d>(channels, dim, 1, 1, 0, 1, false, rng));
        for (int i = 0; i < depth; ++i)
            transformer_.push_back(add_child(
                "transformer" + std::to_string(i),
                std::make_shared<TransformerBlock>(dim, 4, 2 * dim, Act::Silu, rng)));
        norm_ = add_child("norm", std::make_shared<LayerNorm>(dim));
        proj_out_ = add_child("proj_out",
                              std::make_shared<ConvBnAct>(dim, channels, 1, 1, 0, 1, Act::Silu, rng));
        fusion_ = add_child("fusion", std::make_shared<ConvBnAct>(2 * channels, channels, 3, 1, 1, 1,
                                                                  Act::Silu, rng));
    }
    NodeRef forward(const NodeRef& x, ForwardCtx& ctx) override {
        const auto n = x->value.dim(0), h = x->value.dim(2), w = x->value.dim(3);
        NodeRef y = proj_in_->forward(local_->forward(x, ctx), ctx);
        NodeRef tokens = unfold_patches(y, 2);
        for (auto& block : transformer_) tokens = block->forward(tokens, ctx);
        tokens = norm_->forward(tokens, ctx);
        NodeRef folded = fold_patches(tokens, n, dim_, h, w, 2);
        NodeRef z = proj_out_->forward(folded, ctx);
        return fusion_->forward(concat_axis1({x, z}), ctx);
    }

private:
    std::shared_ptr<ConvBnAct> local_, proj_out_, fusion_;
    std::shared_ptr<Conv2d> proj_in_;
    std::vector<std::shared_ptr<TransformerBlock>> transformer_;
    std::shared_ptr<LayerNorm> norm_;
    int dim_;
};

class MobileVitXs : public Backbone {
public:
    explicit MobileVitXs(CounterRng& rng) {
        trunk_ = add_child("trunk", std::make_shared<Sequential>());
        trunk_->push(std::make_shared<ConvBnAct>(3, 16, 3, 2, 1, 1, Act::Silu, rng));
        trunk_->push(std::make_shared<InvertedResidual>(16, 32, 1, 4, Act::Silu, rng));
        trunk_->push(std::make_shared<InvertedResidual>(32, 48, 2, 4, Act::Silu, rng));
        trunk_->push(std::make_shared<InvertedResidual>(48, 48, 1, 4, Act::Silu, rng));
        trunk_->push(std::make_shared<InvertedResidual>(48, 48, 1, 4, Act::Silu, rng));
        trunk_->push(std::make_shared<InvertedResidual>(48, 64, 2, 4, Act::Silu, rng));
        trunk_->push(std::make_shared<MobileVitBlock>(64, 96, 2, rng));
        trunk_->push(std::make_shared<InvertedResidual>(64, 80, 2, 4, Act::Silu, rng));
        trunk_->push(std::make_shared<MobileVitBlock>(80, 120, 4, rng));
        trunk_->push(std::make_shared<InvertedResidual>(80, 96, 2, 4, Act::Silu, rng));
        trunk_->push(std::make_shared<MobileVitBlock>(96, 144, 3, rng));
        trunk_->push(std::make_shared<ConvBnAct>(96, 384, 1, 1, 0, 1, Act::Silu, rng));
    }
    NodeRef features(const NodeRef& x, ForwardCtx& ctx) override {
        return global_avgpool(trunk_->forward(x, ctx));
    }
    int feature_width() const override { return 384; }

private:
    std::shared_ptr<Sequential> trunk_;
};

// ---------------------------------------------------------------------------
// ViT-Tiny with 16x16 patches embedded at stride 8 (overlapping patches),
// 12 encoder blocks, width 192, 3 heads, class-token readout.
// ---------------------------------------------------------------------------
class VitTiny : public Backbone {
public:
    explicit VitTiny(CounterRng& rng) {
        patch_embed_ = add_child("patch_embed", std::make_shared<Conv2d>(3, kDim, 16, 8, 0, 1, true, rng));
        // 224 -> (224-16)/8+1 = 27 per side
        tokens_ = 27 * 27;
        cls_ = add_child("cls_token",
                         std::make_shared<ParamTensor>("token", trunc_normal({1, 1, kDim}, 0.02, rng)));
        pos_ = add_child("pos_embed", std::make_shared<ParamTensor>(
                                          "pos", trunc_normal({1, tokens_ + 1, kDim}, 0.02, rng)));
        for (int i = 0; i < 12; ++i)
            blocks_.push_back(add_child("block" + std::to_string(i),
                                        std::make_shared<TransformerBlock>(kDim, 3, 4 * kDim,
                                                                           Act::Gelu, rng)));
        norm_ = add_child("norm", std::make_shared<LayerNorm>(kDim));
    }
    NodeRef features(const NodeRef& x, ForwardCtx& ctx) override {
        NodeRef h = chw_to_tokens(patch_embed_->forward(x, ctx));
        h = prepend_token(h, cls_->node());
        h = add_broadcast0(h, pos_->node());
        for (auto& block : blocks_) h = block->forward(h, ctx);
        return select_token(norm_->forward(h, ctx), 0);
    }
    int feature_width() const override { return kDim; }

private:
    static constexpr int kDim = 192;
    std::shared_ptr<Conv2d> patch_embed_;
    std::shared_ptr<ParamTensor> cls_, pos_;
    std::vector<std::shared_ptr<TransformerBlock>> blocks_;
    std::shared_ptr<LayerNorm> norm_;
    std::int64_t tokens_ = 0;
};

}  // namespace

std::shared_ptr<Backbone> build_backbone(Architecture arch, CounterRng& rng) {
    switch (arch) {
        case Architecture::toy_cnn: return std::make_shared<ToyCnn>(rng);
        case Architecture::mobilenetv2_050: return std::make_shared<MobileNetV2>(0.5, rng);
        case Architecture::mobilenetv2_100: return std::make_shared<MobileNetV2>(1.0, rng);
        case Architecture::densenet121: return std::make_shared<DenseNet121>(rng);
        case Architecture::squeezenet1_0: return std::make_shared<SqueezeNet>(rng);
        case Architecture::googlenet: return std::make_shared<GoogLeNet>(rng);
        case Architecture::mobilevit_xs: return std::make_shared<MobileVitXs>(rng);
        case Architecture::vit_tiny_r_s16_p8_224: return std::make_shared<VitTiny>(rng);
    }
    throw std::logic_error("build_backbone: unhandled architecture");
}

}  // namespace wastebench::detail
