#include "wastebench/models.hpp"

#include <nlohmann/json.hpp>

#include <sstream>
#include <unordered_map>

#include "models_internal.hpp"
#include "wastebench/checkpoint.hpp"
#include "wastebench/errors.hpp"

namespace wastebench {

using nlohmann::json;
using nn::ForwardCtx;
using nn::NodeRef;

const char* to_string(Architecture arch) {
    switch (arch) {
        case Architecture::mobilenetv2_050: return "mobilenetv2_050";
        case Architecture::mobilenetv2_100: return "mobilenetv2_100";
        case Architecture::densenet121: return "densenet121";
        case Architecture::squeezenet1_0: return "squeezenet1_0";
        case Architecture::googlenet: return "googlenet";
        case Architecture::mobilevit_xs: return "mobilevit_xs";
        case Architecture::vit_tiny_r_s16_p8_224: return "vit_tiny_r_s16_p8_224";
        case Architecture::toy_cnn: return "toy_cnn";
    }
    return "unknown";
}

Architecture architecture_from_string(const std::string& name) {
    static const std::unordered_map<std::string, Architecture> table = {
        {"mobilenetv2_050", Architecture::mobilenetv2_050},
        {"mobilenetv2_100", Architecture::mobilenetv2_100},
        {"densenet121", Architecture::densenet121},
        {"squeezenet1_0", Architecture::squeezenet1_0},
        {"googlenet", Architecture::googlenet},
        {"mobilevit_xs", Architecture::mobilevit_xs},
        {"vit_tiny_r_s16_p8_224", Architecture::vit_tiny_r_s16_p8_224},
        {"toy_cnn", Architecture::toy_cnn},
    };
    auto it = table.find(name);
    if (it == table.end())
        fail(ErrorCode::UnknownArchitecture, "unknown architecture '" + name + "'");
    return it->second;
}

const char* to_string(FusionMode mode) {
    return mode == FusionMode::feature_concat ? "feature_concat" : "logit_concat";
}

FusionMode fusion_mode_from_string(const std::string& name) {
    if (name == "feature_concat") return FusionMode::feature_concat;
    if (name == "logit_concat") return FusionMode::logit_concat;
    fail(ErrorCode::InvalidConfig, "unknown fusion mode '" + name + "'");
}

namespace {

void validate_spec(const ModelSpec& spec) {
    if (spec.num_classes != 2)
        fail(ErrorCode::InvalidConfig, "num_classes is fixed at 2 for the binary task");
    if (spec.input_size != 224)
        fail(ErrorCode::InvalidConfig, "input_size is fixed at 224");
    if (spec.frozen_prefix < 0)
        fail(ErrorCode::PrefixOutOfRange, "frozen_prefix must be >= 0");
}

// Backbone features -> stock dropout -> 2-way linear head -> log-softmax.
class ClassifierModel : public nn::Module {
public:
    ClassifierModel(std::shared_ptr<detail::Backbone> backbone, int num_classes, CounterRng& rng)
        : dropout_p_(backbone->head_dropout()) {
        backbone_ = add_child("backbone", std::move(backbone));
        head_ = add_child("head",
                          std::make_shared<nn::Linear>(backbone_->feature_width(), num_classes, rng));
    }
    NodeRef forward(const NodeRef& x, ForwardCtx& ctx) override {
        NodeRef feats = backbone_->features(x, ctx);
        if (ctx.training && dropout_p_ > 0.0) {
            if (!ctx.rng) throw std::logic_error("training forward requires ctx.rng");
            feats = nn::dropout(feats, dropout_p_, *ctx.rng, true);
        }
        return nn::log_softmax_lastdim(head_->forward(feats, ctx));
    }

private:
    std::shared_ptr<detail::Backbone> backbone_;
    std::shared_ptr<nn::Linear> head_;
    double dropout_p_;
};

// Both backbones process the same input; the concatenated representation is
// fused by one trainable fully connected layer, then log-softmaxed.
class ParallelEnsembleModel : public nn::Module {
public:
    ParallelEnsembleModel(const ParallelEnsembleSpec& spec, CounterRng& rng) : mode_(spec.fusion_mode) {
        if (mode_ == FusionMode::feature_concat) {
            trunk_a_ = add_child("a", detail::build_backbone(spec.backbone_a.architecture, rng));
            trunk_b_ = add_child("b", detail::build_backbone(spec.backbone_b.architecture, rng));
            fusion_width_ = trunk_a_->feature_width() + trunk_b_->feature_width();
        } else {
            full_a_ = add_child("a", std::make_shared<ClassifierModel>(
                                         detail::build_backbone(spec.backbone_a.architecture, rng),
                                         spec.backbone_a.num_classes, rng));
            full_b_ = add_child("b", std::make_shared<ClassifierModel>(
                                         detail::build_backbone(spec.backbone_b.architecture, rng),
                                         spec.backbone_b.num_classes, rng));
            fusion_width_ = 4;  // two 2-way heads
        }
        fusion_fc_ = add_child("fusion_fc", std::make_shared<nn::Linear>(fusion_width_, 2, rng));
    }
    NodeRef forward(const NodeRef& x, ForwardCtx& ctx) override {
        NodeRef merged;
        if (mode_ == FusionMode::feature_concat)
            merged = nn::concat_axis1({trunk_a_->features(x, ctx), trunk_b_->features(x, ctx)});
        else
            merged = nn::concat_axis1({full_a_->forward(x, ctx), full_b_->forward(x, ctx)});
        return nn::log_softmax_lastdim(fusion_fc_->forward(merged, ctx));
    }
    int fusion_width() const { return fusion_width_; }

private:
    FusionMode mode_;
    std::shared_ptr<detail::Backbone> trunk_a_, trunk_b_;
    std::shared_ptr<ClassifierModel> full_a_, full_b_;
    std::shared_ptr<nn::Linear> fusion_fc_;
    int fusion_width_ = 0;
};

}  // namespace

// ---------------------------------------------------------------------------
// Model wrapper
// ---------------------------------------------------------------------------

class Model {
public:
    Model(std::shared_ptr<nn::Module> root, std::string name, std::string spec_json)
        : root_(std::move(root)), name_(std::move(name)), spec_json_(std::move(spec_json)) {
        root_->collect_params("", params_);
        root_->collect_buffers("", buffers_);
        root_->collect_param_layers("", layers_);
    }

    NodeRef forward(const NodeRef& x, ForwardCtx& ctx) { return root_->forward(x, ctx); }

    std::vector<nn::ParamInfo>& params() { return params_; }
    std::vector<nn::BufferInfo>& buffers() { return buffers_; }
    const std::vector<nn::Module::ParamLayer>& layers() const { return layers_; }

    std::int64_t parameter_count() const {
        std::int64_t n = 0;
        for (const auto& p : params_) n += p.node->value.size();
        return n;
    }
    std::int64_t trainable_parameter_count() const {
        std::int64_t n = 0;
        for (const auto& p : params_)
            if (p.node->requires_grad) n += p.node->value.size();
        return n;
    }

    void freeze_prefix(int n) {
        if (n < 0 || n > static_cast<int>(layers_.size()))
            fail(ErrorCode::PrefixOutOfRange,
                 "frozen prefix " + std::to_string(n) + " exceeds the " +
                     std::to_string(layers_.size()) + " parameterized layers of " + name_);
        for (int i = 0; i < static_cast<int>(layers_.size()); ++i)
            for (const auto& p : layers_[static_cast<std::size_t>(i)].params)
                p.node->requires_grad = i >= n;
        frozen_prefix_ = n;
    }
    int frozen_prefix() const { return frozen_prefix_; }

    const std::string& name() const { return name_; }
    const std::string& spec_json() const { return spec_json_; }

private:
    std::shared_ptr<nn::Module> root_;
    std::string name_;
    std::string spec_json_;
    std::vector<nn::ParamInfo> params_;
    std::vector<nn::BufferInfo> buffers_;
    std::vector<nn::Module::ParamLayer> layers_;
    int frozen_prefix_ = 0;
};

const std::string& ModelHandle::name() const { return model_->name(); }
const std::string& ModelHandle::spec_json() const { return model_->spec_json(); }
std::int64_t ModelHandle::parameter_count() const { return model_->parameter_count(); }
std::int64_t ModelHandle::trainable_parameter_count() const {
    return model_->trainable_parameter_count();
}
int ModelHandle::parameterized_layer_count() const {
    return static_cast<int>(model_->layers().size());
}
int ModelHandle::frozen_prefix() const { return model_->frozen_prefix(); }
std::vector<nn::ParamInfo>& ModelHandle::parameters() const { return model_->params(); }
std::vector<nn::BufferInfo>& ModelHandle::buffers() const { return model_->buffers(); }
NodeRef ModelHandle::forward(const NodeRef& x, ForwardCtx& ctx) const {
    return model_->forward(x, ctx);
}

// ---------------------------------------------------------------------------
// builders
// ---------------------------------------------------------------------------

namespace {

// Registry archives hold backbone-relative tensor names. Loads every tensor
// that matches a parameter or buffer under `prefix`; head tensors are absent
// by design (the binary head is always freshly initialized).
void load_pretrained(Model& model, Architecture arch, const WeightsSource& weights,
                     const std::string& prefix) {
    if (weights.registry_dir.empty())
        fail(ErrorCode::WeightsUnavailable,
             "pretrained=true but no weights registry is configured");
    const std::filesystem::path file =
        weights.registry_dir / (std::string(to_string(arch)) + ".wbw");
    if (!std::filesystem::exists(file))
        fail(ErrorCode::WeightsUnavailable,
             "weights registry has no entry for " + std::string(to_string(arch)) + " (expected " +
                 file.string() + ")");
    Checkpoint archive;
    try {
        archive = load_checkpoint(file);
    } catch (const Error& e) {
        fail(ErrorCode::WeightsUnavailable, std::string("unreadable weights archive: ") + e.what());
    }
    std::unordered_map<std::string, const TensorEntry*> by_name;
    for (const auto& t : archive.tensors) by_name[t.name] = &t;

    auto copy_into = [&](const std::string& name, nn::Tensor& dst) {
        auto it = by_name.find(name);
        if (it == by_name.end()) return false;
        if (it->second->tensor.shape() != dst.shape())
            fail(ErrorCode::WeightsUnavailable,
                 "weights archive shape mismatch for '" + name + "'");
        std::copy(it->second->tensor.data(), it->second->tensor.data() + dst.size(), dst.data());
        return true;
    };

    std::size_t loaded = 0;
    for (auto& p : model.params()) {
        if (p.name.rfind(prefix, 0) != 0) continue;
        if (copy_into(p.name.substr(prefix.size()), p.node->value)) ++loaded;
    }
    for (auto& b : model.buffers()) {
        if (b.name.rfind(prefix, 0) != 0) continue;
        if (copy_into(b.name.substr(prefix.size()), b.tensor)) ++loaded;
    }
    if (loaded == 0)
        fail(ErrorCode::WeightsUnavailable,
             "weights archive " + file.string() + " matched no tensors");
}

json spec_to_json_obj(const ModelSpec& spec) {
    json j;
    j["architecture"] = to_string(spec.architecture);
    j["pretrained"] = spec.pretrained;
    j["frozen_prefix"] = spec.frozen_prefix;
    j["num_classes"] = spec.num_classes;
    j["input_size"] = spec.input_size;
    return j;
}

ModelSpec spec_from_json_obj(const json& j) {
    ModelSpec spec;
    spec.architecture = architecture_from_string(j.at("architecture").get<std::string>());
    spec.pretrained = j.value("pretrained", false);
    spec.frozen_prefix = j.value("frozen_prefix", 0);
    spec.num_classes = j.value("num_classes", 2);
    spec.input_size = j.value("input_size", 224);
    return spec;
}

}  // namespace

ModelHandle build_model(const ModelSpec& spec, const WeightsSource& weights, std::uint64_t seed) {
    validate_spec(spec);
    CounterRng rng(hash_string(seed, std::string("init/") + to_string(spec.architecture)));
    auto backbone = detail::build_backbone(spec.architecture, rng);
    auto root = std::make_shared<ClassifierModel>(backbone, spec.num_classes, rng);
    auto model = std::make_shared<Model>(root, to_string(spec.architecture),
                                         model_spec_to_json(spec));
    if (spec.pretrained) load_pretrained(*model, spec.architecture, weights, "backbone.");
    model->freeze_prefix(spec.frozen_prefix);
    ModelHandle handle(model);
    return handle;
}

ModelHandle build_parallel_ensemble(const ParallelEnsembleSpec& spec, const WeightsSource& weights,
                                    std::uint64_t seed) {
    validate_spec(spec.backbone_a);
    validate_spec(spec.backbone_b);
    const std::string name = std::string("parallel_ensemble_") + to_string(spec.backbone_a.architecture) +
                             "_" + to_string(spec.backbone_b.architecture);
    CounterRng rng(hash_string(seed, "init/" + name));
    auto root = std::make_shared<ParallelEnsembleModel>(spec, rng);
    auto model = std::make_shared<Model>(root, name, ensemble_spec_to_json(spec));
    if (spec.backbone_a.pretrained)
        load_pretrained(*model, spec.backbone_a.architecture, weights,
                        spec.fusion_mode == FusionMode::feature_concat ? "a." : "a.backbone.");
    if (spec.backbone_b.pretrained)
        load_pretrained(*model, spec.backbone_b.architecture, weights,
                        spec.fusion_mode == FusionMode::feature_concat ? "b." : "b.backbone.");
    ModelHandle handle(model);
    return handle;
}

ModelHandle& freeze_prefix(ModelHandle& handle, int n) {
    handle.get()->freeze_prefix(n);
    return handle;
}

nn::Tensor forward_logprobs(const ModelHandle& handle, const nn::Tensor& batch) {
    if (batch.rank() != 4 || batch.dim(1) != 3 || batch.dim(2) != 224 || batch.dim(3) != 224)
        fail(ErrorCode::ShapeMismatch, "forward_logprobs expects a [B,3,224,224] batch");
    nn::NoGradGuard no_grad;
    ForwardCtx ctx;  // evaluation mode
    return handle.forward(nn::make_constant(batch), ctx)->value;
}

std::string describe(const ModelHandle& handle) {
    std::ostringstream out;
    out << handle.name() << ": " << handle.parameter_count() << " parameters, "
        << handle.trainable_parameter_count() << " trainable, frozen_prefix="
        << handle.frozen_prefix() << "\n";
    const auto& layers = handle.get()->layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        std::int64_t count = 0;
        for (const auto& p : layers[i].params) count += p.node->value.size();
        const bool frozen = static_cast<int>(i) < handle.frozen_prefix();
        out << "  [" << i << "] " << layers[i].path << " (" << count << " params";
        for (const auto& p : layers[i].params) {
            out << ", " << p.name.substr(layers[i].path.size() + 1) << "=[";
            const auto& shape = p.node->value.shape();
            for (std::size_t d = 0; d < shape.size(); ++d)
                out << (d ? "x" : "") << shape[d];
            out << "]";
        }
        out << ")" << (frozen ? " frozen" : "") << "\n";
    }
    return out.str();
}

std::string model_spec_to_json(const ModelSpec& spec) {
    json j = spec_to_json_obj(spec);
    j["kind"] = "single";
    return j.dump();
}

std::string ensemble_spec_to_json(const ParallelEnsembleSpec& spec) {
    json j;
    j["kind"] = "parallel_ensemble";
    j["backbone_a"] = spec_to_json_obj(spec.backbone_a);
    j["backbone_b"] = spec_to_json_obj(spec.backbone_b);
    j["fusion_mode"] = to_string(spec.fusion_mode);
    return j.dump();
}

ModelHandle build_from_spec_json(const std::string& spec_json, const WeightsSource& weights,
                                 std::uint64_t seed) {
    json j;
    try {
        j = json::parse(spec_json);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::SchemaViolation, std::string("model spec: ") + e.what());
    }
    const std::string kind = j.value("kind", "single");
    if (kind == "single") return build_model(spec_from_json_obj(j), weights, seed);
    if (kind == "parallel_ensemble") {
        ParallelEnsembleSpec spec;
        spec.backbone_a = spec_from_json_obj(j.at("backbone_a"));
        spec.backbone_b = spec_from_json_obj(j.at("backbone_b"));
        spec.fusion_mode = fusion_mode_from_string(j.value("fusion_mode", "feature_concat"));
        return build_parallel_ensemble(spec, weights, seed);
    }
    fail(ErrorCode::SchemaViolation, "model spec: unknown kind '" + kind + "'");
}

Checkpoint make_checkpoint(const ModelHandle& handle, const std::string& training_meta_json) {
    Checkpoint checkpoint;
    checkpoint.model_spec_json = handle.spec_json();
    checkpoint.training_meta_json = training_meta_json;
    for (const auto& p : handle.parameters())
        checkpoint.tensors.push_back({p.name, p.node->value.clone()});
    for (const auto& b : handle.buffers())
        checkpoint.tensors.push_back({b.name, b.tensor.clone()});
    return checkpoint;
}

void load_into_model(ModelHandle& handle, const Checkpoint& checkpoint) {
    std::unordered_map<std::string, const TensorEntry*> by_name;
    for (const auto& t : checkpoint.tensors) by_name[t.name] = &t;
    auto restore = [&](const std::string& name, nn::Tensor& dst) {
        auto it = by_name.find(name);
        if (it == by_name.end())
            fail(ErrorCode::SchemaViolation, "checkpoint is missing tensor '" + name + "'");
        if (it->second->tensor.shape() != dst.shape())
            fail(ErrorCode::SchemaViolation, "checkpoint shape mismatch for '" + name + "'");
        std::copy(it->second->tensor.data(), it->second->tensor.data() + dst.size(), dst.data());
    };
    for (auto& p : handle.parameters()) restore(p.name, p.node->value);
    for (auto& b : handle.buffers()) restore(b.name, b.tensor);
}

ModelHandle restore_model(const Checkpoint& checkpoint, std::uint64_t seed) {
    // pretrained flags in the stored spec must not trigger a registry fetch;
    // the checkpoint itself carries every tensor
    json spec = json::parse(checkpoint.model_spec_json);
    auto clear_pretrained = [](json& j) {
        if (j.contains("pretrained")) j["pretrained"] = false;
    };
    clear_pretrained(spec);
    if (spec.contains("backbone_a")) clear_pretrained(spec["backbone_a"]);
    if (spec.contains("backbone_b")) clear_pretrained(spec["backbone_b"]);
    ModelHandle handle = build_from_spec_json(spec.dump(), {}, seed);
    load_into_model(handle, checkpoint);
    return handle;
}

void save_weights(const ModelHandle& handle, const std::filesystem::path& path) {
    json spec = json::parse(handle.spec_json());
    if (spec.value("kind", "single") != "single")
        fail(ErrorCode::InvalidConfig,
             "save_weights exports single-backbone archives; got an ensemble");
    Checkpoint archive;
    archive.model_spec_json = handle.spec_json();
    const std::string prefix = "backbone.";
    for (const auto& p : handle.parameters())
        if (p.name.rfind(prefix, 0) == 0)
            archive.tensors.push_back({p.name.substr(prefix.size()), p.node->value.clone()});
    for (const auto& b : handle.buffers())
        if (b.name.rfind(prefix, 0) == 0)
            archive.tensors.push_back({b.name.substr(prefix.size()), b.tensor.clone()});
    save_checkpoint(archive, path);
}

}  // namespace wastebench
