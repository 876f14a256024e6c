#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "wastebench/nn.hpp"
#include "wastebench/tensor.hpp"

namespace wastebench {

enum class Architecture {
    mobilenetv2_050,
    mobilenetv2_100,
    densenet121,
    squeezenet1_0,
    googlenet,
    mobilevit_xs,
    vit_tiny_r_s16_p8_224,
    toy_cnn,  // synthetic desk-scale architecture, not a published backbone
};

const char* to_string(Architecture arch);
Architecture architecture_from_string(const std::string& name);  // UnknownArchitecture

struct ModelSpec {
    Architecture architecture = Architecture::toy_cnn;
    bool pretrained = false;
    int frozen_prefix = 0;
    int num_classes = 2;   // binary task
    int input_size = 224;  // network input edge
};

enum class FusionMode { feature_concat, logit_concat };
const char* to_string(FusionMode mode);
FusionMode fusion_mode_from_string(const std::string& name);

// Two backbones run on the same input; penultimate features (or the two
// 2-way log-prob heads under logit_concat) are concatenated and fused by a
// trainable fully connected layer.
struct ParallelEnsembleSpec {
    ModelSpec backbone_a{Architecture::mobilevit_xs};
    ModelSpec backbone_b{Architecture::vit_tiny_r_s16_p8_224};
    FusionMode fusion_mode = FusionMode::feature_concat;
};

// Directory holding <architecture>.wbw tensor archives. An empty path means
// no registry is configured and pretrained builds fail with WeightsUnavailable.
struct WeightsSource {
    std::filesystem::path registry_dir;
};

class Model;  // owns the module tree; defined in models.cpp

class ModelHandle {
public:
    ModelHandle() = default;
    explicit ModelHandle(std::shared_ptr<Model> model) : model_(std::move(model)) {}

    bool valid() const { return static_cast<bool>(model_); }
    const std::string& name() const;
    const std::string& spec_json() const;

    std::int64_t parameter_count() const;
    std::int64_t trainable_parameter_count() const;
    int parameterized_layer_count() const;
    int frozen_prefix() const;

    // Training-facing access.
    std::vector<nn::ParamInfo>& parameters() const;
    std::vector<nn::BufferInfo>& buffers() const;
    nn::NodeRef forward(const nn::NodeRef& x, nn::ForwardCtx& ctx) const;

    Model* get() const { return model_.get(); }

private:
    std::shared_ptr<Model> model_;
};

ModelHandle build_model(const ModelSpec& spec, const WeightsSource& weights = {},
                        std::uint64_t seed = 0);
ModelHandle build_parallel_ensemble(const ParallelEnsembleSpec& spec,
                                    const WeightsSource& weights = {}, std::uint64_t seed = 0);

// First `n` parameter-bearing layers (canonical order, see describe()) stop
// receiving gradient updates; layers past `n` are (re)enabled.
ModelHandle& freeze_prefix(ModelHandle& handle, int n);

// Evaluation-mode forward on a [B,3,224,224] batch; returns [B,2]
// log-probabilities. No gradients are recorded.
nn::Tensor forward_logprobs(const ModelHandle& handle, const nn::Tensor& batch);

// Human-readable dump of the canonical parameterized-layer ordering.
std::string describe(const ModelHandle& handle);

// Spec (de)serialization; the JSON is what checkpoints embed.
std::string model_spec_to_json(const ModelSpec& spec);
std::string ensemble_spec_to_json(const ParallelEnsembleSpec& spec);
ModelHandle build_from_spec_json(const std::string& spec_json, const WeightsSource& weights = {},
                                 std::uint64_t seed = 0);

// Write the model's tensors as a registry-compatible .wbw archive.
void save_weights(const ModelHandle& handle, const std::filesystem::path& path);

// ---- checkpoint plumbing ----
struct Checkpoint;  // wastebench/checkpoint.hpp

// Full state capture: every parameter and buffer under its canonical name,
// plus the model-spec JSON and caller-provided training metadata.
Checkpoint make_checkpoint(const ModelHandle& handle, const std::string& training_meta_json);
// Strict restore by name and shape into an already built model.
void load_into_model(ModelHandle& handle, const Checkpoint& checkpoint);
// Rebuild from the embedded spec JSON and restore all tensors.
ModelHandle restore_model(const Checkpoint& checkpoint, std::uint64_t seed = 0);

}  // namespace wastebench
