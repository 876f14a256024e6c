#include "wastebench/config.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "wastebench/errors.hpp"

namespace wastebench {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            fail(ErrorCode::InvalidConfig, "unknown config key '" + where + key + "'");
}

template <typename T>
void take(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j[key].get<T>();
    } catch (const json::exception&) {
        fail(ErrorCode::InvalidConfig, std::string("config key '") + key + "' has the wrong type");
    }
}

void take_path(const json& j, const char* key, std::filesystem::path& out) {
    std::string s = out.string();
    take(j, key, s);
    out = s;
}

void apply_env_override(const char* var, std::filesystem::path& out) {
    if (const char* value = std::getenv(var); value && *value) out = value;
}

}  // namespace

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::MissingFile, "cannot open config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str(), path.string());
}

RunConfig RunConfig::from_json_text(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::InvalidConfig, origin + ": " + e.what());
    }
    if (!j.is_object()) fail(ErrorCode::InvalidConfig, origin + ": config must be a JSON object");
    reject_unknown(j, {"paths", "pipeline", "split", "train", "model", "report"}, "");

    RunConfig config;

    if (j.contains("paths")) {
        const json& p = j["paths"];
        reject_unknown(p, {"manifest", "corrections", "data_root", "output_root", "baselines",
                           "weights_registry"},
                       "paths.");
        take_path(p, "manifest", config.paths.manifest);
        take_path(p, "corrections", config.paths.corrections);
        take_path(p, "data_root", config.paths.data_root);
        take_path(p, "output_root", config.paths.output_root);
        take_path(p, "baselines", config.paths.baselines);
        take_path(p, "weights_registry", config.paths.weights_registry);
    }

    if (j.contains("pipeline")) {
        const json& p = j["pipeline"];
        reject_unknown(p, {"normalization", "augmentation", "online_augmentation"}, "pipeline.");
        if (p.contains("normalization")) {
            const json& n = p["normalization"];
            reject_unknown(n, {"mean", "std"}, "pipeline.normalization.");
            take(n, "mean", config.pipeline.normalization.mean);
            take(n, "std", config.pipeline.normalization.std);
        }
        if (p.contains("augmentation")) {
            const json& a = p["augmentation"];
            reject_unknown(a,
                           {"rotation_limit_degrees", "hflip_prob", "vflip_prob", "jitter_min",
                            "jitter_max", "crop_area_min", "crop_area_max"},
                           "pipeline.augmentation.");
            auto& r = config.pipeline.augmentation;
            take(a, "rotation_limit_degrees", r.rotation_limit_degrees);
            take(a, "hflip_prob", r.hflip_prob);
            take(a, "vflip_prob", r.vflip_prob);
            take(a, "jitter_min", r.jitter_min);
            take(a, "jitter_max", r.jitter_max);
            take(a, "crop_area_min", r.crop_area_min);
            take(a, "crop_area_max", r.crop_area_max);
        }
        take(p, "online_augmentation", config.pipeline.online_augmentation);
    }

    if (j.contains("split")) {
        const json& s = j["split"];
        reject_unknown(s, {"validation_fraction", "seed"}, "split.");
        take(s, "validation_fraction", config.split.validation_fraction);
        take(s, "seed", config.split.seed);
    }

    if (j.contains("train")) {
        const json& t = j["train"];
        reject_unknown(t,
                       {"batch_size", "learning_rate", "max_epochs", "patience", "folds",
                        "input_channels", "optimizer", "optimizer_hyperparams", "global_seed",
                        "mixed_precision", "inference_steps", "workers"},
                       "train.");
        take(t, "batch_size", config.train.batch_size);
        take(t, "learning_rate", config.train.learning_rate);
        take(t, "max_epochs", config.train.max_epochs);
        take(t, "patience", config.train.patience);
        take(t, "folds", config.train.folds);
        take(t, "input_channels", config.train.input_channels);
        take(t, "optimizer", config.train.optimizer);
        take(t, "optimizer_hyperparams", config.train.optimizer_hyperparams);
        take(t, "global_seed", config.train.global_seed);
        take(t, "mixed_precision", config.train.mixed_precision);
        take(t, "inference_steps", config.train.inference_steps);
        take(t, "workers", config.train.workers);
    }

    if (j.contains("model")) {
        const json& m = j["model"];
        reject_unknown(m,
                       {"architecture", "pretrained", "frozen_prefix", "ensemble", "backbone_a",
                        "backbone_b", "fusion_mode"},
                       "model.");
        take(m, "architecture", config.model.architecture);
        take(m, "pretrained", config.model.pretrained);
        take(m, "frozen_prefix", config.model.frozen_prefix);
        take(m, "ensemble", config.model.ensemble);
        take(m, "backbone_a", config.model.backbone_a);
        take(m, "backbone_b", config.model.backbone_b);
        take(m, "fusion_mode", config.model.fusion_mode);
    }

    if (j.contains("report")) {
        const json& r = j["report"];
        reject_unknown(r, {"tolerance_pp", "formats", "baseline_values", "tie_break"}, "report.");
        take(r, "tolerance_pp", config.report.tolerance_pp);
        take(r, "formats", config.report.formats);
        take(r, "baseline_values", config.report.baseline_values);
        take(r, "tie_break", config.report.tie_break);
    }

    // environment overrides, paths only
    apply_env_override("WASTEBENCH_MANIFEST", config.paths.manifest);
    apply_env_override("WASTEBENCH_CORRECTIONS", config.paths.corrections);
    apply_env_override("WASTEBENCH_DATA_ROOT", config.paths.data_root);
    apply_env_override("WASTEBENCH_OUTPUT_ROOT", config.paths.output_root);
    apply_env_override("WASTEBENCH_BASELINES", config.paths.baselines);
    apply_env_override("WASTEBENCH_WEIGHTS_REGISTRY", config.paths.weights_registry);

    config.validate();
    return config;
}

void RunConfig::validate() const {
    pipeline.normalization.validate();
    online_augmentation_from_string(pipeline.online_augmentation);
    if (!(split.validation_fraction > 0.0 && split.validation_fraction < 1.0))
        fail(ErrorCode::InvalidConfig, "split.validation_fraction must lie in (0,1)");
    optimizer_kind_from_string(train.optimizer);
    architecture_from_string(model.architecture);
    architecture_from_string(model.backbone_a);
    architecture_from_string(model.backbone_b);
    fusion_mode_from_string(model.fusion_mode);
    if (report.baseline_values != "weighted" && report.baseline_values != "positive")
        fail(ErrorCode::InvalidConfig, "report.baseline_values must be weighted|positive");
    if (report.tie_break != "negative" && report.tie_break != "positive")
        fail(ErrorCode::InvalidConfig, "report.tie_break must be negative|positive");
    train_config().validate();
}

std::string RunConfig::to_json() const {
    json j;
    j["paths"] = {{"manifest", paths.manifest.string()},
                  {"corrections", paths.corrections.string()},
                  {"data_root", paths.data_root.string()},
                  {"output_root", paths.output_root.string()},
                  {"baselines", paths.baselines.string()},
                  {"weights_registry", paths.weights_registry.string()}};
    j["pipeline"] = {
        {"normalization",
         {{"mean", pipeline.normalization.mean}, {"std", pipeline.normalization.std}}},
        {"augmentation",
         {{"rotation_limit_degrees", pipeline.augmentation.rotation_limit_degrees},
          {"hflip_prob", pipeline.augmentation.hflip_prob},
          {"vflip_prob", pipeline.augmentation.vflip_prob},
          {"jitter_min", pipeline.augmentation.jitter_min},
          {"jitter_max", pipeline.augmentation.jitter_max},
          {"crop_area_min", pipeline.augmentation.crop_area_min},
          {"crop_area_max", pipeline.augmentation.crop_area_max}}},
        {"online_augmentation", pipeline.online_augmentation}};
    j["split"] = {{"validation_fraction", split.validation_fraction}, {"seed", split.seed}};
    j["train"] = {{"batch_size", train.batch_size},
                  {"learning_rate", train.learning_rate},
                  {"max_epochs", train.max_epochs},
                  {"patience", train.patience},
                  {"folds", train.folds},
                  {"input_channels", train.input_channels},
                  {"optimizer", train.optimizer},
                  {"optimizer_hyperparams", train.optimizer_hyperparams},
                  {"global_seed", train.global_seed},
                  {"mixed_precision", train.mixed_precision},
                  {"inference_steps", train.inference_steps},
                  {"workers", train.workers}};
    j["model"] = {{"architecture", model.architecture},
                  {"pretrained", model.pretrained},
                  {"frozen_prefix", model.frozen_prefix},
                  {"ensemble", model.ensemble},
                  {"backbone_a", model.backbone_a},
                  {"backbone_b", model.backbone_b},
                  {"fusion_mode", model.fusion_mode}};
    j["report"] = {{"tolerance_pp", report.tolerance_pp},
                   {"formats", report.formats},
                   {"baseline_values", report.baseline_values},
                   {"tie_break", report.tie_break}};
    return j.dump(2) + "\n";
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.batch_size = train.batch_size;
    t.learning_rate = train.learning_rate;
    t.max_epochs = train.max_epochs;
    t.patience = train.patience;
    t.folds = train.folds;
    t.input_channels = train.input_channels;
    t.optimizer.kind = optimizer_kind_from_string(train.optimizer);
    t.optimizer.hyperparams = train.optimizer_hyperparams;
    t.global_seed = train.global_seed;
    t.mixed_precision = train.mixed_precision;
    t.inference_steps = train.inference_steps;
    t.workers = train.workers;
    t.normalization = pipeline.normalization;
    t.augmentation = pipeline.augmentation;
    t.online_augmentation = online_augmentation_from_string(pipeline.online_augmentation);
    return t;
}

ModelSpec RunConfig::model_spec() const {
    ModelSpec spec;
    spec.architecture = architecture_from_string(model.architecture);
    spec.pretrained = model.pretrained;
    spec.frozen_prefix = model.frozen_prefix;
    return spec;
}

ParallelEnsembleSpec RunConfig::ensemble_spec() const {
    ParallelEnsembleSpec spec;
    spec.backbone_a.architecture = architecture_from_string(model.backbone_a);
    spec.backbone_a.pretrained = model.pretrained;
    spec.backbone_b.architecture = architecture_from_string(model.backbone_b);
    spec.backbone_b.pretrained = model.pretrained;
    spec.fusion_mode = fusion_mode_from_string(model.fusion_mode);
    return spec;
}

DecisionRule RunConfig::decision_rule() const {
    return {report.tie_break == "positive" ? Label::positive : Label::negative};
}

}  // namespace wastebench
