#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "wastebench/metrics.hpp"
#include "wastebench/models.hpp"
#include "wastebench/trainer.hpp"

namespace wastebench {

// One config file drives every command. Unknown keys are rejected; the
// resolved dump (all defaults materialized) reproduces the identical run
// when fed back in. Path fields honor WASTEBENCH_* environment overrides.
struct RunConfig {
    struct Paths {
        std::filesystem::path manifest;
        std::filesystem::path corrections;       // optional
        std::filesystem::path data_root;         // image files the manifest references
        std::filesystem::path output_root = "out";
        std::filesystem::path baselines;         // reference-results data file
        std::filesystem::path weights_registry;  // pretrained archives
    } paths;

    struct Pipeline {
        NormalizationStats normalization{{0.3201, 0.3334, 0.2832}, {0.2004, 0.1818, 0.1764}};
        AugmentationRanges augmentation;
        std::string online_augmentation = "positive";  // off | positive | all
    } pipeline;

    struct SplitSection {
        double validation_fraction = 0.2;
        std::uint64_t seed = 42;
    } split;

    struct TrainSection {
        int batch_size = 64;
        double learning_rate = 1e-4;
        int max_epochs = 100;
        int patience = 20;
        int folds = 1;
        int input_channels = 3;
        std::string optimizer = "adamw";
        std::map<std::string, double> optimizer_hyperparams;
        std::uint64_t global_seed = 42;
        bool mixed_precision = false;
        int inference_steps = 10;
        int workers = 1;
    } train;

    struct ModelSection {
        std::string architecture = "toy_cnn";
        bool pretrained = false;
        int frozen_prefix = 0;
        bool ensemble = false;
        std::string backbone_a = "mobilevit_xs";
        std::string backbone_b = "vit_tiny_r_s16_p8_224";
        std::string fusion_mode = "feature_concat";
    } model;

    struct ReportSection {
        double tolerance_pp = 2.0;
        std::vector<std::string> formats = {"json", "text"};
        std::string baseline_values = "weighted";  // weighted | positive
        std::string tie_break = "negative";
    } report;

    static RunConfig load(const std::filesystem::path& path);
    static RunConfig from_json_text(const std::string& text, const std::string& origin);

    // Fully resolved JSON (every default materialized).
    std::string to_json() const;
    void validate() const;

    // Typed views used by the commands.
    TrainConfig train_config() const;
    ModelSpec model_spec() const;
    ParallelEnsembleSpec ensemble_spec() const;
    WeightsSource weights_source() const { return {paths.weights_registry}; }
    DecisionRule decision_rule() const;
};

}  // namespace wastebench
