#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wastebench/metrics.hpp"
#include "wastebench/trainer.hpp"

namespace wastebench {

// Per-model probability columns joined on filename. All columns share one
// filename ordering; every pair is normalized.
struct AlignedPredictions {
    std::vector<std::string> filenames;  // ascending
    std::vector<std::string> model_names;
    // per_model[m][i] = (p_negative, p_positive) for filenames[i]
    std::vector<std::vector<std::pair<double, double>>> per_model;
    std::vector<std::optional<Label>> labels;  // aligned; set when any input had labels
    std::vector<std::string> dropped;          // filenames discarded by allow_intersection

    std::size_t size() const { return filenames.size(); }
};

// Strict parse of the prediction CSV format (trainer's writer). Errors carry
// 1-based row numbers.
std::vector<PredictionRecord> load_prediction_file(const std::filesystem::path& path);
std::vector<PredictionRecord> parse_prediction_csv(const std::string& text,
                                                   const std::string& origin);

// Filename sets must be identical across models unless allow_intersection,
// in which case the common subset is used and the symmetric difference is
// reported in `dropped`. Labels present in several files must agree.
AlignedPredictions align(const std::vector<std::vector<PredictionRecord>>& files,
                         const std::vector<std::string>& model_names,
                         bool allow_intersection = false);

// Unweighted arithmetic mean of the per-model class probabilities.
std::vector<PredictionRecord> average_fuse(const AlignedPredictions& aligned);

// Per-class + weighted metrics of the fused predictions (labels required).
ClassReport evaluate_fused(const std::vector<PredictionRecord>& fused,
                           const DecisionRule& rule = {});

// Provenance sidecar for a fusion run.
std::string fusion_manifest_json(const std::vector<std::filesystem::path>& inputs,
                                 const std::vector<std::string>& model_names,
                                 const std::filesystem::path& output,
                                 const std::vector<std::string>& dropped);

}  // namespace wastebench
