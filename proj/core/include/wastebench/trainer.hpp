#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wastebench/checkpoint.hpp"
#include "wastebench/dataset.hpp"
#include "wastebench/models.hpp"
#include "wastebench/optim.hpp"
#include "wastebench/pipeline.hpp"

namespace wastebench {

enum class Reduction { mean, sum };

// Which training images get the per-epoch generalization transform.
enum class OnlineAugmentation { off, positive_only, all };
const char* to_string(OnlineAugmentation mode);
OnlineAugmentation online_augmentation_from_string(const std::string& name);

struct TrainConfig {
    int batch_size = 64;
    double learning_rate = 1e-4;
    int max_epochs = 100;
    int patience = 20;
    int folds = 1;  // single fixed split; k-fold is out of scope
    int input_channels = 3;
    OptimizerSpec optimizer;
    std::uint64_t global_seed = 0;
    bool mixed_precision = false;  // accepted and recorded; the core loop is float64
    int inference_steps = 10;      // accepted pass-through, unused by the loop
    int workers = 1;               // parallel image decode; results are worker-count invariant
    NormalizationStats normalization{{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};
    AugmentationRanges augmentation;
    OnlineAugmentation online_augmentation = OnlineAugmentation::positive_only;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double validation_loss = 0.0;
    double validation_accuracy = 0.0;
};

struct PredictionRecord {
    std::string filename;
    double p_negative = 0.0;
    double p_positive = 0.0;
    std::optional<Label> true_label;
};

// Eq-style negative log-likelihood over [B,2] log-probabilities. `sum`
// totals -log P(correct); `mean` divides by the batch size.
nn::NodeRef nll_loss(const nn::NodeRef& logprobs, const std::vector<int>& labels,
                     Reduction reduction);

struct TrainResult {
    std::vector<EpochRecord> history;
    int best_epoch = 0;  // 1-based, 0 when no epoch ran
    double best_validation_loss = 0.0;
    int epochs_run = 0;
    Checkpoint best_checkpoint;
};

// NLL training with early stopping on validation loss. The model is left
// holding the best-epoch weights. Deterministic given config.global_seed.
TrainResult train(ModelHandle& model, const ImageFolderDataset& train_data,
                  const ImageFolderDataset& validation_data, const TrainConfig& config);

// Evaluation-mode predictions, ordered by filename. When `output_csv` is
// non-empty the records are also written in the prediction CSV format.
std::vector<PredictionRecord> predict(const ModelHandle& model, const ImageFolderDataset& dataset,
                                      const NormalizationStats& stats,
                                      const std::filesystem::path& output_csv = {},
                                      int batch_size = 64, int workers = 1);

// Prediction CSV: header `filename,p_negative,p_positive[,true_label]`,
// 6-decimal probabilities, \n endings, rows sorted by filename.
std::string predictions_to_csv(const std::vector<PredictionRecord>& records);
void write_predictions_csv(const std::vector<PredictionRecord>& records,
                           const std::filesystem::path& path);

// Training history CSV: `epoch,train_loss,val_loss,val_accuracy`.
std::string history_to_csv(const std::vector<EpochRecord>& history);
void write_history_csv(const std::vector<EpochRecord>& history,
                       const std::filesystem::path& path);

}  // namespace wastebench
