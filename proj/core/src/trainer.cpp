#include "wastebench/trainer.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include "wastebench/errors.hpp"
#include "wastebench/image.hpp"
#include "wastebench/rng.hpp"

namespace wastebench {

using nlohmann::json;
using nn::NodeRef;
using nn::Scalar;
using nn::Tensor;

const char* to_string(OnlineAugmentation mode) {
    switch (mode) {
        case OnlineAugmentation::off: return "off";
        case OnlineAugmentation::positive_only: return "positive";
        case OnlineAugmentation::all: return "all";
    }
    return "off";
}

OnlineAugmentation online_augmentation_from_string(const std::string& name) {
    if (name == "off") return OnlineAugmentation::off;
    if (name == "positive") return OnlineAugmentation::positive_only;
    if (name == "all") return OnlineAugmentation::all;
    fail(ErrorCode::InvalidConfig, "online_augmentation must be off|positive|all, got '" + name + "'");
}

void TrainConfig::validate() const {
    if (batch_size < 1) fail(ErrorCode::InvalidConfig, "batch_size must be >= 1");
    if (patience > max_epochs)
        fail(ErrorCode::InvalidConfig, "patience must not exceed max_epochs");
    if (!(learning_rate > 0.0)) fail(ErrorCode::InvalidConfig, "learning_rate must be > 0");
    if (input_channels != 3) fail(ErrorCode::InvalidConfig, "input_channels is fixed at 3");
    if (folds != 1) fail(ErrorCode::InvalidConfig, "only folds=1 (single fixed split) is supported");
    if (workers < 1) fail(ErrorCode::InvalidConfig, "workers must be >= 1");
    normalization.validate();
}

NodeRef nll_loss(const nn::NodeRef& logprobs, const std::vector<int>& labels,
                 Reduction reduction) {
    if (logprobs->value.rank() != 2)
        fail(ErrorCode::ShapeMismatch, "nll_loss expects a [B,C] log-probability matrix");
    const std::int64_t b = logprobs->value.dim(0);
    const std::int64_t c = logprobs->value.dim(1);
    if (static_cast<std::int64_t>(labels.size()) != b)
        fail(ErrorCode::ShapeMismatch, "nll_loss: label count does not match batch size");
    for (int y : labels)
        if (y < 0 || y >= c)
            fail(ErrorCode::LabelOutOfRange, "label " + std::to_string(y) + " outside [0," +
                                                 std::to_string(c) + ")");
    Scalar total = 0;
    for (std::int64_t i = 0; i < b; ++i) total -= logprobs->value[i * c + labels[static_cast<std::size_t>(i)]];
    const Scalar scale_factor = reduction == Reduction::mean ? 1.0 / static_cast<Scalar>(b) : 1.0;
    auto labels_copy = std::make_shared<std::vector<int>>(labels);
    return nn::make_op(Tensor::from({1}, {total * scale_factor}), {logprobs},
                       [logprobs, labels_copy, b, c, scale_factor](nn::Node& node) {
                           if (!logprobs->requires_grad) return;
                           logprobs->ensure_grad();
                           const Scalar g = node.grad[0] * scale_factor;
                           Scalar* d = logprobs->grad.data();
                           for (std::int64_t i = 0; i < b; ++i)
                               d[i * c + (*labels_copy)[static_cast<std::size_t>(i)]] -= g;
                       });
}

// ---------------------------------------------------------------------------
// batch assembly
// ---------------------------------------------------------------------------

namespace {

struct LoadOptions {
    const NormalizationStats* stats = nullptr;
    const AugmentationRanges* ranges = nullptr;
    OnlineAugmentation online = OnlineAugmentation::off;
    bool training = false;
    std::uint64_t seed = 0;
    std::int64_t epoch = 0;
    int workers = 1;
};

Tensor load_item(const DatasetItem& item, const LoadOptions& opt) {
    Image img = standardize(read_png(item.path));
    const bool augment = opt.training && (opt.online == OnlineAugmentation::all ||
                                          (opt.online == OnlineAugmentation::positive_only &&
                                           item.label == Label::positive));
    if (augment)
        img = apply_augmentation(
            img, sample_augmentation(opt.seed, item.image_id, opt.epoch, *opt.ranges));
    return model_input(img, *opt.stats);
}

// Items land in fixed slots keyed by their index, so the worker count can
// never change the assembled batch.
Tensor assemble_batch(const std::vector<DatasetItem>& items,
                      const std::vector<std::size_t>& indices, std::size_t first,
                      std::size_t count, const LoadOptions& opt, std::vector<int>* labels) {
    Tensor batch({static_cast<std::int64_t>(count), 3, kModelInputSize, kModelInputSize});
    const std::int64_t stride = 3 * kModelInputSize * kModelInputSize;
    labels->resize(count);
    auto fill_slot = [&](std::size_t slot) {
        const DatasetItem& item = items[indices[first + slot]];
        Tensor t = load_item(item, opt);
        std::copy(t.data(), t.data() + stride, batch.data() + static_cast<std::int64_t>(slot) * stride);
        (*labels)[slot] = static_cast<int>(item.label);
    };
    const int workers = std::min<int>(opt.workers, static_cast<int>(count));
    if (workers <= 1) {
        for (std::size_t slot = 0; slot < count; ++slot) fill_slot(slot);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w]() {
                try {
                    for (std::size_t slot = static_cast<std::size_t>(w); slot < count;
                         slot += static_cast<std::size_t>(workers))
                        fill_slot(slot);
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                }
            });
        for (auto& t : pool) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    return batch;
}

struct EvalStats {
    double loss = 0.0;
    double accuracy = 0.0;
};

EvalStats evaluate(const ModelHandle& model, const ImageFolderDataset& data,
                   const LoadOptions& opt, int batch_size) {
    nn::NoGradGuard no_grad;
    nn::ForwardCtx ctx;  // eval mode
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    double loss_sum = 0.0;
    std::int64_t correct = 0;
    for (std::size_t first = 0; first < data.size(); first += static_cast<std::size_t>(batch_size)) {
        const std::size_t count = std::min<std::size_t>(batch_size, data.size() - first);
        std::vector<int> labels;
        Tensor batch = assemble_batch(data.items(), order, first, count, opt, &labels);
        NodeRef out = model.forward(nn::make_constant(batch), ctx);
        loss_sum += nll_loss(out, labels, Reduction::sum)->value[0];
        for (std::size_t i = 0; i < count; ++i) {
            const Scalar p_neg = out->value[static_cast<std::int64_t>(i) * 2];
            const Scalar p_pos = out->value[static_cast<std::int64_t>(i) * 2 + 1];
            const Label pred = p_pos > p_neg ? Label::positive : Label::negative;
            if (pred == static_cast<Label>(labels[i])) ++correct;
        }
    }
    EvalStats stats;
    stats.loss = loss_sum / static_cast<double>(data.size());
    stats.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    return stats;
}

}  // namespace

// ---------------------------------------------------------------------------
// training loop
// ---------------------------------------------------------------------------

TrainResult train(ModelHandle& model, const ImageFolderDataset& train_data,
                  const ImageFolderDataset& validation_data, const TrainConfig& config) {
    config.validate();
    if (train_data.empty()) fail(ErrorCode::EmptyDataset, "training dataset is empty");
    if (validation_data.empty()) fail(ErrorCode::EmptyDataset, "validation dataset is empty");

    auto optimizer = build_optimizer(config.optimizer, model.parameters(), config.learning_rate);

    LoadOptions train_opt;
    train_opt.stats = &config.normalization;
    train_opt.ranges = &config.augmentation;
    train_opt.online = config.online_augmentation;
    train_opt.training = true;
    train_opt.seed = config.global_seed;
    train_opt.workers = config.workers;
    LoadOptions eval_opt = train_opt;
    eval_opt.training = false;

    TrainResult result;
    result.best_validation_loss = std::numeric_limits<double>::infinity();
    int non_improving = 0;
    std::vector<TensorEntry> best_state;

    auto snapshot = [&]() {
        best_state.clear();
        for (const auto& p : model.parameters()) best_state.push_back({p.name, p.node->value.clone()});
        for (const auto& b : model.buffers()) best_state.push_back({b.name, b.tensor.clone()});
    };
    auto restore = [&]() {
        std::size_t i = 0;
        for (auto& p : model.parameters()) {
            const Tensor& saved = best_state[i++].tensor;
            std::copy(saved.data(), saved.data() + saved.size(), p.node->value.data());
        }
        for (auto& b : model.buffers()) {
            const Tensor& saved = best_state[i++].tensor;
            std::copy(saved.data(), saved.data() + saved.size(), b.tensor.data());
        }
    };

    std::vector<std::size_t> order(train_data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        train_opt.epoch = epoch;
        CounterRng shuffle_rng(hash_combine(hash_string(config.global_seed, "epoch_order"),
                                            static_cast<std::uint64_t>(epoch)));
        deterministic_shuffle(order, shuffle_rng);

        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t first = 0; first < train_data.size();
             first += static_cast<std::size_t>(config.batch_size), ++batch_index) {
            const std::size_t count =
                std::min<std::size_t>(config.batch_size, train_data.size() - first);
            std::vector<int> labels;
            Tensor batch = assemble_batch(train_data.items(), order, first, count, train_opt, &labels);
            CounterRng forward_rng(
                hash_combine(hash_combine(hash_string(config.global_seed, "forward"),
                                          static_cast<std::uint64_t>(epoch)),
                             batch_index));
            nn::ForwardCtx ctx;
            ctx.training = true;
            ctx.rng = &forward_rng;
            NodeRef out = model.forward(nn::make_leaf(batch, false), ctx);
            NodeRef loss = nll_loss(out, labels, Reduction::mean);
            loss_sum += loss->value[0] * static_cast<double>(count);
            optimizer->zero_grad();
            // a fully frozen model yields a constant loss; nothing to do
            if (loss->requires_grad) nn::backward(loss);
            optimizer->step();
        }
        const double train_loss = loss_sum / static_cast<double>(train_data.size());

        const EvalStats val = evaluate(model, validation_data, eval_opt, config.batch_size);
        if (!std::isfinite(train_loss) || !std::isfinite(val.loss))
            fail(ErrorCode::DivergedTraining,
                 "non-finite loss at epoch " + std::to_string(epoch) + " (train=" +
                     std::to_string(train_loss) + ", val=" + std::to_string(val.loss) + ")");

        result.history.push_back({epoch, train_loss, val.loss, val.accuracy});
        result.epochs_run = epoch;

        if (val.loss < result.best_validation_loss) {
            result.best_validation_loss = val.loss;
            result.best_epoch = epoch;
            non_improving = 0;
            snapshot();
        } else if (++non_improving >= config.patience) {
            break;
        }
    }

    if (result.best_epoch > 0) restore();

    json meta;
    meta["epochs_run"] = result.epochs_run;
    meta["best_epoch"] = result.best_epoch;
    meta["best_validation_loss"] =
        std::isfinite(result.best_validation_loss) ? result.best_validation_loss : 0.0;
    meta["optimizer"] = json::parse(optimizer->state_json());
    json hist = json::array();
    for (const auto& row : result.history)
        hist.push_back({{"epoch", row.epoch},
                        {"train_loss", row.train_loss},
                        {"val_loss", row.validation_loss},
                        {"val_accuracy", row.validation_accuracy}});
    meta["history"] = std::move(hist);
    result.best_checkpoint = make_checkpoint(model, meta.dump());
    return result;
}

// ---------------------------------------------------------------------------
// prediction
// ---------------------------------------------------------------------------

std::vector<PredictionRecord> predict(const ModelHandle& model, const ImageFolderDataset& dataset,
                                      const NormalizationStats& stats,
                                      const std::filesystem::path& output_csv, int batch_size,
                                      int workers) {
    LoadOptions opt;
    opt.stats = &stats;
    opt.workers = workers;
    nn::NoGradGuard no_grad;
    nn::ForwardCtx ctx;
    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<PredictionRecord> records;
    records.reserve(dataset.size());
    for (std::size_t first = 0; first < dataset.size();
         first += static_cast<std::size_t>(batch_size)) {
        const std::size_t count = std::min<std::size_t>(batch_size, dataset.size() - first);
        std::vector<int> labels;
        Tensor batch = assemble_batch(dataset.items(), order, first, count, opt, &labels);
        NodeRef out = model.forward(nn::make_constant(batch), ctx);
        for (std::size_t i = 0; i < count; ++i) {
            const DatasetItem& item = dataset.items()[first + i];
            PredictionRecord r;
            r.filename = item.filename;
            r.p_negative = std::exp(out->value[static_cast<std::int64_t>(i) * 2]);
            r.p_positive = std::exp(out->value[static_cast<std::int64_t>(i) * 2 + 1]);
            r.true_label = item.label;
            records.push_back(std::move(r));
        }
    }
    if (!output_csv.empty()) write_predictions_csv(records, output_csv);
    return records;
}

// ---------------------------------------------------------------------------
// CSV formats
// ---------------------------------------------------------------------------

namespace {
std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}
}  // namespace

std::string predictions_to_csv(const std::vector<PredictionRecord>& records) {
    bool with_labels = !records.empty();
    for (const auto& r : records)
        if (!r.true_label) with_labels = false;
    std::string out = with_labels ? "filename,p_negative,p_positive,true_label\n"
                                  : "filename,p_negative,p_positive\n";
    std::vector<const PredictionRecord*> sorted;
    sorted.reserve(records.size());
    for (const auto& r : records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(),
              [](const PredictionRecord* a, const PredictionRecord* b) {
                  return a->filename < b->filename;
              });
    for (const auto* r : sorted) {
        out += r->filename;
        out += ',';
        out += fmt6(r->p_negative);
        out += ',';
        out += fmt6(r->p_positive);
        if (with_labels) {
            out += ',';
            out += std::to_string(static_cast<int>(*r->true_label));
        }
        out += '\n';
    }
    return out;
}

void write_predictions_csv(const std::vector<PredictionRecord>& records,
                           const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IOFailure, "cannot write predictions " + path.string());
    out << predictions_to_csv(records);
}

std::string history_to_csv(const std::vector<EpochRecord>& history) {
    std::string out = "epoch,train_loss,val_loss,val_accuracy\n";
    for (const auto& row : history) {
        out += std::to_string(row.epoch);
        out += ',';
        out += fmt6(row.train_loss);
        out += ',';
        out += fmt6(row.validation_loss);
        out += ',';
        out += fmt6(row.validation_accuracy);
        out += '\n';
    }
    return out;
}

void write_history_csv(const std::vector<EpochRecord>& history,
                       const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IOFailure, "cannot write history " + path.string());
    out << history_to_csv(history);
}

}  // namespace wastebench
