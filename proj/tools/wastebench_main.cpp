// wastebench: command line front end for the landfill-classification
// benchmark harness. Subcommands compose through files: ingest builds the
// dataset tree, balance equalizes the training classes, train produces
// checkpoints and prediction CSVs, evaluate/fuse/report consume them.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "wastebench/config.hpp"
#include "wastebench/dataset.hpp"
#include "wastebench/errors.hpp"
#include "wastebench/fusion.hpp"
#include "wastebench/manifest.hpp"
#include "wastebench/metrics.hpp"
#include "wastebench/models.hpp"
#include "wastebench/pipeline.hpp"
#include "wastebench/trainer.hpp"

namespace fs = std::filesystem;
using namespace wastebench;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IOFailure, "cannot write " + path.string());
    out << text;
}

RunConfig load_config(const std::string& config_path) {
    if (config_path.empty())
        fail(ErrorCode::InvalidConfig, "--config is required");
    return RunConfig::load(config_path);
}

fs::path dataset_root(const RunConfig& config) { return config.paths.output_root / "dataset"; }

DatasetManifest load_working_manifest(const RunConfig& config) {
    const fs::path path = dataset_root(config) / "manifest.json";
    if (!fs::exists(path))
        fail(ErrorCode::MissingFile,
             "no ingested dataset at " + path.string() + " (run `wastebench ingest` first)");
    return parse_manifest(path);
}

void dump_resolved_config(const RunConfig& config, const fs::path& dir) {
    write_text(dir / "resolved_config.json", config.to_json());
}

// ---------------------------------------------------------------------------

int cmd_ingest(const RunConfig& config) {
    if (config.paths.manifest.empty())
        fail(ErrorCode::InvalidConfig, "config key 'paths.manifest' is required for ingest");
    if (config.paths.data_root.empty())
        fail(ErrorCode::InvalidConfig, "config key 'paths.data_root' is required for ingest");

    DatasetManifest manifest = parse_manifest(config.paths.manifest);
    if (!config.paths.corrections.empty()) {
        const auto corrections = parse_corrections(config.paths.corrections);
        CorrectionResult corrected = apply_corrections(manifest, corrections);
        manifest = std::move(corrected.manifest);
        std::string audit;
        for (const auto& row : corrected.audit)
            audit += row.image_id + ": " + to_string(row.old_label) + " -> " +
                     to_string(row.new_label) + (row.note.empty() ? "" : " (" + row.note + ")") +
                     "\n";
        write_text(config.paths.output_root / "corrections_audit.log", audit);
        std::cout << "applied " << corrected.audit.size() << " label corrections\n";
    }

    SplitPlan plan = make_splits(manifest, config.split.validation_fraction, config.split.seed);
    for (const auto& warning : plan.warnings) std::cerr << "warning: " << warning << "\n";

    const fs::path root = dataset_root(config);
    MaterializeSummary summary = materialize(manifest, plan, config.paths.data_root, root);

    // working manifest: splits applied, paths relative to the dataset tree
    std::vector<ImageRecord> rerooted;
    for (const auto& r : manifest.records()) {
        ImageRecord nr = r;
        nr.split = plan.assignments.at(r.image_id);
        std::string ext = fs::path(r.path).extension().string();
        if (ext.empty()) ext = ".png";
        nr.path = std::string(to_string(nr.split)) + "/" + to_string(nr.label) + "/" +
                  nr.image_id + ext;
        rerooted.push_back(std::move(nr));
    }
    DatasetManifest working = DatasetManifest::from_records(std::move(rerooted));
    write_manifest(working, root / "manifest.json");
    write_split_plan(plan, config.paths.output_root / "split_plan.json");

    const SummaryReport report = summarize(working);
    write_text(config.paths.output_root / "ingest_summary.json", report.to_json());
    dump_resolved_config(config, config.paths.output_root);
    std::cout << report.to_text();
    std::cout << "materialized " << summary.files_written << " files ("
              << summary.files_already_present << " already present) under " << root.string()
              << "\n";
    return 0;
}

int cmd_balance(const RunConfig& config, bool plan_only) {
    DatasetManifest manifest = load_working_manifest(config);
    BalancePlan plan = balance(manifest);
    write_balance_plan(plan, config.paths.output_root / "balance_plan.json");
    std::cout << "minority class: " << to_string(plan.minority_label) << ", target "
              << plan.target_count << ", planned copies " << plan.total_copies() << "\n";
    if (plan_only) return 0;

    BalanceExecution exec = execute_balance_plan(manifest, plan, dataset_root(config),
                                                 config.train.global_seed,
                                                 config.pipeline.augmentation);
    write_manifest(exec.manifest, dataset_root(config) / "manifest.json");
    const SummaryReport report = summarize(exec.manifest);
    write_text(config.paths.output_root / "balance_summary.json", report.to_json());
    std::cout << "wrote " << exec.files_written << " augmented copies\n" << report.to_text();
    return 0;
}

ModelHandle build_from_cli(const RunConfig& config, const std::string& model_name,
                           int freeze_override, std::uint64_t seed) {
    ModelHandle handle;
    if (model_name == "parallel_ensemble" || config.model.ensemble) {
        handle = build_parallel_ensemble(config.ensemble_spec(), config.weights_source(), seed);
    } else {
        ModelSpec spec = config.model_spec();
        if (!model_name.empty()) spec.architecture = architecture_from_string(model_name);
        handle = build_model(spec, config.weights_source(), seed);
    }
    if (freeze_override >= 0) freeze_prefix(handle, freeze_override);
    return handle;
}

int run_single_training(const RunConfig& config, const std::string& model_name,
                        OptimizerKind optimizer, std::uint64_t seed, int freeze_override,
                        int epochs_override) {
    DatasetManifest manifest = load_working_manifest(config);
    const fs::path root = dataset_root(config);
    ImageFolderDataset train_data = ImageFolderDataset::from_manifest(manifest, root, Split::train);
    ImageFolderDataset val_data =
        ImageFolderDataset::from_manifest(manifest, root, Split::validation);

    ModelHandle model = build_from_cli(config, model_name, freeze_override, seed);

    TrainConfig train_config = config.train_config();
    train_config.optimizer.kind = optimizer;
    train_config.global_seed = seed;
    if (epochs_override >= 0) {
        train_config.max_epochs = epochs_override;
        train_config.patience = std::min(train_config.patience, epochs_override);
    }

    const fs::path run_dir = config.paths.output_root / model.name() / to_string(optimizer) /
                             std::to_string(seed);
    fs::create_directories(run_dir);

    std::cout << "training " << model.name() << " (" << model.trainable_parameter_count() << "/"
              << model.parameter_count() << " trainable params) with " << to_string(optimizer)
              << ", seed " << seed << "\n";
    TrainResult result = train(model, train_data, val_data, train_config);

    save_checkpoint(result.best_checkpoint, run_dir / "checkpoint.wbck");
    write_history_csv(result.history, run_dir / "history.csv");
    write_text(run_dir / "model_layers.txt", describe(model));

    RunConfig resolved = config;
    resolved.train.optimizer = to_string(optimizer);
    resolved.train.global_seed = seed;
    dump_resolved_config(resolved, run_dir);

    ImageFolderDataset test_data = ImageFolderDataset::from_manifest(manifest, root, Split::test);
    const ImageFolderDataset& predict_data = test_data.empty() ? val_data : test_data;
    const char* predict_split = test_data.empty() ? "validation" : "test";
    predict(model, predict_data, train_config.normalization,
            run_dir / (std::string("predictions_") + predict_split + ".csv"),
            train_config.batch_size, train_config.workers);

    std::cout << "ran " << result.epochs_run << " epochs, best epoch " << result.best_epoch
              << " (val loss " << result.best_validation_loss << "); artifacts in "
              << run_dir.string() << "\n";
    return 0;
}

int cmd_train(const RunConfig& config, const std::string& model_name,
              const std::string& optimizer_name, std::uint64_t seed, int freeze_override,
              int epochs_override) {
    if (optimizer_name == "all") {
        for (OptimizerKind kind : all_optimizer_kinds()) {
            const int rc = run_single_training(config, model_name, kind, seed, freeze_override,
                                               epochs_override);
            if (rc != 0) return rc;
        }
        return 0;
    }
    const OptimizerKind kind = optimizer_name.empty()
                                   ? optimizer_kind_from_string(config.train.optimizer)
                                   : optimizer_kind_from_string(optimizer_name);
    return run_single_training(config, model_name, kind, seed, freeze_override, epochs_override);
}

int cmd_predict(const RunConfig& config, const std::string& checkpoint_path,
                const std::string& split_name, const std::string& out_path) {
    const auto split = split_from_string(split_name);
    if (!split) fail(ErrorCode::InvalidConfig, "unknown split '" + split_name + "'");
    Checkpoint checkpoint = load_checkpoint(checkpoint_path);
    ModelHandle model = restore_model(checkpoint);
    DatasetManifest manifest = load_working_manifest(config);
    ImageFolderDataset data =
        ImageFolderDataset::from_manifest(manifest, dataset_root(config), *split);
    if (data.empty()) fail(ErrorCode::EmptyDataset, "no records in split " + split_name);
    const fs::path out = out_path.empty()
                             ? config.paths.output_root / ("predictions_" + split_name + ".csv")
                             : fs::path(out_path);
    fs::create_directories(out.parent_path().empty() ? fs::path(".") : out.parent_path());
    predict(model, data, config.pipeline.normalization, out, config.train.batch_size,
            config.train.workers);
    std::cout << "wrote " << out.string() << " (" << data.size() << " rows)\n";
    return 0;
}

void evaluate_one(const RunConfig& config, const fs::path& predictions_path,
                  const std::string& baseline_name) {
    const auto records = load_prediction_file(predictions_path);
    const DecisionRule rule = config.decision_rule();
    const ClassReport report = evaluate_predictions(records, rule);

    const fs::path dir = config.paths.output_root / "evaluation" / predictions_path.stem().string();
    fs::create_directories(dir);
    write_text(dir / "report.json", report.to_json());
    write_text(dir / "report.txt", report.to_text());

    const RocCurve roc_pos = roc_points(records, Label::positive);
    const RocCurve roc_neg = roc_points(records, Label::negative);
    const RocCurve roc_mic = micro_roc(records);
    const RocCurve roc_mac = macro_roc(records);
    write_text(dir / "roc_positive.csv", roc_csv(roc_pos));
    write_text(dir / "roc_negative.csv", roc_csv(roc_neg));
    write_text(dir / "roc_micro.csv", roc_csv(roc_mic));
    write_text(dir / "roc_macro.csv", roc_csv(roc_mac));

    const double auc_pos = auc(roc_pos), auc_neg = auc(roc_neg);
    const double auc_micro_v = auc(roc_mic), auc_macro_v = auc(roc_mac);
    std::string auc_json = "{\n  \"positive\": " + std::to_string(auc_pos) +
                           ",\n  \"negative\": " + std::to_string(auc_neg) +
                           ",\n  \"micro\": " + std::to_string(auc_micro_v) +
                           ",\n  \"macro\": " + std::to_string(auc_macro_v) + "\n}\n";
    write_text(dir / "auc.json", auc_json);
    write_text(dir / "roc.svg",
               roc_svg({{"positive", roc_pos, auc_pos},
                        {"negative", roc_neg, auc_neg},
                        {"micro_average", roc_mic, auc_micro_v},
                        {"macro_average", roc_mac, auc_macro_v}}));

    std::cout << predictions_path.filename().string() << ":\n" << report.to_text();
    std::cout << "AUC positive " << auc_pos << ", negative " << auc_neg << ", micro "
              << auc_micro_v << ", macro " << auc_macro_v << "\n";

    if (!baseline_name.empty()) {
        if (config.paths.baselines.empty())
            fail(ErrorCode::InvalidConfig,
                 "config key 'paths.baselines' is required for baseline comparison");
        const BaselineTable table = BaselineTable::load(config.paths.baselines);
        WeightedMetrics computed;
        if (config.report.baseline_values == "positive") {
            const ClassMetrics& m = report.positive;
            computed = {m.accuracy, m.precision, m.sensitivity, m.specificity, m.f1, m.support};
        } else {
            computed = report.weighted;
        }
        const BaselineComparison cmp =
            compare_to_baseline(computed, table, baseline_name, config.report.tolerance_pp);
        write_text(dir / "baseline_comparison.json", cmp.to_json());
        write_text(dir / "baseline_comparison.txt", cmp.to_text());
        std::cout << cmp.to_text();
    }
}

int cmd_evaluate(const RunConfig& config, const std::vector<std::string>& prediction_files,
                 const std::string& baseline_name) {
    for (const auto& file : prediction_files) evaluate_one(config, file, baseline_name);
    return 0;
}

int cmd_fuse(const RunConfig& config, const std::vector<std::string>& inputs,
             std::vector<std::string> names, const std::string& out_path,
             bool allow_intersection) {
    if (names.empty())
        for (const auto& input : inputs) names.push_back(fs::path(input).stem().string());
    std::vector<std::vector<PredictionRecord>> files;
    files.reserve(inputs.size());
    for (const auto& input : inputs) files.push_back(load_prediction_file(input));

    AlignedPredictions aligned = align(files, names, allow_intersection);
    for (const auto& dropped : aligned.dropped)
        std::cerr << "dropped (not in every file): " << dropped << "\n";
    std::vector<PredictionRecord> fused = average_fuse(aligned);

    const fs::path out = out_path.empty() ? config.paths.output_root / "fused_predictions.csv"
                                          : fs::path(out_path);
    fs::create_directories(out.parent_path().empty() ? fs::path(".") : out.parent_path());
    write_predictions_csv(fused, out);
    std::vector<fs::path> input_paths(inputs.begin(), inputs.end());
    write_text(out.parent_path() / (out.stem().string() + "_manifest.json"),
               fusion_manifest_json(input_paths, names, out, aligned.dropped));
    std::cout << "fused " << inputs.size() << " files over " << fused.size() << " images -> "
              << out.string() << "\n";

    bool labeled = !fused.empty();
    for (const auto& r : fused)
        if (!r.true_label) labeled = false;
    if (labeled) {
        const ClassReport report = evaluate_fused(fused, config.decision_rule());
        write_text(out.parent_path() / (out.stem().string() + "_report.json"), report.to_json());
        write_text(out.parent_path() / (out.stem().string() + "_report.txt"), report.to_text());
        std::cout << report.to_text();
    }
    return 0;
}

int cmd_report(const RunConfig& config) {
    // scan <output_root>/<model>/<optimizer>/<seed>/predictions_*.csv
    struct Row {
        std::string model, optimizer, seed;
        ClassReport report;
    };
    std::vector<Row> rows;
    const fs::path root = config.paths.output_root;
    if (!fs::exists(root)) fail(ErrorCode::MissingFile, "output root " + root.string() + " not found");
    for (const auto& model_dir : fs::directory_iterator(root)) {
        if (!model_dir.is_directory()) continue;
        for (const auto& opt_dir : fs::directory_iterator(model_dir.path())) {
            if (!opt_dir.is_directory()) continue;
            for (const auto& seed_dir : fs::directory_iterator(opt_dir.path())) {
                if (!seed_dir.is_directory()) continue;
                for (const auto& f : fs::directory_iterator(seed_dir.path())) {
                    const std::string name = f.path().filename().string();
                    if (name.rfind("predictions_", 0) != 0 || f.path().extension() != ".csv")
                        continue;
                    Row row;
                    row.model = model_dir.path().filename().string();
                    row.optimizer = opt_dir.path().filename().string();
                    row.seed = seed_dir.path().filename().string();
                    row.report =
                        evaluate_predictions(load_prediction_file(f.path()), config.decision_rule());
                    rows.push_back(std::move(row));
                }
            }
        }
    }
    if (rows.empty()) {
        std::cout << "no completed runs under " << root.string() << "\n";
        return 0;
    }
    std::ostringstream text;
    std::ostringstream jsonl;
    text << "model                optimizer           seed  acc    prec   sens   f1     spec\n";
    for (const auto& row : rows) {
        char buf[256];
        const WeightedMetrics& w = row.report.weighted;
        std::snprintf(buf, sizeof(buf), "%-20s %-18s %-5s %6.2f %6.2f %6.2f %6.2f %6.2f\n",
                      row.model.c_str(), row.optimizer.c_str(), row.seed.c_str(),
                      w.accuracy * 100, w.precision * 100, w.sensitivity * 100, w.f1 * 100,
                      w.specificity * 100);
        text << buf;
        jsonl << "{\"model\":\"" << row.model << "\",\"optimizer\":\"" << row.optimizer
              << "\",\"seed\":" << row.seed << ",\"accuracy\":" << w.accuracy * 100
              << ",\"precision\":" << w.precision * 100 << ",\"sensitivity\":" << w.sensitivity * 100
              << ",\"f1\":" << w.f1 * 100 << ",\"specificity\":" << w.specificity * 100 << "}\n";
    }
    write_text(root / "runs_report.txt", text.str());
    write_text(root / "runs_report.jsonl", jsonl.str());
    std::cout << text.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"landfill-classification benchmark harness"};
    app.require_subcommand(1);

    std::string config_path;
    auto add_config_option = [&config_path](CLI::App* sub) {
        sub->add_option("--config", config_path, "run configuration JSON")
            ->envname("WASTEBENCH_CONFIG");
    };

    auto* ingest = app.add_subcommand("ingest", "parse manifest, correct labels, split, materialize");

    auto* balance_cmd = app.add_subcommand("balance", "equalize training class counts");
    bool plan_only = false;
    balance_cmd->add_flag("--plan-only", plan_only, "write the plan without executing it");

    auto* train_cmd = app.add_subcommand("train", "train a model and export predictions");
    std::string model_name, optimizer_name;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int freeze_override = -1, epochs_override = -1;
    train_cmd->add_option("--model", model_name,
                          "architecture name or 'parallel_ensemble' (default: config)");
    train_cmd->add_option("--optimizer", optimizer_name, "optimizer kind or 'all'");
    train_cmd->add_option("--seed", seed, "global seed (default: config)")
        ->each([&](const std::string&) { seed_set = true; });
    train_cmd->add_option("--freeze", freeze_override, "freeze the first N parameterized layers");
    train_cmd->add_option("--epochs", epochs_override, "override max_epochs");

    auto* predict_cmd = app.add_subcommand("predict", "run a checkpoint over a split");
    std::string checkpoint_path, split_name = "test", predict_out;
    predict_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint archive")->required();
    predict_cmd->add_option("--split", split_name, "train|validation|test (default test)");
    predict_cmd->add_option("--out", predict_out, "output CSV path");

    auto* evaluate_cmd = app.add_subcommand("evaluate", "metrics, ROC and baseline comparison");
    std::vector<std::string> prediction_files;
    std::string baseline_name;
    evaluate_cmd->add_option("--predictions", prediction_files, "prediction CSV files")
        ->required()
        ->expected(-1);
    evaluate_cmd->add_option("--baseline", baseline_name, "baseline table entry to compare against");

    auto* fuse_cmd = app.add_subcommand("fuse", "average class probabilities across models");
    std::vector<std::string> fuse_inputs, fuse_names;
    std::string fuse_out;
    bool allow_intersection = false;
    fuse_cmd->add_option("--inputs", fuse_inputs, "prediction CSV files (>= 2)")
        ->required()
        ->expected(-1);
    fuse_cmd->add_option("--names", fuse_names, "model names for provenance (default: file stems)");
    fuse_cmd->add_option("--out", fuse_out, "fused CSV path");
    fuse_cmd->add_flag("--allow-intersection", allow_intersection,
                       "fuse the common filename subset instead of failing on mismatch");

    auto* report_cmd = app.add_subcommand("report", "tabulate all completed runs");

    for (CLI::App* sub : {ingest, balance_cmd, train_cmd, predict_cmd, evaluate_cmd, fuse_cmd,
                          report_cmd})
        add_config_option(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        const RunConfig config = load_config(config_path);
        if (ingest->parsed()) return cmd_ingest(config);
        if (balance_cmd->parsed()) return cmd_balance(config, plan_only);
        if (train_cmd->parsed())
            return cmd_train(config, model_name, optimizer_name,
                             seed_set ? seed : config.train.global_seed, freeze_override,
                             epochs_override);
        if (predict_cmd->parsed()) return cmd_predict(config, checkpoint_path, split_name, predict_out);
        if (evaluate_cmd->parsed()) return cmd_evaluate(config, prediction_files, baseline_name);
        if (fuse_cmd->parsed())
            return cmd_fuse(config, fuse_inputs, fuse_names, fuse_out, allow_intersection);
        if (report_cmd->parsed()) return cmd_report(config);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return error_exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
