#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "test_support.hpp"
#include "wastebench/config.hpp"
#include "wastebench/errors.hpp"
#include "wastebench/fusion.hpp"
#include "wastebench/toydata.hpp"

using namespace wastebench;
using testsupport::TempDir;

TEST_SUITE_BEGIN("config_cli");

namespace {

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int run_cli(const std::string& args, const std::filesystem::path& log) {
    const std::string cmd =
        std::string(WASTEBENCH_CLI_PATH) + " " + args + " >" + log.string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("config: defaults parse and round trip through the resolved dump") {
    RunConfig defaults;
    const std::string dump = defaults.to_json();
    RunConfig reparsed = RunConfig::from_json_text(dump, "dump");
    CHECK(reparsed.to_json() == dump);
    CHECK(reparsed.train.batch_size == 64);
    CHECK(reparsed.train.learning_rate == doctest::Approx(1e-4));
    CHECK(reparsed.train.max_epochs == 100);
    CHECK(reparsed.train.patience == 20);
    CHECK(reparsed.train.folds == 1);
    CHECK(reparsed.train.input_channels == 3);
    CHECK(reparsed.pipeline.normalization.mean[0] == doctest::Approx(0.3201));
    CHECK(reparsed.pipeline.normalization.mean[1] == doctest::Approx(0.3334));
    CHECK(reparsed.pipeline.normalization.mean[2] == doctest::Approx(0.2832));
    CHECK(reparsed.pipeline.normalization.std[0] == doctest::Approx(0.2004));
    CHECK(reparsed.pipeline.normalization.std[1] == doctest::Approx(0.1818));
    CHECK(reparsed.pipeline.normalization.std[2] == doctest::Approx(0.1764));
}

TEST_CASE("config: the committed default config file matches the built-in defaults") {
    const auto path = std::filesystem::path(WASTEBENCH_SOURCE_DIR) / "data/config.default.json";
    REQUIRE(std::filesystem::exists(path));
    CHECK(slurp(path) == RunConfig{}.to_json());
}

TEST_CASE("config: unknown keys and wrong types are rejected") {
    CHECK_THROWS_AS(RunConfig::from_json_text(R"({"trian": {}})", "x"), Error);
    CHECK_THROWS_AS(RunConfig::from_json_text(R"({"train": {"batchsize": 4}})", "x"), Error);
    CHECK_THROWS_AS(RunConfig::from_json_text(R"({"train": {"batch_size": "four"}})", "x"), Error);
    CHECK_THROWS_AS(RunConfig::from_json_text(R"({"model": {"architecture": "resnet999"}})", "x"),
                    Error);
    CHECK_THROWS_AS(RunConfig::from_json_text(R"({"train": {"optimizer": "adagrad"}})", "x"),
                    Error);
    CHECK_THROWS_AS(
        RunConfig::from_json_text(R"({"split": {"validation_fraction": 1.5}})", "x"), Error);
}

TEST_CASE("config: environment variables override paths only") {
    setenv("WASTEBENCH_OUTPUT_ROOT", "/tmp/wb_env_override", 1);
    RunConfig config = RunConfig::from_json_text(R"({"paths": {"output_root": "ignored"}})", "x");
    CHECK(config.paths.output_root == std::filesystem::path("/tmp/wb_env_override"));
    unsetenv("WASTEBENCH_OUTPUT_ROOT");
}

TEST_CASE("error codes map to the stable exit-code classes") {
    CHECK(error_exit_code(ErrorCode::MissingFile) == 1);
    CHECK(error_exit_code(ErrorCode::IOFailure) == 1);
    CHECK(error_exit_code(ErrorCode::MissingImageFile) == 1);
    CHECK(error_exit_code(ErrorCode::DivergedTraining) == 3);
    CHECK(error_exit_code(ErrorCode::SchemaViolation) == 2);
    CHECK(error_exit_code(ErrorCode::FilenameMismatch) == 2);
    CHECK(error_exit_code(ErrorCode::InvalidConfig) == 2);
}

TEST_CASE("cli: missing config and bad verbs exit 2") {
    TempDir dir("cli");
    CHECK(run_cli("ingest", dir.path() / "log1.txt") == 2);
    CHECK(run_cli("frobnicate --config x.json", dir.path() / "log2.txt") == 2);
    // config naming a missing manifest: validation error, names the key
    std::ofstream(dir.path() / "cfg.json") << R"({"paths": {"output_root": ")"
                                           << (dir.path() / "out").string() << R"("}})";
    CHECK(run_cli("ingest --config " + (dir.path() / "cfg.json").string(),
                  dir.path() / "log3.txt") == 2);
    CHECK(slurp(dir.path() / "log3.txt").find("paths.manifest") != std::string::npos);
}

TEST_CASE("cli: ingest/balance on the toy dataset, then evaluate and fuse") {
    TempDir dir("cliflow");
    ToyDatasetOptions options;
    options.count = 24;
    DatasetManifest manifest = make_toy_dataset(dir.path() / "raw", options);
    (void)manifest;

    std::ofstream(dir.path() / "cfg.json") << R"({
        "paths": {
            "manifest": ")" << (dir.path() / "raw/manifest.json").string() << R"(",
            "data_root": ")" << (dir.path() / "raw").string() << R"(",
            "output_root": ")" << (dir.path() / "out").string() << R"("
        },
        "split": {"validation_fraction": 0.25, "seed": 9}
    })";
    // one stale-proof correction: flip a known record and expect an audit row
    {
        const DatasetManifest raw = parse_manifest(dir.path() / "raw/manifest.json");
        const ImageRecord& first = raw.records().front();
        std::ofstream(dir.path() / "corrections.json")
            << "[{\"id\": \"" << first.image_id << "\", \"old_label\": "
            << static_cast<int>(first.label) << ", \"new_label\": "
            << (1 - static_cast<int>(first.label)) << ", \"note\": \"review\"}]";
    }
    const std::string cfg = " --config " + (dir.path() / "cfg.json").string();

    setenv("WASTEBENCH_CORRECTIONS", (dir.path() / "corrections.json").string().c_str(), 1);
    const int ingest_rc = run_cli("ingest" + cfg, dir.path() / "ingest.log");
    unsetenv("WASTEBENCH_CORRECTIONS");
    CHECK(ingest_rc == 0);
    CHECK(std::filesystem::exists(dir.path() / "out/corrections_audit.log"));
    CHECK(slurp(dir.path() / "out/corrections_audit.log").find("review") != std::string::npos);
    CHECK(std::filesystem::exists(dir.path() / "out/dataset/manifest.json"));
    CHECK(std::filesystem::exists(dir.path() / "out/split_plan.json"));
    CHECK(std::filesystem::exists(dir.path() / "out/ingest_summary.json"));
    CHECK(std::filesystem::exists(dir.path() / "out/resolved_config.json"));

    // resolved dump re-feeds as a valid config
    RunConfig resolved = RunConfig::load(dir.path() / "out/resolved_config.json");
    CHECK(resolved.split.seed == 9);

    CHECK(run_cli("balance" + cfg, dir.path() / "balance.log") == 0);
    CHECK(std::filesystem::exists(dir.path() / "out/balance_plan.json"));

    // craft two prediction files over the same filenames and fuse them
    std::ofstream(dir.path() / "p1.csv") << "filename,p_negative,p_positive,true_label\n"
                                            "a.png,0.200000,0.800000,1\n"
                                            "b.png,0.900000,0.100000,0\n";
    std::ofstream(dir.path() / "p2.csv") << "filename,p_negative,p_positive,true_label\n"
                                            "a.png,0.400000,0.600000,1\n"
                                            "b.png,0.700000,0.300000,0\n";
    CHECK(run_cli("fuse" + cfg + " --inputs " + (dir.path() / "p1.csv").string() + " " +
                      (dir.path() / "p2.csv").string(),
                  dir.path() / "fuse.log") == 0);
    const auto fused = load_prediction_file(dir.path() / "out/fused_predictions.csv");
    REQUIRE(fused.size() == 2);
    CHECK(fused[0].p_positive == doctest::Approx(0.7).epsilon(1e-6));
    CHECK(std::filesystem::exists(dir.path() / "out/fused_predictions_report.txt"));

    CHECK(run_cli("evaluate" + cfg + " --predictions " + (dir.path() / "p1.csv").string(),
                  dir.path() / "eval.log") == 0);
    CHECK(std::filesystem::exists(dir.path() / "out/evaluation/p1/report.json"));
    CHECK(std::filesystem::exists(dir.path() / "out/evaluation/p1/roc_positive.csv"));
    CHECK(std::filesystem::exists(dir.path() / "out/evaluation/p1/roc.svg"));

    // mismatched filename sets exit 2 and print the symmetric difference
    std::ofstream(dir.path() / "p3.csv") << "filename,p_negative,p_positive\n"
                                            "a.png,0.400000,0.600000\n"
                                            "zz.png,0.700000,0.300000\n";
    CHECK(run_cli("fuse" + cfg + " --inputs " + (dir.path() / "p1.csv").string() + " " +
                      (dir.path() / "p3.csv").string(),
                  dir.path() / "fusebad.log") == 2);
    const std::string log = slurp(dir.path() / "fusebad.log");
    CHECK(log.find("zz.png") != std::string::npos);
    CHECK(log.find("b.png") != std::string::npos);
}

TEST_SUITE_END();
