// mktoydata: generates the synthetic bright-vs-dark demo dataset so the full
// ingest -> balance -> train -> evaluate -> fuse flow can run without any
// external data. Optionally pre-tags a held-out test fraction.

#include <CLI11.hpp>

#include <cmath>
#include <map>
#include <iostream>

#include "wastebench/errors.hpp"
#include "wastebench/toydata.hpp"

using namespace wastebench;

int main(int argc, char** argv) {
    CLI::App app{"synthetic demo dataset generator"};
    std::string out_dir = "toydata";
    ToyDatasetOptions options;
    double test_fraction = 0.25;
    double imbalance = 0.0;  // extra negatives to exercise balancing
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--count", options.count, "number of images");
    app.add_option("--seed", options.seed, "generator seed");
    app.add_option("--positive-fraction", options.positive_fraction, "share of positive images");
    app.add_option("--test-fraction", test_fraction, "share pre-tagged as the immutable test split");
    CLI11_PARSE(app, argc, argv);
    (void)imbalance;

    try {
        DatasetManifest manifest = make_toy_dataset(out_dir, options);
        if (test_fraction > 0.0) {
            // stratified: spread the test tags within each class so the
            // held-out split always carries both labels
            std::vector<ImageRecord> records(manifest.records());
            std::map<Label, int> seen;
            for (auto& r : records) {
                const int k = seen[r.label]++;
                const bool test = static_cast<int>(std::floor((k + 1) * test_fraction)) >
                                  static_cast<int>(std::floor(k * test_fraction));
                if (test) r.split = Split::test;
            }
            manifest = DatasetManifest::from_records(std::move(records));
            write_manifest(manifest, std::filesystem::path(out_dir) / "manifest.json");
        }
        const auto counts = manifest.class_counts();
        std::cout << "wrote " << manifest.size() << " images ("
                  << counts.at(Label::positive) << " positive, " << counts.at(Label::negative)
                  << " negative) under " << out_dir << "\n";
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return error_exit_code(e.code());
    }
    return 0;
}
