#pragma once

#include <cstdint>
#include <filesystem>

#include "wastebench/manifest.hpp"

namespace wastebench {

// Synthetic bright-vs-dark patch dataset for desk-scale runs: positives are
// bright textured tiles, negatives dark ones, linearly separable by mean
// intensity. Writes PNGs under dir/images/ plus dir/manifest.json and
// returns the manifest.
struct ToyDatasetOptions {
    int count = 64;
    double positive_fraction = 0.5;
    std::uint64_t seed = 7;
    int image_size = 256;
};

DatasetManifest make_toy_dataset(const std::filesystem::path& dir,
                                 const ToyDatasetOptions& options = {});

}  // namespace wastebench
