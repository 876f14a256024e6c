#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "wastebench/image.hpp"
#include "wastebench/manifest.hpp"
#include "wastebench/tensor.hpp"

namespace wastebench {

constexpr int kStandardSize = 256;    // on-disk image size
constexpr int kModelInputSize = 224;  // network input size

struct NormalizationStats {
    std::array<double, 3> mean{};
    std::array<double, 3> std{};
    void validate() const;  // std components strictly positive
};

struct JitterFactors {
    double brightness = 1.0;
    double contrast = 1.0;
    double saturation = 1.0;
};

struct CropWindow {
    int x = 0, y = 0, w = kStandardSize, h = kStandardSize;
};

struct SeedTuple {
    std::uint64_t global_seed = 0;
    std::string image_id;
    std::int64_t epoch = 0;
};

// A fully materialized description of one augmentation draw. Re-deriving
// from the same seed tuple yields the identical spec.
struct AugmentationSpec {
    double rotation_degrees = 0.0;
    bool hflip = false;
    bool vflip = false;
    JitterFactors jitter;
    CropWindow crop;
    SeedTuple seed_tuple;

    static AugmentationSpec identity() { return {}; }
};

// Draw ranges; the defaults are the documented config defaults.
struct AugmentationRanges {
    double rotation_limit_degrees = 30.0;
    double hflip_prob = 0.5;
    double vflip_prob = 0.5;
    double jitter_min = 0.8;
    double jitter_max = 1.2;
    double crop_area_min = 0.8;
    double crop_area_max = 1.0;
};

// Per-class augmentation schedule that equalizes the two class counts.
struct BalancePlan {
    Label minority_label = Label::positive;
    std::map<std::string, std::int64_t> copies_per_source;  // minority image_id -> copies
    std::int64_t target_count = 0;

    std::int64_t total_copies() const;
};

// ---- operations ----

// Any decodable raster -> exact 256x256x3 (grayscale replicated, direct
// non aspect-preserving resize). Idempotent on conforming input.
Image standardize(const Image& input);

// 256x256x3 -> center-cropped 224 and per-channel (p/255 - mean)/std,
// returned as a CHW tensor [3,224,224].
nn::Tensor model_input(const Image& standardized, const NormalizationStats& stats);

// Inverse of model_input (for round-trip checks): tensor -> 224x224x3 image.
Image denormalize(const nn::Tensor& input, const NormalizationStats& stats);

AugmentationSpec sample_augmentation(std::uint64_t global_seed, const std::string& image_id,
                                     std::int64_t epoch,
                                     const AugmentationRanges& ranges = {});

// Fixed order: rotate -> hflip -> vflip -> jitter -> crop -> resize back to 256.
Image apply_augmentation(const Image& standardized, const AugmentationSpec& spec);

// Plans copies over the train-split records so both classes reach the
// majority count. Copies differ by at most one across source images.
BalancePlan balance(const DatasetManifest& manifest);

std::string balance_plan_to_json(const BalancePlan& plan);
BalancePlan balance_plan_from_json(const std::string& json_text);
void write_balance_plan(const BalancePlan& plan, const std::filesystem::path& path);

// Materializes the planned copies as PNGs inside the dataset tree
// (train/<class>/<source_id>__aug<k>.png) and returns the manifest with the
// augmented records appended. Paths in `manifest` are resolved against
// `dataset_root`.
struct BalanceExecution {
    DatasetManifest manifest;
    std::int64_t files_written = 0;
};
BalanceExecution execute_balance_plan(const DatasetManifest& manifest, const BalancePlan& plan,
                                      const std::filesystem::path& dataset_root,
                                      std::uint64_t global_seed,
                                      const AugmentationRanges& ranges = {});

// True iff `image_id` names a balance-generated copy; fills the source id.
bool parse_augmented_id(const std::string& image_id, std::string* source_id);

}  // namespace wastebench
