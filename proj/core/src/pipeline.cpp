#include "wastebench/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "wastebench/errors.hpp"
#include "wastebench/rng.hpp"

namespace wastebench {

using nlohmann::json;

void NormalizationStats::validate() const {
    for (double s : std)
        if (!(s > 0.0))
            fail(ErrorCode::InvalidConfig, "normalization std components must be > 0");
}

std::int64_t BalancePlan::total_copies() const {
    std::int64_t total = 0;
    for (const auto& [id, n] : copies_per_source) total += n;
    return total;
}

Image standardize(const Image& input) {
    if (input.empty() || (input.channels() != 1 && input.channels() != 3))
        fail(ErrorCode::UndecodableImage,
             "standardize: expected a non-empty 1- or 3-channel raster");
    return resize_bilinear(to_rgb(input), kStandardSize, kStandardSize);
}

nn::Tensor model_input(const Image& standardized, const NormalizationStats& stats) {
    stats.validate();
    if (standardized.height() != kStandardSize || standardized.width() != kStandardSize ||
        standardized.channels() != 3)
        fail(ErrorCode::ShapeMismatch, "model_input expects a 256x256x3 raster");
    constexpr int offset = (kStandardSize - kModelInputSize) / 2;
    nn::Tensor out({3, kModelInputSize, kModelInputSize});
    nn::Scalar* d = out.data();
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < kModelInputSize; ++y)
            for (int x = 0; x < kModelInputSize; ++x)
                *d++ = (standardized.at(y + offset, x + offset, c) / 255.0 - stats.mean[c]) /
                       stats.std[c];
    return out;
}

Image denormalize(const nn::Tensor& input, const NormalizationStats& stats) {
    stats.validate();
    if (input.rank() != 3 || input.dim(0) != 3 || input.dim(1) != kModelInputSize ||
        input.dim(2) != kModelInputSize)
        fail(ErrorCode::ShapeMismatch, "denormalize expects a [3,224,224] tensor");
    Image out(kModelInputSize, kModelInputSize, 3);
    const nn::Scalar* d = input.data();
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < kModelInputSize; ++y)
            for (int x = 0; x < kModelInputSize; ++x) {
                const double v = (*d++ * stats.std[c] + stats.mean[c]) * 255.0;
                out.at(y, x, c) =
                    static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
    return out;
}

AugmentationSpec sample_augmentation(std::uint64_t global_seed, const std::string& image_id,
                                     std::int64_t epoch, const AugmentationRanges& ranges) {
    // One counter stream per (seed, id, epoch); draws happen in fixed order.
    CounterRng rng(hash_combine(hash_string(global_seed, image_id),
                                static_cast<std::uint64_t>(epoch)));
    AugmentationSpec spec;
    spec.seed_tuple = {global_seed, image_id, epoch};
    spec.rotation_degrees =
        rng.uniform(-ranges.rotation_limit_degrees, ranges.rotation_limit_degrees);
    spec.hflip = rng.bernoulli(ranges.hflip_prob);
    spec.vflip = rng.bernoulli(ranges.vflip_prob);
    spec.jitter.brightness = rng.uniform(ranges.jitter_min, ranges.jitter_max);
    spec.jitter.contrast = rng.uniform(ranges.jitter_min, ranges.jitter_max);
    spec.jitter.saturation = rng.uniform(ranges.jitter_min, ranges.jitter_max);
    const double area = rng.uniform(ranges.crop_area_min, ranges.crop_area_max);
    const int side = std::clamp(
        static_cast<int>(std::lround(std::sqrt(area) * kStandardSize)), 1, kStandardSize);
    spec.crop.w = side;
    spec.crop.h = side;
    spec.crop.x = static_cast<int>(rng.below(static_cast<std::uint64_t>(kStandardSize - side + 1)));
    spec.crop.y = static_cast<int>(rng.below(static_cast<std::uint64_t>(kStandardSize - side + 1)));
    return spec;
}

Image apply_augmentation(const Image& standardized, const AugmentationSpec& spec) {
    if (standardized.height() != kStandardSize || standardized.width() != kStandardSize ||
        standardized.channels() != 3)
        fail(ErrorCode::ShapeMismatch, "apply_augmentation expects a 256x256x3 raster");
    if (spec.crop.x < 0 || spec.crop.y < 0 || spec.crop.w <= 0 || spec.crop.h <= 0 ||
        spec.crop.x + spec.crop.w > kStandardSize || spec.crop.y + spec.crop.h > kStandardSize)
        fail(ErrorCode::InvalidCropWindow, "augmentation crop window outside the 256x256 frame");

    Image img = rotate_about_center(standardized, spec.rotation_degrees);
    if (spec.hflip) img = flip_horizontal(img);
    if (spec.vflip) img = flip_vertical(img);
    img = adjust_brightness(img, spec.jitter.brightness);
    img = adjust_contrast(img, spec.jitter.contrast);
    img = adjust_saturation(img, spec.jitter.saturation);
    img = crop(img, spec.crop.x, spec.crop.y, spec.crop.w, spec.crop.h);
    return resize_bilinear(img, kStandardSize, kStandardSize);
}

BalancePlan balance(const DatasetManifest& manifest) {
    std::map<Label, std::vector<std::string>> train_ids;
    for (const auto& r : manifest.records())
        if (r.split == Split::train) train_ids[r.label].push_back(r.image_id);

    const std::int64_t neg = static_cast<std::int64_t>(train_ids[Label::negative].size());
    const std::int64_t pos = static_cast<std::int64_t>(train_ids[Label::positive].size());
    if (neg == 0 || pos == 0)
        fail(ErrorCode::EmptyClass,
             std::string("balance requires train records of both classes (negative=") +
                 std::to_string(neg) + ", positive=" + std::to_string(pos) + ")");

    BalancePlan plan;
    plan.minority_label = pos <= neg ? Label::positive : Label::negative;
    plan.target_count = std::max(pos, neg);
    auto& sources = train_ids[plan.minority_label];
    std::sort(sources.begin(), sources.end());
    const std::int64_t deficit = plan.target_count - std::min(pos, neg);
    const std::int64_t n = static_cast<std::int64_t>(sources.size());
    const std::int64_t base = deficit / n;
    const std::int64_t extra = deficit % n;
    for (std::int64_t i = 0; i < n; ++i)
        plan.copies_per_source[sources[static_cast<std::size_t>(i)]] = base + (i < extra ? 1 : 0);
    return plan;
}

std::string balance_plan_to_json(const BalancePlan& plan) {
    json copies = json::object();
    for (const auto& [id, n] : plan.copies_per_source) copies[id] = n;
    json j;
    j["minority"] = static_cast<int>(plan.minority_label);
    j["target"] = plan.target_count;
    j["copies"] = std::move(copies);
    return j.dump(2) + "\n";
}

BalancePlan balance_plan_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::SchemaViolation, std::string("balance plan: ") + e.what());
    }
    if (!j.contains("minority") || !j.contains("target") || !j.contains("copies"))
        fail(ErrorCode::SchemaViolation, "balance plan needs minority, target and copies");
    BalancePlan plan;
    plan.minority_label = label_from_int(j["minority"].get<int>());
    plan.target_count = j["target"].get<std::int64_t>();
    for (const auto& [id, n] : j["copies"].items())
        plan.copies_per_source[id] = n.get<std::int64_t>();
    return plan;
}

void write_balance_plan(const BalancePlan& plan, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IOFailure, "cannot write balance plan " + path.string());
    out << balance_plan_to_json(plan);
}

bool parse_augmented_id(const std::string& image_id, std::string* source_id) {
    const auto pos = image_id.rfind("__aug");
    if (pos == std::string::npos || pos == 0) return false;
    for (std::size_t i = pos + 5; i < image_id.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(image_id[i]))) return false;
    if (pos + 5 == image_id.size()) return false;
    if (source_id) *source_id = image_id.substr(0, pos);
    return true;
}

BalanceExecution execute_balance_plan(const DatasetManifest& manifest, const BalancePlan& plan,
                                      const std::filesystem::path& dataset_root,
                                      std::uint64_t global_seed,
                                      const AugmentationRanges& ranges) {
    std::vector<ImageRecord> records(manifest.records());
    BalanceExecution exec;
    for (const auto& [source_id, copies] : plan.copies_per_source) {
        if (copies == 0) continue;
        const ImageRecord* src = manifest.find(source_id);
        if (!src) fail(ErrorCode::UnknownId, "balance plan references unknown id '" + source_id + "'");
        if (src->label != plan.minority_label)
            fail(ErrorCode::SchemaViolation,
                 "balance plan source '" + source_id + "' is not a minority-class record");
        const Image base = standardize(read_png(dataset_root / src->path));
        for (std::int64_t k = 0; k < copies; ++k) {
            const std::string aug_id = source_id + "__aug" + std::to_string(k);
            // Copies are seeded by their own id at epoch 0, so the plan's
            // output is reproducible file-by-file.
            const AugmentationSpec spec = sample_augmentation(global_seed, aug_id, 0, ranges);
            const Image augmented = apply_augmentation(base, spec);
            ImageRecord r;
            r.image_id = aug_id;
            r.source = src->source;
            r.label = src->label;
            r.split = Split::train;
            r.path = std::string("train/") + to_string(r.label) + "/" + aug_id + ".png";
            const std::filesystem::path dst = dataset_root / r.path;
            std::filesystem::create_directories(dst.parent_path());
            write_png(augmented, dst);
            ++exec.files_written;
            records.push_back(std::move(r));
        }
    }
    exec.manifest = DatasetManifest::from_records(std::move(records));
    return exec;
}

}  // namespace wastebench
