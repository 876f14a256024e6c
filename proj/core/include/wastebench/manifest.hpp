#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace wastebench {

enum class Label : int { negative = 0, positive = 1 };
enum class Source { AGEA, WorldView3, GoogleEarth, synthetic, unknown };
enum class Split { train, validation, test, unassigned };

const char* to_string(Label label);
const char* to_string(Source source);
const char* to_string(Split split);
Label label_from_int(int value);            // 0/1 only, else SchemaViolation
Source source_from_string(const std::string& s);  // lenient: unrecognized -> unknown
std::optional<Split> split_from_string(const std::string& s);

struct ImageRecord {
    std::string image_id;
    std::string path;  // file path relative to the data root
    Source source = Source::unknown;
    Label label = Label::negative;
    Split split = Split::unassigned;

    bool operator==(const ImageRecord&) const = default;
};

// Immutable collection of records. Count maps are recomputed tallies so the
// derived counts can never drift from the record list.
class DatasetManifest {
public:
    DatasetManifest() = default;
    // Throws DuplicateId if two records share an image_id.
    static DatasetManifest from_records(std::vector<ImageRecord> records);

    const std::vector<ImageRecord>& records() const { return records_; }
    bool empty() const { return records_.empty(); }
    std::size_t size() const { return records_.size(); }

    std::map<Label, std::int64_t> class_counts() const;
    std::map<Source, std::int64_t> source_counts() const;
    std::map<Split, std::int64_t> split_counts() const;

    const ImageRecord* find(const std::string& image_id) const;

private:
    std::vector<ImageRecord> records_;
    std::map<std::string, std::size_t> index_;
};

struct LabelCorrection {
    std::string image_id;
    Label old_label = Label::negative;
    Label new_label = Label::positive;
    std::string note;
};

struct AuditEntry {
    std::string image_id;
    Label old_label;
    Label new_label;
    std::string note;
};

struct SplitPlan {
    std::map<std::string, Split> assignments;
    double validation_fraction = 0.0;
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;  // degenerate-class flags, not serialized
};

struct MaterializeSummary {
    std::filesystem::path root;
    // "train/positive" -> file count, one entry per leaf folder
    std::map<std::string, std::int64_t> folder_counts;
    std::int64_t files_written = 0;
    std::int64_t files_already_present = 0;
};

struct SummaryReport {
    std::int64_t total = 0;
    std::map<Label, std::int64_t> by_class;
    std::map<Source, std::int64_t> by_source;
    std::map<Split, std::int64_t> by_split;
    std::string to_json() const;
    std::string to_text() const;
};

// ---- operations ----

DatasetManifest parse_manifest(const std::filesystem::path& path);
DatasetManifest parse_manifest_text(const std::string& json_text, const std::string& origin);

std::vector<LabelCorrection> parse_corrections(const std::filesystem::path& path);

struct CorrectionResult {
    DatasetManifest manifest;
    std::vector<AuditEntry> audit;
};
CorrectionResult apply_corrections(const DatasetManifest& manifest,
                                   const std::vector<LabelCorrection>& corrections);

// Stratified by label with a seeded shuffle. Records already tagged test are
// never reassigned; everything else is split train/validation so that the
// total validation count is round(fraction * eligible) and each class is
// within one record of its proportional share.
SplitPlan make_splits(const DatasetManifest& manifest, double validation_fraction,
                      std::uint64_t seed);

DatasetManifest with_splits_applied(const DatasetManifest& manifest, const SplitPlan& plan);

// Copies referenced files into root/{train,validation,test}/{negative,positive}/,
// naming each file <image_id><original extension>. Missing sources are all
// collected before anything is copied; identical existing files are skipped.
MaterializeSummary materialize(const DatasetManifest& manifest, const SplitPlan& plan,
                               const std::filesystem::path& image_root,
                               const std::filesystem::path& dest_root);

SummaryReport summarize(const DatasetManifest& manifest);

// ---- serialization ----

std::string manifest_to_json(const DatasetManifest& manifest);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

std::string split_plan_to_json(const SplitPlan& plan);
SplitPlan split_plan_from_json(const std::string& json_text);
void write_split_plan(const SplitPlan& plan, const std::filesystem::path& path);
SplitPlan read_split_plan(const std::filesystem::path& path);

// Adapter for upstream metadata shaped as {"images":[{"img": ..., "is_candidate_location": ...}]}
// (or a bare array of such entries); returns manifest-schema records.
DatasetManifest adapt_external_manifest(const std::filesystem::path& path);

}  // namespace wastebench
