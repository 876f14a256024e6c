#include "wastebench/manifest.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "wastebench/errors.hpp"
#include "wastebench/rng.hpp"

namespace wastebench {

using nlohmann::json;

namespace {

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::MissingFile, "cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        fail(ErrorCode::SchemaViolation, path.string() + ": " + e.what());
    }
    return j;
}

}  // namespace

const char* to_string(Label label) { return label == Label::positive ? "positive" : "negative"; }

const char* to_string(Source source) {
    switch (source) {
        case Source::AGEA: return "AGEA";
        case Source::WorldView3: return "WorldView3";
        case Source::GoogleEarth: return "GoogleEarth";
        case Source::synthetic: return "synthetic";
        case Source::unknown: return "unknown";
    }
    return "unknown";
}

const char* to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::validation: return "validation";
        case Split::test: return "test";
        case Split::unassigned: return "unassigned";
    }
    return "unassigned";
}

Label label_from_int(int value) {
    if (value == 0) return Label::negative;
    if (value == 1) return Label::positive;
    fail(ErrorCode::SchemaViolation, "label must be 0 or 1, got " + std::to_string(value));
}

Source source_from_string(const std::string& s) {
    if (s == "AGEA") return Source::AGEA;
    if (s == "WorldView3") return Source::WorldView3;
    if (s == "GoogleEarth") return Source::GoogleEarth;
    if (s == "synthetic") return Source::synthetic;
    return Source::unknown;
}

std::optional<Split> split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "validation") return Split::validation;
    if (s == "test") return Split::test;
    if (s == "unassigned") return Split::unassigned;
    return std::nullopt;
}

DatasetManifest DatasetManifest::from_records(std::vector<ImageRecord> records) {
    DatasetManifest m;
    m.records_ = std::move(records);
    for (std::size_t i = 0; i < m.records_.size(); ++i) {
        auto [it, inserted] = m.index_.emplace(m.records_[i].image_id, i);
        if (!inserted)
            fail(ErrorCode::DuplicateId, "image_id '" + m.records_[i].image_id +
                                             "' appears more than once in the manifest");
    }
    return m;
}

std::map<Label, std::int64_t> DatasetManifest::class_counts() const {
    std::map<Label, std::int64_t> counts{{Label::negative, 0}, {Label::positive, 0}};
    for (const auto& r : records_) ++counts[r.label];
    return counts;
}

std::map<Source, std::int64_t> DatasetManifest::source_counts() const {
    std::map<Source, std::int64_t> counts;
    for (const auto& r : records_) ++counts[r.source];
    return counts;
}

std::map<Split, std::int64_t> DatasetManifest::split_counts() const {
    std::map<Split, std::int64_t> counts;
    for (const auto& r : records_) ++counts[r.split];
    return counts;
}

const ImageRecord* DatasetManifest::find(const std::string& image_id) const {
    auto it = index_.find(image_id);
    return it == index_.end() ? nullptr : &records_[it->second];
}

// ---------------------------------------------------------------------------
// parsing
// ---------------------------------------------------------------------------

DatasetManifest parse_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::MissingFile, "cannot open manifest " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_manifest_text(buf.str(), path.string());
}

DatasetManifest parse_manifest_text(const std::string& json_text, const std::string& origin) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::SchemaViolation, origin + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("images") || !j["images"].is_array())
        fail(ErrorCode::SchemaViolation, origin + ": top level must be {\"images\": [...]}");

    std::vector<ImageRecord> records;
    records.reserve(j["images"].size());
    std::size_t idx = 0;
    for (const auto& e : j["images"]) {
        const std::string where = origin + ": images[" + std::to_string(idx++) + "]";
        if (!e.is_object()) fail(ErrorCode::SchemaViolation, where + " is not an object");
        ImageRecord r;
        if (!e.contains("id") || !e["id"].is_string() || e["id"].get<std::string>().empty())
            fail(ErrorCode::SchemaViolation, where + ": field 'id' must be a non-empty string");
        r.image_id = e["id"].get<std::string>();
        if (!e.contains("path") || !e["path"].is_string() || e["path"].get<std::string>().empty())
            fail(ErrorCode::SchemaViolation,
                 where + " (id '" + r.image_id + "'): field 'path' must be a non-empty string");
        r.path = e["path"].get<std::string>();
        if (!e.contains("label") || !e["label"].is_number_integer())
            fail(ErrorCode::SchemaViolation,
                 where + " (id '" + r.image_id + "'): field 'label' must be 0 or 1");
        const int label = e["label"].get<int>();
        if (label != 0 && label != 1)
            fail(ErrorCode::SchemaViolation,
                 where + " (id '" + r.image_id + "'): field 'label' must be 0 or 1, got " +
                     std::to_string(label));
        r.label = label_from_int(label);
        if (e.contains("source")) {
            if (!e["source"].is_string())
                fail(ErrorCode::SchemaViolation,
                     where + " (id '" + r.image_id + "'): field 'source' must be a string");
            r.source = source_from_string(e["source"].get<std::string>());
        }
        if (e.contains("split")) {
            if (!e["split"].is_string())
                fail(ErrorCode::SchemaViolation,
                     where + " (id '" + r.image_id + "'): field 'split' must be a string");
            auto s = split_from_string(e["split"].get<std::string>());
            if (!s)
                fail(ErrorCode::SchemaViolation,
                     where + " (id '" + r.image_id + "'): unknown split '" +
                         e["split"].get<std::string>() + "'");
            r.split = *s;
        }
        // any other key is ignored
        records.push_back(std::move(r));
    }
    return DatasetManifest::from_records(std::move(records));
}

std::vector<LabelCorrection> parse_corrections(const std::filesystem::path& path) {
    json j = read_json_file(path);
    if (!j.is_array())
        fail(ErrorCode::SchemaViolation, path.string() + ": corrections must be a JSON array");
    std::vector<LabelCorrection> out;
    std::size_t idx = 0;
    for (const auto& e : j) {
        const std::string where = path.string() + "[" + std::to_string(idx++) + "]";
        if (!e.is_object() || !e.contains("id") || !e["id"].is_string() ||
            !e.contains("old_label") || !e.contains("new_label"))
            fail(ErrorCode::SchemaViolation,
                 where + ": entries need string 'id' and integer 'old_label'/'new_label'");
        LabelCorrection c;
        c.image_id = e["id"].get<std::string>();
        c.old_label = label_from_int(e["old_label"].get<int>());
        c.new_label = label_from_int(e["new_label"].get<int>());
        if (c.old_label == c.new_label)
            fail(ErrorCode::SchemaViolation,
                 where + " (id '" + c.image_id + "'): old_label equals new_label");
        if (e.contains("note") && e["note"].is_string()) c.note = e["note"].get<std::string>();
        out.push_back(std::move(c));
    }
    return out;
}

// ---------------------------------------------------------------------------
// corrections / splits
// ---------------------------------------------------------------------------

CorrectionResult apply_corrections(const DatasetManifest& manifest,
                                   const std::vector<LabelCorrection>& corrections) {
    std::vector<ImageRecord> records(manifest.records());
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < records.size(); ++i) index[records[i].image_id] = i;

    CorrectionResult result;
    for (const auto& c : corrections) {
        auto it = index.find(c.image_id);
        if (it == index.end())
            fail(ErrorCode::UnknownId, "correction references unknown image_id '" + c.image_id + "'");
        ImageRecord& r = records[it->second];
        if (r.label != c.old_label)
            fail(ErrorCode::StaleCorrection,
                 "correction for '" + c.image_id + "' expects old_label " +
                     to_string(c.old_label) + " but the record is " + to_string(r.label) +
                     " (corrections file is out of date)");
        r.label = c.new_label;
        result.audit.push_back({c.image_id, c.old_label, c.new_label, c.note});
    }
    result.manifest = DatasetManifest::from_records(std::move(records));
    return result;
}

SplitPlan make_splits(const DatasetManifest& manifest, double validation_fraction,
                      std::uint64_t seed) {
    if (manifest.empty()) fail(ErrorCode::EmptyManifest, "cannot split an empty manifest");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
        fail(ErrorCode::InvalidConfig, "validation_fraction must lie in (0,1), got " +
                                           std::to_string(validation_fraction));

    SplitPlan plan;
    plan.validation_fraction = validation_fraction;
    plan.seed = seed;

    // test records are immutable; everything else is (re)assigned
    std::map<Label, std::vector<std::string>> eligible;
    std::int64_t eligible_total = 0;
    for (const auto& r : manifest.records()) {
        if (r.split == Split::test) {
            plan.assignments[r.image_id] = Split::test;
        } else {
            eligible[r.label].push_back(r.image_id);
            ++eligible_total;
        }
    }
    for (Label label : {Label::negative, Label::positive}) {
        if (eligible[label].empty())
            plan.warnings.push_back(std::string("DegenerateClass: no splittable ") +
                                    to_string(label) + " records");
    }
    if (eligible_total == 0) return plan;

    // Largest-remainder allocation: the validation total is
    // round(fraction * eligible) and every class stays within one record of
    // its proportional share.
    const std::int64_t target_total =
        std::llround(validation_fraction * static_cast<double>(eligible_total));
    struct ClassQuota {
        Label label;
        std::int64_t base;
        double remainder;
    };
    std::vector<ClassQuota> quotas;
    std::int64_t base_sum = 0;
    for (Label label : {Label::negative, Label::positive}) {
        const double exact = validation_fraction * static_cast<double>(eligible[label].size());
        const std::int64_t base = static_cast<std::int64_t>(std::floor(exact));
        quotas.push_back({label, base, exact - static_cast<double>(base)});
        base_sum += base;
    }
    std::stable_sort(quotas.begin(), quotas.end(),
                     [](const ClassQuota& a, const ClassQuota& b) { return a.remainder > b.remainder; });
    std::int64_t leftover = target_total - base_sum;
    for (auto& q : quotas) {
        std::int64_t take = q.base;
        if (leftover > 0 && !eligible[q.label].empty()) {
            ++take;
            --leftover;
        }
        take = std::min<std::int64_t>(take, static_cast<std::int64_t>(eligible[q.label].size()));
        auto& ids = eligible[q.label];
        std::sort(ids.begin(), ids.end());
        CounterRng rng(hash_combine(hash_string(seed, "make_splits"),
                                    static_cast<std::uint64_t>(q.label)));
        deterministic_shuffle(ids, rng);
        for (std::size_t i = 0; i < ids.size(); ++i)
            plan.assignments[ids[i]] =
                (static_cast<std::int64_t>(i) < take) ? Split::validation : Split::train;
    }
    return plan;
}

DatasetManifest with_splits_applied(const DatasetManifest& manifest, const SplitPlan& plan) {
    std::vector<ImageRecord> records(manifest.records());
    for (auto& r : records) {
        auto it = plan.assignments.find(r.image_id);
        if (it == plan.assignments.end())
            fail(ErrorCode::UnknownId, "split plan has no assignment for '" + r.image_id + "'");
        r.split = it->second;
    }
    return DatasetManifest::from_records(std::move(records));
}

// ---------------------------------------------------------------------------
// materialize / summarize
// ---------------------------------------------------------------------------

namespace {

bool files_identical(const std::filesystem::path& a, const std::filesystem::path& b) {
    std::error_code ec;
    if (std::filesystem::file_size(a, ec) != std::filesystem::file_size(b, ec)) return false;
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    constexpr std::size_t kChunk = 1 << 16;
    std::vector<char> ba(kChunk), bb(kChunk);
    while (fa && fb) {
        fa.read(ba.data(), kChunk);
        fb.read(bb.data(), kChunk);
        if (fa.gcount() != fb.gcount()) return false;
        if (!std::equal(ba.begin(), ba.begin() + fa.gcount(), bb.begin())) return false;
        if (fa.eof() || fb.eof()) break;
    }
    return fa.eof() == fb.eof();
}

}  // namespace

MaterializeSummary materialize(const DatasetManifest& manifest, const SplitPlan& plan,
                               const std::filesystem::path& image_root,
                               const std::filesystem::path& dest_root) {
    // resolve every source first so missing files are reported all at once
    struct Job {
        std::filesystem::path src;
        std::filesystem::path dst;
        std::string folder;
    };
    std::vector<Job> jobs;
    std::vector<std::string> missing;
    for (const auto& r : manifest.records()) {
        auto it = plan.assignments.find(r.image_id);
        if (it == plan.assignments.end())
            fail(ErrorCode::UnknownId, "split plan has no assignment for '" + r.image_id + "'");
        const Split split = it->second;
        if (split == Split::unassigned) continue;
        const std::filesystem::path src = image_root / r.path;
        if (!std::filesystem::exists(src)) {
            missing.push_back(src.string());
            continue;
        }
        std::string ext = src.extension().string();
        if (ext.empty()) ext = ".png";
        const std::string folder =
            std::string(to_string(split)) + "/" + to_string(r.label);
        jobs.push_back({src, dest_root / to_string(split) / to_string(r.label) / (r.image_id + ext),
                        folder});
    }
    if (!missing.empty()) {
        std::string msg = std::to_string(missing.size()) + " referenced image file(s) missing:";
        for (const auto& m : missing) msg += "\n  " + m;
        fail(ErrorCode::MissingImageFile, msg);
    }

    MaterializeSummary summary;
    summary.root = dest_root;
    try {
        for (Split split : {Split::train, Split::validation, Split::test})
            for (Label label : {Label::negative, Label::positive})
                std::filesystem::create_directories(dest_root / to_string(split) /
                                                    to_string(label));
        for (const auto& job : jobs) {
            if (std::filesystem::exists(job.dst) && files_identical(job.src, job.dst)) {
                ++summary.files_already_present;
            } else {
                std::filesystem::copy_file(job.src, job.dst,
                                           std::filesystem::copy_options::overwrite_existing);
                ++summary.files_written;
            }
            ++summary.folder_counts[job.folder];
        }
    } catch (const std::filesystem::filesystem_error& e) {
        fail(ErrorCode::IOFailure, std::string("materialize: ") + e.what());
    }
    return summary;
}

SummaryReport summarize(const DatasetManifest& manifest) {
    SummaryReport report;
    report.total = static_cast<std::int64_t>(manifest.size());
    report.by_class = manifest.class_counts();
    report.by_source = manifest.source_counts();
    report.by_split = manifest.split_counts();
    return report;
}

std::string SummaryReport::to_json() const {
    json j;
    j["total"] = total;
    for (const auto& [label, n] : by_class) j["by_class"][to_string(label)] = n;
    for (const auto& [source, n] : by_source) j["by_source"][to_string(source)] = n;
    for (const auto& [split, n] : by_split) j["by_split"][to_string(split)] = n;
    return j.dump(2) + "\n";
}

std::string SummaryReport::to_text() const {
    std::ostringstream out;
    out << "total: " << total << "\n";
    out << "by class:";
    for (const auto& [label, n] : by_class) out << "  " << to_string(label) << "=" << n;
    out << "\nby source:";
    for (const auto& [source, n] : by_source) out << "  " << to_string(source) << "=" << n;
    out << "\nby split:";
    for (const auto& [split, n] : by_split) out << "  " << to_string(split) << "=" << n;
    out << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

std::string manifest_to_json(const DatasetManifest& manifest) {
    json images = json::array();
    for (const auto& r : manifest.records()) {
        json e;
        e["id"] = r.image_id;
        e["path"] = r.path;
        e["source"] = to_string(r.source);
        e["label"] = static_cast<int>(r.label);
        if (r.split != Split::unassigned) e["split"] = to_string(r.split);
        images.push_back(std::move(e));
    }
    json j;
    j["images"] = std::move(images);
    return j.dump(2) + "\n";
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IOFailure, "cannot write manifest " + path.string());
    out << manifest_to_json(manifest);
}

std::string split_plan_to_json(const SplitPlan& plan) {
    json assignments = json::object();
    for (const auto& [id, split] : plan.assignments) assignments[id] = to_string(split);
    json j;
    j["seed"] = plan.seed;
    j["fraction"] = plan.validation_fraction;
    j["assignments"] = std::move(assignments);
    return j.dump(2) + "\n";
}

SplitPlan split_plan_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::SchemaViolation, std::string("split plan: ") + e.what());
    }
    SplitPlan plan;
    if (!j.contains("seed") || !j.contains("fraction") || !j.contains("assignments"))
        fail(ErrorCode::SchemaViolation, "split plan needs seed, fraction and assignments");
    plan.seed = j["seed"].get<std::uint64_t>();
    plan.validation_fraction = j["fraction"].get<double>();
    for (const auto& [id, value] : j["assignments"].items()) {
        auto split = split_from_string(value.get<std::string>());
        if (!split)
            fail(ErrorCode::SchemaViolation,
                 "split plan: unknown split '" + value.get<std::string>() + "' for '" + id + "'");
        plan.assignments[id] = *split;
    }
    return plan;
}

void write_split_plan(const SplitPlan& plan, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IOFailure, "cannot write split plan " + path.string());
    out << split_plan_to_json(plan);
}

SplitPlan read_split_plan(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::MissingFile, "cannot open split plan " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return split_plan_from_json(buf.str());
}

DatasetManifest adapt_external_manifest(const std::filesystem::path& path) {
    json j = read_json_file(path);
    const json* entries = nullptr;
    if (j.is_array())
        entries = &j;
    else if (j.is_object() && j.contains("images") && j["images"].is_array())
        entries = &j["images"];
    else
        fail(ErrorCode::SchemaViolation,
             path.string() + ": expected an array of entries or {\"images\": [...]}");

    std::vector<ImageRecord> records;
    std::size_t idx = 0;
    for (const auto& e : *entries) {
        const std::string where = path.string() + "[" + std::to_string(idx++) + "]";
        if (!e.is_object()) fail(ErrorCode::SchemaViolation, where + " is not an object");
        ImageRecord r;
        for (const char* key : {"img", "image", "file", "path"}) {
            if (e.contains(key) && e[key].is_string()) {
                r.path = e[key].get<std::string>();
                break;
            }
        }
        if (r.path.empty())
            fail(ErrorCode::SchemaViolation, where + ": no image path field (img/image/file/path)");
        r.image_id = e.contains("id") && e["id"].is_string()
                         ? e["id"].get<std::string>()
                         : std::filesystem::path(r.path).stem().string();
        if (e.contains("is_candidate_location") && e["is_candidate_location"].is_boolean())
            r.label = e["is_candidate_location"].get<bool>() ? Label::positive : Label::negative;
        else if (e.contains("label") && e["label"].is_number_integer())
            r.label = label_from_int(e["label"].get<int>());
        else
            fail(ErrorCode::SchemaViolation,
                 where + ": no label field (is_candidate_location or label)");
        if (e.contains("source") && e["source"].is_string())
            r.source = source_from_string(e["source"].get<std::string>());
        records.push_back(std::move(r));
    }
    return DatasetManifest::from_records(std::move(records));
}

}  // namespace wastebench
