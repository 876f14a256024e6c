#include "wastebench/fusion.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "wastebench/errors.hpp"

namespace wastebench {

using nlohmann::json;

namespace {

constexpr double kLoadTolerance = 1e-6 + 1e-12;  // printed 6-decimal pairs sum to 1 +/- 1e-6

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else {
            field += c;
        }
    }
    fields.push_back(field);
    return fields;
}

double parse_probability(const std::string& text, const std::string& origin, std::size_t row,
                         const char* column) {
    std::size_t consumed = 0;
    double value = 0;
    try {
        value = std::stod(text, &consumed);
    } catch (const std::exception&) {
        fail(ErrorCode::MalformedRow,
             origin + " row " + std::to_string(row) + ": '" + text + "' is not a number in " + column);
    }
    if (consumed != text.size() || !std::isfinite(value) || value < 0.0 || value > 1.0)
        fail(ErrorCode::MalformedRow, origin + " row " + std::to_string(row) + ": " + column +
                                          " must be a probability in [0,1], got '" + text + "'");
    return value;
}

}  // namespace

std::vector<PredictionRecord> parse_prediction_csv(const std::string& text,
                                                   const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    std::size_t row = 0;
    bool with_labels = false;
    std::vector<PredictionRecord> records;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (row == 1) {
            if (line == "filename,p_negative,p_positive")
                with_labels = false;
            else if (line == "filename,p_negative,p_positive,true_label")
                with_labels = true;
            else
                fail(ErrorCode::MalformedRow,
                     origin + " row 1: unexpected header '" + line +
                         "' (expected filename,p_negative,p_positive[,true_label])");
            continue;
        }
        if (line.empty()) {
            fail(ErrorCode::MalformedRow, origin + " row " + std::to_string(row) + ": empty row");
        }
        const auto fields = split_csv_row(line);
        const std::size_t expected = with_labels ? 4 : 3;
        if (fields.size() != expected)
            fail(ErrorCode::MalformedRow,
                 origin + " row " + std::to_string(row) + ": expected " + std::to_string(expected) +
                     " fields, got " + std::to_string(fields.size()));
        PredictionRecord r;
        r.filename = fields[0];
        if (r.filename.empty())
            fail(ErrorCode::MalformedRow, origin + " row " + std::to_string(row) + ": empty filename");
        if (!seen.insert(r.filename).second)
            fail(ErrorCode::MalformedRow, origin + " row " + std::to_string(row) +
                                              ": duplicate filename '" + r.filename + "'");
        r.p_negative = parse_probability(fields[1], origin, row, "p_negative");
        r.p_positive = parse_probability(fields[2], origin, row, "p_positive");
        const double sum = r.p_negative + r.p_positive;
        if (std::abs(sum - 1.0) > kLoadTolerance)
            fail(ErrorCode::NormalizationViolation,
                 origin + " row " + std::to_string(row) + ": p_negative + p_positive = " +
                     std::to_string(sum) + ", expected 1 within 1e-6");
        if (with_labels) {
            if (fields[3] != "0" && fields[3] != "1")
                fail(ErrorCode::MalformedRow, origin + " row " + std::to_string(row) +
                                                  ": true_label must be 0 or 1, got '" + fields[3] + "'");
            r.true_label = fields[3] == "1" ? Label::positive : Label::negative;
        }
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<PredictionRecord> load_prediction_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::MissingFile, "cannot open prediction file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_prediction_csv(buf.str(), path.string());
}

AlignedPredictions align(const std::vector<std::vector<PredictionRecord>>& files,
                         const std::vector<std::string>& model_names, bool allow_intersection) {
    if (files.size() < 2)
        fail(ErrorCode::InvalidConfig, "align needs at least two prediction files");
    if (model_names.size() != files.size())
        fail(ErrorCode::InvalidConfig, "align: one model name per file required");

    std::vector<std::map<std::string, const PredictionRecord*>> by_name(files.size());
    for (std::size_t m = 0; m < files.size(); ++m)
        for (const auto& r : files[m]) by_name[m][r.filename] = &r;

    // common filename set, then strictness check
    std::set<std::string> common;
    for (const auto& [name, rec] : by_name[0]) common.insert(name);
    for (std::size_t m = 1; m < files.size(); ++m) {
        std::set<std::string> next;
        for (const auto& name : common)
            if (by_name[m].count(name)) next.insert(name);
        common = std::move(next);
    }
    std::vector<std::string> dropped;
    for (std::size_t m = 0; m < files.size(); ++m)
        for (const auto& [name, rec] : by_name[m])
            if (!common.count(name)) dropped.push_back(name + " (only in " + model_names[m] + ")");
    std::sort(dropped.begin(), dropped.end());
    dropped.erase(std::unique(dropped.begin(), dropped.end()), dropped.end());

    if (!dropped.empty() && !allow_intersection) {
        std::string msg = "filename sets differ across prediction files; symmetric difference:";
        for (const auto& d : dropped) msg += "\n  " + d;
        fail(ErrorCode::FilenameMismatch, msg);
    }

    AlignedPredictions aligned;
    aligned.model_names = model_names;
    aligned.dropped = std::move(dropped);
    aligned.filenames.assign(common.begin(), common.end());
    aligned.per_model.resize(files.size());
    aligned.labels.resize(aligned.filenames.size());

    for (std::size_t i = 0; i < aligned.filenames.size(); ++i) {
        const std::string& name = aligned.filenames[i];
        std::optional<Label> label;
        std::size_t label_from = 0;
        for (std::size_t m = 0; m < files.size(); ++m) {
            const PredictionRecord* r = by_name[m].at(name);
            aligned.per_model[m].push_back({r->p_negative, r->p_positive});
            if (r->true_label) {
                if (label && *label != *r->true_label)
                    fail(ErrorCode::LabelConflict,
                         "files '" + model_names[label_from] + "' and '" + model_names[m] +
                             "' disagree on the true label of '" + name + "'");
                if (!label) {
                    label = r->true_label;
                    label_from = m;
                }
            }
        }
        aligned.labels[i] = label;
    }
    return aligned;
}

std::vector<PredictionRecord> average_fuse(const AlignedPredictions& aligned) {
    const double inv = 1.0 / static_cast<double>(aligned.per_model.size());
    std::vector<PredictionRecord> fused;
    fused.reserve(aligned.size());
    for (std::size_t i = 0; i < aligned.size(); ++i) {
        PredictionRecord r;
        r.filename = aligned.filenames[i];
        for (const auto& column : aligned.per_model) {
            r.p_negative += column[i].first;
            r.p_positive += column[i].second;
        }
        r.p_negative *= inv;
        r.p_positive *= inv;
        // means of normalized pairs are already normalized; renormalize only
        // if floating drift exceeds 1e-9
        const double sum = r.p_negative + r.p_positive;
        if (std::abs(sum - 1.0) > 1e-9) {
            r.p_negative /= sum;
            r.p_positive /= sum;
        }
        r.true_label = aligned.labels[i];
        fused.push_back(std::move(r));
    }
    return fused;
}

ClassReport evaluate_fused(const std::vector<PredictionRecord>& fused, const DecisionRule& rule) {
    return evaluate_predictions(fused, rule);
}

std::string fusion_manifest_json(const std::vector<std::filesystem::path>& inputs,
                                 const std::vector<std::string>& model_names,
                                 const std::filesystem::path& output,
                                 const std::vector<std::string>& dropped) {
    json in = json::array();
    for (std::size_t i = 0; i < inputs.size(); ++i)
        in.push_back({{"path", inputs[i].string()},
                      {"model", i < model_names.size() ? model_names[i] : ""}});
    json j;
    j["inputs"] = std::move(in);
    j["output"] = output.string();
    j["mode"] = "average_probabilities";
    j["dropped"] = dropped;
    return j.dump(2) + "\n";
}

}  // namespace wastebench
