#include <nlohmann/json.hpp>

#include <fstream>

#include "wastebench/errors.hpp"
#include "wastebench/metrics.hpp"

namespace wastebench {

using nlohmann::json;

BaselineTable BaselineTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::MissingFile, "cannot open baselines file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        fail(ErrorCode::SchemaViolation, path.string() + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("models") || !j["models"].is_object())
        fail(ErrorCode::SchemaViolation, path.string() + ": top level must be {\"models\": {...}}");

    BaselineTable table;
    for (const auto& [name, entry] : j["models"].items()) {
        if (!entry.is_object())
            fail(ErrorCode::SchemaViolation, path.string() + ": entry '" + name + "' is not an object");
        Entry e;
        e.group = entry.value("group", "");
        for (const char* metric : {"accuracy", "precision", "sensitivity", "f1", "specificity"}) {
            if (!entry.contains(metric) || !entry[metric].is_number())
                fail(ErrorCode::SchemaViolation,
                     path.string() + ": entry '" + name + "' is missing numeric '" + metric + "'");
            const double value = entry[metric].get<double>();
            if (value < 0.0 || value > 100.0)
                fail(ErrorCode::SchemaViolation,
                     path.string() + ": entry '" + name + "." + metric + "' must be a percent in [0,100]");
        }
        e.accuracy = entry["accuracy"].get<double>();
        e.precision = entry["precision"].get<double>();
        e.sensitivity = entry["sensitivity"].get<double>();
        e.f1 = entry["f1"].get<double>();
        e.specificity = entry["specificity"].get<double>();
        table.entries_[name] = e;
    }
    if (table.entries_.empty())
        fail(ErrorCode::SchemaViolation, path.string() + ": baselines file has no entries");
    return table;
}

const BaselineTable::Entry* BaselineTable::find(const std::string& model_name) const {
    auto it = entries_.find(model_name);
    return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> BaselineTable::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, entry] : entries_) out.push_back(name);
    return out;
}

}  // namespace wastebench
