#include "wastebench/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <fstream>

#include "wastebench/errors.hpp"

namespace wastebench {

using nlohmann::json;

namespace {
constexpr char kMagic[8] = {'W', 'B', 'C', 'K', 'P', 'T', '0', '1'};
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    json header;
    header["format"] = 1;
    try {
        header["model_spec"] = json::parse(checkpoint.model_spec_json);
        header["training"] = json::parse(checkpoint.training_meta_json);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::SchemaViolation, std::string("checkpoint metadata is not JSON: ") + e.what());
    }
    json dir = json::array();
    for (const auto& entry : checkpoint.tensors) {
        json t;
        t["name"] = entry.name;
        t["shape"] = entry.tensor.shape();
        dir.push_back(std::move(t));
    }
    header["tensors"] = std::move(dir);
    const std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IOFailure, "cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t len = header_text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const auto& entry : checkpoint.tensors)
        out.write(reinterpret_cast<const char*>(entry.tensor.data()),
                  static_cast<std::streamsize>(entry.tensor.size() * sizeof(nn::Scalar)));
    if (!out) fail(ErrorCode::IOFailure, "short write on checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::MissingFile, "cannot open checkpoint " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        fail(ErrorCode::SchemaViolation, path.string() + " is not a checkpoint archive");
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string header_text(len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(len));
    if (!in) fail(ErrorCode::SchemaViolation, path.string() + ": truncated header");

    json header;
    try {
        header = json::parse(header_text);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::SchemaViolation, path.string() + ": bad header: " + e.what());
    }
    Checkpoint checkpoint;
    checkpoint.model_spec_json = header.value("model_spec", json::object()).dump();
    checkpoint.training_meta_json = header.value("training", json::object()).dump();
    for (const auto& t : header["tensors"]) {
        TensorEntry entry;
        entry.name = t["name"].get<std::string>();
        nn::Shape shape = t["shape"].get<nn::Shape>();
        entry.tensor = nn::Tensor(std::move(shape));
        in.read(reinterpret_cast<char*>(entry.tensor.data()),
                static_cast<std::streamsize>(entry.tensor.size() * sizeof(nn::Scalar)));
        if (!in) fail(ErrorCode::SchemaViolation, path.string() + ": truncated tensor blob");
        checkpoint.tensors.push_back(std::move(entry));
    }
    return checkpoint;
}

}  // namespace wastebench
