#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "wastebench/tensor.hpp"

namespace wastebench {

struct TensorEntry {
    std::string name;
    nn::Tensor tensor;
};

// Self-describing single-file archive: a JSON header (model spec, training
// metadata, tensor directory) followed by raw little-endian float64 blobs.
// The embedded spec JSON is the source of truth when reloading.
struct Checkpoint {
    std::string model_spec_json = "{}";
    std::string training_meta_json = "{}";
    std::vector<TensorEntry> tensors;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace wastebench
