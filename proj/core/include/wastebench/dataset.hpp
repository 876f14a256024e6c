#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "wastebench/manifest.hpp"

namespace wastebench {

struct DatasetItem {
    std::string filename;  // basename, the fusion/eval join key
    std::string image_id;  // filename stem; keys the augmentation stream
    std::filesystem::path path;
    Label label = Label::negative;
};

// Flat list of labeled image files, always ordered by filename so every
// consumer sees the same deterministic sequence.
class ImageFolderDataset {
public:
    ImageFolderDataset() = default;
    explicit ImageFolderDataset(std::vector<DatasetItem> items);

    // Scans root/<split>/{negative,positive}/ for image files.
    static ImageFolderDataset from_tree(const std::filesystem::path& root, Split split);
    // Uses the manifest's records carrying the given split; paths resolve
    // against root.
    static ImageFolderDataset from_manifest(const DatasetManifest& manifest,
                                            const std::filesystem::path& root, Split split);

    const std::vector<DatasetItem>& items() const { return items_; }
    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }

private:
    std::vector<DatasetItem> items_;
};

}  // namespace wastebench
