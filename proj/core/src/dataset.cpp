#include "wastebench/dataset.hpp"

#include <algorithm>

namespace wastebench {

ImageFolderDataset::ImageFolderDataset(std::vector<DatasetItem> items) : items_(std::move(items)) {
    std::sort(items_.begin(), items_.end(),
              [](const DatasetItem& a, const DatasetItem& b) { return a.filename < b.filename; });
}

ImageFolderDataset ImageFolderDataset::from_tree(const std::filesystem::path& root, Split split) {
    std::vector<DatasetItem> items;
    for (Label label : {Label::negative, Label::positive}) {
        const std::filesystem::path dir = root / to_string(split) / to_string(label);
        if (!std::filesystem::exists(dir)) continue;
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            if (!entry.is_regular_file()) continue;
            DatasetItem item;
            item.path = entry.path();
            item.filename = entry.path().filename().string();
            item.image_id = entry.path().stem().string();
            item.label = label;
            items.push_back(std::move(item));
        }
    }
    return ImageFolderDataset(std::move(items));
}

ImageFolderDataset ImageFolderDataset::from_manifest(const DatasetManifest& manifest,
                                                     const std::filesystem::path& root,
                                                     Split split) {
    std::vector<DatasetItem> items;
    for (const auto& r : manifest.records()) {
        if (r.split != split) continue;
        DatasetItem item;
        item.path = root / r.path;
        item.filename = item.path.filename().string();
        item.image_id = r.image_id;
        item.label = r.label;
        items.push_back(std::move(item));
    }
    return ImageFolderDataset(std::move(items));
}

}  // namespace wastebench
