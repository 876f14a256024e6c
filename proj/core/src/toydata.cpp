#include "wastebench/toydata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "wastebench/errors.hpp"
#include "wastebench/image.hpp"
#include "wastebench/rng.hpp"

namespace wastebench {

DatasetManifest make_toy_dataset(const std::filesystem::path& dir,
                                 const ToyDatasetOptions& options) {
    if (options.count < 2 || options.positive_fraction <= 0.0 || options.positive_fraction >= 1.0)
        fail(ErrorCode::InvalidConfig, "toy dataset needs count >= 2 and fraction in (0,1)");
    std::filesystem::create_directories(dir / "images");

    std::vector<ImageRecord> records;
    for (int i = 0; i < options.count; ++i) {
        // Bresenham-style spread so labels interleave at any fraction.
        const bool positive =
            static_cast<int>(std::floor((i + 1) * options.positive_fraction)) >
            static_cast<int>(std::floor(i * options.positive_fraction));
        CounterRng rng(hash_combine(hash_string(options.seed, "toy_image"),
                                    static_cast<std::uint64_t>(i)));
        const int base = positive ? 185 : 65;
        Image img(options.image_size, options.image_size, 3);
        for (int y = 0; y < options.image_size; ++y)
            for (int x = 0; x < options.image_size; ++x)
                for (int c = 0; c < 3; ++c) {
                    const double v = base + rng.uniform(-30.0, 30.0);
                    img.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
                }
        // a few contrasting tiles for spatial structure
        const int tiles = 2 + static_cast<int>(rng.below(3));
        for (int t = 0; t < tiles; ++t) {
            const int w = 16 + static_cast<int>(rng.below(48));
            const int h = 16 + static_cast<int>(rng.below(48));
            const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(options.image_size - w)));
            const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(options.image_size - h)));
            const int shift = positive ? -40 : 40;
            for (int y = y0; y < y0 + h; ++y)
                for (int x = x0; x < x0 + w; ++x)
                    for (int c = 0; c < 3; ++c)
                        img.at(y, x, c) = static_cast<std::uint8_t>(
                            std::clamp(img.at(y, x, c) + shift, 0, 255));
        }
        char id[32];
        std::snprintf(id, sizeof(id), "toy_%04d", i);
        ImageRecord r;
        r.image_id = id;
        r.path = std::string("images/") + id + ".png";
        r.source = Source::synthetic;
        r.label = positive ? Label::positive : Label::negative;
        write_png(img, dir / r.path);
        records.push_back(std::move(r));
    }
    DatasetManifest manifest = DatasetManifest::from_records(std::move(records));
    write_manifest(manifest, dir / "manifest.json");
    return manifest;
}

}  // namespace wastebench
