#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "test_support.hpp"
#include "wastebench/errors.hpp"
#include "wastebench/image.hpp"
#include "wastebench/pipeline.hpp"
#include "wastebench/rng.hpp"

using namespace wastebench;
using testsupport::TempDir;

TEST_SUITE_BEGIN("pipeline");

namespace {

Image random_image(int h, int w, int c, std::uint64_t seed) {
    CounterRng rng(seed);
    Image img(h, w, c);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch)
                img.at(y, x, ch) = static_cast<std::uint8_t>(rng.below(256));
    return img;
}

DatasetManifest train_manifest(int positives, int negatives) {
    std::vector<ImageRecord> records;
    for (int i = 0; i < positives + negatives; ++i) {
        ImageRecord r;
        r.image_id = (i < positives ? "p" : "n") + std::to_string(i);
        r.path = "train/x/" + r.image_id + ".png";
        r.label = i < positives ? Label::positive : Label::negative;
        r.split = Split::train;
        records.push_back(std::move(r));
    }
    return DatasetManifest::from_records(std::move(records));
}

}  // namespace

TEST_CASE("standardize: downscale, identity, grayscale replication") {
    Image big = random_image(512, 512, 3, 1);
    Image out = standardize(big);
    CHECK(out.height() == 256);
    CHECK(out.width() == 256);
    CHECK(out.channels() == 3);

    Image exact = random_image(256, 256, 3, 2);
    CHECK(standardize(exact) == exact);
    // idempotence
    CHECK(standardize(standardize(big)) == standardize(big));

    Image gray = random_image(300, 200, 1, 3);
    Image rgb = standardize(gray);
    CHECK(rgb.channels() == 3);
    for (int y = 0; y < 256; y += 37)
        for (int x = 0; x < 256; x += 41) {
            CHECK(rgb.at(y, x, 0) == rgb.at(y, x, 1));
            CHECK(rgb.at(y, x, 0) == rgb.at(y, x, 2));
        }
}

TEST_CASE("model_input: centering, unit scaling, hand value, round trip") {
    // stats chosen so the constant-image checks are exact in 8-bit
    NormalizationStats stats{{80.0 / 255, 100.0 / 255, 120.0 / 255},
                             {40.0 / 255, 50.0 / 255, 60.0 / 255}};
    Image img(256, 256, 3);
    for (int y = 0; y < 256; ++y)
        for (int x = 0; x < 256; ++x) {
            img.at(y, x, 0) = 80;
            img.at(y, x, 1) = 100;
            img.at(y, x, 2) = 120;
        }
    nn::Tensor t = model_input(img, stats);
    CHECK(t.shape() == nn::Shape{3, 224, 224});
    for (std::int64_t i = 0; i < t.size(); ++i) CHECK(t[i] == doctest::Approx(0.0).epsilon(1e-12));

    for (int y = 0; y < 256; ++y)
        for (int x = 0; x < 256; ++x) {
            img.at(y, x, 0) = 120;  // mean + std in channel 0
            img.at(y, x, 1) = 150;
            img.at(y, x, 2) = 180;
        }
    t = model_input(img, stats);
    for (std::int64_t i = 0; i < t.size(); ++i) CHECK(t[i] == doctest::Approx(1.0).epsilon(1e-12));

    // published normalization constants on a mid-gray frame
    NormalizationStats paper_stats{{0.3201, 0.3334, 0.2832}, {0.2004, 0.1818, 0.1764}};
    Image gray128(256, 256, 3);
    for (int y = 0; y < 256; ++y)
        for (int x = 0; x < 256; ++x)
            for (int c = 0; c < 3; ++c) gray128.at(y, x, c) = 128;
    t = model_input(gray128, paper_stats);
    const double expected0 = (128.0 / 255.0 - 0.3201) / 0.2004;
    CHECK(expected0 == doctest::Approx(0.9075).epsilon(1e-4));
    CHECK(t[0] == doctest::Approx(expected0).epsilon(1e-12));

    // denormalize reconstructs the center crop exactly (within quantization)
    Image source = random_image(256, 256, 3, 9);
    Image recon = denormalize(model_input(source, paper_stats), paper_stats);
    const Image cropped = crop(source, 16, 16, 224, 224);
    int max_err = 0;
    for (int y = 0; y < 224; ++y)
        for (int x = 0; x < 224; ++x)
            for (int c = 0; c < 3; ++c)
                max_err = std::max(max_err, std::abs(static_cast<int>(recon.at(y, x, c)) -
                                                     static_cast<int>(cropped.at(y, x, c))));
    CHECK(max_err <= 1);
}

TEST_CASE("sample_augmentation: determinism, keying, ranges") {
    AugmentationSpec s1 = sample_augmentation(42, "img_7", 3);
    AugmentationSpec s2 = sample_augmentation(42, "img_7", 3);
    CHECK(s1.rotation_degrees == s2.rotation_degrees);
    CHECK(s1.hflip == s2.hflip);
    CHECK(s1.vflip == s2.vflip);
    CHECK(s1.jitter.brightness == s2.jitter.brightness);
    CHECK(s1.crop.x == s2.crop.x);
    CHECK(s1.crop.w == s2.crop.w);

    // distinct ids/epochs key distinct streams
    CHECK(hash_combine(hash_string(42, "img_7"), 3) != hash_combine(hash_string(42, "img_8"), 3));
    CHECK(hash_combine(hash_string(42, "img_7"), 3) != hash_combine(hash_string(42, "img_7"), 4));
    int differing = 0;
    for (int i = 0; i < 32; ++i) {
        AugmentationSpec a = sample_augmentation(1, "id_" + std::to_string(i), 0);
        AugmentationSpec b = sample_augmentation(1, "id_" + std::to_string(i + 100), 0);
        if (a.rotation_degrees != b.rotation_degrees || a.crop.x != b.crop.x) ++differing;
    }
    CHECK(differing >= 30);

    AugmentationRanges ranges;
    for (int i = 0; i < 200; ++i) {
        AugmentationSpec s = sample_augmentation(7, "r" + std::to_string(i), 0, ranges);
        CHECK(std::abs(s.rotation_degrees) <= ranges.rotation_limit_degrees);
        CHECK(s.jitter.brightness >= ranges.jitter_min);
        CHECK(s.jitter.brightness <= ranges.jitter_max);
        CHECK(s.crop.x + s.crop.w <= 256);
        CHECK(s.crop.y + s.crop.h <= 256);
        const double area = static_cast<double>(s.crop.w) * s.crop.h / (256.0 * 256.0);
        CHECK(area >= ranges.crop_area_min - 0.02);
    }
}

TEST_CASE("sample_augmentation: Monte-Carlo flip rate near one half") {
    int flips = 0;
    for (int i = 0; i < 10000; ++i)
        if (sample_augmentation(2024, "mc_" + std::to_string(i), 0).hflip) ++flips;
    const double rate = flips / 10000.0;
    CHECK(rate >= 0.47);
    CHECK(rate <= 0.53);
}

TEST_CASE("apply_augmentation: identity spec is pixel-exact") {
    Image img = random_image(256, 256, 3, 4);
    CHECK(apply_augmentation(img, AugmentationSpec::identity()) == img);
}

TEST_CASE("apply_augmentation: double horizontal flip is the identity") {
    Image img = random_image(256, 256, 3, 5);
    AugmentationSpec flip = AugmentationSpec::identity();
    flip.hflip = true;
    Image once = apply_augmentation(img, flip);
    CHECK_FALSE(once == img);
    CHECK(apply_augmentation(once, flip) == img);
}

TEST_CASE("apply_augmentation: quarter-turn moves a marked pixel to the mapped coordinate") {
    // forward map: out = c + R(deg) * (in - c), pixel center c = 127.5
    Image img(256, 256, 3);
    img.at(20, 10, 0) = 255;  // marked pixel at (x=10, y=20)
    AugmentationSpec rot = AugmentationSpec::identity();
    rot.rotation_degrees = 90.0;
    Image out = apply_augmentation(img, rot);
    const double cx = 127.5, cy = 127.5;
    const double rad = M_PI / 2.0;
    const int expected_x = static_cast<int>(std::lround(cx + std::cos(rad) * (10 - cx) - std::sin(rad) * (20 - cy)));
    const int expected_y = static_cast<int>(std::lround(cy + std::sin(rad) * (10 - cx) + std::cos(rad) * (20 - cy)));
    CHECK(expected_x == 235);
    CHECK(expected_y == 10);
    CHECK(out.at(expected_y, expected_x, 0) == 255);
    CHECK(out.at(expected_y, expected_x + 2, 0) == 0);
    CHECK(out.at(20, 10, 0) == 0);
}

TEST_CASE("apply_augmentation: invalid crop window") {
    Image img = random_image(256, 256, 3, 6);
    AugmentationSpec bad = AugmentationSpec::identity();
    bad.crop = {200, 200, 100, 100};
    CHECK_THROWS_AS(apply_augmentation(img, bad), Error);
}

TEST_CASE("balance: plan arithmetic and guards") {
    SUBCASE("pos 100 / neg 250") {
        BalancePlan plan = balance(train_manifest(100, 250));
        CHECK(plan.minority_label == Label::positive);
        CHECK(plan.target_count == 250);
        CHECK(plan.total_copies() == 150);
        CHECK(plan.copies_per_source.size() == 100);
        std::int64_t lo = 1 << 30, hi = 0;
        for (const auto& [id, n] : plan.copies_per_source) {
            lo = std::min(lo, n);
            hi = std::max(hi, n);
        }
        CHECK(lo >= 1);
        CHECK(hi <= 2);
        CHECK(hi - lo <= 1);
    }
    SUBCASE("equal classes are a no-op plan") {
        BalancePlan plan = balance(train_manifest(4852, 4852));
        CHECK(plan.target_count == 4852);
        CHECK(plan.total_copies() == 0);
    }
    SUBCASE("degenerate minority receives the whole deficit") {
        BalancePlan plan = balance(train_manifest(1, 5));
        CHECK(plan.total_copies() == 4);
        CHECK(plan.copies_per_source.at("p0") == 4);
    }
    SUBCASE("empty class") {
        CHECK_THROWS_AS(balance(train_manifest(0, 5)), Error);
    }
    SUBCASE("plan serialization round trip") {
        BalancePlan plan = balance(train_manifest(3, 7));
        BalancePlan restored = balance_plan_from_json(balance_plan_to_json(plan));
        CHECK(restored.minority_label == plan.minority_label);
        CHECK(restored.target_count == plan.target_count);
        CHECK(restored.copies_per_source == plan.copies_per_source);
    }
}

TEST_CASE("execute_balance_plan: equalizes counts with traceable augmented ids") {
    TempDir dir("bal");
    // build a tiny materialized train tree
    std::vector<ImageRecord> records;
    for (int i = 0; i < 2; ++i) {
        ImageRecord r;
        r.image_id = "pos" + std::to_string(i);
        r.label = Label::positive;
        r.split = Split::train;
        r.path = "train/positive/" + r.image_id + ".png";
        records.push_back(r);
    }
    for (int i = 0; i < 5; ++i) {
        ImageRecord r;
        r.image_id = "neg" + std::to_string(i);
        r.label = Label::negative;
        r.split = Split::train;
        r.path = "train/negative/" + r.image_id + ".png";
        records.push_back(r);
    }
    DatasetManifest manifest = DatasetManifest::from_records(std::move(records));
    for (const auto& r : manifest.records()) {
        std::filesystem::create_directories((dir.path() / r.path).parent_path());
        write_png(random_image(256, 256, 3, hash_string(1, r.image_id)), dir.path() / r.path);
    }

    BalancePlan plan = balance(manifest);
    BalanceExecution exec = execute_balance_plan(manifest, plan, dir.path(), 42);
    CHECK(exec.files_written == 3);
    const auto counts = [&]() {
        std::map<Label, int> c;
        for (const auto& r : exec.manifest.records())
            if (r.split == Split::train) ++c[r.label];
        return c;
    }();
    CHECK(counts.at(Label::positive) == counts.at(Label::negative));

    for (const auto& r : exec.manifest.records()) {
        std::string source_id;
        if (parse_augmented_id(r.image_id, &source_id)) {
            const ImageRecord* src = manifest.find(source_id);
            REQUIRE(src != nullptr);
            CHECK(src->label == plan.minority_label);
            CHECK(std::filesystem::exists(dir.path() / r.path));
        }
    }

    // same seed regenerates byte-identical files
    TempDir dir2("bal2");
    for (const auto& r : manifest.records()) {
        std::filesystem::create_directories((dir2.path() / r.path).parent_path());
        write_png(random_image(256, 256, 3, hash_string(1, r.image_id)), dir2.path() / r.path);
    }
    execute_balance_plan(manifest, plan, dir2.path(), 42);
    for (const auto& r : exec.manifest.records()) {
        std::string source_id;
        if (!parse_augmented_id(r.image_id, &source_id)) continue;
        std::ifstream a(dir.path() / r.path, std::ios::binary);
        std::ifstream b(dir2.path() / r.path, std::ios::binary);
        std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
        std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
        CHECK(sa == sb);
    }
}

TEST_CASE("augmented id parsing") {
    std::string src;
    CHECK(parse_augmented_id("img_12__aug3", &src));
    CHECK(src == "img_12");
    CHECK_FALSE(parse_augmented_id("img_12", &src));
    CHECK_FALSE(parse_augmented_id("__aug3", &src));
    CHECK_FALSE(parse_augmented_id("img__aug", &src));
    CHECK_FALSE(parse_augmented_id("img__augx1", &src));
}

TEST_CASE("png io: round trip preserves pixels") {
    TempDir dir("png");
    Image img = random_image(64, 48, 3, 77);
    write_png(img, dir.path() / "x.png");
    Image back = read_png(dir.path() / "x.png");
    CHECK(back == img);
    CHECK_THROWS_AS(read_png(dir.path() / "missing.png"), Error);
    std::ofstream(dir.path() / "bad.png") << "not a png";
    CHECK_THROWS_AS(read_png(dir.path() / "bad.png"), Error);
}

TEST_SUITE_END();
