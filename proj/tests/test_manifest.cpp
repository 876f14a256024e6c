#include <doctest.h>

#include <fstream>
#include <set>

#include "test_support.hpp"
#include "wastebench/errors.hpp"
#include "wastebench/image.hpp"
#include "wastebench/manifest.hpp"

using namespace wastebench;
using testsupport::TempDir;

TEST_SUITE_BEGIN("manifest");

namespace {

std::string two_pos_three_neg() {
    return R"({"images": [
        {"id": "a", "path": "a.png", "source": "AGEA", "label": 1},
        {"id": "b", "path": "b.png", "source": "GoogleEarth", "label": 1},
        {"id": "c", "path": "c.png", "source": "WorldView3", "label": 0},
        {"id": "d", "path": "d.png", "label": 0, "extra_field": "ignored"},
        {"id": "e", "path": "e.png", "source": "something_else", "label": 0}
    ]})";
}

DatasetManifest synthetic_manifest(int positives, int negatives, Split split = Split::unassigned) {
    std::vector<ImageRecord> records;
    for (int i = 0; i < positives + negatives; ++i) {
        ImageRecord r;
        r.image_id = "img_" + std::to_string(i);
        r.path = "images/" + r.image_id + ".png";
        r.label = i < positives ? Label::positive : Label::negative;
        r.split = split;
        records.push_back(std::move(r));
    }
    return DatasetManifest::from_records(std::move(records));
}

}  // namespace

TEST_CASE("parse_manifest: tallies, lenient source, ignored extras") {
    DatasetManifest m = parse_manifest_text(two_pos_three_neg(), "inline");
    CHECK(m.size() == 5);
    CHECK(m.class_counts().at(Label::positive) == 2);
    CHECK(m.class_counts().at(Label::negative) == 3);
    CHECK(m.source_counts().at(Source::AGEA) == 1);
    CHECK(m.source_counts().at(Source::unknown) == 2);  // missing + unrecognized
    CHECK(m.find("a") != nullptr);
    CHECK(m.find("zz") == nullptr);
}

TEST_CASE("parse_manifest: schema violations name entry and field") {
    auto expect_code = [](const std::string& text, ErrorCode code, const std::string& needle) {
        try {
            parse_manifest_text(text, "inline");
            FAIL_CHECK(("expected error for " + needle).c_str());
        } catch (const Error& e) {
            CHECK(e.code() == code);
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    expect_code(R"({"images": [{"path": "x.png", "label": 0}]})", ErrorCode::SchemaViolation, "id");
    expect_code(R"({"images": [{"id": "x", "label": 0}]})", ErrorCode::SchemaViolation, "path");
    expect_code(R"({"images": [{"id": "x", "path": "p", "label": 3}]})",
                ErrorCode::SchemaViolation, "label");
    expect_code(R"({"images": [{"id": "x", "path": "p", "label": 1, "split": "bogus"}]})",
                ErrorCode::SchemaViolation, "split");
    expect_code(R"({"nope": []})", ErrorCode::SchemaViolation, "images");
    expect_code(R"({"images": [{"id": "x", "path": "p", "label": 1},
                               {"id": "x", "path": "q", "label": 0}]})",
                ErrorCode::DuplicateId, "x");
}

TEST_CASE("apply_corrections: flip, identity, guards, conservation") {
    DatasetManifest m = parse_manifest_text(two_pos_three_neg(), "inline");

    SUBCASE("single negative-to-positive flip") {
        CorrectionResult r = apply_corrections(m, {{"c", Label::negative, Label::positive, "rubble"}});
        CHECK(r.manifest.class_counts().at(Label::positive) == 3);
        CHECK(r.manifest.class_counts().at(Label::negative) == 2);
        CHECK(r.audit.size() == 1);
        CHECK(r.audit[0].image_id == "c");
        // input untouched
        CHECK(m.class_counts().at(Label::positive) == 2);
        // only labels changed
        CHECK(r.manifest.size() == m.size());
        CHECK(r.manifest.find("c")->path == m.find("c")->path);
    }
    SUBCASE("empty corrections are a byte-identical identity") {
        CorrectionResult r = apply_corrections(m, {});
        CHECK(manifest_to_json(r.manifest) == manifest_to_json(m));
        CHECK(r.audit.empty());
    }
    SUBCASE("stale correction") {
        CHECK_THROWS_WITH_AS(apply_corrections(m, {{"a", Label::negative, Label::positive, ""}}),
                             doctest::Contains("out of date"), Error);
    }
    SUBCASE("unknown id") {
        try {
            apply_corrections(m, {{"nope", Label::negative, Label::positive, ""}});
            FAIL_CHECK("expected UnknownId");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::UnknownId);
        }
    }
}

TEST_CASE("corrections file parsing validates old != new") {
    TempDir dir("corr");
    std::ofstream(dir.path() / "c.json")
        << R"([{"id": "a", "old_label": 1, "new_label": 1, "note": "same"}])";
    CHECK_THROWS_AS(parse_corrections(dir.path() / "c.json"), Error);
}

TEST_CASE("make_splits: exact stratification on the 50/50 case") {
    DatasetManifest m = synthetic_manifest(50, 50);
    SplitPlan plan = make_splits(m, 0.2, 42);
    int val_pos = 0, val_neg = 0, train_count = 0;
    for (const auto& r : m.records()) {
        const Split s = plan.assignments.at(r.image_id);
        if (s == Split::validation)
            (r.label == Label::positive ? val_pos : val_neg)++;
        else if (s == Split::train)
            ++train_count;
    }
    CHECK(val_pos == 10);
    CHECK(val_neg == 10);
    CHECK(train_count == 80);
}

TEST_CASE("make_splits: deterministic for a seed, different across seeds") {
    DatasetManifest m = synthetic_manifest(30, 70);
    SplitPlan p1 = make_splits(m, 0.25, 7);
    SplitPlan p2 = make_splits(m, 0.25, 7);
    CHECK(p1.assignments == p2.assignments);
    SplitPlan p3 = make_splits(m, 0.25, 8);
    CHECK(p1.assignments != p3.assignments);
}

TEST_CASE("make_splits: validation total hits round(fraction*N) with per-class bound") {
    // the published-style split: 7,278 eligible records, 1,818 validation
    DatasetManifest m = synthetic_manifest(3200, 4078);
    const double fraction = 1818.0 / 7278.0;
    SplitPlan plan = make_splits(m, fraction, 123);
    std::map<Label, int> val_counts;
    int total_val = 0;
    for (const auto& r : m.records())
        if (plan.assignments.at(r.image_id) == Split::validation) {
            ++val_counts[r.label];
            ++total_val;
        }
    CHECK(total_val == 1818);
    CHECK(std::abs(val_counts[Label::positive] - fraction * 3200.0) <= 1.0);
    CHECK(std::abs(val_counts[Label::negative] - fraction * 4078.0) <= 1.0);
}

TEST_CASE("make_splits: stratification bound holds on random manifests") {
    CounterRng rng(2024);
    for (int trial = 0; trial < 25; ++trial) {
        const int pos = 1 + static_cast<int>(rng.below(400));
        const int neg = 1 + static_cast<int>(rng.below(400));
        const double fraction = 0.05 + 0.9 * rng.next_double();
        DatasetManifest m = synthetic_manifest(pos, neg);
        SplitPlan plan = make_splits(m, fraction, rng.next_u64());
        std::map<Label, double> val;
        for (const auto& r : m.records())
            if (plan.assignments.at(r.image_id) == Split::validation) ++val[r.label];
        CHECK(std::abs(val[Label::positive] - fraction * pos) <= 1.0 + 1e-9);
        CHECK(std::abs(val[Label::negative] - fraction * neg) <= 1.0 + 1e-9);
        for (const auto& r : m.records()) CHECK(plan.assignments.count(r.image_id) == 1);
    }
}

TEST_CASE("make_splits: test records are never reassigned") {
    std::vector<ImageRecord> records;
    for (int i = 0; i < 20; ++i) {
        ImageRecord r;
        r.image_id = "t" + std::to_string(i);
        r.path = r.image_id + ".png";
        r.label = i % 2 ? Label::positive : Label::negative;
        r.split = i < 6 ? Split::test : Split::unassigned;
        records.push_back(std::move(r));
    }
    DatasetManifest m = DatasetManifest::from_records(std::move(records));
    SplitPlan plan = make_splits(m, 0.5, 1);
    for (int i = 0; i < 6; ++i) CHECK(plan.assignments.at("t" + std::to_string(i)) == Split::test);
    int val = 0;
    for (const auto& [id, s] : plan.assignments)
        if (s == Split::validation) ++val;
    CHECK(val == 7);  // round(0.5 * 14)
}

TEST_CASE("make_splits: guards") {
    CHECK_THROWS_AS(make_splits(DatasetManifest{}, 0.2, 1), Error);
    DatasetManifest m = synthetic_manifest(5, 5);
    CHECK_THROWS_AS(make_splits(m, 0.0, 1), Error);
    CHECK_THROWS_AS(make_splits(m, 1.0, 1), Error);
    DatasetManifest single = synthetic_manifest(10, 0);
    SplitPlan plan = make_splits(single, 0.3, 1);
    REQUIRE(plan.warnings.size() == 1);
    CHECK(plan.warnings[0].find("DegenerateClass") != std::string::npos);
}

TEST_CASE("split plan serialization round trip") {
    DatasetManifest m = synthetic_manifest(6, 4);
    SplitPlan plan = make_splits(m, 0.3, 99);
    SplitPlan restored = split_plan_from_json(split_plan_to_json(plan));
    CHECK(restored.assignments == plan.assignments);
    CHECK(restored.seed == plan.seed);
    CHECK(restored.validation_fraction == doctest::Approx(plan.validation_fraction));
}

TEST_CASE("materialize: tree layout, idempotence, missing files") {
    TempDir dir("mat");
    const auto src = dir.path() / "src";
    std::filesystem::create_directories(src / "images");
    DatasetManifest m = synthetic_manifest(2, 3);
    for (const auto& r : m.records()) {
        Image img(8, 8, 3);
        img.at(0, 0, 0) = 200;
        write_png(img, src / r.path);
    }
    SplitPlan plan = make_splits(m, 0.2, 5);

    const auto dest = dir.path() / "tree";
    MaterializeSummary s1 = materialize(m, plan, src, dest);
    CHECK(s1.files_written == 5);
    std::int64_t total = 0;
    for (const auto& [folder, n] : s1.folder_counts) total += n;
    CHECK(total == 5);
    // every leaf folder count matches the files on disk
    for (const auto& [folder, n] : s1.folder_counts) {
        std::int64_t on_disk = 0;
        for ([[maybe_unused]] const auto& f :
             std::filesystem::directory_iterator(dest / folder))
            ++on_disk;
        CHECK(on_disk == n);
    }

    MaterializeSummary s2 = materialize(m, plan, src, dest);
    CHECK(s2.files_written == 0);
    CHECK(s2.files_already_present == 5);
    CHECK(s2.folder_counts == s1.folder_counts);

    std::filesystem::remove(src / "images/img_0.png");
    std::filesystem::remove(src / "images/img_3.png");
    try {
        materialize(m, plan, src, dest / "again");
        FAIL_CHECK("expected MissingImageFile");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingImageFile);
        CHECK(std::string(e.what()).find("img_0.png") != std::string::npos);
        CHECK(std::string(e.what()).find("img_3.png") != std::string::npos);
    }
}

TEST_CASE("summarize: tallies and degenerate input") {
    DatasetManifest m = parse_manifest_text(two_pos_three_neg(), "inline");
    SummaryReport r = summarize(m);
    CHECK(r.total == 5);
    CHECK(r.by_class.at(Label::positive) == 2);
    CHECK(r.by_class.at(Label::negative) == 3);
    CHECK(r.to_json().find("\"positive\": 2") != std::string::npos);

    SummaryReport empty = summarize(DatasetManifest{});
    CHECK(empty.total == 0);
    CHECK(empty.by_class.at(Label::positive) == 0);
}

TEST_CASE("external metadata adapter maps label and path conventions") {
    TempDir dir("ext");
    std::ofstream(dir.path() / "ext.json") << R"([
        {"img": "tiles/0001.png", "is_candidate_location": true},
        {"img": "tiles/0002.png", "is_candidate_location": false}
    ])";
    DatasetManifest m = adapt_external_manifest(dir.path() / "ext.json");
    CHECK(m.size() == 2);
    CHECK(m.class_counts().at(Label::positive) == 1);
    CHECK(m.find("0001")->path == "tiles/0001.png");
}

TEST_SUITE_END();
