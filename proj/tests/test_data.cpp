#include <filesystem>
#include <unistd.h>

#include "doctest.h"
#include "pivot/data.hpp"

using namespace pivot;
namespace fs = std::filesystem;

namespace {

SynthSpec basic_spec() {
    SynthSpec s;
    s.name = "t";
    s.canvas_w = 120;
    s.canvas_h = 90;
    s.frames = 24;
    s.target.color = {0.9, 0.2, 0.15};
    s.target.x = 30;
    s.target.y = 25;
    s.target.w = 22;
    s.target.h = 18;
    s.seed = 5;
    return s;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("data_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("generation is deterministic in the spec seed") {
    const SequenceRecord a = generate_synthetic(basic_spec());
    const SequenceRecord b = generate_synthetic(basic_spec());
    REQUIRE(a.length() == 24);
    REQUIRE(a.boxes.size() == 24);
    for (size_t i = 0; i < a.length(); ++i) {
        CHECK(a.frames[i].px == b.frames[i].px);
        CHECK(a.boxes[i].x == b.boxes[i].x);
        CHECK(a.boxes[i].w == b.boxes[i].w);
    }
    SynthSpec s2 = basic_spec();
    s2.seed = 6;
    const SequenceRecord c = generate_synthetic(s2);
    CHECK(a.frames[5].px != c.frames[5].px);
}

TEST_CASE("ground-truth boxes match the rendered target pixels") {
    const SynthSpec spec = basic_spec();
    const SequenceRecord rec = generate_synthetic(spec);
    int checked = 0;
    for (size_t i = 0; i < rec.length(); ++i) {
        if (!rec.visible.empty() && !rec.visible[i]) continue;
        const auto key = color_key_box(rec.frames[i], spec.target.color);
        REQUIRE(key.has_value());
        CHECK(iou(*key, rec.boxes[i]) > 0.6);
        CHECK(std::abs(key->cx() - rec.boxes[i].cx()) < 4.0);
        CHECK(std::abs(key->cy() - rec.boxes[i].cy()) < 4.0);
        ++checked;
    }
    CHECK(checked >= 20);
}

TEST_CASE("occlusion events hide the target and clear the visible flag") {
    SynthSpec s = basic_spec();
    s.occlusions.push_back({8, 4, {0.05, 0.05, 0.05}});
    const SequenceRecord rec = generate_synthetic(s);
    REQUIRE(rec.visible.size() == rec.length());
    int hidden = 0;
    for (int i = 8; i < 12; ++i)
        if (!rec.visible[static_cast<size_t>(i)]) ++hidden;
    CHECK(hidden == 4);
    CHECK(rec.visible[0]);
    CHECK(rec.visible[13]);
    // covered target should not be color-detectable mid-occlusion
    CHECK(!color_key_box(rec.frames[9], s.target.color).has_value());
}

TEST_CASE("the canonical suites cover the four scenario families") {
    SynthConfig cfg;
    cfg.sequences = 4;
    cfg.frames = 8;
    auto suites = make_suites(cfg);
    REQUIRE(suites.size() == 4);
    for (const std::string name : {"plain", "distractor", "occlusion", "deform"}) {
        REQUIRE(suites.count(name) == 1);
        CHECK(suites[name].size() == 4);
    }
    for (const auto& s : suites["distractor"]) CHECK(!s.distractors.empty());
    for (const auto& s : suites["occlusion"]) CHECK(!s.occlusions.empty());
    for (const auto& s : suites["deform"]) CHECK(s.target.morph_amplitude > 0.0);
    for (const auto& s : suites["plain"]) {
        CHECK(s.distractors.empty());
        CHECK(s.occlusions.empty());
    }
    // a different master seed changes the drawn sequences
    SynthConfig cfg2 = cfg;
    cfg2.master_seed = cfg.master_seed + 1;
    auto alt = make_suite("plain", cfg2);
    CHECK(alt[0].seed != suites["plain"][0].seed);
}

TEST_CASE("write_suite round-trips through the got10k loader") {
    TempDir tmp;
    SynthConfig cfg;
    cfg.sequences = 2;
    cfg.frames = 6;
    std::vector<SequenceRecord> recs;
    for (const auto& spec : make_suite("plain", cfg))
        recs.push_back(generate_synthetic(spec));
    write_suite(tmp.path.string(), recs);
    LoadResult lr = load_dataset(tmp.path.string(), DatasetLayout::Got10k);
    CHECK(lr.errors.empty());
    REQUIRE(lr.sequences.size() == 2);
    for (size_t i = 0; i < 2; ++i) {
        const auto& orig = recs[i];
        const auto& back = lr.sequences[i];
        CHECK(back.name == orig.name);
        REQUIRE(back.length() == orig.length());
        REQUIRE(back.boxes.size() == orig.boxes.size());
        for (size_t f = 0; f < orig.boxes.size(); ++f) {
            CHECK(back.boxes[f].x == doctest::Approx(orig.boxes[f].x).epsilon(1e-3));
            CHECK(back.boxes[f].w == doctest::Approx(orig.boxes[f].w).epsilon(1e-3));
        }
        // lazy frame loading decodes the stored images
        const Image f0 = back.frame(0);
        CHECK(f0.w == orig.frames[0].w);
        CHECK(f0.h == orig.frames[0].h);
    }
}

TEST_CASE("loading a nonexistent root throws") {
    CHECK_THROWS(load_dataset("/nonexistent/dataset/root", DatasetLayout::Got10k));
}

TEST_CASE("layout_from_string accepts the three names and rejects others") {
    CHECK(layout_from_string("otb") == DatasetLayout::Otb);
    CHECK(layout_from_string("lasot") == DatasetLayout::Lasot);
    CHECK(layout_from_string("got10k") == DatasetLayout::Got10k);
    CHECK_THROWS(layout_from_string("imagenet"));
}
