#include <random>

#include "doctest.h"
#include "pivot/evalkit.hpp"
#include "pivot/pipeline.hpp"

using namespace pivot;

namespace {

RunConfig small_config() {
    RunConfig cfg;
    cfg.encoder.input_resolution = 48;
    cfg.encoder.grid = 6;
    cfg.encoder.channels = 12;
    cfg.synth.canvas_w = 120;
    cfg.synth.canvas_h = 90;
    cfg.synth.frames = 10;
    return cfg;
}

SequenceRecord small_sequence(uint64_t seed) {
    SynthSpec s;
    s.canvas_w = 120;
    s.canvas_h = 90;
    s.frames = 10;
    s.target.x = 40;
    s.target.y = 30;
    s.target.w = 24;
    s.target.h = 20;
    s.seed = seed;
    return generate_synthetic(s);
}

}  // namespace

TEST_CASE("search region geometry round-trips boxes to sub-pixel accuracy") {
    std::mt19937_64 rng(91);
    std::uniform_real_distribution<double> pos(-20.0, 140.0), size(2.0, 60.0);
    for (int t = 0; t < 1000; ++t) {
        const BoundingBox last{pos(rng), pos(rng), size(rng), size(rng)};
        SearchRegionGeometry g;
        g.cx = last.cx();
        g.cy = last.cy();
        g.side = 5.0 * std::sqrt(last.w * last.h);
        g.resolution = 48;
        const BoundingBox b{pos(rng), pos(rng), size(rng), size(rng)};
        const BoundingBox back = g.box_to_image(g.box_to_patch(b));
        CHECK(std::abs(back.x - b.x) < 1e-9);
        CHECK(std::abs(back.y - b.y) < 1e-9);
        CHECK(std::abs(back.w - b.w) < 1e-9);
        CHECK(std::abs(back.h - b.h) < 1e-9);
    }
}

TEST_CASE("crop_search_region centers the region on the previous box") {
    Image frame(120, 90);
    for (auto& p : frame.px) p = 0.5f;
    const BoundingBox last{40, 30, 24, 20};
    auto [patch, geom] = crop_search_region(frame, last, 5.0, 48);
    CHECK(patch.w == 48);
    CHECK(patch.h == 48);
    CHECK(geom.cx == doctest::Approx(last.cx()));
    CHECK(geom.cy == doctest::Approx(last.cy()));
    CHECK(geom.side == doctest::Approx(5.0 * std::sqrt(24.0 * 20.0)));
    const BoundingBox p = geom.box_to_patch(last);
    CHECK(p.cx() == doctest::Approx(24.0));
    CHECK(p.cy() == doctest::Approx(24.0));
}

TEST_CASE("clamp_box_to_frame shifts where possible and clips otherwise") {
    const BoundingBox in = clamp_box_to_frame({-5, 10, 20, 20}, 100, 80);
    CHECK(in.x == doctest::Approx(0.0));
    CHECK(in.w == doctest::Approx(20.0));
    const BoundingBox br = clamp_box_to_frame({95, 75, 20, 20}, 100, 80);
    CHECK(br.x2() <= 100.0 + 1e-9);
    CHECK(br.y2() <= 80.0 + 1e-9);
    CHECK(br.w == doctest::Approx(20.0));
    const BoundingBox huge = clamp_box_to_frame({-10, -10, 200, 200}, 100, 80);
    CHECK(huge.x == doctest::Approx(0.0));
    CHECK(huge.w == doctest::Approx(100.0));
    CHECK(huge.h == doctest::Approx(80.0));
}

TEST_CASE("initialize rejects boxes that miss the frame") {
    Model model(small_config());
    Tracker tracker(model, model.cfg.track, model.cfg.tpr, model.cfg.sigma_factor);
    const SequenceRecord seq = small_sequence(3);
    CHECK_THROWS(tracker.initialize(seq.frames[0], {500, 500, 20, 20}));
    CHECK_THROWS(tracker.initialize(seq.frames[0], {10, 10, 0, 0}));
}

TEST_CASE("initialize seeds both references and templates from frame 0") {
    Model model(small_config());
    Tracker tracker(model, model.cfg.track, model.cfg.tpr, model.cfg.sigma_factor);
    const SequenceRecord seq = small_sequence(4);
    TrackState st = tracker.initialize(seq.frames[0], seq.boxes[0]);
    CHECK(st.ref1_feat.v == st.ref2_feat.v);
    CHECK(st.tem1_feat.v == st.tem2_feat.v);
    CHECK(st.tem1_emb.values == st.tem2_emb.values);
    CHECK(st.last_conf == 1.0);
    CHECK(st.last_box.x == seq.boxes[0].x);
    CHECK(st.frame_index == 0);
}

TEST_CASE("track_sequence starts with the init box and stays in frame") {
    Model model(small_config());
    Tracker tracker(model, model.cfg.track, model.cfg.tpr, model.cfg.sigma_factor);
    const SequenceRecord seq = small_sequence(5);
    const auto out = track_sequence(tracker, seq);
    REQUIRE(out.size() == seq.length());
    CHECK(out[0].box.x == seq.boxes[0].x);
    CHECK(out[0].confidence == 1.0);
    for (const auto& f : out) {
        CHECK(f.box.valid());
        CHECK(f.box.x >= -1e-9);
        CHECK(f.box.y >= -1e-9);
        CHECK(f.box.x2() <= 120.0 + 1e-9);
        CHECK(f.box.y2() <= 90.0 + 1e-9);
    }
}

TEST_CASE("tracking is bit-identical across repeated runs") {
    const RunConfig cfg = small_config();
    const SequenceRecord seq = small_sequence(6);
    std::vector<FrameResult> a, b;
    {
        Model model(cfg);
        Tracker tracker(model, cfg.track, cfg.tpr, cfg.sigma_factor);
        a = track_sequence(tracker, seq);
    }
    {
        Model model(cfg);
        Tracker tracker(model, cfg.track, cfg.tpr, cfg.sigma_factor);
        b = track_sequence(tracker, seq);
    }
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].box.x == b[i].box.x);
        CHECK(a[i].box.y == b[i].box.y);
        CHECK(a[i].box.w == b[i].box.w);
        CHECK(a[i].box.h == b[i].box.h);
        CHECK(a[i].confidence == b[i].confidence);
    }
}

TEST_CASE("prompt-enabled and prompt-free paths both produce valid tracks") {
    RunConfig cfg = small_config();
    const SequenceRecord seq = small_sequence(7);
    Model model(cfg);
    TrackConfig off = cfg.track;
    off.prompt_enabled = false;
    off.tpr_enabled = false;
    Tracker t_on(model, cfg.track, cfg.tpr, cfg.sigma_factor);
    Tracker t_off(model, off, cfg.tpr, cfg.sigma_factor);
    for (const auto& f : track_sequence(t_on, seq)) CHECK(f.box.valid());
    for (const auto& f : track_sequence(t_off, seq)) CHECK(f.box.valid());
}

TEST_CASE("run_ope records per-sequence errors instead of aborting") {
    RunConfig cfg = small_config();
    Model model(cfg);
    Tracker tracker(model, cfg.track, cfg.tpr, cfg.sigma_factor);
    SequenceRecord good = small_sequence(8);
    SequenceRecord bad = small_sequence(9);
    bad.name = "bad";
    bad.boxes[0] = {500, 500, 10, 10};  // init box outside the frame
    OpeOutcome out = run_ope(tracker, {good, bad});
    CHECK(out.results.size() == 1);
    REQUIRE(out.errors.size() == 1);
    CHECK(out.errors[0].find("bad") != std::string::npos);
}
