#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "pivot/prompting.hpp"

using namespace pivot;
using testutil::max_fd_rel_err;
using testutil::random_param;

namespace {
constexpr int kG = 6;
constexpr int kC = 8;
constexpr int kN = kG * kG;
}  // namespace

TEST_CASE("pgn produces one score per cell, deterministically") {
    nn::ParamStore store;
    std::mt19937_64 rng(61);
    Pgn pgn(store, "pgn", kC, rng);
    nn::Var t1 = random_param({kN, kC}, rng);
    nn::Var t2 = random_param({kN, kC}, rng);
    nn::Var vc = random_param({kN, kC}, rng);
    nn::Var a = pgn.forward(t1, t2, vc, kG, kG);
    nn::Var b = pgn.forward(t1, t2, vc, kG, kG);
    CHECK(a->val.dim(0) == kN);
    CHECK(a->val.dim(1) == 1);
    CHECK(a->val.d == b->val.d);
}

TEST_CASE("pgn rejects mismatched grids") {
    nn::ParamStore store;
    std::mt19937_64 rng(62);
    Pgn pgn(store, "pgn", kC, rng);
    nn::Var t1 = random_param({kN, kC}, rng);
    CHECK_THROWS(pgn.forward(t1, t1, t1, kG, kG + 1));
}

TEST_CASE("pgn gradients pass finite differences on a 6x6x8 grid") {
    nn::ParamStore store;
    std::mt19937_64 rng(63);
    Pgn pgn(store, "pgn", kC, rng);
    nn::Var t1 = random_param({kN, kC}, rng);
    nn::Var t2 = random_param({kN, kC}, rng);
    nn::Var vc = random_param({kN, kC}, rng);
    auto loss_fn = [&] { return nn::mean(nn::square(pgn.forward(t1, t2, vc, kG, kG))); };
    std::vector<nn::Var> params = {t1, t2, vc};
    for (const auto& [name, p] : store.all()) params.push_back(p);
    CHECK(max_fd_rel_err(loss_fn, params, rng, 3) < 1e-4);
}

TEST_CASE("rm output keeps the feature shape and depends on the prompt") {
    nn::ParamStore store;
    std::mt19937_64 rng(64);
    Rm rm(store, "rm", kC, rng);
    nn::Var vc = random_param({kN, kC}, rng);
    nn::Var h0 = random_param({kN, 1}, rng);
    nn::Var h1 = random_param({kN, 1}, rng);
    nn::Var a = rm.forward(h0, vc, kG, kG);
    nn::Var b = rm.forward(h1, vc, kG, kG);
    CHECK(a->val.dim(0) == kN);
    CHECK(a->val.dim(1) == kC);
    CHECK(a->val.d != b->val.d);
}

TEST_CASE("rm is residual: zeroed conv output returns v_cur unchanged") {
    nn::ParamStore store;
    std::mt19937_64 rng(65);
    Rm rm(store, "rm", kC, rng);
    for (const auto& [name, p] : store.all())
        std::fill(p->val.d.begin(), p->val.d.end(), 0.0);
    nn::Var vc = random_param({kN, kC}, rng);
    nn::Var h = random_param({kN, 1}, rng);
    nn::Var out = rm.forward(h, vc, kG, kG);
    for (size_t i = 0; i < out->val.size(); ++i)
        CHECK(out->val.d[i] == doctest::Approx(vc->val.d[i]).epsilon(1e-12));
}

TEST_CASE("rm gradients pass finite differences on a 6x6x8 grid") {
    nn::ParamStore store;
    std::mt19937_64 rng(66);
    Rm rm(store, "rm", kC, rng);
    nn::Var vc = random_param({kN, kC}, rng);
    nn::Var h = random_param({kN, 1}, rng);
    auto loss_fn = [&] { return nn::mean(nn::square(rm.forward(h, vc, kG, kG))); };
    std::vector<nn::Var> params = {vc, h};
    for (const auto& [name, p] : store.all()) params.push_back(p);
    CHECK(max_fd_rel_err(loss_fn, params, rng, 3) < 1e-4);
}

TEST_CASE("extract_template_feature matches encoding the resized box crop") {
    FrameEncoderSpec spec;
    spec.input_resolution = 48;
    spec.grid = 6;
    spec.channels = 12;
    nn::ParamStore store;
    std::mt19937_64 rng(67);
    FrameEncoder enc(spec, store, rng);
    Image frame(64, 64);
    std::mt19937_64 prng(68);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (auto& p : frame.px) p = u(prng);
    const BoundingBox box{10, 14, 20, 16};
    nn::Var a = extract_template_feature(enc, frame, box);
    nn::Var b = enc.encode(crop_resize(frame, box, 48, 48));
    CHECK(a->val.d == b->val.d);
}
