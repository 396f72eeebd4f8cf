#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "pivot/tpr.hpp"

using namespace pivot;

namespace {

// Independent exhaustive oracle: partition into 3x3-stride-3 blocks (partial
// blocks at the edges), take each block's max cell (lexicographically first
// on ties), keep those >= tau, sort by score desc then (row, col), cap.
std::vector<GridPoint> oracle_candidates(const ScoreMap& m, const TprConfig& cfg) {
    std::vector<GridPoint> pts;
    std::vector<double> scores;
    for (int br = 0; br < m.h; br += 3)
        for (int bc = 0; bc < m.w; bc += 3) {
            GridPoint best{br, bc};
            double bv = m.at(br, bc);
            for (int r = br; r < std::min(br + 3, m.h); ++r)
                for (int c = bc; c < std::min(bc + 3, m.w); ++c)
                    if (m.at(r, c) > bv) {
                        bv = m.at(r, c);
                        best = {r, c};
                    }
            if (bv >= cfg.tau) {
                pts.push_back(best);
                scores.push_back(bv);
            }
        }
    std::vector<size_t> idx(pts.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        if (pts[a].row != pts[b].row) return pts[a].row < pts[b].row;
        return pts[a].col < pts[b].col;
    });
    std::vector<GridPoint> out;
    for (size_t i = 0; i < idx.size() && i < static_cast<size_t>(cfg.max_candidates); ++i)
        out.push_back(pts[idx[i]]);
    return out;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

EmbeddingVector unit2(double a, double b) {
    const double n = std::hypot(a, b);
    EmbeddingVector e;
    e.values = {a / n, b / n};
    return e;
}

}  // namespace

TEST_CASE("constant map below tau yields no candidates") {
    ScoreMap m(6, 6);
    for (double& v : m.v) v = 0.01;
    CHECK(extract_candidates(m, TprConfig{}).empty());
}

TEST_CASE("two isolated peaks are both found in score order") {
    ScoreMap m(6, 6);
    m.at(1, 1) = 0.9;
    m.at(4, 4) = 0.7;
    const auto pts = extract_candidates(m, TprConfig{});
    REQUIRE(pts.size() == 2);
    CHECK(pts[0] == GridPoint{1, 1});
    CHECK(pts[1] == GridPoint{4, 4});
}

TEST_CASE("extract_candidates equals the exhaustive block scan on random maps") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(-0.2, 1.0);
    std::uniform_int_distribution<int> size(6, 27);
    TprConfig cfg;
    cfg.max_candidates = 64;  // exercise the full set
    for (int t = 0; t < 1000; ++t) {
        ScoreMap m(size(rng), size(rng));
        for (double& v : m.v) v = u(rng);
        const auto got = extract_candidates(m, cfg);
        const auto want = oracle_candidates(m, cfg);
        REQUIRE(got.size() == want.size());
        for (size_t i = 0; i < got.size(); ++i) CHECK(got[i] == want[i]);
    }
}

TEST_CASE("candidate cap keeps the highest scores") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    TprConfig cfg;  // cap 8
    for (int t = 0; t < 100; ++t) {
        ScoreMap m(15, 15);
        for (double& v : m.v) v = u(rng);
        const auto got = extract_candidates(m, cfg);
        const auto want = oracle_candidates(m, cfg);
        CHECK(got.size() <= 8);
        REQUIRE(got.size() == want.size());
        for (size_t i = 0; i < got.size(); ++i) CHECK(got[i] == want[i]);
    }
}

TEST_CASE("grids smaller than 3x3 are rejected") {
    ScoreMap m(2, 5);
    CHECK_THROWS(extract_candidates(m, TprConfig{}));
}

TEST_CASE("importance of a single candidate is exactly 1") {
    const auto d = importance_scores({unit2(1, 0)}, unit2(1, 0), unit2(0, 1));
    REQUIRE(d.size() == 1);
    CHECK(d[0] == 1.0);
}

TEST_CASE("equal cosines split importance evenly") {
    const auto d =
        importance_scores({unit2(1, 1), unit2(1, 1)}, unit2(1, 0), unit2(0, 1));
    REQUIRE(d.size() == 2);
    CHECK(d[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(d[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("hand-computed two-candidate case: D_A = sigmoid(0.8)") {
    // candidate A has cosine 0.9 to both templates, B has 0.1
    EmbeddingVector t1 = unit2(1, 0);
    EmbeddingVector a, b;
    a.values = {0.9, std::sqrt(1 - 0.81)};
    b.values = {0.1, std::sqrt(1 - 0.01)};
    const auto d = importance_scores({a, b}, t1, t1);
    CHECK(d[0] == doctest::Approx(sigmoid(0.8)).epsilon(1e-9));
    CHECK(d[0] == doctest::Approx(0.6899744811).epsilon(1e-6));
    CHECK(d[1] == doctest::Approx(1.0 - sigmoid(0.8)).epsilon(1e-9));
}

TEST_CASE("importance sums to 1 and is shift-invariant") {
    std::mt19937_64 rng(43);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
        std::uniform_int_distribution<int> nn(1, 8);
        const int n = nn(rng);
        std::vector<EmbeddingVector> cands;
        for (int i = 0; i < n; ++i) cands.push_back(unit2(g(rng), g(rng)));
        EmbeddingVector t1 = unit2(g(rng), g(rng));
        EmbeddingVector t2 = unit2(g(rng), g(rng));
        const auto d = importance_scores(cands, t1, t2);
        double s = 0.0;
        for (double v : d) s += v;
        CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
        for (double v : d) {
            CHECK(v > 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("refine_prompt rewrites exactly the accepted cells to exactly 1") {
    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> u(0.0, 0.999);
    TprConfig cfg;
    for (int t = 0; t < 1000; ++t) {
        ScoreMap m(9, 9);
        for (double& v : m.v) v = u(rng);
        CandidateSet cands;
        std::uniform_int_distribution<int> cell(0, 8);
        std::uniform_real_distribution<double> imp(0.0, 1.0);
        const int n = 1 + (t % 5);
        for (int i = 0; i < n; ++i) {
            cands.points.push_back({cell(rng), cell(rng)});
            cands.importance.push_back(imp(rng));
        }
        const ScoreMap out = refine_prompt(m, cands, cfg);
        // expected accepted mask (later duplicates can re-accept a cell)
        std::vector<bool> accepted(81, false);
        for (int i = 0; i < n; ++i)
            if (cands.importance[static_cast<size_t>(i)] > cfg.gamma)
                accepted[static_cast<size_t>(cands.points[static_cast<size_t>(i)].row) *
                             9 + cands.points[static_cast<size_t>(i)].col] = true;
        for (int i = 0; i < 81; ++i) {
            if (accepted[static_cast<size_t>(i)])
                CHECK(out.v[static_cast<size_t>(i)] == 1.0);
            else
                CHECK(out.v[static_cast<size_t>(i)] == m.v[static_cast<size_t>(i)]);
            CHECK(out.v[static_cast<size_t>(i)] >= m.v[static_cast<size_t>(i)]);
        }
    }
}

TEST_CASE("gamma-rejecting every candidate returns a bit-identical map") {
    std::mt19937_64 rng(45);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ScoreMap m(6, 6);
    for (double& v : m.v) v = u(rng);
    CandidateSet cands;
    cands.points = {{1, 1}, {4, 2}};
    cands.importance = {0.25, 0.1};  // gamma = 0.25, strict >
    const ScoreMap out = refine_prompt(m, cands, TprConfig{});
    CHECK(out.v == m.v);
}

TEST_CASE("retrieve_candidate_boxes falls back to the initial size without last_d") {
    const std::vector<GridPoint> pts = {{2, 3}, {5, 1}};
    const BoundingBox init{0, 0, 24, 18};
    const RetrievedBoxes rb = retrieve_candidate_boxes(pts, nullptr, 96, 12, 12, init);
    CHECK(rb.fallback);
    REQUIRE(rb.boxes.size() == 2);
    CHECK(rb.boxes[0].w == doctest::Approx(24.0));
    CHECK(rb.boxes[0].cx() == doctest::Approx(cell_center_x(3, 12, 96)));
    CHECK(rb.boxes[0].cy() == doctest::Approx(cell_center_y(2, 12, 96)));
}

TEST_CASE("retrieve_candidate_boxes decodes the last regression map") {
    const BoundingBox box{20.0, 28.0, 40.0, 30.0};
    const LtrbMap d = ltrb_encode(box, 96, 12, 12);
    // pick a valid cell
    GridPoint p{-1, -1};
    for (int r = 0; r < 12 && p.row < 0; ++r)
        for (int c = 0; c < 12; ++c)
            if (d.valid_at(r, c)) {
                p = {r, c};
                break;
            }
    REQUIRE(p.row >= 0);
    const RetrievedBoxes rb =
        retrieve_candidate_boxes({p}, &d, 96, 12, 12, {0, 0, 10, 10});
    CHECK(!rb.fallback);
    CHECK(iou(rb.boxes[0], box) >= 0.99);
    CHECK(retrieve_candidate_boxes({}, &d, 96, 12, 12, {0, 0, 1, 1}).boxes.empty());
}
