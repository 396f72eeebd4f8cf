#include "pivot/tpr.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pivot {

std::vector<GridPoint> extract_candidates(const ScoreMap& h_can, const TprConfig& cfg) {
    if (h_can.h < 3 || h_can.w < 3)
        throw std::invalid_argument("extract_candidates: grid smaller than 3x3");
    struct Scored {
        GridPoint p;
        double s;
    };
    std::vector<Scored> found;
    for (int br = 0; br < h_can.h; br += 3) {
        for (int bc = 0; bc < h_can.w; bc += 3) {
            GridPoint best{br, bc};
            double best_v = h_can.at(br, bc);
            for (int r = br; r < std::min(br + 3, h_can.h); ++r)
                for (int c = bc; c < std::min(bc + 3, h_can.w); ++c)
                    if (h_can.at(r, c) > best_v) {
                        best_v = h_can.at(r, c);
                        best = {r, c};
                    }
            if (best_v >= cfg.tau) found.push_back({best, best_v});
        }
    }
    std::stable_sort(found.begin(), found.end(), [](const Scored& a, const Scored& b) {
        if (a.s != b.s) return a.s > b.s;
        if (a.p.row != b.p.row) return a.p.row < b.p.row;
        return a.p.col < b.p.col;
    });
    if (static_cast<int>(found.size()) > cfg.max_candidates)
        found.resize(static_cast<size_t>(cfg.max_candidates));
    std::vector<GridPoint> out;
    out.reserve(found.size());
    for (const auto& f : found) out.push_back(f.p);
    return out;
}

RetrievedBoxes retrieve_candidate_boxes(const std::vector<GridPoint>& points,
                                        const LtrbMap* last_d, int resolution,
                                        int grid_h, int grid_w,
                                        const BoundingBox& init_size_patch) {
    RetrievedBoxes out;
    out.boxes.reserve(points.size());
    if (last_d == nullptr) {
        // first frame: initial target size centered on the candidate cell
        out.fallback = true;
        for (const auto& p : points) {
            const double cx = cell_center_x(p.col, grid_w, resolution);
            const double cy = cell_center_y(p.row, grid_h, resolution);
            out.boxes.push_back({cx - 0.5 * init_size_patch.w, cy - 0.5 * init_size_patch.h,
                                 init_size_patch.w, init_size_patch.h});
        }
        return out;
    }
    for (const auto& p : points) out.boxes.push_back(ltrb_decode(*last_d, p, resolution).box);
    return out;
}

std::vector<double> importance_scores(const std::vector<EmbeddingVector>& cand_embs,
                                      const EmbeddingVector& tem1,
                                      const EmbeddingVector& tem2) {
    const size_t n = cand_embs.size();
    std::vector<double> out(n, 0.0);
    if (n == 0) return out;
    for (const EmbeddingVector* tem : {&tem1, &tem2}) {
        std::vector<double> cosv(n);
        double mx = -1e300;
        for (size_t i = 0; i < n; ++i) {
            cosv[i] = cand_embs[i].dot(*tem);
            mx = std::max(mx, cosv[i]);
        }
        double denom = 0.0;
        for (size_t i = 0; i < n; ++i) denom += std::exp(cosv[i] - mx);
        for (size_t i = 0; i < n; ++i) out[i] += 0.5 * std::exp(cosv[i] - mx) / denom;
    }
    return out;
}

ScoreMap refine_prompt(const ScoreMap& h_can, const CandidateSet& cands,
                       const TprConfig& cfg) {
    ScoreMap out = h_can;
    for (size_t i = 0; i < cands.points.size(); ++i) {
        const GridPoint& p = cands.points[i];
        if (p.row < 0 || p.row >= h_can.h || p.col < 0 || p.col >= h_can.w)
            throw std::out_of_range("refine_prompt: candidate outside grid");
        if (i < cands.importance.size() && cands.importance[i] > cfg.gamma)
            out.at(p.row, p.col) = 1.0;
    }
    return out;
}

}  // namespace pivot
