#pragma once

#include <vector>

#include "pivot/datamodel.hpp"
#include "pivot/encoders.hpp"

namespace pivot {

struct TprConfig {
    double tau = 0.05;       // candidate confidence threshold
    double gamma = 0.25;     // importance acceptance threshold (strict >)
    int max_candidates = 8;
};

struct CandidateSet {
    std::vector<GridPoint> points;
    std::vector<double> scores;            // h_can at each point
    std::vector<BoundingBox> boxes;        // retrieved, image coordinates
    std::vector<EmbeddingVector> embeddings;
    std::vector<double> importance;        // D_i
    bool box_fallback = false;             // true when no last-frame ltrb existed
};

// Block-partition local maxima of 3x3 stride-3 pooling windows with score
// >= tau; highest scores first, capped at max_candidates. Ties inside a
// block keep the lexicographically smallest (row, col).
std::vector<GridPoint> extract_candidates(const ScoreMap& h_can, const TprConfig& cfg);

// Boxes for each candidate cell, decoded from the previous frame's
// regression map (scale changes between frames are small). Without a
// previous map, falls back to the initial target size centered on the cell.
struct RetrievedBoxes {
    std::vector<BoundingBox> boxes;  // patch coordinates
    bool fallback = false;
};
RetrievedBoxes retrieve_candidate_boxes(const std::vector<GridPoint>& points,
                                        const LtrbMap* last_d, int resolution,
                                        int grid_h, int grid_w,
                                        const BoundingBox& init_size_patch);

// Eq-style importance: D_i = 1/2 sum_j softmax_i(cos(E_can_i, E_tem_j)).
std::vector<double> importance_scores(const std::vector<EmbeddingVector>& cand_embs,
                                      const EmbeddingVector& tem1,
                                      const EmbeddingVector& tem2);

// h_can with every accepted candidate cell (D_i > gamma) set to exactly 1.
ScoreMap refine_prompt(const ScoreMap& h_can, const CandidateSet& cands,
                       const TprConfig& cfg);

}  // namespace pivot
