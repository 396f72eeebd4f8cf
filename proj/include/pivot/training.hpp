#pragma once

#include <random>

#include "pivot/config.hpp"
#include "pivot/datamodel.hpp"
#include "pivot/head.hpp"
#include "pivot/nn/autodiff.hpp"

namespace pivot {

// Gaussian-peaked classification label on an H x W grid over a
// resolution x resolution patch. The center is snapped to the nearest cell
// so the peak is exactly 1; sigma = sigma_factor * min(H, W) cells.
// A center outside the patch yields an all-zero (negative-only) map.
ScoreMap make_gaussian_label(const BoundingBox& center_box_patch, int resolution,
                             int grid_h, int grid_w, double sigma_factor);

LabelPair make_label_pair(const BoundingBox& box_patch, int resolution, int grid_h,
                          int grid_w, double sigma_factor);

// DiMP hinged classification error: squared (pred - label) on foreground
// cells (label >= fg_threshold), squared max(0, pred) on background; mean
// over all cells.
nn::Var classification_loss(const nn::Var& pred, const ScoreMap& label,
                            double fg_threshold);
double classification_loss_value(const ScoreMap& pred, const ScoreMap& label,
                                 double fg_threshold);

// Mean (1 - GIoU) over the label's valid cells, boxes decoded per cell.
// Zero valid cells yields a constant 0 and sets *no_valid_cells.
nn::Var regression_loss(const nn::Var& pred, const LtrbMap& label, int resolution,
                        bool* no_valid_cells = nullptr);
double regression_loss_value(const LtrbMap& pred, const LtrbMap& label, int resolution);

// Eq.4-style weighted sum; pass h_can = nullptr to drop the prompt term
// (stage 1 trains without the prompting components).
nn::Var total_loss(const nn::Var& h_cls, const nn::Var* h_can, const nn::Var& d,
                   const LabelPair& label, const LossWeights& w, double fg_threshold,
                   int resolution);

struct SubsequenceSample {
    int ref1 = 0;
    int ref2 = 0;
    int cur = 0;
};

// Three distinct frame indices within one `window`-frame span.
SubsequenceSample sample_subsequence(int sequence_length, int window,
                                     std::mt19937_64& rng);

}  // namespace pivot
