#include "pivot/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pivot {

using nn::Var;

ScoreMap make_gaussian_label(const BoundingBox& box, int resolution, int grid_h,
                             int grid_w, double sigma_factor) {
    ScoreMap out(grid_h, grid_w, static_cast<double>(resolution) / grid_w);
    const double cx = box.cx(), cy = box.cy();
    if (cx < 0.0 || cx > resolution || cy < 0.0 || cy > resolution)
        return out;  // negative-only sample
    // snap the center to the nearest cell so the peak is exactly 1
    const double cell_w = static_cast<double>(resolution) / grid_w;
    const double cell_h = static_cast<double>(resolution) / grid_h;
    const int pc = std::clamp(static_cast<int>(cx / cell_w), 0, grid_w - 1);
    const int pr = std::clamp(static_cast<int>(cy / cell_h), 0, grid_h - 1);
    const double sigma = sigma_factor * std::min(grid_h, grid_w);
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    for (int r = 0; r < grid_h; ++r)
        for (int c = 0; c < grid_w; ++c) {
            const double dr = r - pr, dc = c - pc;
            out.at(r, c) = std::exp(-(dr * dr + dc * dc) * inv2s2);
        }
    return out;
}

LabelPair make_label_pair(const BoundingBox& box_patch, int resolution, int grid_h,
                          int grid_w, double sigma_factor) {
    LabelPair out;
    out.cls = make_gaussian_label(box_patch, resolution, grid_h, grid_w, sigma_factor);
    out.reg = ltrb_encode(box_patch, resolution, grid_h, grid_w);
    return out;
}

Var classification_loss(const Var& pred, const ScoreMap& label, double fg_threshold) {
    const int n = label.h * label.w;
    if (pred->val.dim(0) != n || pred->val.dim(1) != 1)
        throw std::invalid_argument("classification_loss: shape mismatch");
    nn::Tensor fg({n, 1}), bg({n, 1}), lab({n, 1});
    for (int i = 0; i < n; ++i) {
        const bool is_fg = label.v[static_cast<size_t>(i)] >= fg_threshold;
        fg.d[static_cast<size_t>(i)] = is_fg ? 1.0 : 0.0;
        bg.d[static_cast<size_t>(i)] = is_fg ? 0.0 : 1.0;
        lab.d[static_cast<size_t>(i)] = label.v[static_cast<size_t>(i)];
    }
    Var fg_mask = nn::constant(std::move(fg));
    Var bg_mask = nn::constant(std::move(bg));
    Var y = nn::constant(std::move(lab));
    Var r_fg = nn::mul(fg_mask, nn::sub(pred, y));
    Var r_bg = nn::mul(bg_mask, nn::relu(pred));
    Var r = nn::add(r_fg, r_bg);
    return nn::mean(nn::square(r));
}

double classification_loss_value(const ScoreMap& pred, const ScoreMap& label,
                                 double fg_threshold) {
    if (pred.h != label.h || pred.w != label.w)
        throw std::invalid_argument("classification_loss: shape mismatch");
    Var p = nn::constant(nn::Tensor({pred.h * pred.w, 1}, pred.v));
    return classification_loss(p, label, fg_threshold)->val.d[0];
}

Var regression_loss(const Var& pred, const LtrbMap& label, int resolution,
                    bool* no_valid_cells) {
    const int n = label.h * label.w;
    if (pred->val.dim(0) != n || pred->val.dim(1) != 4)
        throw std::invalid_argument("regression_loss: shape mismatch");
    std::vector<int> valid;
    for (int i = 0; i < n; ++i)
        if (label.mask[static_cast<size_t>(i)]) valid.push_back(i);
    if (no_valid_cells) *no_valid_cells = valid.empty();
    if (valid.empty()) return nn::constant(nn::Tensor({1}, {0.0}));
    const int m = static_cast<int>(valid.size());
    // constant per-cell data: cell centers and label box corners
    nn::Tensor cxs({m, 1}), cys({m, 1}), bx1({m, 1}), by1({m, 1}), bx2({m, 1}), by2({m, 1});
    for (int i = 0; i < m; ++i) {
        const int r = valid[static_cast<size_t>(i)] / label.w;
        const int c = valid[static_cast<size_t>(i)] % label.w;
        const double cx = cell_center_x(c, label.w, resolution);
        const double cy = cell_center_y(r, label.h, resolution);
        cxs.d[static_cast<size_t>(i)] = cx;
        cys.d[static_cast<size_t>(i)] = cy;
        bx1.d[static_cast<size_t>(i)] = cx - label.at(r, c, 0) * resolution;
        by1.d[static_cast<size_t>(i)] = cy - label.at(r, c, 1) * resolution;
        bx2.d[static_cast<size_t>(i)] = cx + label.at(r, c, 2) * resolution;
        by2.d[static_cast<size_t>(i)] = cy + label.at(r, c, 3) * resolution;
    }
    Var p = nn::gather_rows(pred, valid);
    Var l = nn::scale(nn::slice_cols(p, 0, 1), resolution);
    Var t = nn::scale(nn::slice_cols(p, 1, 1), resolution);
    Var r_ = nn::scale(nn::slice_cols(p, 2, 1), resolution);
    Var b_ = nn::scale(nn::slice_cols(p, 3, 1), resolution);
    Var cx = nn::constant(std::move(cxs));
    Var cy = nn::constant(std::move(cys));
    Var ax1 = nn::sub(cx, l);
    Var ay1 = nn::sub(cy, t);
    Var ax2 = nn::add(cx, r_);
    Var ay2 = nn::add(cy, b_);
    Var gx1 = nn::constant(std::move(bx1));
    Var gy1 = nn::constant(std::move(by1));
    Var gx2 = nn::constant(std::move(bx2));
    Var gy2 = nn::constant(std::move(by2));
    Var zero = nn::constant(nn::Tensor({m, 1}));
    Var iw = nn::maximum(zero, nn::sub(nn::minimum(ax2, gx2), nn::maximum(ax1, gx1)));
    Var ih = nn::maximum(zero, nn::sub(nn::minimum(ay2, gy2), nn::maximum(ay1, gy1)));
    Var inter = nn::mul(iw, ih);
    Var area_a = nn::mul(nn::sub(ax2, ax1), nn::sub(ay2, ay1));
    Var area_b = nn::mul(nn::sub(gx2, gx1), nn::sub(gy2, gy1));
    Var uni = nn::sub(nn::add(area_a, area_b), inter);
    Var enc_w = nn::sub(nn::maximum(ax2, gx2), nn::minimum(ax1, gx1));
    Var enc_h = nn::sub(nn::maximum(ay2, gy2), nn::minimum(ay1, gy1));
    Var enclosing = nn::mul(enc_w, enc_h);
    Var giou_v =
        nn::sub(nn::divide(inter, uni), nn::divide(nn::sub(enclosing, uni), enclosing));
    return nn::mean(nn::add_scalar(nn::scale(giou_v, -1.0), 1.0));
}

double regression_loss_value(const LtrbMap& pred, const LtrbMap& label, int resolution) {
    if (pred.h != label.h || pred.w != label.w)
        throw std::invalid_argument("regression_loss: shape mismatch");
    Var p = nn::constant(nn::Tensor({pred.h * pred.w, 4}, pred.v));
    return regression_loss(p, label, resolution)->val.d[0];
}

Var total_loss(const Var& h_cls, const Var* h_can, const Var& d, const LabelPair& label,
               const LossWeights& w, double fg_threshold, int resolution) {
    Var out = nn::scale(classification_loss(h_cls, label.cls, fg_threshold), w.lambda_cls);
    if (h_can != nullptr)
        out = nn::add(out, nn::scale(classification_loss(*h_can, label.cls, fg_threshold),
                                     w.lambda_can));
    out = nn::add(out, nn::scale(regression_loss(d, label.reg, resolution), w.lambda_reg));
    return out;
}

SubsequenceSample sample_subsequence(int sequence_length, int window,
                                     std::mt19937_64& rng) {
    if (sequence_length < 3)
        throw std::invalid_argument("sample_subsequence: sequence too short");
    const int span = std::min(window, sequence_length);
    std::uniform_int_distribution<int> start_dist(0, sequence_length - span);
    const int start = start_dist(rng);
    std::uniform_int_distribution<int> idx(start, start + span - 1);
    int a = idx(rng), b = idx(rng), c = idx(rng);
    while (b == a) b = idx(rng);
    while (c == a || c == b) c = idx(rng);
    return {a, b, c};
}

}  // namespace pivot
