#include "pivot/prompting.hpp"

#include <stdexcept>

namespace pivot {

using nn::Var;

Pgn::Pgn(nn::ParamStore& store, const std::string& prefix, int channels,
         std::mt19937_64& rng)
    : c_(channels) {
    const int c1 = channels, c2 = channels / 2;
    w1_ = store.create(prefix + ".conv1.w", {c1, 3, 3, 3 * channels}, 0.05, rng);
    b1_ = store.create(prefix + ".conv1.b", {c1}, 0.0, rng);
    g1_ = store.create_const_init(prefix + ".norm1.g", {c1}, 1.0);
    n1_ = store.create(prefix + ".norm1.b", {c1}, 0.0, rng);
    w2_ = store.create(prefix + ".conv2.w", {c2, 3, 3, c1}, 0.05, rng);
    b2_ = store.create(prefix + ".conv2.b", {c2}, 0.0, rng);
    g2_ = store.create_const_init(prefix + ".norm2.g", {c2}, 1.0);
    n2_ = store.create(prefix + ".norm2.b", {c2}, 0.0, rng);
    w3_ = store.create(prefix + ".conv3.w", {1, 3, 3, c2}, 0.05, rng);
    b3_ = store.create(prefix + ".conv3.b", {1}, 0.0, rng);
}

Var Pgn::forward(const Var& v_tem1, const Var& v_tem2, const Var& v_cur,
                 int grid_h, int grid_w) const {
    const int n = grid_h * grid_w;
    for (const Var* v : {&v_tem1, &v_tem2, &v_cur}) {
        if ((*v)->val.dim(0) != n || (*v)->val.dim(1) != c_)
            throw std::invalid_argument("pgn_forward: grid shape mismatch");
    }
    Var x = nn::concat_cols(nn::concat_cols(v_tem1, v_tem2), v_cur);
    x = nn::reshape(x, {grid_h, grid_w, 3 * c_});
    x = nn::conv2d(x, w1_, b1_);
    x = nn::reshape(x, {n, c_});
    x = nn::gelu(nn::channel_norm(x, g1_, n1_));
    x = nn::reshape(x, {grid_h, grid_w, c_});
    x = nn::conv2d(x, w2_, b2_);
    x = nn::reshape(x, {n, c_ / 2});
    x = nn::gelu(nn::channel_norm(x, g2_, n2_));
    x = nn::reshape(x, {grid_h, grid_w, c_ / 2});
    x = nn::conv2d(x, w3_, b3_);  // linear output head
    return nn::reshape(x, {n, 1});
}

Rm::Rm(nn::ParamStore& store, const std::string& prefix, int channels,
       std::mt19937_64& rng)
    : c_(channels) {
    w1_ = store.create(prefix + ".conv1.w", {channels, 3, 3, channels + 1}, 0.05, rng);
    b1_ = store.create(prefix + ".conv1.b", {channels}, 0.0, rng);
    g1_ = store.create_const_init(prefix + ".norm1.g", {channels}, 1.0);
    n1_ = store.create(prefix + ".norm1.b", {channels}, 0.0, rng);
    w2_ = store.create(prefix + ".conv2.w", {channels, 3, 3, channels}, 0.05, rng);
    b2_ = store.create(prefix + ".conv2.b", {channels}, 0.0, rng);
    g2_ = store.create_const_init(prefix + ".norm2.g", {channels}, 1.0);
    n2_ = store.create(prefix + ".norm2.b", {channels}, 0.0, rng);
}

Var Rm::forward(const Var& h_can, const Var& v_cur, int grid_h, int grid_w) const {
    const int n = grid_h * grid_w;
    if (h_can->val.dim(0) != n || h_can->val.dim(1) != 1)
        throw std::invalid_argument("rm_forward: prompt shape mismatch");
    if (v_cur->val.dim(0) != n || v_cur->val.dim(1) != c_)
        throw std::invalid_argument("rm_forward: feature shape mismatch");
    // exactly C+1 input channels: the prompt plus the features
    Var x = nn::concat_cols(h_can, v_cur);
    x = nn::reshape(x, {grid_h, grid_w, c_ + 1});
    x = nn::conv2d(x, w1_, b1_);
    x = nn::reshape(x, {n, c_});
    x = nn::gelu(nn::channel_norm(x, g1_, n1_));
    x = nn::reshape(x, {grid_h, grid_w, c_});
    x = nn::conv2d(x, w2_, b2_);
    x = nn::reshape(x, {n, c_});
    x = nn::gelu(nn::channel_norm(x, g2_, n2_));
    return nn::add(x, v_cur);
}

Var extract_template_feature(const FrameEncoder& enc, const Image& frame,
                             const BoundingBox& box) {
    if (!box.valid()) throw std::invalid_argument("extract_template_feature: bad box");
    BoundingBox b = box;
    // clamp to frame bounds; fully outside is a caller bug
    const double x0 = std::max(0.0, b.x), y0 = std::max(0.0, b.y);
    const double x1 = std::min(static_cast<double>(frame.w), b.x2());
    const double y1 = std::min(static_cast<double>(frame.h), b.y2());
    if (x1 <= x0 || y1 <= y0)
        throw std::invalid_argument("extract_template_feature: box outside frame");
    b = {x0, y0, x1 - x0, y1 - y0};
    const int res = enc.input_resolution();
    const Image crop = crop_resize(frame, b, res, res);
    return enc.encode(crop);
}

}  // namespace pivot
