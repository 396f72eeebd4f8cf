#include "pivot/head.hpp"

#include <cmath>
#include <stdexcept>

namespace pivot {

using nn::Var;

TrackingHead::TrackingHead(nn::ParamStore& store, const std::string& prefix,
                           int grid, int channels, std::mt19937_64& rng,
                           int enc_layers)
    : grid_(grid), c_(channels) {
    const int n = grid * grid;
    auto mk = [&](const std::string& name, std::vector<int> shape, double sd) {
        return store.create(prefix + "." + name, std::move(shape), sd, rng);
    };
    auto mk1 = [&](const std::string& name, std::vector<int> shape) {
        return store.create_const_init(prefix + "." + name, std::move(shape), 1.0);
    };
    label_wy_ = mk("label.wy", {1, c_}, 0.2);
    label_wd_ = mk("label.wd", {4, c_}, 0.2);
    pos_ = mk("pos", {n, c_}, 0.02);
    slot_ref1_ = mk("slot.ref1", {c_}, 0.02);
    slot_ref2_ = mk("slot.ref2", {c_}, 0.02);
    slot_cur_ = mk("slot.cur", {c_}, 0.02);
    auto mk_layer = [&](const std::string& lp) {
        EncLayer l;
        l.wq = mk(lp + ".wq", {c_, c_}, 0.05);
        l.wk = mk(lp + ".wk", {c_, c_}, 0.05);
        l.wv = mk(lp + ".wv", {c_, c_}, 0.05);
        l.wo = mk(lp + ".wo", {c_, c_}, 0.05);
        l.ln1_g = mk1(lp + ".ln1.g", {c_});
        l.ln1_b = mk(lp + ".ln1.b", {c_}, 0.0);
        l.mlp_w1 = mk(lp + ".mlp.w1", {c_, 2 * c_}, 0.05);
        l.mlp_b1 = mk(lp + ".mlp.b1", {2 * c_}, 0.0);
        l.mlp_w2 = mk(lp + ".mlp.w2", {2 * c_, c_}, 0.05);
        l.mlp_b2 = mk(lp + ".mlp.b2", {c_}, 0.0);
        l.ln2_g = mk1(lp + ".ln2.g", {c_});
        l.ln2_b = mk(lp + ".ln2.b", {c_}, 0.0);
        return l;
    };
    for (int i = 0; i < enc_layers; ++i) enc_.push_back(mk_layer("enc" + std::to_string(i)));
    dec_ = mk_layer("dec");
    query_ = mk("query", {1, c_}, 0.2);
    omega_w_ = mk("omega.w", {c_, c_}, 0.05);
    omega_b_ = mk("omega.b", {c_}, 0.0);
    reg_w1_ = mk("reg.conv1.w", {c_, 3, 3, 2 * c_}, 0.05);
    reg_b1_ = mk("reg.conv1.b", {c_}, 0.0);
    reg_g1_ = mk1("reg.norm1.g", {c_});
    reg_n1_ = mk("reg.norm1.b", {c_}, 0.0);
    reg_w2_ = mk("reg.conv2.w", {4, 3, 3, c_}, 0.05);
    reg_b2_ = mk("reg.conv2.b", {4}, 0.0);
    // bias the ltrb head toward small positive distances at init
    for (auto& x : reg_b2_->val.d) x = -1.0;
}

Var TrackingHead::embed_labels(const LabelPair& y) const {
    const int n = grid_ * grid_;
    if (y.cls.h * y.cls.w != n || y.reg.h * y.reg.w != n)
        throw std::invalid_argument("embed_labels: label grid mismatch");
    Var cls = nn::constant(nn::Tensor({n, 1}, y.cls.v));
    Var reg = nn::constant(nn::Tensor({n, 4}, y.reg.v));
    return nn::add(nn::matmul(cls, label_wy_), nn::matmul(reg, label_wd_));
}

Var TrackingHead::attention(const Var& q_in, const Var& kv_in, const EncLayer& l) const {
    Var q = nn::matmul(q_in, l.wq);
    Var k = nn::matmul(kv_in, l.wk);
    Var v = nn::matmul(kv_in, l.wv);
    Var scores = nn::scale(nn::matmul(q, nn::transpose(k)), 1.0 / std::sqrt(c_));
    Var att = nn::softmax_rows(scores);
    return nn::matmul(nn::matmul(att, v), l.wo);
}

Var TrackingHead::enc_layer(const Var& x, const EncLayer& l) const {
    Var y = nn::layer_norm_rows(nn::add(x, attention(x, x, l)), l.ln1_g, l.ln1_b);
    Var m = nn::matmul(nn::gelu(nn::add_rowvec(nn::matmul(y, l.mlp_w1), l.mlp_b1)),
                       l.mlp_w2);
    m = nn::add_rowvec(m, l.mlp_b2);
    return nn::layer_norm_rows(nn::add(y, m), l.ln2_g, l.ln2_b);
}

HeadOutput TrackingHead::forward(const Var& v_ref1, const LabelPair& y1,
                                 const Var& v_ref2, const LabelPair& y2,
                                 const Var& v_cur, const Var* v_raw) const {
    const int n = grid_ * grid_;
    for (const Var* v : {&v_ref1, &v_ref2, &v_cur})
        if ((*v)->val.dim(0) != n || (*v)->val.dim(1) != c_)
            throw std::invalid_argument("predict_model: grid shape mismatch");

    Var t1 = nn::add(nn::add(v_ref1, embed_labels(y1)), pos_);
    t1 = nn::add_rowvec(t1, slot_ref1_);
    Var t2 = nn::add(nn::add(v_ref2, embed_labels(y2)), pos_);
    t2 = nn::add_rowvec(t2, slot_ref2_);
    Var tc = nn::add_rowvec(nn::add(v_cur, pos_), slot_cur_);

    Var x = nn::concat_rows({t1, t2, tc});
    for (const auto& l : enc_) x = enc_layer(x, l);

    // filter decoded from a single learned query over all tokens
    Var q = nn::layer_norm_rows(nn::add(query_, attention(query_, x, dec_)),
                                dec_.ln1_g, dec_.ln1_b);
    Var qm = nn::add_rowvec(
        nn::matmul(nn::gelu(nn::add_rowvec(nn::matmul(q, dec_.mlp_w1), dec_.mlp_b1)),
                   dec_.mlp_w2),
        dec_.mlp_b2);
    q = nn::layer_norm_rows(nn::add(q, qm), dec_.ln2_g, dec_.ln2_b);

    HeadOutput out;
    out.omega = nn::add_rowvec(nn::matmul(q, omega_w_), omega_b_);
    out.z_cur = nn::slice_rows(x, 2 * n, n);
    out.h_cls = nn::matmul(out.z_cur, nn::transpose(out.omega));

    // regression branch: filter-modulated features plus a skip from the
    // un-attended current features (keeps local edge detail) through two
    // conv blocks
    Var zm = nn::mul_rowvec(out.z_cur, nn::reshape(out.omega, {c_}));
    Var zin = nn::concat_cols(zm, v_raw != nullptr ? *v_raw : v_cur);
    Var r = nn::conv2d(nn::reshape(zin, {grid_, grid_, 2 * c_}), reg_w1_, reg_b1_);
    r = nn::gelu(nn::channel_norm(nn::reshape(r, {n, c_}), reg_g1_, reg_n1_));
    r = nn::conv2d(nn::reshape(r, {grid_, grid_, c_}), reg_w2_, reg_b2_);
    out.d = nn::softplus(nn::reshape(r, {n, 4}));
    return out;
}

Prediction decode_prediction(const ScoreMap& h_cls, const LtrbMap& d, int resolution) {
    if (h_cls.h != d.h || h_cls.w != d.w)
        throw std::invalid_argument("decode_prediction: shape mismatch");
    GridPoint best{0, 0};
    double best_v = h_cls.at(0, 0);
    for (int r = 0; r < h_cls.h; ++r)
        for (int c = 0; c < h_cls.w; ++c)
            if (h_cls.at(r, c) > best_v) {
                best_v = h_cls.at(r, c);
                best = {r, c};
            }
    const DecodedBox db = ltrb_decode(d, best, resolution);
    return {db.box, best_v, best, db.degenerate};
}

ScoreMap var_to_scoremap(const nn::Var& v, int h, int w) {
    if (v->val.size() != static_cast<size_t>(h) * w)
        throw std::invalid_argument("var_to_scoremap: size mismatch");
    ScoreMap out(h, w);
    out.v = v->val.d;
    return out;
}

LtrbMap var_to_ltrb(const nn::Var& v, int h, int w) {
    if (v->val.size() != static_cast<size_t>(h) * w * 4)
        throw std::invalid_argument("var_to_ltrb: size mismatch");
    LtrbMap out(h, w);
    out.v = v->val.d;
    std::fill(out.mask.begin(), out.mask.end(), 1);
    return out;
}

}  // namespace pivot
