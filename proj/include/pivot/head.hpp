#pragma once

#include <random>
#include <string>

#include "pivot/datamodel.hpp"
#include "pivot/nn/autodiff.hpp"
#include "pivot/nn/params.hpp"

namespace pivot {

// Classification + regression labels for one reference frame.
struct LabelPair {
    ScoreMap cls;  // Gaussian-peaked, peak value 1 at the target-center cell
    LtrbMap reg;   // ground-truth ltrb with validity mask
};

struct HeadOutput {
    nn::Var omega;  // {1, C} filter weight
    nn::Var z_cur;  // {H*W, C} enhanced current features
    nn::Var h_cls;  // {H*W, 1} = z_cur . omega^T, by construction
    nn::Var d;      // {H*W, 4} non-negative normalized ltrb
};

// Transformer model predictor: embeds reference labels into their features,
// runs all three frames as one token sequence, decodes the filter from a
// learned query, and regresses dense boxes from filter-modulated features.
class TrackingHead {
public:
    TrackingHead(nn::ParamStore& store, const std::string& prefix, int grid,
                 int channels, std::mt19937_64& rng, int enc_layers = 2);

    int grid() const { return grid_; }
    int channels() const { return c_; }

    nn::Var embed_labels(const LabelPair& y) const;  // {H*W, C}

    // v_raw, when given, feeds the regression skip instead of v_cur so
    // prompt-modulated features never disturb the box branch.
    HeadOutput forward(const nn::Var& v_ref1, const LabelPair& y1,
                       const nn::Var& v_ref2, const LabelPair& y2,
                       const nn::Var& v_cur, const nn::Var* v_raw = nullptr) const;

private:
    struct EncLayer {
        nn::Var wq, wk, wv, wo;
        nn::Var ln1_g, ln1_b;
        nn::Var mlp_w1, mlp_b1, mlp_w2, mlp_b2;
        nn::Var ln2_g, ln2_b;
    };

    nn::Var attention(const nn::Var& q_in, const nn::Var& kv_in,
                      const EncLayer& l) const;
    nn::Var enc_layer(const nn::Var& x, const EncLayer& l) const;

    int grid_;
    int c_;
    nn::Var label_wy_, label_wd_;       // {1,C}, {4,C}
    nn::Var pos_, slot_ref1_, slot_ref2_, slot_cur_;
    std::vector<EncLayer> enc_;
    EncLayer dec_;
    nn::Var query_, omega_w_, omega_b_;
    nn::Var reg_w1_, reg_b1_, reg_g1_, reg_n1_, reg_w2_, reg_b2_;
};

struct Prediction {
    BoundingBox box;  // patch coordinates
    double confidence = 0.0;
    GridPoint cell;
    bool degenerate = false;
};

// Argmax decode; ties pick the lexicographically smallest (row, col).
Prediction decode_prediction(const ScoreMap& h_cls, const LtrbMap& d, int resolution);

ScoreMap var_to_scoremap(const nn::Var& v, int h, int w);
LtrbMap var_to_ltrb(const nn::Var& v, int h, int w);

}  // namespace pivot
