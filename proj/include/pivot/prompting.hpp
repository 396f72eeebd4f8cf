#pragma once

#include <random>
#include <string>

#include "pivot/datamodel.hpp"
#include "pivot/encoders.hpp"
#include "pivot/nn/autodiff.hpp"
#include "pivot/nn/params.hpp"

namespace pivot {

// Prompt Generation Network: [v_tem1, v_tem2, v_cur] (3C channels) -> 1
// channel candidate score map. Three 3x3 conv blocks, linear output.
class Pgn {
public:
    Pgn(nn::ParamStore& store, const std::string& prefix, int channels,
        std::mt19937_64& rng);

    // inputs: {H*W, C} each, all same grid; returns {H*W, 1}
    nn::Var forward(const nn::Var& v_tem1, const nn::Var& v_tem2,
                    const nn::Var& v_cur, int grid_h, int grid_w) const;

private:
    int c_;
    nn::Var w1_, b1_, g1_, n1_;
    nn::Var w2_, b2_, g2_, n2_;
    nn::Var w3_, b3_;
};

// Relation Modeling: [h_can, v_cur] (C+1 channels) -> C channels, with a
// residual connection from v_cur so an uninformative prompt degrades to the
// unprompted features.
class Rm {
public:
    Rm(nn::ParamStore& store, const std::string& prefix, int channels,
       std::mt19937_64& rng);

    // h_can: {H*W, 1}, v_cur: {H*W, C}; returns {H*W, C}
    nn::Var forward(const nn::Var& h_can, const nn::Var& v_cur, int grid_h,
                    int grid_w) const;

private:
    int c_;
    nn::Var w1_, b1_, g1_, n1_;
    nn::Var w2_, b2_, g2_, n2_;
};

// Encodes the exact box crop of a frame (resized to the encoder input
// resolution). The template counterpart of the context-bearing reference.
nn::Var extract_template_feature(const FrameEncoder& enc, const Image& frame,
                                 const BoundingBox& box);

}  // namespace pivot
