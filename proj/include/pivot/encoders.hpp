#pragma once

#include <random>
#include <string>
#include <vector>

#include "pivot/datamodel.hpp"
#include "pivot/image.hpp"
#include "pivot/nn/autodiff.hpp"
#include "pivot/nn/params.hpp"

namespace pivot {

struct FrameEncoderSpec {
    std::string name = "toy";
    int input_resolution = 96;  // square patch side
    int grid = 12;              // output H = W before pooling
    int channels = 32;
    int pool_to = 0;            // 0 = no adaptive pooling
};

struct EmbeddingVector {
    std::vector<double> values;
    BoundingBox source_box;

    double dot(const EmbeddingVector& o) const {
        double s = 0.0;
        for (size_t i = 0; i < values.size(); ++i) s += values[i] * o.values[i];
        return s;
    }
};

FeatureGrid adaptive_avg_pool(const FeatureGrid& g, int out_h, int out_w);

// Deterministic hand-crafted per-cell descriptor: mean RGB, mean gradient
// magnitude, and fixed seeded random projections of a downsampled cell patch.
// No trainable state; the adapter on top carries the learned part.
class ToyFrameEncoder {
public:
    explicit ToyFrameEncoder(const FrameEncoderSpec& spec);

    const FrameEncoderSpec& spec() const { return spec_; }
    int out_grid() const { return spec_.pool_to > 0 ? spec_.pool_to : spec_.grid; }

    // Raw descriptor grid (after optional adaptive pooling), constant in the
    // adapter parameters.
    FeatureGrid features(const Image& patch) const;

private:
    FrameEncoderSpec spec_;
    std::vector<double> proj_;  // (C-10) x 48 fixed projection matrix
};

// Single linear layer over channels, the lightweight trainable piece on top
// of the frozen descriptor. Initialized near identity.
class Adapter {
public:
    Adapter(nn::ParamStore& store, const std::string& prefix, int channels,
            std::mt19937_64& rng);

    nn::Var forward(const nn::Var& feats) const;  // {N, C} -> {N, C}

private:
    nn::Var w_, b_;
};

// Frame encoder = frozen toy descriptor + adapter, producing graph vars so
// training can reach the adapter parameters.
class FrameEncoder {
public:
    FrameEncoder(const FrameEncoderSpec& spec, nn::ParamStore& store,
                 std::mt19937_64& rng);

    int grid() const { return toy_.out_grid(); }
    int channels() const { return toy_.spec().channels; }
    int input_resolution() const { return toy_.spec().input_resolution; }

    // Rejects patches that do not match input_resolution.
    nn::Var encode(const Image& patch) const;           // {H*W, C}
    FeatureGrid encode_grid(const Image& patch) const;  // plain values

private:
    ToyFrameEncoder toy_;
    Adapter adapter_;
};

FeatureGrid var_to_grid(const nn::Var& v, int h, int w, int c);
nn::Var grid_to_var(const FeatureGrid& g);  // constant {H*W, C}

// Unit-normalized embedding of an RoI crop: weighted color histogram +
// coarse gradient silhouette + intensity stats. C_e = 64.
class ToyEmbeddingEncoder {
public:
    static constexpr int kDim = 64;
    EmbeddingVector encode_roi(const Image& crop) const;
};

}  // namespace pivot
