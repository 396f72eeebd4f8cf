#pragma once

#include <memory>
#include <string>

#include "pivot/config.hpp"
#include "pivot/encoders.hpp"
#include "pivot/head.hpp"
#include "pivot/nn/params.hpp"
#include "pivot/prompting.hpp"

namespace pivot {

// All trainable components plus the frozen embedding encoder, built
// deterministically from a RunConfig.
struct Model {
    RunConfig cfg;
    nn::ParamStore store;
    std::unique_ptr<FrameEncoder> encoder;
    std::unique_ptr<Pgn> pgn;
    std::unique_ptr<Rm> rm;
    std::unique_ptr<TrackingHead> head;
    ToyEmbeddingEncoder embedder;

    explicit Model(const RunConfig& cfg);

    int grid() const { return encoder->grid(); }
    int resolution() const { return encoder->input_resolution(); }

    void save(const std::string& path) const;
    // Loads parameters; returns the stored config hash.
    uint64_t load(const std::string& path);

    // prompting components vs. pre-trained tracker parameter split
    std::vector<nn::Var> prompt_params() const;
    std::vector<nn::Var> tracker_params() const;
};

}  // namespace pivot
