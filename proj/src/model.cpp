#include "pivot/model.hpp"

#include <stdexcept>

namespace pivot {

Model::Model(const RunConfig& c) : cfg(c) {
    std::mt19937_64 rng(cfg.seed);
    encoder = std::make_unique<FrameEncoder>(cfg.encoder, store, rng);
    const int ch = encoder->channels();
    pgn = std::make_unique<Pgn>(store, "pgn", ch, rng);
    rm = std::make_unique<Rm>(store, "rm", ch, rng);
    head = std::make_unique<TrackingHead>(store, "head", encoder->grid(), ch, rng);
}

void Model::save(const std::string& path) const {
    nn::save_checkpoint(path, store, cfg.hash());
}

uint64_t Model::load(const std::string& path) {
    return nn::load_checkpoint(path, store);
}

std::vector<nn::Var> Model::prompt_params() const {
    std::vector<nn::Var> out;
    for (const auto& [name, p] : store.all())
        if (name.rfind("pgn.", 0) == 0 || name.rfind("rm.", 0) == 0) out.push_back(p);
    return out;
}

std::vector<nn::Var> Model::tracker_params() const {
    std::vector<nn::Var> out;
    for (const auto& [name, p] : store.all())
        if (name.rfind("pgn.", 0) != 0 && name.rfind("rm.", 0) != 0) out.push_back(p);
    return out;
}

}  // namespace pivot
