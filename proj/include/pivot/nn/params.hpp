#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "pivot/nn/autodiff.hpp"

namespace pivot::nn {

// Named parameter registry. Modules create their parameters here so the
// optimizer and the checkpoint writer see one flat list.
class ParamStore {
public:
    Var create(const std::string& name, std::vector<int> shape, double init_std,
               std::mt19937_64& rng);
    Var create_const_init(const std::string& name, std::vector<int> shape, double value);

    Var get(const std::string& name) const;
    bool has(const std::string& name) const { return params_.count(name) != 0; }
    const std::map<std::string, Var>& all() const { return params_; }

    void zero_grads();

private:
    std::map<std::string, Var> params_;
};

struct ParamGroup {
    std::vector<Var> params;
    double lr = 1e-3;
};

// AdamW with decoupled weight decay.
class AdamW {
public:
    AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
          double weight_decay = 0.01)
        : b1_(beta1), b2_(beta2), eps_(eps), wd_(weight_decay) {}

    void step(std::vector<ParamGroup>& groups);

private:
    struct State {
        std::vector<double> m, v;
    };
    double b1_, b2_, eps_, wd_;
    int64_t t_ = 0;
    std::map<Node*, State> state_;
};

// Versioned binary checkpoint: magic, format version, config hash, named
// double blocks.
void save_checkpoint(const std::string& path, const ParamStore& store,
                     uint64_t config_hash);
// Loads into existing parameters; names and shapes must match. Returns the
// stored config hash.
uint64_t load_checkpoint(const std::string& path, ParamStore& store);
uint64_t peek_checkpoint_hash(const std::string& path);

}  // namespace pivot::nn
