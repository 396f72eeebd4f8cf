#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "pivot/nn/autodiff.hpp"

namespace testutil {

// Worst relative error between analytic gradients and central finite
// differences, probing a few random coordinates per parameter. `loss_fn`
// must rebuild the graph from the parameters' current values.
inline double max_fd_rel_err(const std::function<pivot::nn::Var()>& loss_fn,
                             const std::vector<pivot::nn::Var>& params,
                             std::mt19937_64& rng, int probes_per_param = 3,
                             double eps = 1e-5) {
    using pivot::nn::Var;
    Var loss = loss_fn();
    for (const auto& p : params) p->zero_grad();
    pivot::nn::backward(loss);
    double worst = 0.0;
    for (const auto& p : params) {
        std::uniform_int_distribution<size_t> pick(0, p->val.size() - 1);
        for (int k = 0; k < probes_per_param; ++k) {
            const size_t i = pick(rng);
            const double orig = p->val.d[i];
            p->val.d[i] = orig + eps;
            const double lp = loss_fn()->val.d[0];
            p->val.d[i] = orig - eps;
            const double lm = loss_fn()->val.d[0];
            p->val.d[i] = orig;
            const double fd = (lp - lm) / (2.0 * eps);
            const double an = p->grad.d.empty() ? 0.0 : p->grad.d[i];
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
            worst = std::max(worst, std::abs(fd - an) / denom);
        }
    }
    return worst;
}

inline pivot::nn::Var random_param(std::vector<int> shape, std::mt19937_64& rng,
                                   double s = 0.5) {
    pivot::nn::Tensor t(shape);
    std::normal_distribution<double> g(0.0, s);
    for (double& v : t.d) v = g(rng);
    return pivot::nn::parameter(std::move(t));
}

}  // namespace testutil
