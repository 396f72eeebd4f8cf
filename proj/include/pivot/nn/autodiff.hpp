#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace pivot::nn {

// Dense row-major tensor of doubles. Shapes are small (grids, token
// matrices), so no striding tricks.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> d;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        d.assign(count(shape), 0.0);
    }
    Tensor(std::vector<int> s, std::vector<double> data)
        : shape(std::move(s)), d(std::move(data)) {
        if (d.size() != count(shape)) throw std::invalid_argument("tensor size mismatch");
    }

    static size_t count(const std::vector<int>& s) {
        size_t n = 1;
        for (int x : s) n *= static_cast<size_t>(x);
        return n;
    }
    size_t size() const { return d.size(); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
};

struct Node;
using Var = std::shared_ptr<Node>;

// Tape node. `back` scatters this node's grad into its parents' grads.
struct Node {
    Tensor val;
    Tensor grad;
    bool requires_grad = false;
    std::vector<Var> parents;
    std::function<void(Node&)> back;

    void ensure_grad() {
        if (grad.d.size() != val.size()) {
            grad.shape = val.shape;
            grad.d.assign(val.size(), 0.0);
        }
    }
    void zero_grad() {
        if (!grad.d.empty()) std::fill(grad.d.begin(), grad.d.end(), 0.0);
    }
};

Var constant(Tensor t);
Var parameter(Tensor t);  // leaf with requires_grad

// Runs reverse-mode accumulation from a scalar root. Grads accumulate; call
// zero_grad on leaves between steps.
void backward(const Var& root);

// ---- elementwise ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var divide(const Var& a, const Var& b);
Var minimum(const Var& a, const Var& b);
Var maximum(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var square(const Var& a);
Var gelu(const Var& a);
Var softplus(const Var& a);
Var relu(const Var& a);

// ---- shape / layout ----
Var reshape(const Var& a, std::vector<int> shape);
Var slice_rows(const Var& a, int start, int n);       // a: {N, C}
Var concat_rows(const std::vector<Var>& parts);       // {Ni, C} -> {sum, C}
Var slice_cols(const Var& a, int start, int n);       // a: {N, C}
Var concat_cols(const Var& a, const Var& b);          // {N,C1}+{N,C2}
Var gather_rows(const Var& a, std::vector<int> rows); // a: {N, C}

// ---- linear algebra ----
Var matmul(const Var& a, const Var& b);               // {M,K}x{K,N}
Var transpose(const Var& a);                          // {M,N}->{N,M}
Var add_rowvec(const Var& a, const Var& v);           // {N,C} + {C}
Var mul_rowvec(const Var& a, const Var& v);           // {N,C} * {C}
Var softmax_rows(const Var& a);                       // {N,C}

// ---- normalization ----
// Per-row (token) normalization over channels with learned gain/bias {C}.
Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);
// Per-channel normalization over all rows (spatial positions) with learned
// gain/bias {C}; batch-norm style statistics computed from the input itself.
Var channel_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

// ---- convolution ----
// x: {H,W,Cin}, w: {Cout,kh,kw,Cin}, b: {Cout}; same padding, stride 1.
Var conv2d(const Var& x, const Var& w, const Var& b);

// ---- reductions ----
Var sum(const Var& a);    // -> {1}
Var mean(const Var& a);   // -> {1}

}  // namespace pivot::nn
