#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "pivot/nn/autodiff.hpp"

using namespace pivot::nn;
using testutil::max_fd_rel_err;
using testutil::random_param;

TEST_CASE("matmul matches a manual product") {
    Var a = constant(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
    Var b = constant(Tensor({3, 2}, {7, 8, 9, 10, 11, 12}));
    Var c = matmul(a, b);
    CHECK(c->val.d == std::vector<double>{58, 64, 139, 154});
}

TEST_CASE("conv2d matches a brute-force oracle") {
    std::mt19937_64 rng(21);
    const int H = 5, W = 4, Cin = 3, Cout = 2, K = 3;
    Var x = random_param({H * W, Cin}, rng);
    Var w = random_param({Cout, K, K, Cin}, rng);
    Var b = random_param({Cout}, rng);
    Var xr = reshape(x, {H, W, Cin});
    Var y = conv2d(xr, w, b);
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c)
            for (int o = 0; o < Cout; ++o) {
                double acc = b->val.d[o];
                for (int kr = 0; kr < K; ++kr)
                    for (int kc = 0; kc < K; ++kc) {
                        const int ir = r + kr - 1, ic = c + kc - 1;
                        if (ir < 0 || ir >= H || ic < 0 || ic >= W) continue;
                        for (int ch = 0; ch < Cin; ++ch)
                            acc += x->val.d[(static_cast<size_t>(ir) * W + ic) * Cin + ch] *
                                   w->val.d[((static_cast<size_t>(o) * K + kr) * K + kc) *
                                                Cin + ch];
                    }
                CHECK(y->val.d[(static_cast<size_t>(r) * W + c) * Cout + o] ==
                      doctest::Approx(acc).epsilon(1e-12));
            }
}

TEST_CASE("softmax rows sum to one and match direct evaluation") {
    Var a = constant(Tensor({2, 3}, {1.0, 2.0, 3.0, -1.0, 0.0, 1.0}));
    Var s = softmax_rows(a);
    for (int r = 0; r < 2; ++r) {
        double tot = 0.0;
        for (int c = 0; c < 3; ++c) tot += s->val.d[static_cast<size_t>(r) * 3 + c];
        CHECK(tot == doctest::Approx(1.0).epsilon(1e-12));
    }
    const double e1 = std::exp(1.0), e2 = std::exp(2.0), e3 = std::exp(3.0);
    CHECK(s->val.d[0] == doctest::Approx(e1 / (e1 + e2 + e3)).epsilon(1e-12));
}

TEST_CASE("gradients of a composite graph pass finite differences") {
    std::mt19937_64 rng(22);
    Var w1 = random_param({4, 6}, rng);
    Var b1 = random_param({6}, rng, 0.1);
    Var w2 = random_param({6, 1}, rng);
    Var g = random_param({6}, rng, 0.1);
    Var bn = random_param({6}, rng, 0.1);
    Var x = random_param({5, 4}, rng);
    auto loss_fn = [&] {
        Var h = gelu(add_rowvec(matmul(x, w1), b1));
        h = layer_norm_rows(h, g, bn);
        h = softmax_rows(h);
        return mean(square(matmul(h, w2)));
    };
    CHECK(max_fd_rel_err(loss_fn, {w1, b1, w2, g, bn, x}, rng, 4) < 1e-5);
}

TEST_CASE("gradients through conv2d, channel_norm, min/max, softplus") {
    std::mt19937_64 rng(23);
    const int H = 4, W = 4, C = 3;
    Var x = random_param({H * W, C}, rng);
    Var w = random_param({C, 3, 3, C}, rng);
    Var b = random_param({C}, rng, 0.1);
    Var g = random_param({C}, rng, 0.1);
    Var bn = random_param({C}, rng, 0.1);
    Var other = random_param({H * W, C}, rng);
    auto loss_fn = [&] {
        Var y = conv2d(reshape(x, {H, W, C}), w, b);
        y = channel_norm(reshape(y, {H * W, C}), g, bn);
        y = maximum(y, minimum(other, scale(y, 0.5)));
        return mean(softplus(y));
    };
    CHECK(max_fd_rel_err(loss_fn, {x, w, b, g, bn, other}, rng, 4) < 1e-5);
}

TEST_CASE("gradients through slicing, concatenation and gather") {
    std::mt19937_64 rng(24);
    Var a = random_param({6, 4}, rng);
    Var b = random_param({3, 4}, rng);
    auto loss_fn = [&] {
        Var cat = concat_rows({slice_rows(a, 1, 3), b});
        Var cols = concat_cols(slice_cols(cat, 0, 2), slice_cols(cat, 2, 2));
        Var g = gather_rows(cols, {0, 2, 2, 5});
        return sum(mul(g, g));
    };
    CHECK(max_fd_rel_err(loss_fn, {a, b}, rng, 6) < 1e-6);
}

TEST_CASE("gradients through transpose, divide and mul_rowvec") {
    std::mt19937_64 rng(25);
    Var a = random_param({3, 5}, rng);
    Var v = random_param({3}, rng, 0.3);
    Var d = random_param({5, 3}, rng);
    auto loss_fn = [&] {
        Var t = mul_rowvec(transpose(a), v);             // {5,3}
        Var q = divide(t, add_scalar(square(d), 1.0));   // positive denominator
        return mean(relu(q));
    };
    CHECK(max_fd_rel_err(loss_fn, {a, v, d}, rng, 5) < 1e-5);
}

TEST_CASE("backward accumulates into shared subexpressions correctly") {
    Var x = parameter(Tensor({1}, {3.0}));
    Var y = add(mul(x, x), x);  // x^2 + x, d/dx = 2x + 1 = 7
    x->zero_grad();
    backward(y);
    CHECK(x->grad.d[0] == doctest::Approx(7.0).epsilon(1e-12));
}
