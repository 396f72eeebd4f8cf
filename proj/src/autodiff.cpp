#include "pivot/nn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace pivot::nn {

Var constant(Tensor t) {
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    return n;
}

Var parameter(Tensor t) {
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    n->requires_grad = true;
    n->ensure_grad();
    return n;
}

namespace {

Var make_op(Tensor val, std::vector<Var> parents, std::function<void(Node&)> back) {
    auto n = std::make_shared<Node>();
    n->val = std::move(val);
    for (const auto& p : parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->back = std::move(back);
    }
    return n;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (a->val.shape != b->val.shape)
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

void backward(const Var& root) {
    if (root->val.size() != 1)
        throw std::invalid_argument("backward: root must be scalar");
    // topo order by iterative DFS
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.push_back({root.get(), 0});
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (Node* n : order) n->ensure_grad();
    root->grad.d[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->back) (*it)->back(**it);
}

// ---------------- elementwise ----------------

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Tensor out = a->val;
    for (size_t i = 0; i < out.size(); ++i) out.d[i] += b->val.d[i];
    return make_op(std::move(out), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) a->grad.d[i] += n.grad.d[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) b->grad.d[i] += n.grad.d[i];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    Tensor out = a->val;
    for (size_t i = 0; i < out.size(); ++i) out.d[i] -= b->val.d[i];
    return make_op(std::move(out), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) a->grad.d[i] += n.grad.d[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) b->grad.d[i] -= n.grad.d[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    Tensor out = a->val;
    for (size_t i = 0; i < out.size(); ++i) out.d[i] *= b->val.d[i];
    return make_op(std::move(out), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i)
                a->grad.d[i] += n.grad.d[i] * b->val.d[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i)
                b->grad.d[i] += n.grad.d[i] * a->val.d[i];
        }
    });
}

Var divide(const Var& a, const Var& b) {
    check_same_shape(a, b, "divide");
    Tensor out = a->val;
    for (size_t i = 0; i < out.size(); ++i) out.d[i] /= b->val.d[i];
    return make_op(std::move(out), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i)
                a->grad.d[i] += n.grad.d[i] / b->val.d[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i)
                b->grad.d[i] -= n.grad.d[i] * a->val.d[i] / (b->val.d[i] * b->val.d[i]);
        }
    });
}

Var minimum(const Var& a, const Var& b) {
    check_same_shape(a, b, "minimum");
    Tensor out = a->val;
    for (size_t i = 0; i < out.size(); ++i) out.d[i] = std::min(out.d[i], b->val.d[i]);
    return make_op(std::move(out), {a, b}, [a, b](Node& n) {
        for (size_t i = 0; i < n.grad.size(); ++i) {
            const bool a_wins = a->val.d[i] <= b->val.d[i];
            if (a_wins && a->requires_grad) {
                a->ensure_grad();
                a->grad.d[i] += n.grad.d[i];
            } else if (!a_wins && b->requires_grad) {
                b->ensure_grad();
                b->grad.d[i] += n.grad.d[i];
            }
        }
    });
}

Var maximum(const Var& a, const Var& b) {
    check_same_shape(a, b, "maximum");
    Tensor out = a->val;
    for (size_t i = 0; i < out.size(); ++i) out.d[i] = std::max(out.d[i], b->val.d[i]);
    return make_op(std::move(out), {a, b}, [a, b](Node& n) {
        for (size_t i = 0; i < n.grad.size(); ++i) {
            const bool a_wins = a->val.d[i] >= b->val.d[i];
            if (a_wins && a->requires_grad) {
                a->ensure_grad();
                a->grad.d[i] += n.grad.d[i];
            } else if (!a_wins && b->requires_grad) {
                b->ensure_grad();
                b->grad.d[i] += n.grad.d[i];
            }
        }
    });
}

Var scale(const Var& a, double s) {
    Tensor out = a->val;
    for (auto& x : out.d) x *= s;
    return make_op(std::move(out), {a}, [a, s](Node& n) {
        a->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) a->grad.d[i] += n.grad.d[i] * s;
    });
}

Var add_scalar(const Var& a, double s) {
    Tensor out = a->val;
    for (auto& x : out.d) x += s;
    return make_op(std::move(out), {a}, [a](Node& n) {
        a->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) a->grad.d[i] += n.grad.d[i];
    });
}

Var square(const Var& a) {
    Tensor out = a->val;
    for (auto& x : out.d) x *= x;
    return make_op(std::move(out), {a}, [a](Node& n) {
        a->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i)
            a->grad.d[i] += n.grad.d[i] * 2.0 * a->val.d[i];
    });
}

Var gelu(const Var& a) {
    Tensor out = a->val;
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    for (auto& x : out.d) x = 0.5 * x * (1.0 + std::erf(x * inv_sqrt2));
    return make_op(std::move(out), {a}, [a](Node& n) {
        a->ensure_grad();
        constexpr double inv_sqrt2 = 0.7071067811865475244;
        constexpr double inv_sqrt2pi = 0.3989422804014326779;
        for (size_t i = 0; i < n.grad.size(); ++i) {
            const double x = a->val.d[i];
            const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
            const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
            a->grad.d[i] += n.grad.d[i] * (cdf + x * pdf);
        }
    });
}

Var softplus(const Var& a) {
    Tensor out = a->val;
    for (auto& x : out.d) x = x > 30.0 ? x : std::log1p(std::exp(x));
    return make_op(std::move(out), {a}, [a](Node& n) {
        a->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) {
            const double x = a->val.d[i];
            const double sig = 1.0 / (1.0 + std::exp(-x));
            a->grad.d[i] += n.grad.d[i] * sig;
        }
    });
}

Var relu(const Var& a) {
    Tensor out = a->val;
    for (auto& x : out.d) x = std::max(0.0, x);
    return make_op(std::move(out), {a}, [a](Node& n) {
        a->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i)
            if (a->val.d[i] > 0.0) a->grad.d[i] += n.grad.d[i];
    });
}

// ---------------- shape / layout ----------------

Var reshape(const Var& a, std::vector<int> shape) {
    if (Tensor::count(shape) != a->val.size())
        throw std::invalid_argument("reshape: element count mismatch");
    Tensor out(std::move(shape), a->val.d);
    return make_op(std::move(out), {a}, [a](Node& n) {
        a->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) a->grad.d[i] += n.grad.d[i];
    });
}

Var slice_rows(const Var& a, int start, int nrows) {
    const int N = a->val.dim(0);
    const int C = static_cast<int>(a->val.size()) / N;
    if (start < 0 || start + nrows > N) throw std::out_of_range("slice_rows");
    Tensor out({nrows, C});
    std::copy_n(a->val.d.begin() + static_cast<size_t>(start) * C,
                static_cast<size_t>(nrows) * C, out.d.begin());
    return make_op(std::move(out), {a}, [a, start, C](Node& n) {
        a->ensure_grad();
        const size_t off = static_cast<size_t>(start) * C;
        for (size_t i = 0; i < n.grad.size(); ++i) a->grad.d[off + i] += n.grad.d[i];
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
    const int C = parts[0]->val.dim(1);
    int rows = 0;
    for (const auto& p : parts) {
        if (p->val.dim(1) != C) throw std::invalid_argument("concat_rows: col mismatch");
        rows += p->val.dim(0);
    }
    Tensor out({rows, C});
    size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p->val.d.begin(), p->val.d.end(), out.d.begin() + off);
        off += p->val.size();
    }
    return make_op(std::move(out), parts, [parts](Node& n) {
        size_t off = 0;
        for (const auto& p : parts) {
            if (p->requires_grad) {
                p->ensure_grad();
                for (size_t i = 0; i < p->val.size(); ++i)
                    p->grad.d[i] += n.grad.d[off + i];
            }
            off += p->val.size();
        }
    });
}

Var slice_cols(const Var& a, int start, int ncols) {
    const int N = a->val.dim(0);
    const int C = a->val.dim(1);
    if (start < 0 || start + ncols > C) throw std::out_of_range("slice_cols");
    Tensor out({N, ncols});
    for (int r = 0; r < N; ++r)
        for (int c = 0; c < ncols; ++c)
            out.d[static_cast<size_t>(r) * ncols + c] =
                a->val.d[static_cast<size_t>(r) * C + start + c];
    return make_op(std::move(out), {a}, [a, start, N, C, ncols](Node& n) {
        a->ensure_grad();
        for (int r = 0; r < N; ++r)
            for (int c = 0; c < ncols; ++c)
                a->grad.d[static_cast<size_t>(r) * C + start + c] +=
                    n.grad.d[static_cast<size_t>(r) * ncols + c];
    });
}

Var gather_rows(const Var& a, std::vector<int> rows) {
    const int N = a->val.dim(0), C = a->val.dim(1);
    Tensor out({static_cast<int>(rows.size()), C});
    for (size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= N) throw std::out_of_range("gather_rows");
        std::copy_n(a->val.d.begin() + static_cast<size_t>(rows[i]) * C, C,
                    out.d.begin() + i * C);
    }
    return make_op(std::move(out), {a}, [a, rows = std::move(rows), C](Node& n) {
        a->ensure_grad();
        for (size_t i = 0; i < rows.size(); ++i)
            for (int c = 0; c < C; ++c)
                a->grad.d[static_cast<size_t>(rows[i]) * C + c] +=
                    n.grad.d[i * C + c];
    });
}

Var concat_cols(const Var& a, const Var& b) {
    const int N = a->val.dim(0);
    if (b->val.dim(0) != N) throw std::invalid_argument("concat_cols: row mismatch");
    const int Ca = a->val.dim(1), Cb = b->val.dim(1);
    Tensor out({N, Ca + Cb});
    for (int r = 0; r < N; ++r) {
        std::copy_n(a->val.d.begin() + static_cast<size_t>(r) * Ca, Ca,
                    out.d.begin() + static_cast<size_t>(r) * (Ca + Cb));
        std::copy_n(b->val.d.begin() + static_cast<size_t>(r) * Cb, Cb,
                    out.d.begin() + static_cast<size_t>(r) * (Ca + Cb) + Ca);
    }
    return make_op(std::move(out), {a, b}, [a, b, N, Ca, Cb](Node& n) {
        for (int r = 0; r < N; ++r) {
            if (a->requires_grad) {
                a->ensure_grad();
                for (int c = 0; c < Ca; ++c)
                    a->grad.d[static_cast<size_t>(r) * Ca + c] +=
                        n.grad.d[static_cast<size_t>(r) * (Ca + Cb) + c];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (int c = 0; c < Cb; ++c)
                    b->grad.d[static_cast<size_t>(r) * Cb + c] +=
                        n.grad.d[static_cast<size_t>(r) * (Ca + Cb) + Ca + c];
            }
        }
    });
}

// ---------------- linear algebra ----------------

namespace {
// c += a * b, a: MxK, b: KxN
void gemm_acc(const double* a, const double* b, double* c, int M, int K, int N) {
    for (int i = 0; i < M; ++i) {
        const double* ai = a + static_cast<size_t>(i) * K;
        double* ci = c + static_cast<size_t>(i) * N;
        for (int k = 0; k < K; ++k) {
            const double av = ai[k];
            if (av == 0.0) continue;
            const double* bk = b + static_cast<size_t>(k) * N;
            for (int j = 0; j < N; ++j) ci[j] += av * bk[j];
        }
    }
}
// c += a^T * b, a: MxK (transposed use), b: MxN -> c: KxN
void gemm_at_b(const double* a, const double* b, double* c, int M, int K, int N) {
    for (int i = 0; i < M; ++i) {
        const double* ai = a + static_cast<size_t>(i) * K;
        const double* bi = b + static_cast<size_t>(i) * N;
        for (int k = 0; k < K; ++k) {
            const double av = ai[k];
            if (av == 0.0) continue;
            double* ck = c + static_cast<size_t>(k) * N;
            for (int j = 0; j < N; ++j) ck[j] += av * bi[j];
        }
    }
}
// c += a * b^T, a: MxK, b: NxK -> c: MxN
void gemm_a_bt(const double* a, const double* b, double* c, int M, int K, int N) {
    for (int i = 0; i < M; ++i) {
        const double* ai = a + static_cast<size_t>(i) * K;
        double* ci = c + static_cast<size_t>(i) * N;
        for (int j = 0; j < N; ++j) {
            const double* bj = b + static_cast<size_t>(j) * K;
            double s = 0.0;
            for (int k = 0; k < K; ++k) s += ai[k] * bj[k];
            ci[j] += s;
        }
    }
}
}  // namespace

Var matmul(const Var& a, const Var& b) {
    const int M = a->val.dim(0), K = a->val.dim(1);
    if (b->val.dim(0) != K) throw std::invalid_argument("matmul: inner dim mismatch");
    const int N = b->val.dim(1);
    Tensor out({M, N});
    gemm_acc(a->val.d.data(), b->val.d.data(), out.d.data(), M, K, N);
    return make_op(std::move(out), {a, b}, [a, b, M, K, N](Node& n) {
        if (a->requires_grad) {
            a->ensure_grad();
            gemm_a_bt(n.grad.d.data(), b->val.d.data(), a->grad.d.data(), M, N, K);
        }
        if (b->requires_grad) {
            b->ensure_grad();
            gemm_at_b(a->val.d.data(), n.grad.d.data(), b->grad.d.data(), M, K, N);
        }
    });
}

Var transpose(const Var& a) {
    const int M = a->val.dim(0), N = a->val.dim(1);
    Tensor out({N, M});
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j)
            out.d[static_cast<size_t>(j) * M + i] = a->val.d[static_cast<size_t>(i) * N + j];
    return make_op(std::move(out), {a}, [a, M, N](Node& n) {
        a->ensure_grad();
        for (int i = 0; i < M; ++i)
            for (int j = 0; j < N; ++j)
                a->grad.d[static_cast<size_t>(i) * N + j] +=
                    n.grad.d[static_cast<size_t>(j) * M + i];
    });
}

Var add_rowvec(const Var& a, const Var& v) {
    const int N = a->val.dim(0), C = a->val.dim(1);
    if (static_cast<int>(v->val.size()) != C)
        throw std::invalid_argument("add_rowvec: length mismatch");
    Tensor out = a->val;
    for (int r = 0; r < N; ++r)
        for (int c = 0; c < C; ++c) out.d[static_cast<size_t>(r) * C + c] += v->val.d[c];
    return make_op(std::move(out), {a, v}, [a, v, N, C](Node& n) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) a->grad.d[i] += n.grad.d[i];
        }
        if (v->requires_grad) {
            v->ensure_grad();
            for (int r = 0; r < N; ++r)
                for (int c = 0; c < C; ++c)
                    v->grad.d[c] += n.grad.d[static_cast<size_t>(r) * C + c];
        }
    });
}

Var mul_rowvec(const Var& a, const Var& v) {
    const int N = a->val.dim(0), C = a->val.dim(1);
    if (static_cast<int>(v->val.size()) != C)
        throw std::invalid_argument("mul_rowvec: length mismatch");
    Tensor out = a->val;
    for (int r = 0; r < N; ++r)
        for (int c = 0; c < C; ++c) out.d[static_cast<size_t>(r) * C + c] *= v->val.d[c];
    return make_op(std::move(out), {a, v}, [a, v, N, C](Node& n) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (int r = 0; r < N; ++r)
                for (int c = 0; c < C; ++c)
                    a->grad.d[static_cast<size_t>(r) * C + c] +=
                        n.grad.d[static_cast<size_t>(r) * C + c] * v->val.d[c];
        }
        if (v->requires_grad) {
            v->ensure_grad();
            for (int r = 0; r < N; ++r)
                for (int c = 0; c < C; ++c)
                    v->grad.d[c] += n.grad.d[static_cast<size_t>(r) * C + c] *
                                    a->val.d[static_cast<size_t>(r) * C + c];
        }
    });
}

Var softmax_rows(const Var& a) {
    const int N = a->val.dim(0), C = a->val.dim(1);
    Tensor out({N, C});
    for (int r = 0; r < N; ++r) {
        const double* x = a->val.d.data() + static_cast<size_t>(r) * C;
        double* y = out.d.data() + static_cast<size_t>(r) * C;
        double mx = x[0];
        for (int c = 1; c < C; ++c) mx = std::max(mx, x[c]);
        double s = 0.0;
        for (int c = 0; c < C; ++c) {
            y[c] = std::exp(x[c] - mx);
            s += y[c];
        }
        for (int c = 0; c < C; ++c) y[c] /= s;
    }
    return make_op(std::move(out), {a}, [a, N, C](Node& n) {
        a->ensure_grad();
        for (int r = 0; r < N; ++r) {
            const double* y = n.val.d.data() + static_cast<size_t>(r) * C;
            const double* gy = n.grad.d.data() + static_cast<size_t>(r) * C;
            double* gx = a->grad.d.data() + static_cast<size_t>(r) * C;
            double dot = 0.0;
            for (int c = 0; c < C; ++c) dot += y[c] * gy[c];
            for (int c = 0; c < C; ++c) gx[c] += y[c] * (gy[c] - dot);
        }
    });
}

// ---------------- normalization ----------------

Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias, double eps) {
    const int N = x->val.dim(0), C = x->val.dim(1);
    Tensor out({N, C});
    std::vector<double> inv_std(N), mu(N);
    for (int r = 0; r < N; ++r) {
        const double* xr = x->val.d.data() + static_cast<size_t>(r) * C;
        double m = 0.0;
        for (int c = 0; c < C; ++c) m += xr[c];
        m /= C;
        double var = 0.0;
        for (int c = 0; c < C; ++c) var += (xr[c] - m) * (xr[c] - m);
        var /= C;
        const double is = 1.0 / std::sqrt(var + eps);
        mu[r] = m;
        inv_std[r] = is;
        double* yr = out.d.data() + static_cast<size_t>(r) * C;
        for (int c = 0; c < C; ++c)
            yr[c] = gain->val.d[c] * (xr[c] - m) * is + bias->val.d[c];
    }
    return make_op(std::move(out), {x, gain, bias},
                   [x, gain, bias, N, C, mu, inv_std](Node& n) {
        for (int r = 0; r < N; ++r) {
            const double* xr = x->val.d.data() + static_cast<size_t>(r) * C;
            const double* gy = n.grad.d.data() + static_cast<size_t>(r) * C;
            const double is = inv_std[r], m = mu[r];
            if (gain->requires_grad) {
                gain->ensure_grad();
                for (int c = 0; c < C; ++c)
                    gain->grad.d[c] += gy[c] * (xr[c] - m) * is;
            }
            if (bias->requires_grad) {
                bias->ensure_grad();
                for (int c = 0; c < C; ++c) bias->grad.d[c] += gy[c];
            }
            if (x->requires_grad) {
                x->ensure_grad();
                double s1 = 0.0, s2 = 0.0;
                for (int c = 0; c < C; ++c) {
                    const double gh = gy[c] * gain->val.d[c];
                    const double xh = (xr[c] - m) * is;
                    s1 += gh;
                    s2 += gh * xh;
                }
                s1 /= C;
                s2 /= C;
                double* gx = x->grad.d.data() + static_cast<size_t>(r) * C;
                for (int c = 0; c < C; ++c) {
                    const double gh = gy[c] * gain->val.d[c];
                    const double xh = (xr[c] - m) * is;
                    gx[c] += is * (gh - s1 - xh * s2);
                }
            }
        }
    });
}

Var channel_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
    const int N = x->val.dim(0), C = x->val.dim(1);
    Tensor out({N, C});
    std::vector<double> inv_std(C), mu(C);
    for (int c = 0; c < C; ++c) {
        double m = 0.0;
        for (int r = 0; r < N; ++r) m += x->val.d[static_cast<size_t>(r) * C + c];
        m /= N;
        double var = 0.0;
        for (int r = 0; r < N; ++r) {
            const double d = x->val.d[static_cast<size_t>(r) * C + c] - m;
            var += d * d;
        }
        var /= N;
        mu[c] = m;
        inv_std[c] = 1.0 / std::sqrt(var + eps);
    }
    for (int r = 0; r < N; ++r)
        for (int c = 0; c < C; ++c)
            out.d[static_cast<size_t>(r) * C + c] =
                gain->val.d[c] *
                    (x->val.d[static_cast<size_t>(r) * C + c] - mu[c]) * inv_std[c] +
                bias->val.d[c];
    return make_op(std::move(out), {x, gain, bias},
                   [x, gain, bias, N, C, mu, inv_std](Node& n) {
        for (int c = 0; c < C; ++c) {
            const double is = inv_std[c], m = mu[c];
            double gsum = 0.0, gxsum = 0.0;
            for (int r = 0; r < N; ++r) {
                const double gy = n.grad.d[static_cast<size_t>(r) * C + c];
                const double xh = (x->val.d[static_cast<size_t>(r) * C + c] - m) * is;
                gsum += gy;
                gxsum += gy * xh;
            }
            if (gain->requires_grad) {
                gain->ensure_grad();
                gain->grad.d[c] += gxsum;
            }
            if (bias->requires_grad) {
                bias->ensure_grad();
                bias->grad.d[c] += gsum;
            }
            if (x->requires_grad) {
                x->ensure_grad();
                const double g = gain->val.d[c];
                const double s1 = gsum / N, s2 = gxsum / N;
                for (int r = 0; r < N; ++r) {
                    const double gy = n.grad.d[static_cast<size_t>(r) * C + c];
                    const double xh = (x->val.d[static_cast<size_t>(r) * C + c] - m) * is;
                    x->grad.d[static_cast<size_t>(r) * C + c] +=
                        g * is * (gy - s1 - xh * s2);
                }
            }
        }
    });
}

// ---------------- convolution ----------------

Var conv2d(const Var& x, const Var& w, const Var& b) {
    if (x->val.shape.size() != 3 || w->val.shape.size() != 4)
        throw std::invalid_argument("conv2d: expects {H,W,Cin} and {Cout,kh,kw,Cin}");
    const int H = x->val.dim(0), W = x->val.dim(1), Cin = x->val.dim(2);
    const int Cout = w->val.dim(0), kh = w->val.dim(1), kw = w->val.dim(2);
    if (w->val.dim(3) != Cin) throw std::invalid_argument("conv2d: channel mismatch");
    if (static_cast<int>(b->val.size()) != Cout)
        throw std::invalid_argument("conv2d: bias size mismatch");
    const int ph = kh / 2, pw = kw / 2;
    Tensor out({H, W, Cout});
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            double* yo = out.d.data() + (static_cast<size_t>(r) * W + c) * Cout;
            for (int o = 0; o < Cout; ++o) yo[o] = b->val.d[o];
            for (int dr = 0; dr < kh; ++dr) {
                const int rr = r + dr - ph;
                if (rr < 0 || rr >= H) continue;
                for (int dc = 0; dc < kw; ++dc) {
                    const int cc = c + dc - pw;
                    if (cc < 0 || cc >= W) continue;
                    const double* xi =
                        x->val.d.data() + (static_cast<size_t>(rr) * W + cc) * Cin;
                    for (int o = 0; o < Cout; ++o) {
                        const double* wo =
                            w->val.d.data() +
                            ((static_cast<size_t>(o) * kh + dr) * kw + dc) * Cin;
                        double s = 0.0;
                        for (int i = 0; i < Cin; ++i) s += wo[i] * xi[i];
                        yo[o] += s;
                    }
                }
            }
        }
    }
    return make_op(std::move(out), {x, w, b},
                   [x, w, b, H, W, Cin, Cout, kh, kw, ph, pw](Node& n) {
        if (b->requires_grad) {
            b->ensure_grad();
            for (int r = 0; r < H; ++r)
                for (int c = 0; c < W; ++c)
                    for (int o = 0; o < Cout; ++o)
                        b->grad.d[o] +=
                            n.grad.d[(static_cast<size_t>(r) * W + c) * Cout + o];
        }
        for (int r = 0; r < H; ++r) {
            for (int c = 0; c < W; ++c) {
                const double* gy =
                    n.grad.d.data() + (static_cast<size_t>(r) * W + c) * Cout;
                for (int dr = 0; dr < kh; ++dr) {
                    const int rr = r + dr - ph;
                    if (rr < 0 || rr >= H) continue;
                    for (int dc = 0; dc < kw; ++dc) {
                        const int cc = c + dc - pw;
                        if (cc < 0 || cc >= W) continue;
                        const size_t xoff = (static_cast<size_t>(rr) * W + cc) * Cin;
                        for (int o = 0; o < Cout; ++o) {
                            const double g = gy[o];
                            if (g == 0.0) continue;
                            const size_t woff =
                                ((static_cast<size_t>(o) * kh + dr) * kw + dc) * Cin;
                            if (w->requires_grad) {
                                w->ensure_grad();
                                for (int i = 0; i < Cin; ++i)
                                    w->grad.d[woff + i] += g * x->val.d[xoff + i];
                            }
                            if (x->requires_grad) {
                                x->ensure_grad();
                                for (int i = 0; i < Cin; ++i)
                                    x->grad.d[xoff + i] += g * w->val.d[woff + i];
                            }
                        }
                    }
                }
            }
        }
    });
}

// ---------------- reductions ----------------

Var sum(const Var& a) {
    double s = 0.0;
    for (double x : a->val.d) s += x;
    Tensor out({1});
    out.d[0] = s;
    return make_op(std::move(out), {a}, [a](Node& n) {
        a->ensure_grad();
        for (size_t i = 0; i < a->val.size(); ++i) a->grad.d[i] += n.grad.d[0];
    });
}

Var mean(const Var& a) {
    const double inv = 1.0 / static_cast<double>(a->val.size());
    double s = 0.0;
    for (double x : a->val.d) s += x;
    Tensor out({1});
    out.d[0] = s * inv;
    return make_op(std::move(out), {a}, [a, inv](Node& n) {
        a->ensure_grad();
        for (size_t i = 0; i < a->val.size(); ++i) a->grad.d[i] += n.grad.d[0] * inv;
    });
}

}  // namespace pivot::nn
