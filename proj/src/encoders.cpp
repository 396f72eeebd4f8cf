#include "pivot/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pivot {

FeatureGrid adaptive_avg_pool(const FeatureGrid& g, int out_h, int out_w) {
    if (out_h > g.h || out_w > g.w)
        throw std::invalid_argument("adaptive_avg_pool: output larger than input");
    FeatureGrid out(out_h, out_w, g.c, g.stride * g.h / out_h);
    for (int r = 0; r < out_h; ++r) {
        const int r0 = (r * g.h) / out_h;
        const int r1 = ((r + 1) * g.h + out_h - 1) / out_h;  // ceil
        for (int c = 0; c < out_w; ++c) {
            const int c0 = (c * g.w) / out_w;
            const int c1 = ((c + 1) * g.w + out_w - 1) / out_w;
            const double inv = 1.0 / ((r1 - r0) * (c1 - c0));
            for (int k = 0; k < g.c; ++k) {
                double s = 0.0;
                for (int rr = r0; rr < r1; ++rr)
                    for (int cc = c0; cc < c1; ++cc) s += g.at(rr, cc, k);
                out.at(r, c, k) = s * inv;
            }
        }
    }
    return out;
}

namespace {
constexpr int kPatchSide = 4;  // downsampled cell patch for projections
constexpr int kPatchDim = kPatchSide * kPatchSide * 3;
constexpr int kFixedChannels = 10;  // rgb(3) grad(1) centroid(2) halves(4)
constexpr uint64_t kProjSeed = 0x70617463686572ULL;  // fixed; not configurable

double gray_at(const Image& im, int x, int y) {
    return (im.at(x, y, 0) + im.at(x, y, 1) + im.at(x, y, 2)) / 3.0;
}
}  // namespace

ToyFrameEncoder::ToyFrameEncoder(const FrameEncoderSpec& spec) : spec_(spec) {
    if (spec_.channels < 11)
        throw std::invalid_argument("toy encoder needs at least 11 channels");
    if (spec_.input_resolution % spec_.grid != 0)
        throw std::invalid_argument("toy encoder: resolution must divide into grid");
    if (spec_.pool_to > spec_.grid)
        throw std::invalid_argument("pool_to must not exceed the raw grid");
    const int nproj = spec_.channels - kFixedChannels;
    proj_.resize(static_cast<size_t>(nproj) * kPatchDim);
    std::mt19937_64 rng(kProjSeed);
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(kPatchDim));
    for (auto& x : proj_) x = dist(rng);
}

FeatureGrid ToyFrameEncoder::features(const Image& patch) const {
    if (patch.w != spec_.input_resolution || patch.h != spec_.input_resolution)
        throw std::invalid_argument("encode_frame: patch resolution mismatch");
    const int G = spec_.grid;
    const int cell = spec_.input_resolution / G;
    const int C = spec_.channels;
    FeatureGrid out(G, G, C, static_cast<double>(cell));
    std::vector<double> patch_vec(kPatchDim);
    for (int r = 0; r < G; ++r) {
        for (int c = 0; c < G; ++c) {
            const int x0 = c * cell, y0 = r * cell;
            // mean color
            double mr = 0, mg = 0, mb = 0;
            for (int y = y0; y < y0 + cell; ++y)
                for (int x = x0; x < x0 + cell; ++x) {
                    mr += patch.at(x, y, 0);
                    mg += patch.at(x, y, 1);
                    mb += patch.at(x, y, 2);
                }
            const double inv = 1.0 / (cell * cell);
            out.at(r, c, 0) = mr * inv;
            out.at(r, c, 1) = mg * inv;
            out.at(r, c, 2) = mb * inv;
            // mean gradient magnitude (central differences, clamped borders)
            double gsum = 0.0;
            for (int y = y0; y < y0 + cell; ++y)
                for (int x = x0; x < x0 + cell; ++x) {
                    const int xm = std::max(x - 1, 0), xp = std::min(x + 1, patch.w - 1);
                    const int ym = std::max(y - 1, 0), yp = std::min(y + 1, patch.h - 1);
                    const double gx = gray_at(patch, xp, y) - gray_at(patch, xm, y);
                    const double gy = gray_at(patch, x, yp) - gray_at(patch, x, ym);
                    gsum += std::sqrt(gx * gx + gy * gy);
                }
            out.at(r, c, 3) = gsum * inv;
            // sub-cell statistics carrying edge positions: gradient-weighted
            // centroid offset and half-cell means
            double gcx = 0.0, gcy = 0.0;
            double half[4] = {0.0, 0.0, 0.0, 0.0};  // left, right, top, bottom
            for (int y = y0; y < y0 + cell; ++y)
                for (int x = x0; x < x0 + cell; ++x) {
                    const int xm = std::max(x - 1, 0), xp = std::min(x + 1, patch.w - 1);
                    const int ym = std::max(y - 1, 0), yp = std::min(y + 1, patch.h - 1);
                    const double gx = gray_at(patch, xp, y) - gray_at(patch, xm, y);
                    const double gy = gray_at(patch, x, yp) - gray_at(patch, x, ym);
                    const double g = std::sqrt(gx * gx + gy * gy);
                    gcx += g * (x - x0 + 0.5);
                    gcy += g * (y - y0 + 0.5);
                    const double gr = gray_at(patch, x, y);
                    half[(x - x0) * 2 < cell ? 0 : 1] += gr;
                    half[(y - y0) * 2 < cell ? 2 : 3] += gr;
                }
            const double gtot = out.at(r, c, 3) * cell * cell;
            out.at(r, c, 4) = gtot > 1e-9 ? gcx / (gtot * cell) - 0.5 : 0.0;
            out.at(r, c, 5) = gtot > 1e-9 ? gcy / (gtot * cell) - 0.5 : 0.0;
            for (int j = 0; j < 4; ++j) out.at(r, c, 6 + j) = half[j] * 2.0 * inv;
            // fixed random projections of the downsampled cell patch
            for (int py = 0; py < kPatchSide; ++py)
                for (int px = 0; px < kPatchSide; ++px) {
                    const double sx = x0 + (px + 0.5) * cell / kPatchSide - 0.5;
                    const double sy = y0 + (py + 0.5) * cell / kPatchSide - 0.5;
                    for (int k = 0; k < 3; ++k)
                        patch_vec[(static_cast<size_t>(py) * kPatchSide + px) * 3 + k] =
                            sample_bilinear(patch, sx, sy, k);
                }
            for (int j = 0; j < C - kFixedChannels; ++j) {
                double s = 0.0;
                const double* row = proj_.data() + static_cast<size_t>(j) * kPatchDim;
                for (int i = 0; i < kPatchDim; ++i) s += row[i] * patch_vec[i];
                out.at(r, c, kFixedChannels + j) = s;
            }
        }
    }
    if (spec_.pool_to > 0) return adaptive_avg_pool(out, spec_.pool_to, spec_.pool_to);
    return out;
}

Adapter::Adapter(nn::ParamStore& store, const std::string& prefix, int channels,
                 std::mt19937_64& rng) {
    w_ = store.create(prefix + ".w", {channels, channels}, 0.01, rng);
    for (int i = 0; i < channels; ++i)
        w_->val.d[static_cast<size_t>(i) * channels + i] += 1.0;  // near identity
    b_ = store.create(prefix + ".b", {channels}, 0.0, rng);
}

nn::Var Adapter::forward(const nn::Var& feats) const {
    return nn::add_rowvec(nn::matmul(feats, w_), b_);
}

FrameEncoder::FrameEncoder(const FrameEncoderSpec& spec, nn::ParamStore& store,
                           std::mt19937_64& rng)
    : toy_(spec), adapter_(store, "adapter", spec.channels, rng) {}

nn::Var FrameEncoder::encode(const Image& patch) const {
    const FeatureGrid g = toy_.features(patch);
    return adapter_.forward(grid_to_var(g));
}

FeatureGrid FrameEncoder::encode_grid(const Image& patch) const {
    nn::Var v = encode(patch);
    const int G = grid();
    FeatureGrid out = var_to_grid(v, G, G, channels());
    out.stride = static_cast<double>(input_resolution()) / G;
    return out;
}

FeatureGrid var_to_grid(const nn::Var& v, int h, int w, int c) {
    if (v->val.size() != static_cast<size_t>(h) * w * c)
        throw std::invalid_argument("var_to_grid: size mismatch");
    FeatureGrid out(h, w, c);
    out.v = v->val.d;
    return out;
}

nn::Var grid_to_var(const FeatureGrid& g) {
    nn::Tensor t({g.h * g.w, g.c}, g.v);
    return nn::constant(std::move(t));
}

namespace {
// block weights; final vector is re-normalized to unit length
constexpr double kWHist = 0.55;
constexpr double kWShape = 0.85;
constexpr double kWStats = 0.28;

void unit_scale(std::vector<double>& v, size_t begin, size_t end, double w) {
    double n = 0.0;
    for (size_t i = begin; i < end; ++i) n += v[i] * v[i];
    n = std::sqrt(n);
    const double s = n > 1e-12 ? w / n : 0.0;
    for (size_t i = begin; i < end; ++i) v[i] *= s;
}

// zero-center a block so cosines between different crops can go negative;
// without this every block is non-negative and all cosines crowd into [0.7, 1].
void center(std::vector<double>& v, size_t begin, size_t end) {
    double m = 0.0;
    for (size_t i = begin; i < end; ++i) m += v[i];
    m /= static_cast<double>(end - begin);
    for (size_t i = begin; i < end; ++i) v[i] -= m;
}
}  // namespace

EmbeddingVector ToyEmbeddingEncoder::encode_roi(const Image& crop) const {
    if (crop.empty() || crop.w < 1 || crop.h < 1)
        throw std::invalid_argument("encode_roi: empty crop");
    const Image im = resize(crop, 16, 16);
    std::vector<double> v(kDim, 0.0);
    // 0..23: 8-bin histogram per channel
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            for (int c = 0; c < 3; ++c) {
                int bin = static_cast<int>(im.at(x, y, c) * 8.0f);
                bin = std::clamp(bin, 0, 7);
                v[static_cast<size_t>(c) * 8 + bin] += 1.0;
            }
    // 24..59: 6x6 gradient-magnitude silhouette: 14x14 interior gradient of the
    // 16x16 gray map, 3x3 box-blurred (softens box-jitter misalignment), pooled
    double g14[14][14];
    double grad_mean = 0.0;
    for (int y = 1; y < 15; ++y)
        for (int x = 1; x < 15; ++x) {
            const double gx = gray_at(im, x + 1, y) - gray_at(im, x - 1, y);
            const double gy = gray_at(im, x, y + 1) - gray_at(im, x, y - 1);
            g14[y - 1][x - 1] = std::sqrt(gx * gx + gy * gy);
            grad_mean += g14[y - 1][x - 1] / 196.0;
        }
    double b14[14][14];
    for (int y = 0; y < 14; ++y)
        for (int x = 0; x < 14; ++x) {
            double s = 0.0;
            int cnt = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int yy = y + dy, xx = x + dx;
                    if (yy < 0 || yy >= 14 || xx < 0 || xx >= 14) continue;
                    s += g14[yy][xx];
                    ++cnt;
                }
            b14[y][x] = s / cnt;
        }
    for (int by = 0; by < 6; ++by)
        for (int bx = 0; bx < 6; ++bx) {
            double s = 0.0;
            int cnt = 0;
            for (int y = by * 14 / 6; y < (by + 1) * 14 / 6 + ((by + 1) * 14 % 6 ? 1 : 0) && y < 14; ++y)
                for (int x = bx * 14 / 6; x < (bx + 1) * 14 / 6 + ((bx + 1) * 14 % 6 ? 1 : 0) && x < 14; ++x) {
                    s += b14[y][x];
                    ++cnt;
                }
            v[24 + static_cast<size_t>(by) * 6 + bx] = cnt ? s / cnt : 0.0;
        }
    // 60..63: intensity stats
    double mean = 0.0;
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) mean += gray_at(im, x, y) / 256.0;
    double sd = 0.0;
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            const double d = gray_at(im, x, y) - mean;
            sd += d * d / 256.0;
        }
    sd = std::sqrt(sd);
    // rough foreground fraction: pixels far from the border mean
    double border = 0.0;
    int nb = 0;
    for (int x = 0; x < 16; ++x) {
        border += gray_at(im, x, 0) + gray_at(im, x, 15);
        nb += 2;
    }
    border /= nb;
    double fg = 0.0;
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            if (std::abs(gray_at(im, x, y) - border) > 0.15) fg += 1.0 / 256.0;
    v[60] = mean;
    v[61] = sd;
    v[62] = grad_mean;
    v[63] = fg;

    center(v, 0, 8);  // per-channel: remove the shared total-count component
    center(v, 8, 16);
    center(v, 16, 24);
    center(v, 24, 60);
    unit_scale(v, 0, 24, kWHist);
    unit_scale(v, 24, 60, kWShape);
    unit_scale(v, 60, 64, kWStats);
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n < 1e-12)
        throw std::invalid_argument("encode_roi: zero-content crop");
    for (double& x : v) x /= n;
    EmbeddingVector out;
    out.values = std::move(v);
    return out;
}

}  // namespace pivot
