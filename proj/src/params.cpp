#include "pivot/nn/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace pivot::nn {

Var ParamStore::create(const std::string& name, std::vector<int> shape,
                       double init_std, std::mt19937_64& rng) {
    if (params_.count(name)) throw std::invalid_argument("duplicate param: " + name);
    Tensor t(std::move(shape));
    std::normal_distribution<double> dist(0.0, init_std);
    if (init_std > 0.0)
        for (auto& x : t.d) x = dist(rng);
    Var v = parameter(std::move(t));
    params_[name] = v;
    return v;
}

Var ParamStore::create_const_init(const std::string& name, std::vector<int> shape,
                                  double value) {
    if (params_.count(name)) throw std::invalid_argument("duplicate param: " + name);
    Tensor t(std::move(shape));
    for (auto& x : t.d) x = value;
    Var v = parameter(std::move(t));
    params_[name] = v;
    return v;
}

Var ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("no param: " + name);
    return it->second;
}

void ParamStore::zero_grads() {
    for (auto& [name, p] : params_) p->zero_grad();
}

void AdamW::step(std::vector<ParamGroup>& groups) {
    ++t_;
    const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (auto& g : groups) {
        for (auto& p : g.params) {
            p->ensure_grad();
            auto& st = state_[p.get()];
            if (st.m.size() != p->val.size()) {
                st.m.assign(p->val.size(), 0.0);
                st.v.assign(p->val.size(), 0.0);
            }
            for (size_t i = 0; i < p->val.size(); ++i) {
                const double grad = p->grad.d[i];
                st.m[i] = b1_ * st.m[i] + (1.0 - b1_) * grad;
                st.v[i] = b2_ * st.v[i] + (1.0 - b2_) * grad * grad;
                const double mhat = st.m[i] / bc1;
                const double vhat = st.v[i] / bc2;
                p->val.d[i] -= g.lr * (mhat / (std::sqrt(vhat) + eps_) + wd_ * p->val.d[i]);
            }
        }
    }
}

namespace {
constexpr char kMagic[4] = {'P', 'V', 'C', 'K'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
void read_pod(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
}
}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& store,
                     uint64_t config_hash) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path);
    os.write(kMagic, 4);
    write_pod(os, kVersion);
    write_pod(os, config_hash);
    const uint32_t count = static_cast<uint32_t>(store.all().size());
    write_pod(os, count);
    for (const auto& [name, p] : store.all()) {
        const uint32_t nl = static_cast<uint32_t>(name.size());
        write_pod(os, nl);
        os.write(name.data(), nl);
        const uint32_t nd = static_cast<uint32_t>(p->val.shape.size());
        write_pod(os, nd);
        for (int dim : p->val.shape) {
            const uint32_t d = static_cast<uint32_t>(dim);
            write_pod(os, d);
        }
        os.write(reinterpret_cast<const char*>(p->val.d.data()),
                 static_cast<std::streamsize>(p->val.size() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

uint64_t load_checkpoint(const std::string& path, ParamStore& store) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    uint32_t version;
    read_pod(is, version);
    if (version != kVersion) throw std::runtime_error("checkpoint: unsupported version");
    uint64_t hash;
    read_pod(is, hash);
    uint32_t count;
    read_pod(is, count);
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t nl;
        read_pod(is, nl);
        std::string name(nl, '\0');
        is.read(name.data(), nl);
        uint32_t nd;
        read_pod(is, nd);
        std::vector<int> shape(nd);
        for (uint32_t k = 0; k < nd; ++k) {
            uint32_t d;
            read_pod(is, d);
            shape[k] = static_cast<int>(d);
        }
        Var p = store.get(name);
        if (p->val.shape != shape)
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        is.read(reinterpret_cast<char*>(p->val.d.data()),
                static_cast<std::streamsize>(p->val.size() * sizeof(double)));
        if (!is) throw std::runtime_error("checkpoint: truncated block " + name);
    }
    return hash;
}

uint64_t peek_checkpoint_hash(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    uint32_t version;
    read_pod(is, version);
    uint64_t hash;
    read_pod(is, hash);
    return hash;
}

}  // namespace pivot::nn
