#include "pivot/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace pivot {

namespace {

struct Entry {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

double to_double(const std::string& s) {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::runtime_error("bad numeric value: " + s);
    return v;
}
int to_int(const std::string& s) {
    size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::runtime_error("bad integer value: " + s);
    return v;
}
bool to_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "on") return true;
    if (s == "false" || s == "0" || s == "off") return false;
    throw std::runtime_error("bad boolean value: " + s);
}
std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

const std::map<std::string, Entry>& registry() {
    static const std::map<std::string, Entry> reg = [] {
        std::map<std::string, Entry> m;
        auto add_d = [&m](const std::string& k, std::function<double&(RunConfig&)> f) {
            m[k] = {[f](RunConfig& c, const std::string& v) { f(c) = to_double(v); },
                    [f](const RunConfig& c) { return fmt(f(const_cast<RunConfig&>(c))); }};
        };
        auto add_i = [&m](const std::string& k, std::function<int&(RunConfig&)> f) {
            m[k] = {[f](RunConfig& c, const std::string& v) { f(c) = to_int(v); },
                    [f](const RunConfig& c) {
                        return std::to_string(f(const_cast<RunConfig&>(c)));
                    }};
        };
        auto add_b = [&m](const std::string& k, std::function<bool&(RunConfig&)> f) {
            m[k] = {[f](RunConfig& c, const std::string& v) { f(c) = to_bool(v); },
                    [f](const RunConfig& c) {
                        return std::string(f(const_cast<RunConfig&>(c)) ? "true" : "false");
                    }};
        };
        auto add_u = [&m](const std::string& k, std::function<uint64_t&(RunConfig&)> f) {
            m[k] = {[f](RunConfig& c, const std::string& v) {
                        f(c) = static_cast<uint64_t>(std::stoull(v));
                    },
                    [f](const RunConfig& c) {
                        return std::to_string(f(const_cast<RunConfig&>(c)));
                    }};
        };
        auto add_s = [&m](const std::string& k, std::function<std::string&(RunConfig&)> f) {
            m[k] = {[f](RunConfig& c, const std::string& v) { f(c) = v; },
                    [f](const RunConfig& c) { return f(const_cast<RunConfig&>(c)); }};
        };

        add_s("encoder.name", [](RunConfig& c) -> std::string& { return c.encoder.name; });
        add_i("encoder.resolution",
              [](RunConfig& c) -> int& { return c.encoder.input_resolution; });
        add_i("encoder.grid", [](RunConfig& c) -> int& { return c.encoder.grid; });
        add_i("encoder.channels", [](RunConfig& c) -> int& { return c.encoder.channels; });
        add_i("encoder.pool_to", [](RunConfig& c) -> int& { return c.encoder.pool_to; });

        add_d("tpr.tau", [](RunConfig& c) -> double& { return c.tpr.tau; });
        add_d("tpr.gamma", [](RunConfig& c) -> double& { return c.tpr.gamma; });
        add_i("tpr.max_candidates",
              [](RunConfig& c) -> int& { return c.tpr.max_candidates; });
        add_b("tpr.enabled", [](RunConfig& c) -> bool& { return c.track.tpr_enabled; });

        add_d("loss.lambda_cls", [](RunConfig& c) -> double& { return c.loss.lambda_cls; });
        add_d("loss.lambda_can", [](RunConfig& c) -> double& { return c.loss.lambda_can; });
        add_d("loss.lambda_reg", [](RunConfig& c) -> double& { return c.loss.lambda_reg; });
        add_d("loss.sigma_factor", [](RunConfig& c) -> double& { return c.sigma_factor; });
        add_d("loss.fg_threshold", [](RunConfig& c) -> double& { return c.fg_threshold; });

        add_i("train.stage1_epochs",
              [](RunConfig& c) -> int& { return c.train.stage1_epochs; });
        add_i("train.stage2_epochs",
              [](RunConfig& c) -> int& { return c.train.stage2_epochs; });
        add_i("train.samples_per_epoch",
              [](RunConfig& c) -> int& { return c.train.samples_per_epoch; });
        add_i("train.window", [](RunConfig& c) -> int& { return c.train.window; });
        add_d("train.lr_stage1", [](RunConfig& c) -> double& { return c.train.lr_stage1; });
        add_d("train.lr_prompt", [](RunConfig& c) -> double& { return c.train.lr_prompt; });
        add_d("train.lr_pretrained",
              [](RunConfig& c) -> double& { return c.train.lr_pretrained; });
        add_d("train.decay_factor",
              [](RunConfig& c) -> double& { return c.train.decay_factor; });
        add_d("train.decay_at1", [](RunConfig& c) -> double& { return c.train.decay_at1; });
        add_d("train.decay_at2", [](RunConfig& c) -> double& { return c.train.decay_at2; });
        add_d("train.stage2_decay_tail",
              [](RunConfig& c) -> double& { return c.train.stage2_decay_tail; });
        add_d("train.weight_decay",
              [](RunConfig& c) -> double& { return c.train.weight_decay; });
        add_d("train.prompt_clamp_prob",
              [](RunConfig& c) -> double& { return c.train.prompt_clamp_prob; });
        add_d("train.stage2_shift",
              [](RunConfig& c) -> double& { return c.train.stage2_shift; });
        add_d("train.ref_poison_prob",
              [](RunConfig& c) -> double& { return c.train.ref_poison_prob; });
        add_d("train.can_sigma_scale",
              [](RunConfig& c) -> double& { return c.train.can_sigma_scale; });
        add_d("train.clamp_noise_prob",
              [](RunConfig& c) -> double& { return c.train.clamp_noise_prob; });

        add_d("track.scale_factor",
              [](RunConfig& c) -> double& { return c.track.scale_factor; });
        add_d("track.update_threshold",
              [](RunConfig& c) -> double& { return c.track.update_threshold; });
        add_i("track.update_min_gap",
              [](RunConfig& c) -> int& { return c.track.update_min_gap; });
        add_b("track.prompt_enabled",
              [](RunConfig& c) -> bool& { return c.track.prompt_enabled; });
        add_i("track.parallelism",
              [](RunConfig& c) -> int& { return c.track.parallelism; });

        add_i("synth.canvas_w", [](RunConfig& c) -> int& { return c.synth.canvas_w; });
        add_i("synth.canvas_h", [](RunConfig& c) -> int& { return c.synth.canvas_h; });
        add_i("synth.frames", [](RunConfig& c) -> int& { return c.synth.frames; });
        add_i("synth.sequences", [](RunConfig& c) -> int& { return c.synth.sequences; });
        add_u("synth.master_seed",
              [](RunConfig& c) -> uint64_t& { return c.synth.master_seed; });

        add_u("run.seed", [](RunConfig& c) -> uint64_t& { return c.seed; });
        add_s("run.output_dir",
              [](RunConfig& c) -> std::string& { return c.output_dir; });
        return m;
    }();
    return reg;
}

}  // namespace

std::string RunConfig::serialize() const {
    std::ostringstream os;
    for (const auto& [key, e] : registry()) os << key << "=" << e.get(*this) << "\n";
    return os.str();
}

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

uint64_t RunConfig::hash() const { return fnv1a(serialize()); }

void apply_config_override(const std::string& kv, RunConfig& cfg) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos)
        throw std::runtime_error("config override must be key=value: " + kv);
    const std::string key = kv.substr(0, eq);
    const std::string val = kv.substr(eq + 1);
    auto it = registry().find(key);
    if (it == registry().end()) throw std::runtime_error("unknown config key: " + key);
    it->second.set(cfg, val);
}

void parse_config_file(const std::string& path, RunConfig& cfg) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file: " + path);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        // strip comments and whitespace
        const size_t hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line.resize(hash_pos);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        const std::string full = section.empty() ? key : section + "." + key;
        auto it = registry().find(full);
        if (it == registry().end())
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": unknown config key: " + full);
        it->second.set(cfg, val);
    }
}

}  // namespace pivot
