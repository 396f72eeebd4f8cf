#include "pivot/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace pivot {

Image SequenceRecord::frame(size_t i) const {
    if (!frames.empty()) return frames.at(i);
    return load_ppm(frame_paths.at(i));
}

namespace {

bool inside_shape(Shape s, double u, double v, double morph_p) {
    const double r2 = u * u + v * v;
    switch (s) {
        case Shape::Rect:
            return true;
        case Shape::Ellipse:
            if (morph_p > 0.0)
                return std::pow(std::abs(u), morph_p) + std::pow(std::abs(v), morph_p) <= 1.0;
            return r2 <= 1.0;
        case Shape::Triangle:
            return std::abs(u) <= (v + 1.0) * 0.5;
        case Shape::Diamond:
            return std::abs(u) + std::abs(v) <= 1.0;
        case Shape::Ring: {
            const double r = std::sqrt(r2);
            return r <= 1.0 && r >= 0.55;
        }
        case Shape::Cross:
            return std::abs(u) <= 0.34 || std::abs(v) <= 0.34;
    }
    return false;
}

struct TextureParams {
    double fx, fy, phase, amp;
};

TextureParams texture_params(uint64_t seed) {
    std::mt19937_64 rng(seed * 2654435761ULL + 17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    TextureParams t;
    t.fx = 0.4 + 1.2 * u(rng);
    t.fy = 0.4 + 1.2 * u(rng);
    t.phase = 6.2831853 * u(rng);
    t.amp = 0.18 + 0.12 * u(rng);
    return t;
}

void draw_object(Image& im, const ObjectDesc& o, const BoundingBox& box, int frame_idx) {
    const TextureParams tex = texture_params(o.texture_seed);
    double morph_p = 0.0;
    if (o.morph_amplitude > 0.0)
        morph_p = 2.0 + o.morph_amplitude * std::sin(frame_idx * 0.25);
    const int x0 = std::max(0, static_cast<int>(std::floor(box.x)));
    const int y0 = std::max(0, static_cast<int>(std::floor(box.y)));
    const int x1 = std::min(im.w, static_cast<int>(std::ceil(box.x2())));
    const int y1 = std::min(im.h, static_cast<int>(std::ceil(box.y2())));
    for (int py = y0; py < y1; ++py) {
        const double v = ((py + 0.5) - box.cy()) / (0.5 * box.h);
        for (int px = x0; px < x1; ++px) {
            const double u = ((px + 0.5) - box.cx()) / (0.5 * box.w);
            if (std::abs(u) > 1.0 || std::abs(v) > 1.0) continue;
            if (!inside_shape(o.shape, u, v, morph_p)) continue;
            const double mod =
                1.0 + tex.amp * std::sin(tex.fx * px + tex.fy * py + tex.phase);
            for (int c = 0; c < 3; ++c)
                im.at(px, py, c) =
                    static_cast<float>(std::clamp(o.color[static_cast<size_t>(c)] * mod, 0.0, 1.0));
        }
    }
}

struct MovingObject {
    ObjectDesc desc;
    double x, y, vx, vy;

    BoundingBox box() const { return {x, y, desc.w, desc.h}; }

    void step(int canvas_w, int canvas_h, std::mt19937_64& rng) {
        if (desc.direction_change_rate > 0.0) {
            std::uniform_real_distribution<double> u(0.0, 1.0);
            if (u(rng) < desc.direction_change_rate) {
                std::uniform_real_distribution<double> ang(-1.0, 1.0);
                const double a = ang(rng);
                const double ca = std::cos(a), sa = std::sin(a);
                const double nvx = vx * ca - vy * sa;
                const double nvy = vx * sa + vy * ca;
                vx = nvx;
                vy = nvy;
            }
        }
        x += vx;
        y += vy;
        if (x < 0.0) {
            x = 0.0;
            vx = std::abs(vx);
        }
        if (y < 0.0) {
            y = 0.0;
            vy = std::abs(vy);
        }
        if (x + desc.w > canvas_w) {
            x = canvas_w - desc.w;
            vx = -std::abs(vx);
        }
        if (y + desc.h > canvas_h) {
            y = canvas_h - desc.h;
            vy = -std::abs(vy);
        }
    }
};

// similarity level -> distractor appearance relative to the target
ObjectDesc apply_similarity(const ObjectDesc& target, const ObjectDesc& base,
                            double level) {
    ObjectDesc d = base;
    if (level >= 0.999) {
        d.shape = target.shape;
        d.color = target.color;
        return d;
    }
    // keep the target color at high similarity, shift hue below 0.8
    d.color = target.color;
    if (level < 0.8) {
        const double a = 1.0 - level;
        d.color = {target.color[1] * a + target.color[0] * (1 - a),
                   target.color[2] * a + target.color[1] * (1 - a),
                   target.color[0] * a + target.color[2] * (1 - a)};
    }
    return d;
}

}  // namespace

SequenceRecord generate_synthetic(const SynthSpec& spec) {
    if (spec.target.w >= spec.canvas_w || spec.target.h >= spec.canvas_h)
        throw std::invalid_argument("generate_synthetic: object larger than canvas");
    for (const auto& ev : spec.occlusions)
        if (ev.start < 0 || ev.start + ev.duration > spec.frames)
            throw std::invalid_argument("generate_synthetic: occlusion outside sequence");
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> noise(-1.0, 1.0);

    SequenceRecord rec;
    rec.name = spec.name;
    rec.attributes = spec.attributes;

    MovingObject target{spec.target, spec.target.x, spec.target.y, spec.target.vx,
                        spec.target.vy};
    std::vector<MovingObject> distractors;
    for (const auto& [d, level] : spec.distractors) {
        ObjectDesc desc = apply_similarity(spec.target, d, level);
        distractors.push_back({desc, d.x, d.y, d.vx, d.vy});
    }

    const std::array<double, 3> bg = {0.42, 0.45, 0.40};
    for (int f = 0; f < spec.frames; ++f) {
        Image im(spec.canvas_w, spec.canvas_h);
        for (int y = 0; y < im.h; ++y)
            for (int x = 0; x < im.w; ++x)
                for (int c = 0; c < 3; ++c) {
                    const double n = spec.noise_level * noise(rng);
                    im.at(x, y, c) =
                        static_cast<float>(std::clamp(bg[static_cast<size_t>(c)] + n, 0.0, 1.0));
                }
        for (size_t i = 0; i < distractors.size(); ++i)
            draw_object(im, distractors[i].desc, distractors[i].box(), f);
        draw_object(im, target.desc, target.box(), f);

        bool vis = true;
        for (const auto& ev : spec.occlusions) {
            if (f >= ev.start && f < ev.start + ev.duration) {
                vis = false;
                BoundingBox ob = target.box();
                const double grow_w = 0.25 * ob.w, grow_h = 0.25 * ob.h;
                ob = {ob.x - grow_w, ob.y - grow_h, ob.w + 2 * grow_w, ob.h + 2 * grow_h};
                ObjectDesc occ;
                occ.shape = Shape::Rect;
                occ.color = ev.color;
                occ.texture_seed = spec.seed ^ 0xabcdULL;
                draw_object(im, occ, ob, f);
            }
        }
        rec.frames.push_back(std::move(im));
        rec.boxes.push_back(target.box());
        rec.visible.push_back(vis);

        target.step(spec.canvas_w, spec.canvas_h, rng);
        for (auto& d : distractors) d.step(spec.canvas_w, spec.canvas_h, rng);
    }
    return rec;
}

namespace {

const std::array<Shape, 6> kShapes = {Shape::Rect,    Shape::Ellipse, Shape::Triangle,
                                      Shape::Diamond, Shape::Ring,    Shape::Cross};

const std::array<std::array<double, 3>, 8> kPalette = {{{0.85, 0.15, 0.15},
                                                        {0.15, 0.65, 0.20},
                                                        {0.15, 0.25, 0.85},
                                                        {0.85, 0.75, 0.15},
                                                        {0.75, 0.20, 0.75},
                                                        {0.15, 0.75, 0.75},
                                                        {0.90, 0.50, 0.15},
                                                        {0.55, 0.30, 0.10}}};

ObjectDesc random_target(std::mt19937_64& rng, const SynthConfig& cfg, size_t idx) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ObjectDesc t;
    t.shape = kShapes[idx % kShapes.size()];
    // round-robin so every palette color appears in a 20-sequence suite
    t.color = kPalette[idx % kPalette.size()];
    t.texture_seed = rng();
    t.w = 20.0 + 12.0 * u(rng);
    t.h = 18.0 + 10.0 * u(rng);
    t.x = 20.0 + u(rng) * (cfg.canvas_w - t.w - 40.0);
    t.y = 15.0 + u(rng) * (cfg.canvas_h - t.h - 30.0);
    const double speed = 0.8 + 1.4 * u(rng);
    const double ang = 6.2831853 * u(rng);
    t.vx = speed * std::cos(ang);
    t.vy = speed * std::sin(ang);
    return t;
}

}  // namespace

std::vector<SynthSpec> make_suite(const std::string& name, const SynthConfig& cfg) {
    std::vector<SynthSpec> specs;
    const uint64_t suite_salt = fnv1a(name);
    for (int i = 0; i < cfg.sequences; ++i) {
        const uint64_t seed = cfg.master_seed * 1000003ULL + suite_salt * 31ULL +
                              static_cast<uint64_t>(i);
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        SynthSpec s;
        s.name = name + "_" + (i < 10 ? "0" : "") + std::to_string(i);
        s.canvas_w = cfg.canvas_w;
        s.canvas_h = cfg.canvas_h;
        s.frames = cfg.frames;
        s.seed = seed ^ 0x9e3779b97f4a7c15ULL;
        s.attributes = {name};
        s.target = random_target(rng, cfg, static_cast<size_t>(i));

        if (name == "plain") {
            s.target.direction_change_rate = 0.05;
        } else if (name == "distractor") {
            // straight paths with a guaranteed crossing near mid-sequence
            s.target.direction_change_rate = 0.0;
            const int n_dis = 1 + static_cast<int>(u(rng) * 3.0);
            const int tc = s.frames / 2 + static_cast<int>(u(rng) * 10.0) - 5;
            for (int k = 0; k < n_dis; ++k) {
                ObjectDesc d = s.target;  // same size class
                d.shape = kShapes[(static_cast<size_t>(i) + 2 + static_cast<size_t>(k)) %
                                  kShapes.size()];
                if (d.shape == s.target.shape)
                    d.shape = kShapes[(static_cast<size_t>(i) + 3 + static_cast<size_t>(k)) %
                                      kShapes.size()];
                d.texture_seed = rng();
                // cross the target's path at frame tc (+ small per-distractor shift)
                const int tck = std::min(s.frames - 8, tc + 6 * k);
                const double cross_x = s.target.x + s.target.vx * tck + 0.5 * s.target.w;
                const double cross_y = s.target.y + s.target.vy * tck + 0.5 * s.target.h;
                const double sp = 0.9 + 0.8 * u(rng);
                double ang = 6.2831853 * u(rng);
                double vx = sp * std::cos(ang), vy = sp * std::sin(ang);
                double px = cross_x - vx * tck - 0.5 * d.w;
                double py = cross_y - vy * tck - 0.5 * d.h;
                for (int attempt = 0; attempt < 16; ++attempt) {
                    if (px >= 0 && py >= 0 && px + d.w <= s.canvas_w &&
                        py + d.h <= s.canvas_h)
                        break;
                    ang = 6.2831853 * u(rng);
                    vx = sp * std::cos(ang);
                    vy = sp * std::sin(ang);
                    px = cross_x - vx * tck - 0.5 * d.w;
                    py = cross_y - vy * tck - 0.5 * d.h;
                }
                d.x = std::clamp(px, 0.0, static_cast<double>(s.canvas_w) - d.w);
                d.y = std::clamp(py, 0.0, static_cast<double>(s.canvas_h) - d.h);
                d.vx = vx;
                d.vy = vy;
                const double level = 0.85 + 0.1 * u(rng);
                s.distractors.push_back({d, level});
            }
        } else if (name == "occlusion") {
            s.target.direction_change_rate = 0.03;
            OcclusionEvent ev;
            ev.start = 20 + static_cast<int>(u(rng) * 12.0);
            ev.duration = 8 + static_cast<int>(u(rng) * 6.0);
            s.occlusions.push_back(ev);
        } else if (name == "deform") {
            s.target.shape = Shape::Ellipse;
            s.target.morph_amplitude = 1.1;
            s.target.direction_change_rate = 0.03;
        } else {
            throw std::invalid_argument("unknown suite: " + name);
        }
        specs.push_back(std::move(s));
    }
    return specs;
}

std::map<std::string, std::vector<SynthSpec>> make_suites(const SynthConfig& cfg) {
    std::map<std::string, std::vector<SynthSpec>> out;
    for (const char* name : {"plain", "distractor", "occlusion", "deform"})
        out[name] = make_suite(name, cfg);
    return out;
}

void write_suite(const std::string& dir, const std::vector<SequenceRecord>& records) {
    fs::create_directories(dir);
    std::ofstream list(fs::path(dir) / "list.txt");
    std::ofstream attrs(fs::path(dir) / "attributes.txt");
    for (const auto& rec : records) {
        const fs::path sd = fs::path(dir) / rec.name;
        fs::create_directories(sd);
        list << rec.name << "\n";
        if (!rec.attributes.empty()) {
            attrs << rec.name;
            for (size_t i = 0; i < rec.attributes.size(); ++i)
                attrs << (i == 0 ? " " : ",") << rec.attributes[i];
            attrs << "\n";
        }
        std::ofstream gt(sd / "groundtruth.txt");
        std::ofstream ab(sd / "absence.label");
        char buf[64];
        for (size_t f = 0; f < rec.length(); ++f) {
            std::snprintf(buf, sizeof(buf), "%08zu.ppm", f + 1);
            save_ppm(rec.frame(f), (sd / buf).string());
            const auto& b = rec.boxes[f];
            std::snprintf(buf, sizeof(buf), "%.3f,%.3f,%.3f,%.3f", b.x, b.y, b.w, b.h);
            gt << buf << "\n";
            ab << (rec.visible[f] ? 0 : 1) << "\n";
        }
    }
}

namespace {

std::vector<double> parse_box_line(const std::string& line) {
    std::string s = line;
    for (char& c : s)
        if (c == ',' || c == '\t') c = ' ';
    std::istringstream is(s);
    std::vector<double> vals;
    double v;
    while (is >> v) vals.push_back(v);
    return vals;
}

long numeric_stem(const fs::path& p) {
    std::string digits;
    for (char c : p.stem().string())
        if (std::isdigit(static_cast<unsigned char>(c))) digits += c;
    return digits.empty() ? -1 : std::stol(digits);
}

std::vector<std::string> list_images(const fs::path& dir) {
    std::vector<fs::path> imgs;
    if (!fs::exists(dir)) return {};
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string ext = e.path().extension().string();
        if (ext == ".ppm" || ext == ".jpg" || ext == ".jpeg" || ext == ".png")
            imgs.push_back(e.path());
    }
    std::sort(imgs.begin(), imgs.end(), [](const fs::path& a, const fs::path& b) {
        const long na = numeric_stem(a), nb = numeric_stem(b);
        if (na != nb) return na < nb;
        return a.filename() < b.filename();
    });
    std::vector<std::string> out;
    for (const auto& p : imgs) out.push_back(p.string());
    return out;
}

std::vector<BoundingBox> read_groundtruth(const fs::path& file, std::string* err) {
    std::vector<BoundingBox> boxes;
    std::ifstream is(file);
    if (!is) {
        *err = "missing groundtruth file " + file.string();
        return boxes;
    }
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto vals = parse_box_line(line);
        if (vals.size() != 4) {
            *err = "malformed box at " + file.string() + ":" + std::to_string(lineno);
            return boxes;
        }
        boxes.push_back({vals[0], vals[1], vals[2], vals[3]});
    }
    return boxes;
}

std::vector<bool> read_flag_file_lines(const fs::path& file, size_t n) {
    // one 0/1 per line; 1 = absent
    std::vector<bool> vis(n, true);
    std::ifstream is(file);
    if (!is) return vis;
    std::string line;
    size_t i = 0;
    while (std::getline(is, line) && i < n) {
        if (!line.empty() && line[0] == '1') vis[i] = false;
        ++i;
    }
    return vis;
}

std::vector<bool> read_flag_file_csv(const fs::path& file, size_t n) {
    // single comma-separated line; 1 = occluded/out-of-view
    std::vector<bool> flags(n, false);
    std::ifstream is(file);
    if (!is) return flags;
    std::string line;
    std::getline(is, line);
    std::istringstream ls(line);
    std::string tok;
    size_t i = 0;
    while (std::getline(ls, tok, ',') && i < n) {
        if (tok.find('1') != std::string::npos) flags[i] = true;
        ++i;
    }
    return flags;
}

void finish_sequence(SequenceRecord&& rec, std::vector<BoundingBox>&& boxes,
                     LoadResult& out) {
    if (boxes.size() != rec.frame_paths.size()) {
        out.errors.push_back("sequence " + rec.name + ": " +
                             std::to_string(boxes.size()) + " boxes for " +
                             std::to_string(rec.frame_paths.size()) + " frames");
        return;
    }
    if (rec.frame_paths.empty()) {
        out.errors.push_back("sequence " + rec.name + ": no frames");
        return;
    }
    if (!boxes.front().valid()) {
        out.errors.push_back("sequence " + rec.name + ": invalid first-frame box");
        return;
    }
    rec.boxes = std::move(boxes);
    if (rec.visible.size() != rec.frame_paths.size())
        rec.visible.assign(rec.frame_paths.size(), true);
    out.sequences.push_back(std::move(rec));
}

}  // namespace

LoadResult load_dataset(const std::string& root, DatasetLayout layout) {
    if (!fs::exists(root)) throw std::runtime_error("dataset root not found: " + root);
    LoadResult out;

    auto load_seq_dir = [&](const fs::path& sd, const fs::path& img_dir,
                            const fs::path& gt_file) {
        SequenceRecord rec;
        rec.name = sd.filename().string();
        rec.frame_paths = list_images(img_dir);
        std::string err;
        auto boxes = read_groundtruth(gt_file, &err);
        if (!err.empty()) {
            out.errors.push_back("sequence " + rec.name + ": " + err);
            return;
        }
        if (layout == DatasetLayout::Got10k) {
            rec.visible = read_flag_file_lines(sd / "absence.label", rec.frame_paths.size());
        } else if (layout == DatasetLayout::Lasot) {
            const auto occ = read_flag_file_csv(sd / "full_occlusion.txt",
                                                rec.frame_paths.size());
            const auto oov = read_flag_file_csv(sd / "out_of_view.txt",
                                                rec.frame_paths.size());
            rec.visible.assign(rec.frame_paths.size(), true);
            for (size_t i = 0; i < rec.visible.size(); ++i)
                if (occ[i] || oov[i]) rec.visible[i] = false;
        }
        finish_sequence(std::move(rec), std::move(boxes), out);
    };

    switch (layout) {
        case DatasetLayout::Got10k: {
            std::vector<fs::path> seq_dirs;
            const fs::path list = fs::path(root) / "list.txt";
            if (fs::exists(list)) {
                std::ifstream is(list);
                std::string name;
                while (std::getline(is, name))
                    if (!name.empty()) seq_dirs.push_back(fs::path(root) / name);
            } else {
                for (const auto& e : fs::directory_iterator(root))
                    if (e.is_directory()) seq_dirs.push_back(e.path());
                std::sort(seq_dirs.begin(), seq_dirs.end());
            }
            for (const auto& sd : seq_dirs)
                load_seq_dir(sd, sd, sd / "groundtruth.txt");
            break;
        }
        case DatasetLayout::Otb: {
            std::vector<fs::path> seq_dirs;
            for (const auto& e : fs::directory_iterator(root))
                if (e.is_directory()) seq_dirs.push_back(e.path());
            std::sort(seq_dirs.begin(), seq_dirs.end());
            for (const auto& sd : seq_dirs)
                load_seq_dir(sd, sd / "img", sd / "groundtruth_rect.txt");
            break;
        }
        case DatasetLayout::Lasot: {
            std::vector<fs::path> seq_dirs;
            for (const auto& cls : fs::directory_iterator(root)) {
                if (!cls.is_directory()) continue;
                for (const auto& e : fs::directory_iterator(cls.path()))
                    if (e.is_directory()) seq_dirs.push_back(e.path());
            }
            std::sort(seq_dirs.begin(), seq_dirs.end());
            for (const auto& sd : seq_dirs)
                load_seq_dir(sd, sd / "img", sd / "groundtruth.txt");
            break;
        }
    }
    return out;
}

DatasetLayout layout_from_string(const std::string& s) {
    if (s == "otb") return DatasetLayout::Otb;
    if (s == "lasot") return DatasetLayout::Lasot;
    if (s == "got10k") return DatasetLayout::Got10k;
    throw std::runtime_error("unknown dataset layout: " + s);
}

std::optional<BoundingBox> color_key_box(const Image& frame,
                                         const std::array<double, 3>& color,
                                         double tol) {
    int x0 = frame.w, y0 = frame.h, x1 = -1, y1 = -1;
    for (int y = 0; y < frame.h; ++y)
        for (int x = 0; x < frame.w; ++x) {
            // compare hue-wise, ignoring the texture brightness modulation
            double fr = frame.at(x, y, 0), fg = frame.at(x, y, 1), fb = frame.at(x, y, 2);
            const double fn = std::max(1e-6, fr + fg + fb);
            const double cn = std::max(1e-6, color[0] + color[1] + color[2]);
            const double d = std::abs(fr / fn - color[0] / cn) +
                             std::abs(fg / fn - color[1] / cn) +
                             std::abs(fb / fn - color[2] / cn);
            if (d < tol) {
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
        }
    if (x1 < 0) return std::nullopt;
    return BoundingBox{static_cast<double>(x0), static_cast<double>(y0),
                       static_cast<double>(x1 - x0 + 1), static_cast<double>(y1 - y0 + 1)};
}

}  // namespace pivot
