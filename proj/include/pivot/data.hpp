#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pivot/config.hpp"
#include "pivot/datamodel.hpp"
#include "pivot/image.hpp"

namespace pivot {

// One tracking sequence: frames either in memory or on disk (lazy-loaded).
struct SequenceRecord {
    std::string name;
    std::vector<Image> frames;             // in-memory variant
    std::vector<std::string> frame_paths;  // on-disk variant
    std::vector<BoundingBox> boxes;
    std::vector<bool> visible;
    std::vector<std::string> attributes;

    size_t length() const {
        return frames.empty() ? frame_paths.size() : frames.size();
    }
    Image frame(size_t i) const;
};

enum class Shape { Rect, Ellipse, Triangle, Diamond, Ring, Cross };

struct ObjectDesc {
    Shape shape = Shape::Ellipse;
    std::array<double, 3> color = {0.8, 0.2, 0.2};
    uint64_t texture_seed = 0;
    double w = 24.0;
    double h = 20.0;
    double x = 40.0;   // initial top-left
    double y = 30.0;
    double vx = 1.0;   // pixels per frame
    double vy = 0.5;
    double direction_change_rate = 0.0;  // per-frame probability of a turn
    double morph_amplitude = 0.0;        // superellipse exponent modulation
};

struct OcclusionEvent {
    int start = 0;
    int duration = 0;
    std::array<double, 3> color = {0.1, 0.1, 0.1};
};

struct SynthSpec {
    std::string name = "synth";
    int canvas_w = 160;
    int canvas_h = 120;
    int frames = 64;
    ObjectDesc target;
    // distractors carry a similarity level; >= 0.8 keeps the target color
    // (shape differs), lower levels also shift the hue
    std::vector<std::pair<ObjectDesc, double>> distractors;
    std::vector<OcclusionEvent> occlusions;
    double noise_level = 0.01;
    uint64_t seed = 0;
    std::vector<std::string> attributes;
};

// Deterministic given spec.seed; exact ground-truth boxes; occluded frames
// have visible = false and the target covered by the occluder.
SequenceRecord generate_synthetic(const SynthSpec& spec);

// Canonical verification suites: plain, distractor, occlusion, deform.
std::map<std::string, std::vector<SynthSpec>> make_suites(const SynthConfig& cfg);
// Variant for seed studies: same structure, different master seed.
std::vector<SynthSpec> make_suite(const std::string& name, const SynthConfig& cfg);

// Materializes records in the on-disk layout the got10k parser reads.
void write_suite(const std::string& dir, const std::vector<SequenceRecord>& records);

enum class DatasetLayout { Otb, Lasot, Got10k };

struct LoadResult {
    std::vector<SequenceRecord> sequences;
    std::vector<std::string> errors;  // per-sequence error records
};

LoadResult load_dataset(const std::string& root, DatasetLayout layout);
DatasetLayout layout_from_string(const std::string& s);

// Tight bounding box of pixels close to `color` (used to verify rendered
// ground truth); nullopt when no pixel matches.
std::optional<BoundingBox> color_key_box(const Image& frame,
                                         const std::array<double, 3>& color,
                                         double tol = 0.18);

}  // namespace pivot
