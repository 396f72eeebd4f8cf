#pragma once

#include <cstdint>
#include <string>

#include "pivot/encoders.hpp"
#include "pivot/tpr.hpp"

namespace pivot {

struct LossWeights {
    double lambda_cls = 100.0;
    double lambda_can = 10.0;
    double lambda_reg = 1.0;
};

struct TrainSchedule {
    int stage1_epochs = 10;
    int stage2_epochs = 6;
    int samples_per_epoch = 400;
    int window = 200;              // frame window for sub-sequence sampling
    double lr_stage1 = 1e-4;
    // stage-2 groups keep the paper's 5e-3 : 4e-6 ratio under any scale
    double lr_prompt = 5e-3;
    double lr_pretrained = 4e-6;
    double decay_factor = 0.2;
    // stage-1 decay points, as fractions of the stage (paper: 30/60, 50/60)
    double decay_at1 = 0.5;
    double decay_at2 = 0.8333333;
    // stage-2: decay over the last quarter (paper: last 10 of 40)
    double stage2_decay_tail = 0.25;
    double weight_decay = 1e-4;
    // probability of clamping the label-peak cell of the train-time prompt
    // to 1, teaching RM the saturation semantics used by refinement
    double prompt_clamp_prob = 0.5;
    // stage-2 crop-shift range in box units: puts the target anywhere in the
    // patch so PGN must localize it by appearance, not by a center prior
    double stage2_shift = 1.2;
    // stage-2 probability of corrupting the ref2 label to a random cell while
    // clamping the prompt at the true peak: trains the prompt to override a
    // poisoned reference (the post-identity-switch rescue case)
    double ref_poison_prob = 0.25;
    // sigma multiplier for the candidate-map label only: a sharper target
    // keeps the prompt peak inside one 3x3 candidate block, so the block
    // partition yields one candidate per object instead of four
    double can_sigma_scale = 0.5;
    // fraction of train-time clamps placed on a wrong cell (label unchanged):
    // teaches the head that a clamp is a strong hint, not ground truth, so a
    // mis-accepted candidate at test time cannot capture the track outright
    double clamp_noise_prob = 0.15;
};

struct TrackConfig {
    double scale_factor = 5.0;     // search side = scale * sqrt(w*h)
    double update_threshold = 0.5; // ref2 confidence gate
    int update_min_gap = 5;        // frames between ref2 updates
    bool prompt_enabled = true;
    bool tpr_enabled = true;
    int parallelism = 1;           // per-sequence threads; 1 = bit-reproducible
};

struct SynthConfig {
    int canvas_w = 160;
    int canvas_h = 120;
    int frames = 64;
    int sequences = 20;
    uint64_t master_seed = 1234;
};

struct RunConfig {
    FrameEncoderSpec encoder;
    TprConfig tpr;
    LossWeights loss;
    TrainSchedule train;
    TrackConfig track;
    SynthConfig synth;
    double sigma_factor = 0.125;   // gaussian label sigma, fraction of min grid side
    double fg_threshold = 0.25;    // DiMP foreground label threshold
    uint64_t seed = 7;
    std::string output_dir = "out";

    // canonical serialization used for hashing and for dumping resolved configs
    std::string serialize() const;
    uint64_t hash() const;
};

// Parses an INI-style key=value file with [sections] into `cfg`.
// Unknown keys raise std::runtime_error naming the key.
void parse_config_file(const std::string& path, RunConfig& cfg);
// Applies one "section.key=value" override.
void apply_config_override(const std::string& kv, RunConfig& cfg);

uint64_t fnv1a(const std::string& s);

}  // namespace pivot
