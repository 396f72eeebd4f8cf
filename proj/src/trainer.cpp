#include "pivot/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "pivot/pipeline.hpp"
#include "pivot/prompting.hpp"
#include "pivot/training.hpp"

namespace pivot {

namespace {

struct Augment {
    bool flip = false;
    int perm = 0;  // RGB channel permutation index, 0..5
    double gain[3] = {1.0, 1.0, 1.0};
    double shift_x = 0.0;  // fraction of box size
    double shift_y = 0.0;
    double scale = 1.0;    // crop-size multiplier
};

Augment draw_augment(std::mt19937_64& rng, double shift_range) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Augment a;
    a.flip = u(rng) < 0.5;
    // channel permutation widens color coverage beyond the palette draws
    a.perm = static_cast<int>(u(rng) * 6.0) % 6;
    for (double& g : a.gain) g = 0.9 + 0.2 * u(rng);
    a.shift_x = shift_range * (2.0 * u(rng) - 1.0);
    a.shift_y = shift_range * (2.0 * u(rng) - 1.0);
    // wide scale range so the target's apparent size in the patch covers the
    // sizes seen when the search side tracks an imperfect size estimate
    a.scale = std::exp(std::log(0.6) + (std::log(1.7) - std::log(0.6)) * u(rng));
    return a;
}

void apply_photometric(Image& im, const Augment& a) {
    static const int kPerm[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                    {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    const int* pm = kPerm[a.perm];
    for (size_t i = 0; i < im.px.size(); i += 3) {
        const float r = im.px[i + pm[0]], g = im.px[i + pm[1]], b = im.px[i + pm[2]];
        im.px[i] = std::min(1.0f, static_cast<float>(r * a.gain[0]));
        im.px[i + 1] = std::min(1.0f, static_cast<float>(g * a.gain[1]));
        im.px[i + 2] = std::min(1.0f, static_cast<float>(b * a.gain[2]));
    }
    if (a.flip) {
        for (int y = 0; y < im.h; ++y)
            for (int x = 0; x < im.w / 2; ++x)
                for (int c = 0; c < 3; ++c)
                    std::swap(im.at(x, y, c), im.at(im.w - 1 - x, y, c));
    }
}

// Crop a jittered search region around the ground-truth box and return the
// augmented patch plus the (flip-adjusted) box in patch coordinates.
struct PatchSample {
    Image patch;
    BoundingBox box_patch;
};

PatchSample make_patch(const Image& frame, const BoundingBox& gt, const RunConfig& cfg,
                       const Augment& a) {
    BoundingBox jit = gt;
    jit.x += a.shift_x * gt.w;
    jit.y += a.shift_y * gt.h;
    jit.w *= a.scale;
    jit.h *= a.scale;
    auto [patch, geom] =
        crop_search_region(frame, jit, cfg.track.scale_factor, cfg.encoder.input_resolution);
    PatchSample out;
    out.box_patch = geom.box_to_patch(gt);
    if (a.flip)
        out.box_patch.x = cfg.encoder.input_resolution - out.box_patch.x - out.box_patch.w;
    apply_photometric(patch, a);
    out.patch = std::move(patch);
    return out;
}

Image template_crop(const Image& frame, const BoundingBox& gt, const RunConfig& cfg,
                    const Augment& a) {
    const int res = cfg.encoder.input_resolution;
    Image crop = crop_resize(frame, gt, res, res);
    apply_photometric(crop, a);
    return crop;
}

std::map<std::string, std::vector<double>> snapshot(const nn::ParamStore& store) {
    std::map<std::string, std::vector<double>> out;
    for (const auto& [name, p] : store.all()) out[name] = p->val.d;
    return out;
}

void restore(nn::ParamStore& store, const std::map<std::string, std::vector<double>>& s) {
    for (const auto& [name, vals] : s) store.get(name)->val.d = vals;
}

}  // namespace

void run_stage(Model& model, const std::vector<SequenceRecord>& sequences, int stage,
               TrainResult& result, std::mt19937_64& rng, std::ostream* log) {
    const RunConfig& cfg = model.cfg;
    const TrainSchedule& ts = cfg.train;
    const int res = model.resolution();
    const int G = model.grid();
    const int epochs = stage == 1 ? ts.stage1_epochs : ts.stage2_epochs;
    const int total_steps = epochs * ts.samples_per_epoch;

    nn::AdamW opt(0.9, 0.999, 1e-8, ts.weight_decay);
    std::vector<nn::ParamGroup> groups;
    if (stage == 1) {
        groups.push_back({model.tracker_params(), ts.lr_stage1});
    } else {
        groups.push_back({model.prompt_params(), ts.lr_prompt});
        groups.push_back({model.tracker_params(), ts.lr_pretrained});
    }

    std::uniform_int_distribution<size_t> seq_dist(0, sequences.size() - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto snap = snapshot(model.store);

    for (int step = 0; step < total_steps; ++step) {
        const double frac = static_cast<double>(step) / total_steps;
        double mult = 1.0;
        if (stage == 1) {
            if (frac >= ts.decay_at1) mult *= ts.decay_factor;
            if (frac >= ts.decay_at2) mult *= ts.decay_factor;
        } else if (frac >= 1.0 - ts.stage2_decay_tail) {
            mult = ts.decay_factor;
        }
        groups[0].lr = (stage == 1 ? ts.lr_stage1 : ts.lr_prompt) * mult;
        if (stage == 2) groups[1].lr = ts.lr_pretrained * mult;

        // sample a triple whose frames are all visible
        const SequenceRecord* seq = nullptr;
        SubsequenceSample idx;
        for (int attempt = 0; attempt < 32; ++attempt) {
            seq = &sequences[seq_dist(rng)];
            if (seq->length() < 3) continue;
            idx = sample_subsequence(static_cast<int>(seq->length()), ts.window, rng);
            if (seq->visible.empty() ||
                (seq->visible[idx.ref1] && seq->visible[idx.ref2] && seq->visible[idx.cur]))
                break;
            seq = nullptr;
        }
        if (seq == nullptr) continue;

        const Augment a = draw_augment(rng, stage == 1 ? 0.2 : ts.stage2_shift);
        PatchSample p1 = make_patch(seq->frame(idx.ref1), seq->boxes[idx.ref1], cfg, a);
        PatchSample p2 = make_patch(seq->frame(idx.ref2), seq->boxes[idx.ref2], cfg, a);
        PatchSample pc = make_patch(seq->frame(idx.cur), seq->boxes[idx.cur], cfg, a);
        LabelPair y1 = make_label_pair(p1.box_patch, res, G, G, cfg.sigma_factor);
        LabelPair y2 = make_label_pair(p2.box_patch, res, G, G, cfg.sigma_factor);
        LabelPair yc = make_label_pair(pc.box_patch, res, G, G, cfg.sigma_factor);

        // rescue training: occasionally poison the ref2 label (as a confident
        // wrong update would) and rely on the clamped prompt to recover
        bool poisoned = false;
        if (stage == 2 && u(rng) < ts.ref_poison_prob) {
            std::uniform_int_distribution<int> cell(0, G - 1);
            const double cw = static_cast<double>(res) / G;
            BoundingBox fake = p2.box_patch;
            fake.x = (cell(rng) + 0.5) * cw - 0.5 * fake.w;
            fake.y = (cell(rng) + 0.5) * cw - 0.5 * fake.h;
            y2 = make_label_pair(fake, res, G, G, cfg.sigma_factor);
            poisoned = true;
        }

        nn::Var v1 = model.encoder->encode(p1.patch);
        nn::Var v2 = model.encoder->encode(p2.patch);
        nn::Var vc = model.encoder->encode(pc.patch);

        nn::Var v_in = vc;
        nn::Var h_can;
        if (stage == 2) {
            Image t1 = template_crop(seq->frame(idx.ref1), seq->boxes[idx.ref1], cfg, a);
            Image t2 = template_crop(seq->frame(idx.ref2), seq->boxes[idx.ref2], cfg, a);
            h_can = model.pgn->forward(model.encoder->encode(t1),
                                       model.encoder->encode(t2), vc, G, G);
            nn::Var h_in = h_can;
            if (poisoned || u(rng) < ts.prompt_clamp_prob) {
                // clamp the label-peak cell of the prompt to 1, as the
                // test-time refinement does
                int peak = 0;
                for (int i = 1; i < G * G; ++i)
                    if (yc.cls.v[static_cast<size_t>(i)] >
                        yc.cls.v[static_cast<size_t>(peak)])
                        peak = i;
                if (yc.cls.v[static_cast<size_t>(peak)] > 0.0) {
                    // sometimes clamp a wrong cell so the head treats clamps
                    // as hints it may overrule, never in poisoned samples
                    // (there the clamp is the only pointer to the target)
                    if (!poisoned && u(rng) < ts.clamp_noise_prob) {
                        std::uniform_int_distribution<int> any(0, G * G - 1);
                        peak = any(rng);
                    }
                    nn::Tensor floor_t({G * G, 1},
                                       std::vector<double>(
                                           static_cast<size_t>(G) * G, -1e9));
                    floor_t.d[static_cast<size_t>(peak)] = 1.0;
                    h_in = nn::maximum(h_can, nn::constant(std::move(floor_t)));
                }
            }
            v_in = model.rm->forward(h_in, vc, G, G);
        }

        HeadOutput out = model.head->forward(v1, y1, v2, y2, v_in, &vc);

        nn::Var l_cls = classification_loss(out.h_cls, yc.cls, cfg.fg_threshold);
        nn::Var l_reg = regression_loss(out.d, yc.reg, res);
        nn::Var loss = nn::add(nn::scale(l_cls, cfg.loss.lambda_cls),
                               nn::scale(l_reg, cfg.loss.lambda_reg));
        nn::Var l_can;
        if (stage == 2) {
            const LabelPair y_can = make_label_pair(
                pc.box_patch, res, G, G, cfg.sigma_factor * ts.can_sigma_scale);
            l_can = classification_loss(h_can, y_can.cls, cfg.fg_threshold);
            loss = nn::add(loss, nn::scale(l_can, cfg.loss.lambda_can));
        }

        const double loss_v = loss->val.d[0];
        if (!std::isfinite(loss_v)) {
            restore(model.store, snap);
            result.diverged = true;
            if (log) *log << "diverged stage=" << stage << " step=" << step << "\n";
            return;
        }

        model.store.zero_grads();
        nn::backward(loss);
        opt.step(groups);

        StepRecord rec;
        rec.step = static_cast<int>(result.records.size());
        rec.stage = stage;
        rec.loss = loss_v;
        rec.l_cls = l_cls->val.d[0];
        rec.l_can = stage == 2 ? l_can->val.d[0] : 0.0;
        rec.l_reg = l_reg->val.d[0];
        result.records.push_back(rec);
        if (log)
            *log << "step=" << rec.step << " stage=" << rec.stage << " loss=" << rec.loss
                 << " cls=" << rec.l_cls << " can=" << rec.l_can << " reg=" << rec.l_reg
                 << "\n";

        if ((step + 1) % ts.samples_per_epoch == 0) snap = snapshot(model.store);
    }
    result.stages_run = std::max(result.stages_run, stage);
}

TrainResult run_training(Model& model, const std::vector<SequenceRecord>& sequences,
                         std::ostream* log, int stages) {
    if (sequences.empty())
        throw std::invalid_argument("run_training: no sequences");
    TrainResult result;
    std::mt19937_64 rng(model.cfg.seed ^ 0x747261696eULL);
    run_stage(model, sequences, 1, result, rng, log);
    if (!result.diverged && stages >= 2)
        run_stage(model, sequences, 2, result, rng, log);
    return result;
}

}  // namespace pivot
