#include "pivot/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

#include "pivot/prompting.hpp"
#include "pivot/training.hpp"

namespace pivot {

std::pair<Image, SearchRegionGeometry> crop_search_region(const Image& frame,
                                                          const BoundingBox& last_box,
                                                          double scale_factor,
                                                          int resolution) {
    if (!last_box.valid())
        throw std::invalid_argument("crop_search_region: invalid box");
    SearchRegionGeometry geom;
    geom.cx = last_box.cx();
    geom.cy = last_box.cy();
    geom.side = scale_factor * std::sqrt(last_box.w * last_box.h);
    geom.resolution = resolution;
    Image patch = crop_resize(frame, {geom.left(), geom.top(), geom.side, geom.side},
                              resolution, resolution);
    return {std::move(patch), geom};
}

BoundingBox clamp_box_to_frame(const BoundingBox& b, int frame_w, int frame_h) {
    BoundingBox out = b;
    out.w = std::min(out.w, static_cast<double>(frame_w));
    out.h = std::min(out.h, static_cast<double>(frame_h));
    out.x = std::clamp(out.x, 0.0, frame_w - out.w);
    out.y = std::clamp(out.y, 0.0, frame_h - out.h);
    return out;
}

namespace {

// Embedding of the exact box crop; nullopt when the crop is degenerate.
std::optional<EmbeddingVector> embed_box(const ToyEmbeddingEncoder& emb,
                                         const Image& frame, const BoundingBox& box) {
    if (!box.valid() || box.w < 1.0 || box.h < 1.0) return std::nullopt;
    try {
        Image crop = crop_resize(frame, box, 64, 64);
        EmbeddingVector e = emb.encode_roi(crop);
        e.source_box = box;
        return e;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

}  // namespace

TrackState Tracker::initialize(const Image& frame, const BoundingBox& box) const {
    if (!box.valid() || box.x2() <= 0.0 || box.y2() <= 0.0 || box.x >= frame.w ||
        box.y >= frame.h)
        throw std::invalid_argument("initialize: box invalid or outside frame");

    const int res = m_.resolution();
    const int G = m_.grid();
    auto [patch, geom] = crop_search_region(frame, box, tcfg_.scale_factor, res);

    TrackState st;
    st.ref1_feat = m_.encoder->encode_grid(patch);
    st.ref1_label = make_label_pair(geom.box_to_patch(box), res, G, G, sigma_);
    st.ref2_feat = st.ref1_feat;
    st.ref2_label = st.ref1_label;

    nn::Var tem = extract_template_feature(*m_.encoder, frame, box);
    st.tem1_feat = var_to_grid(tem, G, G, m_.encoder->channels());
    auto e = embed_box(m_.embedder, frame, box);
    if (!e) throw std::invalid_argument("initialize: degenerate template crop");
    st.tem1_emb = *e;
    st.tem2_feat = st.tem1_feat;
    st.tem2_emb = st.tem1_emb;

    st.last_box = box;
    st.init_box = box;
    st.last_conf = 1.0;
    st.frame_index = 0;
    st.last_ref2_update = 0;
    return st;
}

void Tracker::update_reference(TrackState& state, const FeatureGrid& v_cur,
                               const BoundingBox& box_patch, double confidence) const {
    if (confidence < tcfg_.update_threshold) return;
    if (state.frame_index - state.last_ref2_update < tcfg_.update_min_gap) return;
    const int res = m_.resolution();
    const int G = m_.grid();
    state.ref2_feat = v_cur;
    state.ref2_label = make_label_pair(box_patch, res, G, G, sigma_);
    state.last_ref2_update = state.frame_index;
}

void Tracker::update_template(TrackState& state, const Image& frame,
                              const BoundingBox& box_image) const {
    auto e = embed_box(m_.embedder, frame, box_image);
    if (!e) return;  // degenerate crop: skip
    if (e->dot(state.tem1_emb) > state.tem2_emb.dot(state.tem1_emb)) {
        nn::Var tem = extract_template_feature(*m_.encoder, frame, box_image);
        state.tem2_feat = var_to_grid(tem, m_.grid(), m_.grid(), m_.encoder->channels());
        state.tem2_emb = *e;
    }
}

FrameResult Tracker::track_frame(TrackState& state, const Image& frame) const {
    const int res = m_.resolution();
    const int G = m_.grid();
    state.frame_index += 1;

    auto [patch, geom] = crop_search_region(frame, state.last_box, tcfg_.scale_factor, res);
    nn::Var v_cur = m_.encoder->encode(patch);

    nn::Var v_in = v_cur;
    if (tcfg_.prompt_enabled) {
        nn::Var v_t1 = grid_to_var(state.tem1_feat);
        nn::Var v_t2 = grid_to_var(state.tem2_feat);
        nn::Var h_can = m_.pgn->forward(v_t1, v_t2, v_cur, G, G);
        ScoreMap can_map = var_to_scoremap(h_can, G, G);
        can_map.stride = static_cast<double>(res) / G;

        if (tcfg_.tpr_enabled) {
            CandidateSet cands;
            cands.points = extract_candidates(can_map, tpr_);
            if (!cands.points.empty()) {
                for (const auto& p : cands.points)
                    cands.scores.push_back(can_map.at(p.row, p.col));
                const BoundingBox init_size_patch{0.0, 0.0,
                                                  state.init_box.w / geom.scale(),
                                                  state.init_box.h / geom.scale()};
                RetrievedBoxes rb = retrieve_candidate_boxes(
                    cands.points, state.last_d ? &*state.last_d : nullptr, res, G, G,
                    init_size_patch);
                cands.box_fallback = rb.fallback;
                for (const auto& bp : rb.boxes) {
                    const BoundingBox bi = geom.box_to_image(bp);
                    cands.boxes.push_back(bi);
                    auto e = embed_box(m_.embedder, frame, bi);
                    cands.embeddings.push_back(
                        e ? *e : EmbeddingVector{std::vector<double>(
                                                     ToyEmbeddingEncoder::kDim, 0.0),
                                                 bi});
                }
                cands.importance = importance_scores(cands.embeddings, state.tem1_emb,
                                                     state.tem2_emb);
                if (std::getenv("PIVOT_TPR_DEBUG")) {
                    std::fprintf(stderr, "f=%d n=%zu", state.frame_index,
                                 cands.points.size());
                    for (size_t i = 0; i < cands.points.size(); ++i)
                        std::fprintf(stderr, " [%d,%d s=%.2f c=%.2f/%.2f D=%.3f]",
                                     cands.points[i].row, cands.points[i].col,
                                     cands.scores[i],
                                     cands.embeddings[i].dot(state.tem1_emb),
                                     cands.embeddings[i].dot(state.tem2_emb),
                                     cands.importance[i]);
                    std::fprintf(stderr, "\n");
                }
                can_map = refine_prompt(can_map, cands, tpr_);
            }
        }
        nn::Var h_prime =
            nn::constant(nn::Tensor({G * G, 1}, can_map.v));
        v_in = m_.rm->forward(h_prime, v_cur, G, G);
    }

    HeadOutput out = m_.head->forward(grid_to_var(state.ref1_feat), state.ref1_label,
                                      grid_to_var(state.ref2_feat), state.ref2_label,
                                      v_in, &v_cur);
    ScoreMap h_cls = var_to_scoremap(out.h_cls, G, G);
    h_cls.stride = static_cast<double>(res) / G;
    LtrbMap d = var_to_ltrb(out.d, G, G);
    Prediction pred = decode_prediction(h_cls, d, res);

    state.last_d = d;

    if (pred.degenerate || !std::isfinite(pred.confidence) || !pred.box.valid()) {
        state.last_conf = 0.0;
        return {state.last_box, 0.0, true};
    }

    const BoundingBox box_img =
        clamp_box_to_frame(geom.box_to_image(pred.box), frame.w, frame.h);
    if (!box_img.valid()) {
        state.last_conf = 0.0;
        return {state.last_box, 0.0, true};
    }

    update_reference(state, var_to_grid(v_cur, G, G, m_.encoder->channels()),
                     geom.box_to_patch(box_img), pred.confidence);
    update_template(state, frame, box_img);

    state.last_box = box_img;
    state.last_conf = pred.confidence;
    return {box_img, pred.confidence, false};
}

std::vector<FrameResult> track_sequence(const Tracker& tracker,
                                        const SequenceRecord& seq) {
    if (seq.length() == 0 || seq.boxes.empty())
        throw std::invalid_argument("track_sequence: empty sequence");
    std::vector<FrameResult> out;
    out.reserve(seq.length());
    TrackState st = tracker.initialize(seq.frame(0), seq.boxes[0]);
    out.push_back({seq.boxes[0], 1.0, false});
    for (size_t i = 1; i < seq.length(); ++i)
        out.push_back(tracker.track_frame(st, seq.frame(i)));
    return out;
}

}  // namespace pivot
