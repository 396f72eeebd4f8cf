#pragma once

#include <optional>

#include "pivot/data.hpp"
#include "pivot/model.hpp"
#include "pivot/tpr.hpp"

namespace pivot {

// Online tracker state: exactly two references and two templates regardless
// of sequence length. ref1/tem1 never change after initialization.
struct TrackState {
    FeatureGrid ref1_feat;
    LabelPair ref1_label;
    FeatureGrid ref2_feat;
    LabelPair ref2_label;
    FeatureGrid tem1_feat;
    EmbeddingVector tem1_emb;
    FeatureGrid tem2_feat;
    EmbeddingVector tem2_emb;

    std::optional<LtrbMap> last_d;         // previous frame's regression map
    SearchRegionGeometry last_geom;        // geometry last_d was produced in
    BoundingBox last_box;                  // image coordinates, always valid
    BoundingBox init_box;
    double last_conf = 0.0;
    int frame_index = 0;
    int last_ref2_update = 0;
};

struct FrameResult {
    BoundingBox box;  // image coordinates
    double confidence = 0.0;
    bool degenerate = false;
};

std::pair<Image, SearchRegionGeometry> crop_search_region(const Image& frame,
                                                          const BoundingBox& last_box,
                                                          double scale_factor,
                                                          int resolution);

// Shifts the box into frame bounds keeping its size where it fits, clipping
// otherwise.
BoundingBox clamp_box_to_frame(const BoundingBox& b, int frame_w, int frame_h);

class Tracker {
public:
    Tracker(const Model& model, const TrackConfig& track, const TprConfig& tpr,
            double sigma_factor)
        : m_(model), tcfg_(track), tpr_(tpr), sigma_(sigma_factor) {}

    TrackState initialize(const Image& frame, const BoundingBox& box) const;
    FrameResult track_frame(TrackState& state, const Image& frame) const;

    const TrackConfig& config() const { return tcfg_; }

private:
    void update_reference(TrackState& state, const FeatureGrid& v_cur,
                          const BoundingBox& box_patch, double confidence) const;
    void update_template(TrackState& state, const Image& frame,
                         const BoundingBox& box_image) const;

    const Model& m_;
    TrackConfig tcfg_;
    TprConfig tpr_;
    double sigma_;
};

// Runs the tracker over a full sequence; output[0] = init box.
std::vector<FrameResult> track_sequence(const Tracker& tracker,
                                        const SequenceRecord& seq);

}  // namespace pivot
