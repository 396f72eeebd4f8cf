#pragma once

#include <map>
#include <string>
#include <vector>

#include "pivot/data.hpp"
#include "pivot/pipeline.hpp"

namespace pivot {

// Predictions + ground truth for one sequence under the OPE protocol.
// Frame 0 is the init frame and is excluded from scoring.
struct SequenceResult {
    std::string name;
    std::vector<BoundingBox> pred;
    std::vector<BoundingBox> gt;
    std::vector<bool> visible;        // empty = all visible
    std::vector<double> confidence;   // optional sidecar, empty allowed
    std::vector<std::string> attributes;
};

struct MetricReport {
    double success_auc = 0.0;
    double precision_auc = 0.0;
    double norm_precision_auc = 0.0;
    double p20 = 0.0;
    double op50 = 0.0;
    double op75 = 0.0;
    double ao = 0.0;
    double sr50 = 0.0;
    double sr75 = 0.0;
    int scored_frames = 0;
    int sequences = 0;
};

// Fixed threshold grids; config-visible so external raw results compare
// consistently.
inline constexpr int kSuccessThresholds = 101;   // t in {0, 0.01, ..., 1}
inline constexpr int kPrecisionThresholds = 51;  // t in {0, 1, ..., 50} px
inline constexpr int kNormPrecThresholds = 51;   // t in {0, 0.01, ..., 0.5}
// Absent-target frames are excluded from scoring unless a box was predicted
// with confidence above this value, in which case they count as failures.
inline constexpr double kAbsenceConfidence = 0.5;

// Per-frame IoUs of the scored frames (frame 0 and absent frames excluded;
// confidently-predicted absent frames contribute IoU 0).
std::vector<double> scored_ious(const SequenceResult& r);

double success_auc(const std::vector<double>& ious);
double precision_auc(const std::vector<double>& dists);
double precision_at(const std::vector<double>& dists, double threshold_px);
double norm_precision_auc(const std::vector<double>& norm_dists);

std::vector<double> center_distances(const SequenceResult& r);
std::vector<double> norm_center_distances(const SequenceResult& r);

// Frame-pooled success/precision metrics plus sequence-averaged AO/SR.
MetricReport evaluate(const std::vector<SequenceResult>& results);

struct OpeOutcome {
    MetricReport report;
    std::vector<SequenceResult> results;
    std::vector<std::string> errors;  // per-sequence error records
};

// Live tracker over a dataset; one pass, init on frame 0 only. parallelism
// spreads sequences over threads; results are ordered and bit-identical for
// any thread count.
OpeOutcome run_ope(const Tracker& tracker, const std::vector<SequenceRecord>& dataset,
                   int parallelism = 1);
// External raw results: <results_dir>/<name>.txt with x,y,w,h lines and an
// optional <name>_confidence.txt sidecar.
OpeOutcome run_ope_files(const std::string& results_dir,
                         const std::vector<SequenceRecord>& dataset);

// Per-attribute metrics; writes "attribute,metric,value" lines to plot_path
// when non-empty.
std::map<std::string, MetricReport> attribute_report(
    const std::vector<SequenceResult>& results, const std::string& plot_path = "");

// Machine-parseable key=value dump.
std::string report_to_text(const MetricReport& r);

void write_result_file(const std::string& path, const std::vector<BoundingBox>& boxes);
void write_confidence_file(const std::string& path, const std::vector<double>& conf);

}  // namespace pivot
