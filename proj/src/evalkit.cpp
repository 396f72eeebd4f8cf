#include "pivot/evalkit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace fs = std::filesystem;

namespace pivot {

namespace {

bool frame_scored(const SequenceResult& r, size_t i, bool* count_as_failure) {
    *count_as_failure = false;
    if (i == 0) return false;  // init frame
    const bool vis = r.visible.empty() || r.visible[i];
    if (vis) return true;
    if (!r.confidence.empty() && i < r.confidence.size() &&
        r.confidence[i] > kAbsenceConfidence) {
        *count_as_failure = true;
        return true;
    }
    return false;
}

double fraction_above(const std::vector<double>& vals, double t) {
    if (vals.empty()) return 0.0;
    size_t n = 0;
    for (double v : vals)
        if (v > t) ++n;
    return static_cast<double>(n) / vals.size();
}

double fraction_at_most(const std::vector<double>& vals, double t) {
    if (vals.empty()) return 0.0;
    size_t n = 0;
    for (double v : vals)
        if (v <= t) ++n;
    return static_cast<double>(n) / vals.size();
}

}  // namespace

std::vector<double> scored_ious(const SequenceResult& r) {
    if (r.pred.size() != r.gt.size())
        throw std::invalid_argument("scored_ious: length mismatch");
    std::vector<double> out;
    for (size_t i = 0; i < r.pred.size(); ++i) {
        bool fail = false;
        if (!frame_scored(r, i, &fail)) continue;
        out.push_back(fail ? 0.0 : iou(r.pred[i], r.gt[i]));
    }
    return out;
}

std::vector<double> center_distances(const SequenceResult& r) {
    std::vector<double> out;
    for (size_t i = 0; i < r.pred.size(); ++i) {
        bool fail = false;
        if (!frame_scored(r, i, &fail)) continue;
        if (fail) {
            out.push_back(1e9);
            continue;
        }
        out.push_back(std::hypot(r.pred[i].cx() - r.gt[i].cx(),
                                 r.pred[i].cy() - r.gt[i].cy()));
    }
    return out;
}

std::vector<double> norm_center_distances(const SequenceResult& r) {
    std::vector<double> out;
    for (size_t i = 0; i < r.pred.size(); ++i) {
        bool fail = false;
        if (!frame_scored(r, i, &fail)) continue;
        if (fail) {
            out.push_back(1e9);
            continue;
        }
        if (r.gt[i].w <= 0.0 || r.gt[i].h <= 0.0) continue;  // excluded, counted
        out.push_back(std::hypot((r.pred[i].cx() - r.gt[i].cx()) / r.gt[i].w,
                                 (r.pred[i].cy() - r.gt[i].cy()) / r.gt[i].h));
    }
    return out;
}

double success_auc(const std::vector<double>& ious) {
    double s = 0.0;
    for (int k = 0; k < kSuccessThresholds; ++k)
        s += fraction_above(ious, k / 100.0);
    return s / kSuccessThresholds;
}

double precision_auc(const std::vector<double>& dists) {
    double s = 0.0;
    for (int k = 0; k < kPrecisionThresholds; ++k)
        s += fraction_at_most(dists, static_cast<double>(k));
    return s / kPrecisionThresholds;
}

double precision_at(const std::vector<double>& dists, double threshold_px) {
    return fraction_at_most(dists, threshold_px);
}

double norm_precision_auc(const std::vector<double>& norm_dists) {
    double s = 0.0;
    for (int k = 0; k < kNormPrecThresholds; ++k)
        s += fraction_at_most(norm_dists, k / 100.0);
    return s / kNormPrecThresholds;
}

MetricReport evaluate(const std::vector<SequenceResult>& results) {
    MetricReport rep;
    std::vector<double> all_ious, all_dists, all_ndists;
    double ao_sum = 0.0, sr50_sum = 0.0, sr75_sum = 0.0;
    int seqs = 0;
    for (const auto& r : results) {
        const std::vector<double> ious = scored_ious(r);
        const std::vector<double> dists = center_distances(r);
        const std::vector<double> ndists = norm_center_distances(r);
        all_ious.insert(all_ious.end(), ious.begin(), ious.end());
        all_dists.insert(all_dists.end(), dists.begin(), dists.end());
        all_ndists.insert(all_ndists.end(), ndists.begin(), ndists.end());
        if (!ious.empty()) {
            double m = 0.0;
            for (double v : ious) m += v;
            ao_sum += m / ious.size();
            sr50_sum += fraction_above(ious, 0.5);
            sr75_sum += fraction_above(ious, 0.75);
            ++seqs;
        }
    }
    rep.scored_frames = static_cast<int>(all_ious.size());
    rep.sequences = seqs;
    if (!all_ious.empty()) {
        rep.success_auc = success_auc(all_ious);
        rep.precision_auc = precision_auc(all_dists);
        rep.p20 = precision_at(all_dists, 20.0);
        rep.norm_precision_auc = norm_precision_auc(all_ndists);
        rep.op50 = fraction_above(all_ious, 0.5);
        rep.op75 = fraction_above(all_ious, 0.75);
    }
    if (seqs > 0) {
        rep.ao = ao_sum / seqs;
        rep.sr50 = sr50_sum / seqs;
        rep.sr75 = sr75_sum / seqs;
    }
    return rep;
}

OpeOutcome run_ope(const Tracker& tracker, const std::vector<SequenceRecord>& dataset,
                   int parallelism) {
    const size_t n = dataset.size();
    std::vector<std::optional<SequenceResult>> slots(n);
    std::vector<std::string> errs(n);
    auto work = [&](size_t i) {
        const SequenceRecord& seq = dataset[i];
        try {
            const std::vector<FrameResult> frames = track_sequence(tracker, seq);
            SequenceResult r;
            r.name = seq.name;
            r.gt = seq.boxes;
            r.visible = seq.visible;
            r.attributes = seq.attributes;
            for (const auto& f : frames) {
                r.pred.push_back(f.box);
                r.confidence.push_back(f.confidence);
            }
            slots[i] = std::move(r);
        } catch (const std::exception& e) {
            errs[i] = seq.name + ": " + e.what();
        }
    };
    if (parallelism <= 1) {
        for (size_t i = 0; i < n; ++i) work(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        const int threads = std::min<int>(parallelism, static_cast<int>(n));
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) work(i);
            });
        for (auto& th : pool) th.join();
    }
    OpeOutcome out;
    for (size_t i = 0; i < n; ++i) {
        if (slots[i])
            out.results.push_back(std::move(*slots[i]));
        else
            out.errors.push_back(errs[i]);
    }
    out.report = evaluate(out.results);
    return out;
}

OpeOutcome run_ope_files(const std::string& results_dir,
                         const std::vector<SequenceRecord>& dataset) {
    OpeOutcome out;
    for (const auto& seq : dataset) {
        const fs::path file = fs::path(results_dir) / (seq.name + ".txt");
        std::ifstream in(file);
        if (!in) {
            out.errors.push_back(seq.name + ": missing result file " + file.string());
            continue;
        }
        SequenceResult r;
        r.name = seq.name;
        r.gt = seq.boxes;
        r.visible = seq.visible;
        r.attributes = seq.attributes;
        std::string line;
        bool bad = false;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            std::replace(line.begin(), line.end(), ',', ' ');
            std::istringstream ls(line);
            BoundingBox b;
            if (!(ls >> b.x >> b.y >> b.w >> b.h)) {
                out.errors.push_back(seq.name + ": malformed line " +
                                     std::to_string(lineno));
                bad = true;
                break;
            }
            r.pred.push_back(b);
        }
        if (bad) continue;
        if (r.pred.size() != r.gt.size()) {
            out.errors.push_back(seq.name + ": length mismatch (" +
                                 std::to_string(r.pred.size()) + " vs " +
                                 std::to_string(r.gt.size()) + ")");
            continue;
        }
        const fs::path conf_file = fs::path(results_dir) / (seq.name + "_confidence.txt");
        if (std::ifstream cin_{conf_file}; cin_) {
            double c;
            while (cin_ >> c) r.confidence.push_back(c);
            if (r.confidence.size() != r.gt.size()) r.confidence.clear();
        }
        out.results.push_back(std::move(r));
    }
    out.report = evaluate(out.results);
    return out;
}

std::map<std::string, MetricReport> attribute_report(
    const std::vector<SequenceResult>& results, const std::string& plot_path) {
    std::map<std::string, std::vector<SequenceResult>> groups;
    for (const auto& r : results)
        for (const auto& a : r.attributes) groups[a].push_back(r);
    std::map<std::string, MetricReport> out;
    for (const auto& [attr, rs] : groups) {
        MetricReport rep = evaluate(rs);
        if (rep.scored_frames == 0) continue;  // empty subset omitted
        out[attr] = rep;
    }
    if (!plot_path.empty()) {
        std::ofstream f(plot_path);
        for (const auto& [attr, rep] : out) {
            f << attr << ",success_auc," << rep.success_auc << "\n";
            f << attr << ",precision_auc," << rep.precision_auc << "\n";
            f << attr << ",norm_precision_auc," << rep.norm_precision_auc << "\n";
        }
    }
    return out;
}

std::string report_to_text(const MetricReport& r) {
    std::ostringstream s;
    s << "success_auc=" << r.success_auc << "\n"
      << "precision_auc=" << r.precision_auc << "\n"
      << "norm_precision_auc=" << r.norm_precision_auc << "\n"
      << "p20=" << r.p20 << "\n"
      << "op50=" << r.op50 << "\n"
      << "op75=" << r.op75 << "\n"
      << "ao=" << r.ao << "\n"
      << "sr50=" << r.sr50 << "\n"
      << "sr75=" << r.sr75 << "\n"
      << "scored_frames=" << r.scored_frames << "\n"
      << "sequences=" << r.sequences << "\n";
    return s.str();
}

void write_result_file(const std::string& path, const std::vector<BoundingBox>& boxes) {
    std::ofstream f(path);
    for (const auto& b : boxes) f << b.x << "," << b.y << "," << b.w << "," << b.h << "\n";
}

void write_confidence_file(const std::string& path, const std::vector<double>& conf) {
    std::ofstream f(path);
    for (double c : conf) f << c << "\n";
}

}  // namespace pivot
