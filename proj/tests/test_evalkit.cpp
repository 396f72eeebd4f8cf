#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "doctest.h"
#include "pivot/evalkit.hpp"

using namespace pivot;
namespace fs = std::filesystem;

namespace {

// Two scored frames with hand-picked overlaps: IoU 1 and IoU 1/3.
SequenceResult two_frame_result() {
    SequenceResult r;
    r.name = "hand";
    r.gt = {{0, 0, 10, 10}, {0, 0, 10, 10}, {0, 0, 10, 10}};
    r.pred = {{0, 0, 10, 10}, {0, 0, 10, 10}, {5, 0, 10, 10}};
    return r;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("evalkit_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("frame 0 is excluded and IoUs match hand enumeration") {
    const auto ious = scored_ious(two_frame_result());
    REQUIRE(ious.size() == 2);
    CHECK(ious[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ious[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("success auc equals the hand-enumerated threshold count") {
    // IoU 1 clears thresholds 0.00..0.99 (100); IoU 1/3 clears 0.00..0.33 (34)
    const double want = (100.0 / 2 + 34.0 / 2) / 101.0;
    CHECK(success_auc(scored_ious(two_frame_result())) ==
          doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("precision aucs equal the hand-enumerated threshold counts") {
    const auto r = two_frame_result();
    const auto d = center_distances(r);
    REQUIRE(d.size() == 2);
    CHECK(d[0] == doctest::Approx(0.0));
    CHECK(d[1] == doctest::Approx(5.0));  // centers (5,5) vs (10,5)
    // dist 0 passes all 51 thresholds; dist 5 passes 5..50 (46)
    CHECK(precision_auc(d) == doctest::Approx((51.0 / 2 + 46.0 / 2) / 51.0).epsilon(1e-12));
    CHECK(precision_at(d, 20.0) == doctest::Approx(1.0));
    const auto nd = norm_center_distances(r);
    CHECK(nd[1] == doctest::Approx(0.5));  // 5px / 10px gt width
    // norm dist 0 passes all 51; norm dist 0.5 passes only t = 0.50
    CHECK(norm_precision_auc(nd) ==
          doctest::Approx((51.0 / 2 + 1.0 / 2) / 51.0).epsilon(1e-12));
}

TEST_CASE("absent frames are excluded unless predicted with high confidence") {
    SequenceResult r = two_frame_result();
    r.gt.push_back({0, 0, 10, 10});
    r.pred.push_back({0, 0, 10, 10});
    r.visible = {true, true, true, false};

    // no confidence sidecar: the absent frame is simply dropped
    CHECK(scored_ious(r).size() == 2);

    // low confidence on the absent frame: still dropped
    r.confidence = {1.0, 1.0, 1.0, 0.4};
    CHECK(scored_ious(r).size() == 2);

    // confident prediction on an absent frame counts as a failure
    r.confidence[3] = 0.9;
    const auto ious = scored_ious(r);
    REQUIRE(ious.size() == 3);
    CHECK(ious[2] == 0.0);
    CHECK(center_distances(r)[2] == doctest::Approx(1e9));
}

TEST_CASE("evaluate frame-pools overlap metrics and sequence-averages AO") {
    // seq A: two frames at IoU 1; seq B: one frame at IoU 1/3
    SequenceResult a;
    a.gt = {{0, 0, 10, 10}, {0, 0, 10, 10}, {0, 0, 10, 10}};
    a.pred = a.gt;
    SequenceResult b;
    b.gt = {{0, 0, 10, 10}, {0, 0, 10, 10}};
    b.pred = {{0, 0, 10, 10}, {5, 0, 10, 10}};
    MetricReport rep = evaluate({a, b});
    CHECK(rep.scored_frames == 3);
    CHECK(rep.sequences == 2);
    CHECK(rep.op50 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));     // frame-pooled
    CHECK(rep.ao == doctest::Approx((1.0 + 1.0 / 3.0) / 2).epsilon(1e-12));  // seq-avg
    CHECK(rep.sr50 == doctest::Approx((1.0 + 0.0) / 2).epsilon(1e-12));
    CHECK(rep.sr75 == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("evaluate of no results is all zeros") {
    MetricReport rep = evaluate({});
    CHECK(rep.success_auc == 0.0);
    CHECK(rep.scored_frames == 0);
    CHECK(rep.sequences == 0);
}

TEST_CASE("run_ope_files reads results, flags missing and malformed files") {
    TempDir tmp;
    SequenceRecord s1, s2, s3, s4;
    s1.name = "ok";
    s2.name = "missing";
    s3.name = "malformed";
    s4.name = "short";
    for (auto* s : {&s1, &s2, &s3, &s4})
        s->boxes = {{0, 0, 10, 10}, {0, 0, 10, 10}, {0, 0, 10, 10}};
    write_result_file((tmp.path / "ok.txt").string(),
                      {{0, 0, 10, 10}, {0, 0, 10, 10}, {5, 0, 10, 10}});
    {
        std::ofstream f(tmp.path / "malformed.txt");
        f << "0,0,10,10\nnot,a,box,line\n0,0,10,10\n";
    }
    write_result_file((tmp.path / "short.txt").string(), {{0, 0, 10, 10}});

    OpeOutcome out = run_ope_files(tmp.path.string(), {s1, s2, s3, s4});
    REQUIRE(out.results.size() == 1);
    CHECK(out.results[0].name == "ok");
    REQUIRE(out.errors.size() == 3);
    CHECK(out.errors[0].find("missing") != std::string::npos);
    CHECK(out.errors[1].find("malformed line 2") != std::string::npos);
    CHECK(out.errors[2].find("length mismatch") != std::string::npos);
    CHECK(out.report.scored_frames == 2);
}

TEST_CASE("run_ope_files picks up a confidence sidecar of matching length") {
    TempDir tmp;
    SequenceRecord s;
    s.name = "conf";
    s.boxes = {{0, 0, 10, 10}, {0, 0, 10, 10}, {0, 0, 10, 10}};
    s.visible = {true, true, false};
    write_result_file((tmp.path / "conf.txt").string(), s.boxes);
    write_confidence_file((tmp.path / "conf_confidence.txt").string(), {1.0, 1.0, 0.9});
    OpeOutcome out = run_ope_files(tmp.path.string(), {s});
    REQUIRE(out.results.size() == 1);
    // the confident prediction on the absent frame 2 counts as a failure
    CHECK(out.report.scored_frames == 2);
    const auto ious = scored_ious(out.results[0]);
    CHECK(ious.back() == 0.0);
}

TEST_CASE("attribute_report groups sequences and writes the csv") {
    TempDir tmp;
    SequenceResult a = two_frame_result();
    a.attributes = {"fast", "small"};
    SequenceResult b = two_frame_result();
    b.attributes = {"fast"};
    const std::string csv = (tmp.path / "attrs.csv").string();
    auto rep = attribute_report({a, b}, csv);
    REQUIRE(rep.count("fast") == 1);
    REQUIRE(rep.count("small") == 1);
    CHECK(rep["fast"].scored_frames == 4);
    CHECK(rep["small"].scored_frames == 2);
    std::ifstream f(csv);
    std::string line;
    int lines = 0;
    while (std::getline(f, line)) ++lines;
    CHECK(lines == 6);  // 2 attributes x 3 metrics
}

TEST_CASE("report_to_text is key=value parseable") {
    MetricReport r;
    r.success_auc = 0.5;
    r.scored_frames = 7;
    const std::string t = report_to_text(r);
    CHECK(t.find("success_auc=0.5\n") != std::string::npos);
    CHECK(t.find("scored_frames=7\n") != std::string::npos);
}
