#pragma once

#include <ostream>
#include <vector>

#include "pivot/data.hpp"
#include "pivot/model.hpp"

namespace pivot {

struct StepRecord {
    int step = 0;
    int stage = 1;
    double loss = 0.0;
    double l_cls = 0.0;
    double l_can = 0.0;
    double l_reg = 0.0;
};

struct TrainResult {
    std::vector<StepRecord> records;
    bool diverged = false;
    int stages_run = 0;
};

// Two-stage schedule: stage 1 trains head+adapter without the candidate
// term; stage 2 adds PGN+RM with separate learning-rate groups. Divergence
// (non-finite loss) restores the last finite snapshot and stops. Progress is
// emitted to `log` as line-delimited records when given.
TrainResult run_training(Model& model, const std::vector<SequenceRecord>& sequences,
                         std::ostream* log = nullptr, int stages = 2);

// Single stage, reusable for ablations; stage is 1 or 2.
void run_stage(Model& model, const std::vector<SequenceRecord>& sequences, int stage,
               TrainResult& result, std::mt19937_64& rng, std::ostream* log);

}  // namespace pivot
