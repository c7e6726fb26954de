#pragma once

#include <string>
#include <vector>

#include "lstmkit/train.hpp"
#include "lstmkit/util.hpp"

namespace lstmkit {

// One rung of the compounding-feature ladder: a model configuration plus the
// evaluation mode used to score it.
struct LadderRung {
    std::string name;
    ModelConfig model;
    bool mc_eval = false;
    int mc_k = 60;
};

struct FeatureLadder {
    std::vector<LadderRung> rungs;
};

// Options for the standard nine-rung ladder; defaults are desk-scale.
struct LadderOptions {
    std::int64_t base_hidden = 12;
    std::int64_t larger_hidden = 24;
    double keep_prob = 0.5;
    int mc_k = 60;
};

// baseline, +forget_bias, +dropout, +larger_hidden, +shared_bidir, +mc_eval,
// +pooling, +res_v1, +res_v2 — each rung changes exactly one feature.
FeatureLadder default_feature_ladder(const ModelConfig& base, const LadderOptions& opts);

// Verifies consecutive rungs differ in exactly one feature (bidirectional and
// its weight sharing count as one). Throws ConfigError before any training.
void check_ladder_structure(const FeatureLadder& ladder);

struct RungResult {
    std::string name;
    std::vector<double> accuracies;  // one per run
    BoxStats stats;
};

struct RunRecord {
    std::string rung;
    int run = 0;
    std::vector<EpochMetrics> history;
};

struct LadderResult {
    std::vector<RungResult> rungs;
    std::vector<RunRecord> runs;
};

// Trains every rung n_runs times with distinct derived seeds and collects the
// box-plot statistics of validation accuracy per rung.
LadderResult run_feature_ladder(const FeatureLadder& ladder,
                                const std::vector<LabeledSequence>& train_data,
                                const std::vector<LabeledSequence>& valid_data,
                                const EmbeddingTable& embeddings,
                                const TrainSpec& base_spec, int n_runs, int jobs = 1);

struct DepthCell {
    int depth = 0;
    ResidualMode mode = ResidualMode::None;
    std::int64_t hidden = 0;
    std::int64_t param_count = 0;
    std::vector<double> accuracies;
    double mean_acc = 0.0;
    double ci_low = 0.0;   // 90% normal-approximation interval of the mean
    double ci_high = 0.0;
};

struct DepthSuiteResult {
    std::vector<DepthCell> cells;
    std::vector<RunRecord> runs;
};

// Hidden size whose parameter count comes closest to the budget. The standard
// ladder (budget 550000, embed 300, 5 classes, depths 1/2/4/6/8) uses the
// fixed sizes 250/170/120/100/85; anything else is solved by integer search
// and must land within ±2% of the budget or a ConfigError lists the nearest
// achievable counts.
std::int64_t hidden_for_budget(int depth, std::int64_t budget, const ModelConfig& base);

DepthSuiteResult run_depth_suite(const std::vector<LabeledSequence>& train_data,
                                 const std::vector<LabeledSequence>& valid_data,
                                 const EmbeddingTable& embeddings,
                                 const TrainSpec& base_spec, std::int64_t budget,
                                 const std::vector<int>& depths,
                                 const std::vector<ResidualMode>& modes, int n_runs,
                                 int jobs = 1);

std::string ladder_runs_to_csv(const std::vector<RunRecord>& runs);
std::string ladder_summary_json(const LadderResult& result);
std::string depth_summary_json(const DepthSuiteResult& result);
std::string depth_cells_to_csv(const DepthSuiteResult& result);

}  // namespace lstmkit
