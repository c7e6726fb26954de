#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lstmkit/adam.hpp"
#include "lstmkit/data.hpp"
#include "lstmkit/mc.hpp"
#include "lstmkit/model.hpp"

namespace lstmkit {

struct TrainSpec {
    ModelConfig model;
    int epochs = 10;
    int batch_size = 32;
    double learning_rate = 1e-4;
    std::uint64_t seed = 0;
    int early_stop_patience = 10;  // <= 0 disables early stopping

    void validate() const;
};

struct EpochMetrics {
    int epoch = 0;
    double train_loss = 0.0;
    double valid_acc = 0.0;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Full training snapshot: weights, embedding table, optimizer moments, RNG
// seed position and metrics history. save -> load -> save is byte-identical.
struct Checkpoint {
    std::uint32_t format_version = kCheckpointVersion;
    ModelConfig config;
    Classifier model;
    EmbeddingTable embeddings;
    std::vector<std::string> vocab_tokens;

    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t opt_step = 0;
    // Aligned with model.params(), embedding moments last when trainable.
    std::vector<std::vector<double>> adam_m;
    std::vector<std::vector<double>> adam_v;

    std::uint64_t seed = 0;
    std::int64_t next_epoch = 0;
    std::vector<EpochMetrics> history;
};

struct TrainResult {
    Checkpoint best;  // highest validation accuracy seen
    Checkpoint last;  // state after the final epoch, the resume point
    std::vector<EpochMetrics> history;
};

// Mini-batch Adam training with fresh per-example dropout masks, per-epoch
// validation, best-checkpoint retention and early stopping. All stochasticity
// derives from (spec.seed, epoch, batch, example) substreams, so resuming from
// `last` reproduces the uninterrupted trajectory bitwise. A non-finite loss
// aborts with the batch index and parameter norms.
TrainResult train(const TrainSpec& spec,
                  const std::vector<LabeledSequence>& train_data,
                  const std::vector<LabeledSequence>& valid_data,
                  const EmbeddingTable& embeddings,
                  const std::vector<std::string>& vocab_tokens,
                  const Checkpoint* resume = nullptr);

double evaluate_standard(const Classifier& model, const Tensor& embedding_matrix,
                         const std::vector<LabeledSequence>& data);

struct McEvalSpec {
    int k = 60;
    AggregationStrategy strategy = AggregationStrategy::MajorityVote;
    std::uint64_t seed = 0;
};

double evaluate_mc(const Classifier& model, const Tensor& embedding_matrix,
                   const std::vector<LabeledSequence>& data, const McEvalSpec& spec);

struct EvalMode {
    bool mc = false;
    McEvalSpec mc_spec;
};

// Accuracy of a checkpoint on a dataset; rejects label/class-count mismatches.
double evaluate(const Checkpoint& ckpt, const std::vector<LabeledSequence>& data,
                const EvalMode& mode);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Metrics CSV with columns `rung,run,epoch,train_loss,valid_acc`.
std::string metrics_to_csv(const std::vector<EpochMetrics>& history,
                           const std::string& rung = "train", int run = 0);

}  // namespace lstmkit
