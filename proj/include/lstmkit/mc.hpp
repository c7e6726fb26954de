#pragma once

#include <span>
#include <vector>

#include "lstmkit/data.hpp"
#include "lstmkit/model.hpp"

namespace lstmkit {

enum class AggregationStrategy {
    PreProjectionMean,  // mean the projection inputs, then project, then argmax
    LogitMean,
    ProbMean,
    MajorityVote,
};

AggregationStrategy aggregation_from_name(const std::string& name);
const char* aggregation_name(AggregationStrategy s);

// One stochastic forward pass: the projection input, the logits, and the
// normalized probabilities.
struct SampleRecord {
    std::vector<double> pre_projection;
    std::vector<double> logits;
    std::vector<double> probs;
};

// The k dropout samples drawn for one example.
using McSampleSet = std::vector<SampleRecord>;

// Monte Carlo protocol parameters for the sampling-size curve.
struct McRunSpec {
    int k = 400;
    std::vector<int> p_values;  // defaults to 2..200 step 2 when empty
    int m = 20;                 // resamples per p
    AggregationStrategy strategy = AggregationStrategy::MajorityVote;
    double confidence = 0.90;
    std::uint64_t seed = 0;

    std::vector<int> effective_p_values() const;
    void validate() const;
};

// Draws k stochastic forward passes of one example; sample i uses RNG
// (seed, base_stream + i).
McSampleSet draw_samples(const Classifier& model, const Tensor& embedding_matrix,
                         const LabeledSequence& example, int k,
                         std::uint64_t seed, std::uint64_t base_stream);

// Combines a subset of samples into a predicted class. Majority-vote ties are
// broken by summed probabilities over the tied classes, then lowest index.
int aggregate(const McSampleSet& samples, AggregationStrategy strategy,
              const Tensor& proj_weight, const Tensor& proj_bias);

// Index-subset variant used by the curve protocol; indices select samples.
int aggregate_indices(const McSampleSet& samples, std::span<const int> indices,
                      AggregationStrategy strategy, const Tensor& proj_weight,
                      const Tensor& proj_bias);

struct CurvePoint {
    int p = 0;
    double mean_accuracy = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double resample_variance = 0.0;  // unbiased variance of the m accuracies
};

struct McCurve {
    std::vector<CurvePoint> points;
    double baseline_accuracy = 0.0;  // dropout-free standard inference
};

// Draws k samples per example once, then for each p picks p of k without
// replacement m times, aggregates, and scores accuracy. The confidence band is
// the normal approximation mean +/- z * sd over the m resample accuracies
// (z = 1.645 at 0.90), so it collapses to exactly zero width at p == k.
McCurve mc_curve(const Classifier& model, const Tensor& embedding_matrix,
                 const std::vector<LabeledSequence>& dataset, const McRunSpec& spec);

// CSV rows `p,mean_acc,ci_low,ci_high,baseline_acc`.
std::string curve_to_csv(const McCurve& curve);

}  // namespace lstmkit
