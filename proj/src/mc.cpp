#include "lstmkit/mc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "lstmkit/ops.hpp"

namespace lstmkit {

AggregationStrategy aggregation_from_name(const std::string& name) {
    if (name == "pre-projection-mean") return AggregationStrategy::PreProjectionMean;
    if (name == "logit-mean") return AggregationStrategy::LogitMean;
    if (name == "prob-mean") return AggregationStrategy::ProbMean;
    if (name == "majority-vote") return AggregationStrategy::MajorityVote;
    throw ConfigError("unknown aggregation strategy: " + name);
}

const char* aggregation_name(AggregationStrategy s) {
    switch (s) {
        case AggregationStrategy::PreProjectionMean: return "pre-projection-mean";
        case AggregationStrategy::LogitMean: return "logit-mean";
        case AggregationStrategy::ProbMean: return "prob-mean";
        case AggregationStrategy::MajorityVote: return "majority-vote";
    }
    return "majority-vote";
}

std::vector<int> McRunSpec::effective_p_values() const {
    if (!p_values.empty()) {
        return p_values;
    }
    std::vector<int> ps;
    for (int p = 2; p <= 200; p += 2) {
        ps.push_back(p);
    }
    return ps;
}

void McRunSpec::validate() const {
    if (k < 1) {
        throw ProtocolError("k must be >= 1");
    }
    auto ps = effective_p_values();
    for (int p : ps) {
        if (p < 1 || p > k) {
            std::ostringstream os;
            os << "sample size p = " << p << " outside [1, k = " << k << "]";
            throw ProtocolError(os.str());
        }
    }
    if (m < 2) {
        throw ProtocolError("m must be >= 2 for confidence intervals");
    }
    if (!(confidence > 0.0) || confidence >= 1.0) {
        throw ProtocolError("confidence must be in (0, 1)");
    }
}

namespace {

std::vector<double> softmax_values(std::span<const double> logits) {
    double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        z += p[i];
    }
    for (double& v : p) {
        v /= z;
    }
    return p;
}

int argmax(std::span<const double> v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

// z such that P(|N(0,1)| <= z) = confidence; exact at the protocol's 0.90
// default, computed by bisection otherwise.
double z_for_confidence(double confidence) {
    if (std::abs(confidence - 0.90) < 1e-12) {
        return 1.645;
    }
    double target = 0.5 + confidence / 2.0;
    double lo = 0.0, hi = 10.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        double cdf = 0.5 * (1.0 + std::erf(mid / std::sqrt(2.0)));
        (cdf < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// First p of a partially shuffled index set, sorted so aggregation order (and
// therefore floating-point sums) do not depend on draw order.
std::vector<int> sample_without_replacement(int k, int p, Rng& rng) {
    std::vector<int> idx(static_cast<std::size_t>(k));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < p; ++i) {
        int j = i + static_cast<int>(rng.below(static_cast<std::uint32_t>(k - i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(p));
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace

McSampleSet draw_samples(const Classifier& model, const Tensor& embedding_matrix,
                         const LabeledSequence& example, int k,
                         std::uint64_t seed, std::uint64_t base_stream) {
    if (k < 1) {
        throw ProtocolError("draw_samples: k must be >= 1");
    }
    McSampleSet samples;
    samples.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        Rng rng(seed, base_stream + static_cast<std::uint64_t>(i));
        ForwardResult fwd = classify_forward(nullptr, model, embedding_matrix,
                                             example.token_ids, ForwardMode::McSample, &rng);
        SampleRecord rec;
        rec.pre_projection.assign(fwd.pre_projection.values().begin(), fwd.pre_projection.values().end());
        rec.logits.assign(fwd.logits.values().begin(), fwd.logits.values().end());
        rec.probs = softmax_values(fwd.logits.values());
        samples.push_back(std::move(rec));
    }
    return samples;
}

int aggregate_indices(const McSampleSet& samples, std::span<const int> indices,
                      AggregationStrategy strategy, const Tensor& proj_weight,
                      const Tensor& proj_bias) {
    if (indices.empty()) {
        throw ProtocolError("aggregate: empty sample subset");
    }
    const std::size_t n_classes = samples.front().probs.size();
    const double inv = 1.0 / static_cast<double>(indices.size());

    switch (strategy) {
        case AggregationStrategy::PreProjectionMean: {
            std::vector<double> mean(samples.front().pre_projection.size(), 0.0);
            for (int i : indices) {
                const auto& v = samples[static_cast<std::size_t>(i)].pre_projection;
                for (std::size_t j = 0; j < mean.size(); ++j) {
                    mean[j] += v[j];
                }
            }
            for (double& v : mean) {
                v *= inv;
            }
            Tensor projected = add(nullptr,
                                   vecmat(nullptr, Tensor::row_vector(std::move(mean)), proj_weight),
                                   proj_bias);
            return argmax(projected.values());
        }
        case AggregationStrategy::LogitMean:
        case AggregationStrategy::ProbMean: {
            std::vector<double> mean(n_classes, 0.0);
            for (int i : indices) {
                const auto& v = strategy == AggregationStrategy::LogitMean
                                    ? samples[static_cast<std::size_t>(i)].logits
                                    : samples[static_cast<std::size_t>(i)].probs;
                for (std::size_t j = 0; j < n_classes; ++j) {
                    mean[j] += v[j];
                }
            }
            return argmax(mean);
        }
        case AggregationStrategy::MajorityVote: {
            std::vector<int> votes(n_classes, 0);
            std::vector<double> prob_sums(n_classes, 0.0);
            for (int i : indices) {
                const auto& p = samples[static_cast<std::size_t>(i)].probs;
                votes[static_cast<std::size_t>(argmax(p))] += 1;
                for (std::size_t j = 0; j < n_classes; ++j) {
                    prob_sums[j] += p[j];
                }
            }
            int best = 0;
            for (std::size_t c = 1; c < n_classes; ++c) {
                int ci = static_cast<int>(c);
                if (votes[c] > votes[static_cast<std::size_t>(best)]) {
                    best = ci;
                } else if (votes[c] == votes[static_cast<std::size_t>(best)] &&
                           prob_sums[c] > prob_sums[static_cast<std::size_t>(best)]) {
                    // ties fall through to the lower index when the summed
                    // probabilities tie as well
                    best = ci;
                }
            }
            return best;
        }
    }
    throw ProtocolError("unreachable aggregation strategy");
}

int aggregate(const McSampleSet& samples, AggregationStrategy strategy,
              const Tensor& proj_weight, const Tensor& proj_bias) {
    std::vector<int> all(samples.size());
    std::iota(all.begin(), all.end(), 0);
    return aggregate_indices(samples, all, strategy, proj_weight, proj_bias);
}

McCurve mc_curve(const Classifier& model, const Tensor& embedding_matrix,
                 const std::vector<LabeledSequence>& dataset, const McRunSpec& spec) {
    spec.validate();
    if (dataset.empty()) {
        throw ProtocolError("mc_curve: empty dataset");
    }
    const auto ps = spec.effective_p_values();
    const double z = z_for_confidence(spec.confidence);

    // One sample set per example; example j's streams are [j*k, (j+1)*k).
    std::vector<McSampleSet> all_samples;
    all_samples.reserve(dataset.size());
    for (std::size_t j = 0; j < dataset.size(); ++j) {
        all_samples.push_back(draw_samples(model, embedding_matrix, dataset[j], spec.k,
                                           spec.seed,
                                           static_cast<std::uint64_t>(j) * static_cast<std::uint64_t>(spec.k)));
    }

    McCurve curve;
    std::size_t correct = 0;
    for (std::size_t j = 0; j < dataset.size(); ++j) {
        ForwardResult fwd = classify_forward(nullptr, model, embedding_matrix,
                                             dataset[j].token_ids,
                                             ForwardMode::StandardInference, nullptr);
        if (argmax(fwd.logits.values()) == dataset[j].label) {
            ++correct;
        }
    }
    curve.baseline_accuracy = static_cast<double>(correct) / static_cast<double>(dataset.size());

    // Resample streams live far above the per-example sample streams.
    const std::uint64_t resample_base = 1ULL << 40;
    for (std::size_t pi = 0; pi < ps.size(); ++pi) {
        const int p = ps[pi];
        std::vector<double> accuracies;
        accuracies.reserve(static_cast<std::size_t>(spec.m));
        for (int r = 0; r < spec.m; ++r) {
            Rng rng(spec.seed, resample_base + static_cast<std::uint64_t>(pi) * static_cast<std::uint64_t>(spec.m) +
                                   static_cast<std::uint64_t>(r));
            auto indices = sample_without_replacement(spec.k, p, rng);
            std::size_t hits = 0;
            for (std::size_t j = 0; j < dataset.size(); ++j) {
                int predicted = aggregate_indices(all_samples[j], indices, spec.strategy,
                                                  model.proj_weight, model.proj_bias);
                if (predicted == dataset[j].label) {
                    ++hits;
                }
            }
            accuracies.push_back(static_cast<double>(hits) / static_cast<double>(dataset.size()));
        }
        double mean = std::accumulate(accuracies.begin(), accuracies.end(), 0.0) /
                      static_cast<double>(accuracies.size());
        double var = 0.0;
        for (double a : accuracies) {
            var += (a - mean) * (a - mean);
        }
        var /= static_cast<double>(accuracies.size() - 1);
        double sd = std::sqrt(var);
        curve.points.push_back(CurvePoint{p, mean, mean - z * sd, mean + z * sd, var});
    }
    return curve;
}

std::string curve_to_csv(const McCurve& curve) {
    std::ostringstream os;
    os.precision(17);
    os << "p,mean_acc,ci_low,ci_high,baseline_acc\n";
    for (const CurvePoint& pt : curve.points) {
        os << pt.p << "," << pt.mean_accuracy << "," << pt.ci_low << "," << pt.ci_high << ","
           << curve.baseline_accuracy << "\n";
    }
    return os.str();
}

}  // namespace lstmkit
