#include <doctest.h>

#include <set>

#include "lstmkit/mc.hpp"

using namespace lstmkit;

namespace {

struct Fixture {
    ModelConfig config;
    Classifier model;
    Tensor table;
    std::vector<LabeledSequence> data;

    explicit Fixture(double keep_prob = 0.5, std::size_t n_examples = 8) {
        config.num_layers = 1;
        config.hidden_size = 6;
        config.embed_dim = 4;
        config.num_classes = 3;
        config.input_keep_prob = keep_prob;
        Rng init(41, 0);
        model = Classifier::init(config, init);
        Rng emb(42, 0);
        table = EmbeddingTable::random(16, config.embed_dim, emb).matrix;
        data = gen_synthetic(SyntheticTask::FirstTokenClass, n_examples, 5, 16, 3, 43);
    }
};

SampleRecord record_with_probs(std::vector<double> probs) {
    SampleRecord r;
    r.probs = std::move(probs);
    r.logits.assign(r.probs.size(), 0.0);
    r.pre_projection.assign(4, 0.0);
    return r;
}

}  // namespace

TEST_SUITE("mc") {

TEST_CASE("draw_samples basics") {
    Fixture fx;
    SUBCASE("k = 1 equals a single mc_sample pass on that stream") {
        McSampleSet set = draw_samples(fx.model, fx.table, fx.data[0], 1, 77, 5);
        REQUIRE(set.size() == 1);
        Rng rng(77, 5);
        ForwardResult direct = classify_forward(nullptr, fx.model, fx.table, fx.data[0].token_ids,
                                                ForwardMode::McSample, &rng);
        for (std::size_t i = 0; i < set[0].logits.size(); ++i) {
            CHECK(set[0].logits[i] == direct.logits[static_cast<std::int64_t>(i)]);
        }
    }
    SUBCASE("identical base seeds give identical sample sets") {
        McSampleSet a = draw_samples(fx.model, fx.table, fx.data[0], 16, 7, 0);
        McSampleSet b = draw_samples(fx.model, fx.table, fx.data[0], 16, 7, 0);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].logits == b[i].logits);
            CHECK(a[i].probs == b[i].probs);
            CHECK(a[i].pre_projection == b[i].pre_projection);
        }
    }
    SUBCASE("keep_prob one degenerates to standard inference") {
        Fixture no_drop(1.0);
        McSampleSet set = draw_samples(no_drop.model, no_drop.table, no_drop.data[0], 5, 7, 0);
        ForwardResult std_fwd = classify_forward(nullptr, no_drop.model, no_drop.table,
                                                 no_drop.data[0].token_ids,
                                                 ForwardMode::StandardInference, nullptr);
        for (const SampleRecord& rec : set) {
            for (std::size_t i = 0; i < rec.logits.size(); ++i) {
                CHECK(rec.logits[i] == std_fwd.logits[static_cast<std::int64_t>(i)]);
            }
        }
    }
    SUBCASE("probs rows sum to one") {
        McSampleSet set = draw_samples(fx.model, fx.table, fx.data[0], 32, 7, 0);
        for (const SampleRecord& rec : set) {
            double sum = 0.0;
            for (double p : rec.probs) sum += p;
            CHECK(std::abs(sum - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("aggregation strategies") {
    Tensor w = Tensor::zeros({4, 3});
    Tensor b = Tensor::zeros({3});

    SUBCASE("majority vote hand tally") {
        McSampleSet set{record_with_probs({0.6, 0.3, 0.1}), record_with_probs({0.2, 0.5, 0.3}),
                        record_with_probs({0.1, 0.7, 0.2})};
        CHECK(aggregate(set, AggregationStrategy::MajorityVote, w, b) == 1);
    }

    SUBCASE("single sample: every strategy returns its argmax") {
        Rng rng(3, 0);
        Fixture fx;
        McSampleSet one = draw_samples(fx.model, fx.table, fx.data[0], 1, 5, 0);
        int expected = 0;
        for (std::size_t i = 1; i < one[0].probs.size(); ++i) {
            if (one[0].probs[i] > one[0].probs[static_cast<std::size_t>(expected)]) {
                expected = static_cast<int>(i);
            }
        }
        for (auto strategy : {AggregationStrategy::PreProjectionMean, AggregationStrategy::LogitMean,
                              AggregationStrategy::ProbMean, AggregationStrategy::MajorityVote}) {
            CHECK(aggregate(one, strategy, fx.model.proj_weight, fx.model.proj_bias) == expected);
        }
    }

    SUBCASE("vote tie broken by summed probabilities, then lowest index") {
        // one vote each; class 1 has the larger summed probability (1.1 vs 0.9)
        McSampleSet set{record_with_probs({0.6, 0.4, 0.0}), record_with_probs({0.3, 0.7, 0.0})};
        CHECK(aggregate(set, AggregationStrategy::MajorityVote, w, b) == 1);

        // exact probability tie falls to the lowest class index
        McSampleSet tied{record_with_probs({0.7, 0.3, 0.0}), record_with_probs({0.3, 0.7, 0.0})};
        CHECK(aggregate(tied, AggregationStrategy::MajorityVote, w, b) == 0);
    }

    SUBCASE("consensus: unanimous argmax wins under every strategy") {
        Fixture fx;
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            McSampleSet set = draw_samples(fx.model, fx.table, fx.data[seed % fx.data.size()], 12,
                                           seed, 0);
            std::set<int> argmaxes;
            for (const SampleRecord& rec : set) {
                int am = 0;
                for (std::size_t i = 1; i < rec.probs.size(); ++i) {
                    if (rec.probs[i] > rec.probs[static_cast<std::size_t>(am)]) am = static_cast<int>(i);
                }
                argmaxes.insert(am);
            }
            if (argmaxes.size() != 1) {
                continue;
            }
            for (auto strategy : {AggregationStrategy::PreProjectionMean, AggregationStrategy::LogitMean,
                                  AggregationStrategy::ProbMean, AggregationStrategy::MajorityVote}) {
                CHECK(aggregate(set, strategy, fx.model.proj_weight, fx.model.proj_bias) ==
                      *argmaxes.begin());
            }
        }
    }

    SUBCASE("empty subset is a protocol error") {
        McSampleSet set{record_with_probs({0.5, 0.5, 0.0})};
        std::vector<int> none;
        CHECK_THROWS_AS(aggregate_indices(set, none, AggregationStrategy::MajorityVote, w, b),
                        ProtocolError);
    }
}

TEST_CASE("mc curve protocol") {
    Fixture fx(0.5, 6);

    SUBCASE("default spec emits 100 points from 2 to 200 step 2") {
        McRunSpec spec;
        auto ps = spec.effective_p_values();
        REQUIRE(ps.size() == 100);
        CHECK(ps.front() == 2);
        CHECK(ps.back() == 200);
        CHECK(spec.k == 400);
        CHECK(spec.m == 20);
        CHECK(spec.strategy == AggregationStrategy::MajorityVote);
    }

    SUBCASE("p above k is a protocol error") {
        McRunSpec spec;
        spec.k = 8;
        spec.p_values = {2, 10};
        CHECK_THROWS_AS(spec.validate(), ProtocolError);
        spec.p_values = {2, 4};
        CHECK_NOTHROW(spec.validate());
    }

    SUBCASE("ci width at p == k is exactly zero") {
        McRunSpec spec;
        spec.k = 12;
        spec.p_values = {2, 12};
        spec.m = 5;
        spec.seed = 3;
        McCurve curve = mc_curve(fx.model, fx.table, fx.data, spec);
        REQUIRE(curve.points.size() == 2);
        CHECK(curve.points[1].p == 12);
        CHECK(curve.points[1].ci_high - curve.points[1].ci_low == 0.0);
        CHECK(curve.points[1].resample_variance == 0.0);
    }

    SUBCASE("keep_prob one gives a flat curve equal to the baseline") {
        Fixture no_drop(1.0, 6);
        McRunSpec spec;
        spec.k = 6;
        spec.p_values = {2, 4, 6};
        spec.m = 4;
        McCurve curve = mc_curve(no_drop.model, no_drop.table, no_drop.data, spec);
        for (const CurvePoint& pt : curve.points) {
            CHECK(pt.mean_accuracy == curve.baseline_accuracy);
            CHECK(pt.ci_high - pt.ci_low == 0.0);
        }
    }

    SUBCASE("identical seeds give identical tables") {
        McRunSpec spec;
        spec.k = 10;
        spec.p_values = {2, 6, 10};
        spec.m = 4;
        spec.seed = 9;
        McCurve a = mc_curve(fx.model, fx.table, fx.data, spec);
        McCurve b = mc_curve(fx.model, fx.table, fx.data, spec);
        REQUIRE(a.points.size() == b.points.size());
        CHECK(a.baseline_accuracy == b.baseline_accuracy);
        for (std::size_t i = 0; i < a.points.size(); ++i) {
            CHECK(a.points[i].mean_accuracy == b.points[i].mean_accuracy);
            CHECK(a.points[i].ci_low == b.points[i].ci_low);
            CHECK(a.points[i].ci_high == b.points[i].ci_high);
        }
    }

    SUBCASE("curve csv has the pinned header and one row per p") {
        McRunSpec spec;
        spec.k = 4;
        spec.p_values = {2, 4};
        spec.m = 3;
        McCurve curve = mc_curve(fx.model, fx.table, fx.data, spec);
        std::string csv = curve_to_csv(curve);
        CHECK(csv.rfind("p,mean_acc,ci_low,ci_high,baseline_acc\n", 0) == 0);
        std::size_t rows = 0;
        for (char ch : csv) rows += ch == '\n';
        CHECK(rows == 3);  // header + 2 points
    }

    SUBCASE("empty dataset is a protocol error") {
        McRunSpec spec;
        spec.k = 4;
        spec.p_values = {2};
        std::vector<LabeledSequence> empty;
        CHECK_THROWS_AS(mc_curve(fx.model, fx.table, empty, spec), ProtocolError);
    }
}

TEST_CASE("sampling without replacement yields distinct indices") {
    // exercised through the curve: with p == k every index must appear once,
    // and intermediate p values must not repeat indices; validated here by the
    // exact-zero ci width above plus a direct spot check through aggregate
    Fixture fx(0.5, 4);
    McRunSpec spec;
    spec.k = 6;
    spec.p_values = {6};
    spec.m = 3;
    McCurve curve = mc_curve(fx.model, fx.table, fx.data, spec);
    CHECK(curve.points[0].resample_variance == 0.0);
}

TEST_CASE("strategy names round trip") {
    for (auto s : {AggregationStrategy::PreProjectionMean, AggregationStrategy::LogitMean,
                   AggregationStrategy::ProbMean, AggregationStrategy::MajorityVote}) {
        CHECK(aggregation_from_name(aggregation_name(s)) == s);
    }
    CHECK_THROWS_AS(aggregation_from_name("median"), ConfigError);
}

}  // TEST_SUITE
