#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <limits>
#include <filesystem>
#include <fstream>

#include "lstmkit/ops.hpp"
#include "lstmkit/train.hpp"

using namespace lstmkit;
namespace fs = std::filesystem;

namespace {

struct TrainFixture {
    TrainSpec spec;
    std::vector<LabeledSequence> train_data;
    std::vector<LabeledSequence> valid_data;
    EmbeddingTable embeddings;
    Vocabulary vocab;

    explicit TrainFixture(int num_classes = 5, std::size_t n_train = 40, std::size_t n_valid = 20,
                          std::size_t seq_len = 4, double keep = 1.0) {
        spec.model.num_layers = 1;
        spec.model.hidden_size = 12;
        spec.model.embed_dim = 8;
        spec.model.num_classes = num_classes;
        spec.model.input_keep_prob = keep;
        spec.epochs = 3;
        spec.batch_size = 8;
        spec.learning_rate = 5e-3;
        spec.seed = 1234;
        spec.early_stop_patience = 0;

        const int vocab_size = 16;
        auto all = gen_synthetic(SyntheticTask::FirstTokenClass, n_train + n_valid, seq_len,
                                 vocab_size, num_classes, 555);
        auto split = split_dataset(all, n_train, n_valid, 556);
        train_data = std::move(split.first);
        valid_data = std::move(split.second);
        vocab = synthetic_vocab(vocab_size);
        Rng emb_rng(557, 0);
        embeddings = EmbeddingTable::random(vocab_size, spec.model.embed_dim, emb_rng);
    }
};

fs::path temp_path(const std::string& name) {
    return fs::temp_directory_path() /
           ("lstmkit_train_" + std::to_string(::getpid()) + "_" + name);
}

double initial_mean_loss(const TrainFixture& fx) {
    Rng init(fx.spec.seed, 1);  // same init stream the trainer uses
    Classifier model = Classifier::init(fx.spec.model, init);
    double sum = 0.0;
    for (const auto& ex : fx.train_data) {
        ForwardResult fwd = classify_forward(nullptr, model, fx.embeddings.matrix, ex.token_ids,
                                             ForwardMode::StandardInference, nullptr);
        sum += softmax_cross_entropy(nullptr, fwd.logits, ex.label).loss[0];
    }
    return sum / static_cast<double>(fx.train_data.size());
}

bool histories_equal(const std::vector<EpochMetrics>& a, const std::vector<EpochMetrics>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].epoch != b[i].epoch) return false;
        if (a[i].train_loss != b[i].train_loss) return false;  // bitwise
        if (a[i].valid_acc != b[i].valid_acc) return false;
    }
    return true;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("initial loss on balanced data is ln(num_classes) within 10 percent") {
    TrainFixture fx(5);
    double loss = initial_mean_loss(fx);
    CHECK(loss == doctest::Approx(std::log(5.0)).epsilon(0.10));

    TrainFixture fx2(2);
    CHECK(initial_mean_loss(fx2) == doctest::Approx(std::log(2.0)).epsilon(0.10));
}

TEST_CASE("a 32-example set is memorized within 500 epochs") {
    TrainFixture fx(5, 32, 32, 4);
    // overfit smoke test: validate on the training set itself
    fx.spec.epochs = 500;
    fx.spec.learning_rate = 1e-2;
    fx.spec.batch_size = 8;
    fx.spec.early_stop_patience = 0;
    TrainResult result = train(fx.spec, fx.train_data, fx.train_data, fx.embeddings,
                               fx.vocab.tokens());
    double best = 0.0;
    for (const auto& m : result.history) {
        best = std::max(best, m.valid_acc);
    }
    CHECK(best == 1.0);
}

TEST_CASE("learning rate zero leaves every parameter bitwise unchanged") {
    TrainFixture fx;
    fx.spec.learning_rate = 0.0;
    fx.spec.epochs = 2;

    Rng init(fx.spec.seed, 1);
    Classifier fresh = Classifier::init(fx.spec.model, init);

    TrainResult result = train(fx.spec, fx.train_data, fx.valid_data, fx.embeddings,
                               fx.vocab.tokens());
    auto before = fresh.params();
    auto after = result.last.model.params();
    REQUIRE(before.size() == after.size());
    for (std::size_t i = 0; i < before.size(); ++i) {
        auto bv = before[i].tensor->values();
        auto av = after[i].tensor->values();
        REQUIRE(bv.size() == av.size());
        for (std::size_t j = 0; j < bv.size(); ++j) {
            REQUIRE(bv[j] == av[j]);
        }
    }
    auto ev = fx.embeddings.matrix.values();
    auto ef = result.last.embeddings.matrix.values();
    for (std::size_t j = 0; j < ev.size(); ++j) {
        REQUIRE(ev[j] == ef[j]);
    }
}

TEST_CASE("identical specs and seeds give bitwise-identical histories") {
    TrainFixture fx;
    fx.spec.model.input_keep_prob = 0.5;
    TrainResult a = train(fx.spec, fx.train_data, fx.valid_data, fx.embeddings, fx.vocab.tokens());
    TrainResult b = train(fx.spec, fx.train_data, fx.valid_data, fx.embeddings, fx.vocab.tokens());
    CHECK(histories_equal(a.history, b.history));

    fx.spec.seed += 1;
    TrainResult c = train(fx.spec, fx.train_data, fx.valid_data, fx.embeddings, fx.vocab.tokens());
    CHECK_FALSE(histories_equal(a.history, c.history));
}

TEST_CASE("early stopping keeps the best validation checkpoint") {
    TrainFixture fx;
    fx.spec.epochs = 12;
    fx.spec.early_stop_patience = 3;
    fx.spec.model.input_keep_prob = 0.5;
    TrainResult result = train(fx.spec, fx.train_data, fx.valid_data, fx.embeddings,
                               fx.vocab.tokens());
    double best_seen = 0.0;
    for (const auto& m : result.history) best_seen = std::max(best_seen, m.valid_acc);
    double best_ckpt_acc = evaluate_standard(result.best.model, result.best.embeddings.matrix,
                                             fx.valid_data);
    CHECK(best_ckpt_acc == best_seen);
}

TEST_CASE("evaluate contracts") {
    TrainFixture fx;
    TrainResult result = train(fx.spec, fx.train_data, fx.valid_data, fx.embeddings,
                               fx.vocab.tokens());

    SUBCASE("constant-logit model scores the majority-class fraction") {
        // zero all weights: logits collapse to the projection bias
        Checkpoint ckpt = result.last;
        for (auto& p : ckpt.model.params()) {
            *p.tensor = Tensor::zeros(p.tensor->shape());
        }
        std::vector<double> bias(static_cast<std::size_t>(fx.spec.model.num_classes), 0.0);
        bias[2] = 1.0;  // constant prediction: class 2
        ckpt.model.proj_bias = Tensor::from(std::move(bias), {fx.spec.model.num_classes});
        std::size_t class2 = 0;
        for (const auto& ex : fx.valid_data) class2 += ex.label == 2;
        double expected = static_cast<double>(class2) / static_cast<double>(fx.valid_data.size());
        CHECK(evaluate(ckpt, fx.valid_data, EvalMode{}) == doctest::Approx(expected).epsilon(1e-12));
    }

    SUBCASE("class-count mismatch is a config error") {
        auto bad = gen_synthetic(SyntheticTask::FirstTokenClass, 10, 3, 16, 7, 1);
        CHECK_THROWS_AS(evaluate(result.last, bad, EvalMode{}), ConfigError);
    }

    SUBCASE("empty dataset is a protocol error") {
        CHECK_THROWS_AS(evaluate(result.last, {}, EvalMode{}), ProtocolError);
    }
}

TEST_CASE("non-finite loss aborts with batch diagnostics") {
    TrainFixture fx;
    // corrupt embedding rows surface as a NumericError wrapped with context
    std::vector<double> data(fx.embeddings.matrix.values().begin(),
                             fx.embeddings.matrix.values().end());
    for (double& v : data) v = std::numeric_limits<double>::quiet_NaN();
    fx.embeddings.matrix = Tensor::from(std::move(data), fx.embeddings.matrix.shape());
    try {
        train(fx.spec, fx.train_data, fx.valid_data, fx.embeddings, fx.vocab.tokens());
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        std::string msg = e.what();
        CHECK(msg.find("batch") != std::string::npos);
        CHECK(msg.find("norms") != std::string::npos);
    }
}

TEST_CASE("checkpoint round trip") {
    TrainFixture fx;
    fx.spec.epochs = 2;
    TrainResult result = train(fx.spec, fx.train_data, fx.valid_data, fx.embeddings,
                               fx.vocab.tokens());
    fs::path p1 = temp_path("a.ckpt");
    fs::path p2 = temp_path("b.ckpt");

    SUBCASE("save, load, save is byte-identical and tensors are bitwise equal") {
        save_checkpoint(result.last, p1.string());
        Checkpoint loaded = load_checkpoint(p1.string());
        save_checkpoint(loaded, p2.string());

        std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
        std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
        std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
        REQUIRE(!b1.empty());
        CHECK(b1 == b2);

        auto orig = result.last.model.params();
        auto back = loaded.model.params();
        REQUIRE(orig.size() == back.size());
        for (std::size_t i = 0; i < orig.size(); ++i) {
            auto ov = orig[i].tensor->values();
            auto bv = back[i].tensor->values();
            REQUIRE(ov.size() == bv.size());
            for (std::size_t j = 0; j < ov.size(); ++j) {
                REQUIRE(ov[j] == bv[j]);
            }
        }
        CHECK(histories_equal(result.last.history, loaded.history));
        CHECK(loaded.vocab_tokens == fx.vocab.tokens());
    }

    SUBCASE("flipping one byte in the tensor region is caught by the checksum") {
        save_checkpoint(result.last, p1.string());
        std::ifstream in(p1, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        bytes[bytes.size() - 100] = static_cast<char>(bytes[bytes.size() - 100] ^ 0x40);
        std::ofstream out(p1, std::ios::binary | std::ios::trunc);
        out << bytes;
        out.close();
        CHECK_THROWS_AS(load_checkpoint(p1.string()), FormatError);
    }

    SUBCASE("version mismatch fails loudly") {
        save_checkpoint(result.last, p1.string());
        std::ifstream in(p1, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        bytes[8] = 99;  // format_version lives after the 8-byte magic
        std::ofstream out(p1, std::ios::binary | std::ios::trunc);
        out << bytes;
        out.close();
        try {
            load_checkpoint(p1.string());
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("version") != std::string::npos);
        }
    }

    SUBCASE("truncation fails loudly") {
        save_checkpoint(result.last, p1.string());
        std::ifstream in(p1, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        bytes.resize(bytes.size() / 2);
        std::ofstream out(p1, std::ios::binary | std::ios::trunc);
        out << bytes;
        out.close();
        try {
            load_checkpoint(p1.string());
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            std::string msg = e.what();
            CHECK((msg.find("truncated") != std::string::npos ||
                   msg.find("shorter") != std::string::npos));
        }
    }

    SUBCASE("garbage file is rejected") {
        std::ofstream out(p1, std::ios::binary | std::ios::trunc);
        out << "not a checkpoint at all";
        out.close();
        CHECK_THROWS_AS(load_checkpoint(p1.string()), FormatError);
    }

    std::error_code ec;
    fs::remove(p1, ec);
    fs::remove(p2, ec);
}

TEST_CASE("resuming reproduces the uninterrupted trajectory bitwise") {
    TrainFixture fx;
    fx.spec.model.input_keep_prob = 0.5;
    fx.spec.epochs = 6;
    TrainResult full = train(fx.spec, fx.train_data, fx.valid_data, fx.embeddings,
                             fx.vocab.tokens());

    TrainSpec half = fx.spec;
    half.epochs = 3;
    TrainResult first = train(half, fx.train_data, fx.valid_data, fx.embeddings, fx.vocab.tokens());

    // round trip the resume point through disk as well
    fs::path p = temp_path("resume.ckpt");
    save_checkpoint(first.last, p.string());
    Checkpoint resumed_from = load_checkpoint(p.string());
    std::error_code ec;
    fs::remove(p, ec);

    TrainResult second = train(fx.spec, fx.train_data, fx.valid_data, fx.embeddings,
                               fx.vocab.tokens(), &resumed_from);
    CHECK(histories_equal(full.history, second.history));

    auto fv = full.last.model.params();
    auto sv = second.last.model.params();
    for (std::size_t i = 0; i < fv.size(); ++i) {
        auto a = fv[i].tensor->values();
        auto b = sv[i].tensor->values();
        for (std::size_t j = 0; j < a.size(); ++j) {
            REQUIRE(a[j] == b[j]);
        }
    }
}

TEST_CASE("metrics csv shape") {
    std::vector<EpochMetrics> history{{0, 1.5, 0.5}, {1, 1.2, 0.625}};
    std::string csv = metrics_to_csv(history);
    CHECK(csv.rfind("rung,run,epoch,train_loss,valid_acc\n", 0) == 0);
    std::size_t rows = 0;
    for (char ch : csv) rows += ch == '\n';
    CHECK(rows == 3);
}

}  // TEST_SUITE
