#include <doctest.h>

#include "lstmkit/data.hpp"
#include "lstmkit/grad_check.hpp"
#include "lstmkit/model.hpp"

using namespace lstmkit;

TEST_SUITE("grad_check") {

TEST_CASE("quadratic is exact to O(h^2)") {
    Tensor x = Tensor::from({3.0}, {1});
    // analytic d/dx sum(x^2) = 6; the checker compares against central
    // differences, which are exact for quadratics up to roundoff
    double err = grad_check([](Tape* t, const Tensor& v) { return sum_all(t, mul(t, v, v)); }, x);
    CHECK(err < 1e-7);

    Tape tape;
    Tensor w = tape.watch(x);
    Tensor loss = sum_all(&tape, mul(&tape, w, w));
    tape.backward(loss);
    CHECK(tape.adjoint_view(w.node())[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("softmax cross entropy on random logits") {
    Rng rng(13, 0);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> v(6);
        for (double& x : v) x = rng.uniform(-3.0, 3.0);
        Tensor logits = Tensor::from(std::move(v), {6});
        double err = grad_check(
            [trial](Tape* t, const Tensor& x) { return softmax_cross_entropy(t, x, trial % 6).loss; },
            logits);
        CHECK(err < 1e-6);
    }
}

TEST_CASE("full two-layer model loss on a length-6 sequence") {
    ModelConfig c;
    c.num_layers = 2;
    c.hidden_size = 5;
    c.embed_dim = 5;
    c.num_classes = 2;
    c.input_keep_prob = 0.5;
    Rng init(3, 0);
    Classifier model = Classifier::init(c, init);
    Rng emb_rng(4, 0);
    Tensor table = EmbeddingTable::random(10, c.embed_dim, emb_rng).matrix;
    std::vector<int> ids{2, 7, 3, 9, 4, 5};
    Rng mask_src(5, 0);
    DropoutMasks masks = draw_masks(c, ids.size(), &mask_src);  // frozen for the check

    double err = grad_check(
        [&](Tape* t, const Tensor& emb) {
            ForwardResult fwd = classify_forward(t, model, emb, ids, masks);
            return softmax_cross_entropy(t, fwd.logits, 1).loss;
        },
        table);
    CHECK(err < 1e-4);
}

TEST_CASE("rejects non-scalar functions and non-finite values") {
    Tensor x = Tensor::from({1.0, 2.0}, {2});
    CHECK_THROWS_AS(grad_check([](Tape* t, const Tensor& v) { return add(t, v, v); }, x), Error);
    CHECK_THROWS_AS(grad_check(
                        [](Tape* t, const Tensor& v) {
                            return sum_all(t, scale(t, scale(t, v, 1e308), 1e308));
                        },
                        x),
                    NumericError);
}

}  // TEST_SUITE
