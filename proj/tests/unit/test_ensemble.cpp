#include "laet/ensemble.hpp"
#include "laet/error.hpp"
#include "laet/numerics.hpp"
#include "laet/random.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace laet;

namespace {

LayerVote vote(std::size_t layer, std::size_t predicted, std::vector<double> probs) {
    LayerVote v;
    v.layer = layer;
    v.predicted = predicted;
    v.probabilities = std::move(probs);
    return v;
}

ModelConfig tiny_model() {
    ModelConfig c;
    c.layers = 3;
    c.dim = 16;
    c.heads = 2;
    c.max_context = 64;
    return c;
}

} // namespace

TEST_SUITE("majority vote") {
    TEST_CASE("identical votes") {
        const std::vector<LayerVote> v{vote(1, 2, {}), vote(2, 2, {}), vote(3, 2, {})};
        const auto r = majority_vote(v);
        CHECK(r.predicted == 2);
        CHECK_FALSE(r.tie);
    }

    TEST_CASE("strict majority") {
        const std::vector<LayerVote> v{vote(1, 0, {}), vote(2, 0, {}), vote(3, 1, {})};
        CHECK(majority_vote(v).predicted == 0);
    }

    TEST_CASE("count tie goes to the larger probability mass") {
        const std::vector<LayerVote> v{vote(1, 0, {0.8, 0.2}), vote(2, 1, {0.3, 0.7})};
        const auto r = majority_vote(v);
        CHECK(r.predicted == 0);
        CHECK(r.tie);

        const std::vector<LayerVote> w{vote(1, 0, {0.6, 0.4}), vote(2, 1, {0.2, 0.8})};
        CHECK(majority_vote(w).predicted == 1);
    }

    TEST_CASE("full tie goes to the lowest class") {
        const std::vector<LayerVote> v{vote(1, 1, {0.5, 0.5}), vote(2, 0, {0.5, 0.5})};
        CHECK(majority_vote(v).predicted == 0);
    }

    TEST_CASE("empty votes violate the contract") {
        CHECK_THROWS_AS(majority_vote(std::vector<LayerVote>{}), ContractViolation);
        CHECK_THROWS_AS(average_output(std::vector<LayerVote>{}), ContractViolation);
    }

    TEST_CASE("regression averages outputs") {
        std::vector<LayerVote> v(3);
        v[0].output = 1.0;
        v[1].output = 2.0;
        v[2].output = 6.0;
        CHECK(average_output(v) == 3.0);
    }

    TEST_CASE("property: order independence and the winner was voted for") {
        Rng rng(8);
        for (int trial = 0; trial < 300; ++trial) {
            const std::size_t k = 2 + rng.below(4);
            std::vector<LayerVote> votes;
            const std::size_t count = 1 + rng.below(9);
            for (std::size_t i = 0; i < count; ++i) {
                std::vector<double> logits(k);
                for (auto& z : logits) {
                    z = rng.uniform(-2.0, 2.0);
                }
                auto probs = numerics::softmax(logits);
                const auto pred = numerics::argmax(probs);
                votes.push_back(vote(i + 1, pred, std::move(probs)));
            }
            const auto base = majority_vote(votes);
            CHECK(std::any_of(votes.begin(), votes.end(), [&](const LayerVote& v) { return v.predicted == base.predicted; }));
            rng.shuffle(std::span(votes));
            const auto again = majority_vote(votes);
            CHECK(again.predicted == base.predicted);
            CHECK(again.tie == base.tie);
        }
    }
}

TEST_SUITE("error bound") {
    TEST_CASE("examples") {
        CHECK(ensemble_error_bound(0.3, 5) == doctest::Approx(std::exp(-0.4)).epsilon(1e-12));
        CHECK(ensemble_error_bound(0.3, 5) == doctest::Approx(0.6703).epsilon(1e-4));
        CHECK(ensemble_error_bound(0.5 - 1e-9, 3) == doctest::Approx(1.0));
    }

    TEST_CASE("invalid hypotheses are rejected") {
        CHECK_THROWS_AS(ensemble_error_bound(0.5, 3), InvalidArgument);
        CHECK_THROWS_AS(ensemble_error_bound(-0.1, 3), InvalidArgument);
        CHECK_THROWS_AS(ensemble_error_bound(0.2, 0), InvalidArgument);
    }

    TEST_CASE("property: doubling the ensemble squares the bound") {
        for (const double e : {0.0, 0.1, 0.25, 0.4, 0.49}) {
            for (const std::size_t b : {1u, 3u, 7u}) {
                const double one = ensemble_error_bound(e, b);
                CHECK(ensemble_error_bound(e, 2 * b) == doctest::Approx(one * one).epsilon(1e-12));
                CHECK(ensemble_error_bound(e, b + 1) <= one);
            }
        }
    }

    TEST_CASE("property: monotone in the average error") {
        double last = 0.0;
        for (double e = 0.0; e < 0.5; e += 0.01) {
            const double b = ensemble_error_bound(e, 5);
            CHECK(b >= last);
            last = b;
        }
    }

    TEST_CASE("bound holds for independent voters") {
        Rng rng(9);
        for (const double e : {0.1, 0.3, 0.45}) {
            for (const std::size_t size : {1u, 5u, 9u}) {
                std::size_t wrong = 0;
                const std::size_t trials = 20000;
                for (std::size_t t = 0; t < trials; ++t) {
                    std::size_t errors = 0;
                    for (std::size_t i = 0; i < size; ++i) {
                        errors += rng.uniform() < e;
                    }
                    wrong += 2 * errors >= size;
                }
                CHECK(static_cast<double>(wrong) / trials <= ensemble_error_bound(e, size) + 0.01);
            }
        }
    }
}

TEST_SUITE("predictor") {
    TEST_CASE("layer votes match a direct recomputation") {
        const LayeredModel model(tiny_model(), 11);
        const ProbeClassifier head(16, TaskKind::Classification, 3, 12);
        const LaetPredictor p(model, head, {3, 1}, Readout::LastToken);
        CHECK(p.selected() == std::vector<std::size_t>{1, 3});
        const std::string prompt = "Input: hello world\nAnswer:";
        const auto reps = model.forward_all_layers(model.tokenize(prompt));
        for (const std::size_t l : {1u, 3u}) {
            const auto r = extract_representation(reps, l, Readout::LastToken);
            const Tensor logits = head.outputs(Tensor(Shape{1, r.size()}, r), l);
            const auto expected = numerics::softmax(logits.data());
            const auto v = p.predict_layer(prompt, l);
            REQUIRE(v.probabilities.size() == 3);
            for (std::size_t c = 0; c < 3; ++c) {
                CHECK(v.probabilities[c] == doctest::Approx(expected[c]).epsilon(1e-10));
            }
            CHECK(v.predicted == numerics::argmax(expected));
        }
        const auto e = p.predict(prompt);
        CHECK(e.votes.size() == 2);
        CHECK(e.predicted == majority_vote(e.votes).predicted);
    }

    TEST_CASE("layers outside the selection are rejected") {
        const LayeredModel model(tiny_model(), 11);
        const ProbeClassifier head(16, TaskKind::Classification, 3, 12);
        const LaetPredictor p(model, head, {2}, Readout::Sum);
        CHECK_THROWS_AS(p.predict_layer("x", 1), InvalidArgument);
        CHECK_THROWS_AS(LaetPredictor(model, head, {}, Readout::Sum), InvalidArgument);
        CHECK_THROWS_AS(LaetPredictor(model, head, {4}, Readout::Sum), InvalidArgument);
    }

    TEST_CASE("regression output is the mean of layer outputs") {
        const LayeredModel model(tiny_model(), 11);
        const ProbeClassifier head(16, TaskKind::Regression, 1, 13);
        const LaetPredictor p(model, head, {1, 2, 3}, Readout::Average);
        const auto e = p.predict("Input: 3.5\nAnswer:");
        REQUIRE(e.votes.size() == 3);
        CHECK(e.output == doctest::Approx((e.votes[0].output + e.votes[1].output + e.votes[2].output) / 3.0));
    }
}
