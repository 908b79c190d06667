#include "laet/dataset.hpp"
#include "laet/error.hpp"
#include "laet/finetune.hpp"
#include "laet/optim.hpp"
#include "laet/synth.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace laet;

namespace {

ModelConfig tiny_model(std::size_t layers = 4, std::size_t dim = 16) {
    ModelConfig c;
    c.layers = layers;
    c.dim = dim;
    c.heads = 2;
    c.max_context = 64;
    return c;
}

LabeledSet keyword_set(std::size_t size, std::uint64_t seed) {
    SynthSpec s;
    s.size = size;
    s.classes = 3;
    s.seed = seed;
    const auto records = synth_generate(s);
    return to_labeled_set(records, LabelCodec::infer(records));
}

SelectionResult selection_of(std::vector<std::size_t> layers) {
    SelectionResult r;
    r.selected = std::move(layers);
    return r;
}

FinetuneConfig quick(std::size_t epochs, std::size_t batch) {
    FinetuneConfig c;
    c.epochs = epochs;
    c.batch_size = batch;
    c.model_lr = 1e-3;
    c.classifier_lr = 1e-2;
    c.seed = 3;
    return c;
}

double loss_of(LayeredModel& model, ProbeClassifier& head, std::span<const std::size_t> layers,
               const LabeledExample& ex) {
    Graph g;
    return g.value(example_loss(g, model, head, layers, ex, TaskKind::Classification, Readout::LastToken))[0];
}

} // namespace

TEST_SUITE("combined loss") {
    TEST_CASE("examples") {
        CHECK(combined_loss(std::vector<double>{1.0, 2.0}) == 1.5);
        CHECK(combined_loss(std::vector<double>{0.37}) == 0.37);
        const double l3 = std::log(3.0);
        CHECK(combined_loss(std::vector<double>{l3, l3, l3}) == doctest::Approx(l3).epsilon(1e-15));
        CHECK_THROWS_AS(combined_loss(std::vector<double>{}), ContractViolation);
    }
}

TEST_SUITE("finetune") {
    TEST_CASE("empty selection violates the contract") {
        LayeredModel model(tiny_model(), 1);
        ProbeClassifier head(16, TaskKind::Classification, 3, 2);
        CHECK_THROWS_AS(finetune(model, head, selection_of({}), keyword_set(30, 1), quick(1, 8)), ContractViolation);
    }

    TEST_CASE("invalid configs are rejected") {
        FinetuneConfig c = quick(1, 8);
        c.model_lr = 0.0;
        CHECK_THROWS_AS(c.validate(), InvalidArgument);
        c = quick(0, 8);
        CHECK_THROWS_AS(c.validate(), InvalidArgument);
    }

    TEST_CASE("one step on layer 3 changes only layer 3 and the head") {
        LayeredModel model(tiny_model(), 1);
        ProbeClassifier head(16, TaskKind::Classification, 3, 2);
        const ProbeClassifier head_before = head;
        std::vector<std::string> before;
        for (std::size_t l = 1; l <= 4; ++l) {
            before.push_back(model.block_bytes(l));
        }
        const auto data = keyword_set(30, 1);
        const auto trace = finetune(model, head, selection_of({3}), data, quick(1, data.size()));
        CHECK(trace.epochs.size() == 1);
        CHECK(model.block_bytes(1) == before[0]);
        CHECK(model.block_bytes(2) == before[1]);
        CHECK(model.block_bytes(3) != before[2]);
        CHECK(model.block_bytes(4) == before[3]);
        CHECK_FALSE(head.bitwise_equal(head_before));
    }

    TEST_CASE("frozen layers stay byte-identical over several epochs") {
        LayeredModel model(tiny_model(), 4);
        ProbeClassifier head(16, TaskKind::Classification, 3, 5);
        const std::string b1 = model.block_bytes(1);
        const std::string b3 = model.block_bytes(3);
        finetune(model, head, selection_of({2, 4}), keyword_set(30, 2), quick(3, 8));
        CHECK(model.block_bytes(1) == b1);
        CHECK(model.block_bytes(3) == b3);
    }

    TEST_CASE("training lowers the combined loss") {
        LayeredModel model(tiny_model(2), 6);
        ProbeClassifier head(16, TaskKind::Classification, 3, 7);
        const auto trace = finetune(model, head, selection_of({1, 2}), keyword_set(60, 3), quick(8, 8));
        REQUIRE(trace.epochs.size() == 8);
        CHECK(trace.layers == std::vector<std::size_t>{1, 2});
        CHECK(trace.epochs.back().loss < trace.epochs.front().loss);
        for (const auto& e : trace.epochs) {
            CHECK(std::isfinite(e.loss));
            CHECK(e.layer_losses.size() == 2);
            CHECK(e.loss == doctest::Approx(combined_loss(e.layer_losses)).epsilon(1e-9));
        }
    }

    TEST_CASE("fixed seed gives bitwise-identical parameters") {
        const auto data = keyword_set(30, 4);
        auto run = [&] {
            LayeredModel model(tiny_model(3), 8);
            ProbeClassifier head(16, TaskKind::Classification, 3, 9);
            finetune(model, head, selection_of({1, 3}), data, quick(2, 8));
            return std::pair{model.block_bytes(1) + model.block_bytes(3), head};
        };
        const auto a = run();
        const auto b = run();
        CHECK(a.first == b.first);
        CHECK(a.second.bitwise_equal(b.second));
    }
}

TEST_SUITE("gradient routing") {
    TEST_CASE("trainable gradients match central differences; frozen ones are absent") {
        LayeredModel model(tiny_model(2, 8), 21);
        ProbeClassifier head(8, TaskKind::Classification, 3, 22);
        model.set_trainable(std::vector<std::size_t>{2});
        head.set_trainable(true);
        const std::vector<std::size_t> layers{1, 2};
        const auto data = keyword_set(30, 5);
        const auto& ex = data.examples[0];

        Graph g;
        g.backward(example_loss(g, model, head, layers, ex, TaskKind::Classification, Readout::LastToken));

        const double h = 1e-6;
        auto check_entry = [&](Tensor& t, std::size_t i) {
            const double saved = t[i];
            t[i] = saved + h;
            const double up = loss_of(model, head, layers, ex);
            t[i] = saved - h;
            const double down = loss_of(model, head, layers, ex);
            t[i] = saved;
            return (up - down) / (2 * h);
        };

        Rng rng(23);
        for (Tensor* t : {&model.block(2).wq, &model.block(2).ff_out, &model.block(2).ln1_gain}) {
            REQUIRE(t->has_grad());
            for (int k = 0; k < 5; ++k) {
                const auto i = static_cast<std::size_t>(rng.below(t->size()));
                const double fd = check_entry(*t, i);
                const double an = t->grad()[i];
                CHECK(std::abs(fd - an) <= 1e-4 * std::max({std::abs(fd), std::abs(an), 1e-3}));
            }
        }
        for (Tensor* t : head.parameters()) {
            REQUIRE(t->has_grad());
            const auto i = static_cast<std::size_t>(rng.below(t->size()));
            const double fd = check_entry(*t, i);
            CHECK(std::abs(fd - t->grad()[i]) <= 1e-4 * std::max({std::abs(fd), 1e-3}));
        }

        // Layer 1 feeds the loss yet is frozen: the loss moves, the slot stays empty.
        Tensor& frozen = model.block(1).wv;
        CHECK_FALSE(frozen.has_grad());
        CHECK(std::abs(check_entry(frozen, 0)) > 0.0);
        CHECK_FALSE(model.token_table().has_grad());
    }
}

TEST_SUITE("schedule") {
    TEST_CASE("diminishing steps drive the probe gradient norm down") {
        const auto data = laet::testing::separable_blobs(200, 8, 31);
        ProbeConfig c;
        c.epochs = 200;
        c.lr = 0.05;
        c.schedule_t0 = 20.0;
        c.seed = 2;
        ProbeHistory history;
        const auto split = split_probe_dataset(data, 0.2, 1);
        train_probe(split.train, c, &history);
        REQUIRE(history.grad_norm.size() == 200);
        const double first = history.grad_norm.front();
        double tail = 0.0;
        for (std::size_t e = 150; e < 200; ++e) {
            tail += history.grad_norm[e];
        }
        tail /= 50.0;
        CHECK(tail < 0.1 * first);
    }
}

TEST_SUITE("optim") {
    TEST_CASE("norm, clipping and the update rule") {
        Tensor a = Tensor::vector({1.0, 2.0});
        Tensor b = Tensor::vector({4.0});
        a.set_requires_grad(true);
        b.set_requires_grad(true);
        a.accumulate_grad(std::vector<double>{3.0, 0.0});
        b.accumulate_grad(std::vector<double>{4.0});
        const std::vector<Tensor*> params{&a, &b};
        CHECK(global_grad_norm(params) == doctest::Approx(5.0));
        CHECK(clip_factor(5.0, 1.0) == doctest::Approx(0.2));
        CHECK(clip_factor(0.5, 1.0) == 1.0);
        CHECK(clip_factor(5.0, 0.0) == 1.0);

        sgd_step(params, 0.1, 0.5, 0.2);
        // 1 - 0.1 * (0.2 * 3 + 0.5 * 1)
        CHECK(a[0] == doctest::Approx(0.89));
        CHECK(a[1] == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0));
        CHECK(b[0] == doctest::Approx(4.0 - 0.1 * (0.2 * 4.0 + 0.5 * 4.0)));
        CHECK_FALSE(a.has_grad());
        CHECK_FALSE(b.has_grad());
    }

    TEST_CASE("tensors that do not require gradients are left alone") {
        Tensor a = Tensor::vector({1.0});
        a.accumulate_grad(std::vector<double>{1.0});
        const std::vector<Tensor*> params{&a};
        sgd_step(params, 0.1);
        CHECK(a[0] == 1.0);
    }

    TEST_CASE("scheduled rate") {
        CHECK(scheduled_rate(0.1, 5, 0.0) == 0.1);
        CHECK(scheduled_rate(0.1, 0, 10.0) == 0.1);
        CHECK(scheduled_rate(0.1, 10, 10.0) == doctest::Approx(0.05));
    }
}
