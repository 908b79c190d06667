#include "laet/error.hpp"
#include "laet/random.hpp"
#include "laet/selection.hpp"

#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace laet;
using laet::testing::random_table;

namespace {

LayerMetricsTable table_of(const std::vector<double>& m1, const std::vector<double>& m2) {
    LayerMetricsTable t;
    for (std::size_t i = 0; i < m1.size(); ++i) {
        t.rows.push_back({m1[i], m2[i]});
    }
    return t;
}

LayerMetricsTable four_layer() { return table_of({0.5, 0.7, 0.9, 0.88}, {0.4, 0.6, 0.85, 0.86}); }

// Two-pass population standard deviation in long double.
double std_oracle(const std::vector<double>& v) {
    long double mean = 0.0L;
    for (const double x : v) {
        mean += x;
    }
    mean /= static_cast<long double>(v.size());
    long double ss = 0.0L;
    for (const double x : v) {
        ss += (x - mean) * (x - mean);
    }
    return static_cast<double>(std::sqrt(ss / static_cast<long double>(v.size())));
}

std::vector<double> column(const LayerMetricsTable& t, bool first) {
    std::vector<double> out;
    for (const auto& r : t.rows) {
        out.push_back(first ? r.m1 : r.m2);
    }
    return out;
}

std::vector<std::size_t> dominance_oracle(const LayerMetricsTable& t, double alpha, double beta) {
    const double d1 = alpha * std_oracle(column(t, true));
    const double d2 = beta * std_oracle(column(t, false));
    std::vector<std::size_t> keep;
    const std::size_t n = t.rows.size();
    for (std::size_t l = 0; l < n; ++l) {
        bool out = false;
        for (std::size_t o = 0; o < n; ++o) {
            const auto& a = t.rows[o];
            const auto& b = t.rows[l];
            if (o != l && a.m1 >= b.m1 + d1 && a.m2 >= b.m2 + d2 && (a.m1 > b.m1 || a.m2 > b.m2)) {
                out = true;
            }
        }
        if (!out) {
            keep.push_back(l + 1);
        }
    }
    return keep;
}

std::vector<std::size_t> threshold_oracle(const LayerMetricsTable& t, double alpha, double beta) {
    const auto c1 = column(t, true);
    const auto c2 = column(t, false);
    const double top1 = *std::max_element(c1.begin(), c1.end());
    const double top2 = *std::max_element(c2.begin(), c2.end());
    const double d1 = alpha * std_oracle(c1);
    const double d2 = beta * std_oracle(c2);
    std::vector<std::size_t> keep;
    for (std::size_t l = 0; l < c1.size(); ++l) {
        if (c1[l] >= top1 - d1 && c2[l] >= top2 - d2) {
            keep.push_back(l + 1);
        }
    }
    if (keep.empty()) {
        std::size_t best = 0;
        for (std::size_t l = 1; l < c1.size(); ++l) {
            if (c1[l] + c2[l] > c1[best] + c2[best]) {
                best = l;
            }
        }
        keep.push_back(best + 1);
    }
    return keep;
}

SelectionConfig with(double alpha, double beta, SelectionStrategy s) {
    SelectionConfig c;
    c.alpha = alpha;
    c.beta = beta;
    c.strategy = s;
    return c;
}

// Values on a coarse grid so that margin comparisons are not decided by rounding.
LayerMetricsTable grid_table(Rng& rng, std::size_t layers) {
    LayerMetricsTable t;
    for (std::size_t l = 0; l < layers; ++l) {
        t.rows.push_back({static_cast<double>(rng.below(9)) / 8.0, static_cast<double>(rng.below(9)) / 8.0});
    }
    return t;
}

constexpr SelectionStrategy kStrategies[] = {SelectionStrategy::Dominance, SelectionStrategy::Threshold,
                                             SelectionStrategy::FirstStd};

} // namespace

TEST_SUITE("margins") {
    TEST_CASE("four-layer column") {
        const auto m = compute_margins(four_layer(), 0.5, 0.5);
        CHECK(m.sigma_m1 == doctest::Approx(0.16148).epsilon(1e-4));
        CHECK(m.delta_m1 == doctest::Approx(0.08074).epsilon(1e-4));
        CHECK(m.sigma_m1 == doctest::Approx(std_oracle({0.5, 0.7, 0.9, 0.88})).epsilon(1e-14));
    }

    TEST_CASE("constant column has zero margin") {
        const auto m = compute_margins(table_of({0.3, 0.3, 0.3}, {0.1, 0.2, 0.3}), 2.0, 0.0);
        CHECK(m.sigma_m1 == 0.0);
        CHECK(m.delta_m1 == 0.0);
        CHECK(m.delta_m2 == 0.0);
    }

    TEST_CASE("doubling alpha doubles the margin") {
        const auto a = compute_margins(four_layer(), 0.5, 0.5);
        const auto b = compute_margins(four_layer(), 1.0, 0.5);
        CHECK(b.delta_m1 == 2.0 * a.delta_m1);
        CHECK(b.delta_m2 == a.delta_m2);
    }

    TEST_CASE("empty table and negative coefficients are rejected") {
        CHECK_THROWS_AS(compute_margins(LayerMetricsTable{}, 0.5, 0.5), InvalidArgument);
        CHECK_THROWS_AS(select_dominance(four_layer(), with(-0.1, 0.5, SelectionStrategy::Dominance)),
                        InvalidArgument);
    }
}

TEST_SUITE("dominance") {
    TEST_CASE("four-layer example keeps layers 3 and 4") {
        const auto r = select_dominance(four_layer(), with(0.5, 0.5, SelectionStrategy::Dominance));
        CHECK(r.selected == std::vector<std::size_t>{3, 4});
        CHECK(r.selected == dominance_oracle(four_layer(), 0.5, 0.5));
    }

    TEST_CASE("single layer") {
        const auto r = select_dominance(table_of({0.2}, {0.1}), with(0.5, 0.5, SelectionStrategy::Dominance));
        CHECK(r.selected == std::vector<std::size_t>{1});
    }

    TEST_CASE("identical rows keep every layer for any margins") {
        const auto t = table_of({0.6, 0.6, 0.6, 0.6}, {0.5, 0.5, 0.5, 0.5});
        for (const double a : {0.0, 0.5, 3.0}) {
            const auto r = select_dominance(t, with(a, a, SelectionStrategy::Dominance));
            CHECK(r.selected == std::vector<std::size_t>{1, 2, 3, 4});
        }
    }
}

TEST_SUITE("threshold") {
    TEST_CASE("four-layer example by direct check") {
        const auto r = select_threshold(four_layer(), with(0.5, 0.5, SelectionStrategy::Threshold));
        // max m1 0.9, max m2 0.86; both margins near 0.08.
        CHECK(r.selected == std::vector<std::size_t>{3, 4});
        CHECK_FALSE(r.fallback);
    }

    TEST_CASE("zero margins pick the unique joint maximizer") {
        const auto t = table_of({0.1, 0.9, 0.5}, {0.2, 0.8, 0.3});
        const auto r = select_threshold(t, with(0.0, 0.0, SelectionStrategy::Threshold));
        CHECK(r.selected == std::vector<std::size_t>{2});
    }

    TEST_CASE("no joint maximizer falls back to the best sum") {
        const auto t = table_of({0.9, 0.1, 0.6}, {0.1, 0.9, 0.6});
        const auto r = select_threshold(t, with(0.0, 0.0, SelectionStrategy::Threshold));
        CHECK(r.fallback);
        CHECK(r.selected == std::vector<std::size_t>{3});
    }

    TEST_CASE("first-std on a constant table selects everything") {
        const auto r = select_first_std(table_of({0.4, 0.4, 0.4}, {0.7, 0.7, 0.7}));
        CHECK(r.selected == std::vector<std::size_t>{1, 2, 3});
        CHECK(r.alpha == 1.0);
        CHECK(r.beta == 1.0);
    }

    TEST_CASE("strategy names parse") {
        CHECK(parse_selection_strategy("first-std") == SelectionStrategy::FirstStd);
        CHECK(to_string(SelectionStrategy::Threshold) == "threshold");
        CHECK_THROWS_AS(parse_selection_strategy("pareto"), InvalidArgument);
    }
}

TEST_SUITE("selection properties") {
    TEST_CASE("1000 random tables match the brute-force rules") {
        Rng rng(2024);
        for (int trial = 0; trial < 1000; ++trial) {
            const std::size_t layers = 2 + rng.below(47);
            const auto t = random_table(rng, layers);
            const double a = rng.uniform(0.0, 2.0);
            const double b = rng.uniform(0.0, 2.0);
            CHECK(select_dominance(t, with(a, b, SelectionStrategy::Dominance)).selected ==
                  dominance_oracle(t, a, b));
            CHECK(select_threshold(t, with(a, b, SelectionStrategy::Threshold)).selected ==
                  threshold_oracle(t, a, b));
            CHECK(select_first_std(t).selected == threshold_oracle(t, 1.0, 1.0));
        }
    }

    TEST_CASE("first-std admits at least as many layers as threshold at one half") {
        Rng rng(3);
        for (int trial = 0; trial < 300; ++trial) {
            const auto t = random_table(rng, 2 + rng.below(30));
            const auto half = select_threshold(t, with(0.5, 0.5, SelectionStrategy::Threshold));
            const auto full = select_first_std(t);
            CHECK(full.selected.size() >= half.selected.size());
            if (!half.fallback) {
                CHECK(std::includes(full.selected.begin(), full.selected.end(), half.selected.begin(),
                                    half.selected.end()));
            }
        }
    }

    TEST_CASE("threshold never shrinks as margins grow") {
        Rng rng(4);
        for (int trial = 0; trial < 300; ++trial) {
            const auto t = random_table(rng, 2 + rng.below(30));
            const double a = rng.uniform(0.0, 1.5);
            const double b = rng.uniform(0.0, 1.5);
            const auto small = select_threshold(t, with(a, b, SelectionStrategy::Threshold));
            const auto large =
                select_threshold(t, with(a + rng.uniform(0.0, 1.0), b + rng.uniform(0.0, 1.0), SelectionStrategy::Threshold));
            CHECK(large.selected.size() >= small.selected.size());
            if (!small.fallback) {
                CHECK(std::includes(large.selected.begin(), large.selected.end(), small.selected.begin(),
                                    small.selected.end()));
            }
        }
    }

    TEST_CASE("permuting rows permutes the selection") {
        Rng rng(5);
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t layers = 2 + rng.below(20);
            const auto t = grid_table(rng, layers);
            std::vector<std::size_t> perm(layers);
            std::iota(perm.begin(), perm.end(), 0);
            rng.shuffle(std::span(perm));
            LayerMetricsTable p;
            for (const auto i : perm) {
                p.rows.push_back(t.rows[i]);
            }
            for (const auto s : {SelectionStrategy::Dominance, SelectionStrategy::FirstStd}) {
                const auto base_result = select_layers(t, with(0.5, 0.5, s));
                if (base_result.fallback) {
                    continue; // ties in the fallback go to the lowest index
                }
                const auto& base = base_result.selected;
                std::vector<std::size_t> mapped;
                for (const auto l : select_layers(p, with(0.5, 0.5, s)).selected) {
                    mapped.push_back(perm[l - 1] + 1);
                }
                std::sort(mapped.begin(), mapped.end());
                CHECK(mapped == base);
            }
        }
    }

    TEST_CASE("shifting a column leaves the selection unchanged") {
        Rng rng(6);
        for (int trial = 0; trial < 200; ++trial) {
            const auto t = grid_table(rng, 2 + rng.below(20));
            // Power-of-two shifts keep every grid value exact.
            const double s1 = static_cast<double>(rng.below(5)) * 0.25;
            const double s2 = static_cast<double>(rng.below(5)) * 0.25;
            auto shifted = t;
            for (auto& r : shifted.rows) {
                r.m1 += s1;
                r.m2 += s2;
            }
            for (const auto s : kStrategies) {
                CHECK(select_layers(t, with(0.5, 0.5, s)).selected ==
                      select_layers(shifted, with(0.5, 0.5, s)).selected);
            }
        }
    }

    TEST_CASE("selection is never empty and stays within range") {
        Rng rng(7);
        for (int trial = 0; trial < 500; ++trial) {
            const std::size_t layers = 1 + rng.below(48);
            const auto t = rng.below(2) == 0 ? random_table(rng, layers) : grid_table(rng, layers);
            for (const auto s : kStrategies) {
                const auto r = select_layers(t, with(rng.uniform(0.0, 3.0), rng.uniform(0.0, 3.0), s));
                REQUIRE_FALSE(r.selected.empty());
                CHECK(r.selected.front() >= 1);
                CHECK(r.selected.back() <= layers);
                CHECK(std::is_sorted(r.selected.begin(), r.selected.end()));
            }
        }
    }
}
