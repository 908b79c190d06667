#include "laet/selection.hpp"

#include "laet/error.hpp"
#include "laet/log.hpp"

#include <algorithm>
#include <cmath>

namespace laet {

std::string_view to_string(SelectionStrategy s) {
    switch (s) {
    case SelectionStrategy::Dominance:
        return "dominance";
    case SelectionStrategy::Threshold:
        return "threshold";
    case SelectionStrategy::FirstStd:
        return "first-std";
    }
    return "dominance";
}

SelectionStrategy parse_selection_strategy(std::string_view name) {
    if (name == "dominance") {
        return SelectionStrategy::Dominance;
    }
    if (name == "threshold") {
        return SelectionStrategy::Threshold;
    }
    if (name == "first-std") {
        return SelectionStrategy::FirstStd;
    }
    throw InvalidArgument("unknown selection strategy '" + std::string(name) +
                          "' (expected dominance, threshold or first-std)");
}

void SelectionConfig::validate() const {
    if (!(alpha >= 0.0) || !(beta >= 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
        throw InvalidArgument("alpha and beta must be finite and non-negative");
    }
}

bool SelectionResult::contains(std::size_t layer) const { return std::ranges::binary_search(selected, layer); }

namespace {

double population_std(const std::vector<LayerScore>& rows, double LayerScore::*field) {
    const auto n = static_cast<double>(rows.size());
    double mean = 0.0;
    for (const auto& r : rows) {
        mean += r.*field;
    }
    mean /= n;
    double var = 0.0;
    for (const auto& r : rows) {
        const double dev = r.*field - mean;
        var += dev * dev;
    }
    return std::sqrt(var / n);
}

void check_table(const LayerMetricsTable& table) {
    if (table.rows.empty()) {
        throw InvalidArgument("metrics table has no layers");
    }
}

SelectionResult threshold_rule(const LayerMetricsTable& table, double alpha, double beta, SelectionStrategy tag) {
    check_table(table);
    SelectionResult out;
    out.strategy = tag;
    out.alpha = alpha;
    out.beta = beta;
    out.margins = compute_margins(table, alpha, beta);
    double max1 = table.rows.front().m1;
    double max2 = table.rows.front().m2;
    for (const auto& r : table.rows) {
        max1 = std::max(max1, r.m1);
        max2 = std::max(max2, r.m2);
    }
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& r = table.rows[i];
        if (r.m1 >= max1 - out.margins.delta_m1 && r.m2 >= max2 - out.margins.delta_m2) {
            out.selected.push_back(i + 1);
        }
    }
    if (out.selected.empty()) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < table.rows.size(); ++i) {
            if (table.rows[i].m1 + table.rows[i].m2 > table.rows[best].m1 + table.rows[best].m2) {
                best = i;
            }
        }
        out.selected.push_back(best + 1);
        out.fallback = true;
        log::warn("threshold selection admitted no layer; falling back to layer {}", best + 1);
    }
    return out;
}

} // namespace

Margins compute_margins(const LayerMetricsTable& table, double alpha, double beta) {
    check_table(table);
    Margins m;
    m.sigma_m1 = population_std(table.rows, &LayerScore::m1);
    m.sigma_m2 = population_std(table.rows, &LayerScore::m2);
    m.delta_m1 = alpha * m.sigma_m1;
    m.delta_m2 = beta * m.sigma_m2;
    return m;
}

SelectionResult select_dominance(const LayerMetricsTable& table, const SelectionConfig& config) {
    config.validate();
    check_table(table);
    SelectionResult out;
    out.strategy = SelectionStrategy::Dominance;
    out.alpha = config.alpha;
    out.beta = config.beta;
    out.margins = compute_margins(table, config.alpha, config.beta);
    const auto& rows = table.rows;
    for (std::size_t l = 0; l < rows.size(); ++l) {
        bool dominated = false;
        for (std::size_t o = 0; o < rows.size() && !dominated; ++o) {
            if (o == l) {
                continue;
            }
            dominated = rows[o].m1 >= rows[l].m1 + out.margins.delta_m1 &&
                        rows[o].m2 >= rows[l].m2 + out.margins.delta_m2 &&
                        (rows[o].m1 > rows[l].m1 || rows[o].m2 > rows[l].m2);
        }
        if (!dominated) {
            out.selected.push_back(l + 1);
        }
    }
    return out;
}

SelectionResult select_threshold(const LayerMetricsTable& table, const SelectionConfig& config) {
    config.validate();
    return threshold_rule(table, config.alpha, config.beta, SelectionStrategy::Threshold);
}

SelectionResult select_first_std(const LayerMetricsTable& table) {
    return threshold_rule(table, 1.0, 1.0, SelectionStrategy::FirstStd);
}

SelectionResult select_layers(const LayerMetricsTable& table, const SelectionConfig& config) {
    switch (config.strategy) {
    case SelectionStrategy::Dominance:
        return select_dominance(table, config);
    case SelectionStrategy::Threshold:
        return select_threshold(table, config);
    case SelectionStrategy::FirstStd:
        return select_first_std(table);
    }
    throw ContractViolation("unhandled selection strategy");
}

} // namespace laet
