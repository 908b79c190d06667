#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace laet {

// Per-layer scores, both oriented higher-is-better (regression stores -RMSE).
struct LayerScore {
    double m1 = 0.0;
    double m2 = 0.0;
};

// One row per layer; row i describes layer i + 1.
struct LayerMetricsTable {
    std::string m1_name = "accuracy";
    std::string m2_name = "macro_f1";
    std::vector<LayerScore> rows;

    [[nodiscard]] std::size_t num_layers() const noexcept { return rows.size(); }
    [[nodiscard]] const LayerScore& layer(std::size_t l) const { return rows.at(l - 1); }
};

enum class SelectionStrategy { Dominance, Threshold, FirstStd };

std::string_view to_string(SelectionStrategy s);
SelectionStrategy parse_selection_strategy(std::string_view name); // dominance | threshold | first-std

struct SelectionConfig {
    double alpha = 0.5;
    double beta = 0.5;
    SelectionStrategy strategy = SelectionStrategy::Dominance;

    void validate() const;
};

struct Margins {
    double sigma_m1 = 0.0;
    double sigma_m2 = 0.0;
    double delta_m1 = 0.0;
    double delta_m2 = 0.0;
};

struct SelectionResult {
    std::vector<std::size_t> selected; // ascending, 1-based
    Margins margins;
    SelectionStrategy strategy = SelectionStrategy::Dominance;
    double alpha = 0.0;
    double beta = 0.0;
    bool fallback = false; // threshold rule was empty; best m1 + m2 layer used instead

    [[nodiscard]] bool contains(std::size_t layer) const;
};

// Population standard deviation of each column and delta = coefficient * sigma.
Margins compute_margins(const LayerMetricsTable& table, double alpha, double beta);

// Keeps layer l unless another layer beats it on both metrics by the margins,
// with at least one strict improvement.
SelectionResult select_dominance(const LayerMetricsTable& table, const SelectionConfig& config);

// Keeps layers within the margins of both column maxima; falls back to the
// single best m1 + m2 layer if nothing qualifies.
SelectionResult select_threshold(const LayerMetricsTable& table, const SelectionConfig& config);

// Threshold rule with alpha = beta = 1.
SelectionResult select_first_std(const LayerMetricsTable& table);

// Dispatches on config.strategy.
SelectionResult select_layers(const LayerMetricsTable& table, const SelectionConfig& config);

} // namespace laet
