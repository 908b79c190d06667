#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

// Evaluation metrics over prediction/label sequences. Every function throws
// InvalidArgument on empty input or mismatched lengths.
namespace laet::metrics {

// k x k counts; rows are true classes, columns predicted classes.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t num_classes);

    // k defaults to 1 + the largest index seen in either sequence.
    static ConfusionMatrix from(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                                std::size_t num_classes = 0);

    void add(std::size_t truth, std::size_t predicted);

    [[nodiscard]] std::size_t num_classes() const noexcept { return k_; }
    [[nodiscard]] std::uint64_t count(std::size_t truth, std::size_t predicted) const;
    [[nodiscard]] std::uint64_t total() const noexcept { return total_; }
    [[nodiscard]] std::uint64_t trace() const;
    [[nodiscard]] std::uint64_t true_count(std::size_t c) const;      // row sum
    [[nodiscard]] std::uint64_t predicted_count(std::size_t c) const; // column sum

private:
    std::size_t k_;
    std::uint64_t total_ = 0;
    std::vector<std::uint64_t> counts_;
};

double accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> labels);

struct F1Scores {
    double micro = 0.0;
    double macro = 0.0;                // mean over classes present in the labels
    std::vector<double> per_class;     // one entry per class index
};

F1Scores f1_scores(std::span<const std::size_t> preds, std::span<const std::size_t> labels, std::size_t num_classes = 0);

// Binary MCC for two classes (class 1 positive); Gorodkin's multiclass
// generalization otherwise. A zero denominator yields 0.
double mcc(std::span<const std::size_t> preds, std::span<const std::size_t> labels, std::size_t num_classes = 0);

double rmse(std::span<const double> preds, std::span<const double> targets);

// 2PR/(P+R) with 0 when P + R == 0.
double harmonic_f1(double precision, double recall);

} // namespace laet::metrics
