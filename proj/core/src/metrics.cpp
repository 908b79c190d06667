#include "laet/metrics.hpp"

#include "laet/error.hpp"

#include <algorithm>
#include <cmath>

namespace laet::metrics {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
    if (a == 0 || b == 0) {
        throw InvalidArgument("metric inputs must be non-empty");
    }
    if (a != b) {
        throw InvalidArgument("metric inputs differ in length (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
    }
}

} // namespace

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes) : k_(num_classes), counts_(num_classes * num_classes, 0) {
    if (num_classes == 0) {
        throw InvalidArgument("confusion matrix needs at least one class");
    }
}

ConfusionMatrix ConfusionMatrix::from(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                                      std::size_t num_classes) {
    check_lengths(preds.size(), labels.size());
    const std::size_t seen = 1 + std::max(*std::ranges::max_element(preds), *std::ranges::max_element(labels));
    if (num_classes == 0) {
        num_classes = seen;
    } else if (seen > num_classes) {
        throw InvalidArgument("class index exceeds declared class count");
    }
    ConfusionMatrix cm(num_classes);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        cm.add(labels[i], preds[i]);
    }
    return cm;
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted) {
    if (truth >= k_ || predicted >= k_) {
        throw InvalidArgument("class index out of range");
    }
    ++counts_[truth * k_ + predicted];
    ++total_;
}

std::uint64_t ConfusionMatrix::count(std::size_t truth, std::size_t predicted) const {
    return counts_.at(truth * k_ + predicted);
}

std::uint64_t ConfusionMatrix::trace() const {
    std::uint64_t t = 0;
    for (std::size_t c = 0; c < k_; ++c) {
        t += counts_[c * k_ + c];
    }
    return t;
}

std::uint64_t ConfusionMatrix::true_count(std::size_t c) const {
    std::uint64_t t = 0;
    for (std::size_t p = 0; p < k_; ++p) {
        t += counts_[c * k_ + p];
    }
    return t;
}

std::uint64_t ConfusionMatrix::predicted_count(std::size_t c) const {
    std::uint64_t t = 0;
    for (std::size_t r = 0; r < k_; ++r) {
        t += counts_[r * k_ + c];
    }
    return t;
}

double accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> labels) {
    const auto cm = ConfusionMatrix::from(preds, labels);
    return static_cast<double>(cm.trace()) / static_cast<double>(cm.total());
}

double harmonic_f1(double precision, double recall) {
    if (precision + recall == 0.0) {
        return 0.0;
    }
    return 2.0 * precision * recall / (precision + recall);
}

F1Scores f1_scores(std::span<const std::size_t> preds, std::span<const std::size_t> labels, std::size_t num_classes) {
    const auto cm = ConfusionMatrix::from(preds, labels, num_classes);
    const std::size_t k = cm.num_classes();
    F1Scores out;
    out.per_class.resize(k, 0.0);
    std::uint64_t tp_all = 0;
    std::uint64_t fp_all = 0;
    std::uint64_t fn_all = 0;
    double macro_sum = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const std::uint64_t tp = cm.count(c, c);
        const std::uint64_t fp = cm.predicted_count(c) - tp;
        const std::uint64_t fn = cm.true_count(c) - tp;
        tp_all += tp;
        fp_all += fp;
        fn_all += fn;
        const double precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
        const double recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
        out.per_class[c] = harmonic_f1(precision, recall);
        if (cm.true_count(c) > 0) {
            macro_sum += out.per_class[c];
            ++present;
        }
    }
    out.macro = macro_sum / static_cast<double>(present);
    // Pooled over classes; in single-label multiclass fp_all == fn_all, so this is tp/total.
    out.micro = static_cast<double>(2 * tp_all) / static_cast<double>(2 * tp_all + fp_all + fn_all);
    return out;
}

double mcc(std::span<const std::size_t> preds, std::span<const std::size_t> labels, std::size_t num_classes) {
    const auto cm = ConfusionMatrix::from(preds, labels, num_classes);
    const std::size_t k = cm.num_classes();
    if (k <= 2) {
        if (k == 1) {
            return 0.0;
        }
        const double tp = static_cast<double>(cm.count(1, 1));
        const double tn = static_cast<double>(cm.count(0, 0));
        const double fp = static_cast<double>(cm.count(0, 1));
        const double fn = static_cast<double>(cm.count(1, 0));
        const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
        if (denom == 0.0) {
            return 0.0;
        }
        return (tp * tn - fp * fn) / std::sqrt(denom);
    }
    const double s = static_cast<double>(cm.total());
    const double c = static_cast<double>(cm.trace());
    double pt = 0.0;
    double pp = 0.0;
    double tt = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double p = static_cast<double>(cm.predicted_count(i));
        const double t = static_cast<double>(cm.true_count(i));
        pt += p * t;
        pp += p * p;
        tt += t * t;
    }
    const double denom = (s * s - pp) * (s * s - tt);
    if (denom == 0.0) {
        return 0.0;
    }
    return (c * s - pt) / std::sqrt(denom);
}

double rmse(std::span<const double> preds, std::span<const double> targets) {
    check_lengths(preds.size(), targets.size());
    double total = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double e = preds[i] - targets[i];
        total += e * e;
    }
    return std::sqrt(total / static_cast<double>(preds.size()));
}

} // namespace laet::metrics
