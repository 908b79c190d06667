#include "laet/numerics.hpp"

#include "laet/error.hpp"

#include <algorithm>
#include <cmath>

namespace laet::numerics {

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) {
        throw InvalidArgument("softmax of an empty vector");
    }
    if (!std::ranges::all_of(logits, [](double v) { return std::isfinite(v); })) {
        throw InvalidArgument("softmax input must be finite");
    }
    const double max_logit = *std::ranges::max_element(logits);
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - max_logit);
        total += out[i];
    }
    for (double& v : out) {
        v /= total;
    }
    return out;
}

double cross_entropy(std::span<const double> probs, std::size_t label) {
    if (label >= probs.size()) {
        throw InvalidArgument("label " + std::to_string(label) + " out of range for " + std::to_string(probs.size()) +
                              " classes");
    }
    double total = 0.0;
    for (double p : probs) {
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw InvalidArgument("probabilities must sum to 1");
    }
    return -std::log(std::max(probs[label], kLogClamp));
}

double cross_entropy(std::span<const std::vector<double>> probs, std::span<const std::size_t> labels) {
    if (probs.empty() || probs.size() != labels.size()) {
        throw InvalidArgument("cross_entropy needs one label per non-empty probability row");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        total += cross_entropy(probs[i], labels[i]);
    }
    return total / static_cast<double>(probs.size());
}

std::size_t argmax(std::span<const double> values) {
    if (values.empty()) {
        throw InvalidArgument("argmax of an empty vector");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) {
            best = i;
        }
    }
    return best;
}

Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x, double h) {
    if (!(h > 0.0)) {
        throw InvalidArgument("finite-difference step must be positive");
    }
    Tensor probe = x;
    probe.clear_grad();
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double original = probe[i];
        probe[i] = original + h;
        const double up = f(probe);
        probe[i] = original - h;
        const double down = f(probe);
        probe[i] = original;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw NumericError("non-finite function value during finite differencing");
        }
        out[i] = (up - down) / (2.0 * h);
    }
    return out;
}

} // namespace laet::numerics
