#include "laet/optim.hpp"

#include <cmath>
#include <utility>

namespace laet {

double global_grad_norm(std::span<Tensor* const> params) {
    double sq = 0.0;
    for (const Tensor* p : params) {
        if (!p->has_grad()) {
            continue;
        }
        for (double g : p->grad()) {
            sq += g * g;
        }
    }
    return std::sqrt(sq);
}

double clip_factor(double norm, double max_norm) {
    if (max_norm <= 0.0 || !(norm > max_norm)) {
        return 1.0;
    }
    return max_norm / norm;
}

void sgd_step(std::span<Tensor* const> params, double lr, double weight_decay, double clip) {
    for (Tensor* p : params) {
        if (!p->requires_grad() || !p->has_grad()) {
            p->clear_grad();
            continue;
        }
        auto values = p->data();
        const auto grad = std::as_const(*p).grad();
        for (std::size_t i = 0; i < values.size(); ++i) {
            values[i] -= lr * (clip * grad[i] + weight_decay * values[i]);
        }
        p->clear_grad();
    }
}

double scheduled_rate(double eta, std::size_t t, double t0) {
    if (t0 <= 0.0) {
        return eta;
    }
    return eta / (1.0 + static_cast<double>(t) / t0);
}

} // namespace laet
