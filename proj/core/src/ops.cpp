#include "laet/ops.hpp"

#include "laet/error.hpp"
#include "laet/kernels.hpp"
#include "laet/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace laet::ops {

namespace {

void require(bool ok, const char* op, const std::string& detail) {
    if (!ok) {
        throw ContractViolation(std::string(op) + ": " + detail);
    }
}

Shape matrix_shape(std::size_t rows, std::size_t cols) { return Shape{rows, cols}; }

} // namespace

Var matmul(Graph& g, Var a, Var b) {
    const Tensor& A = g.value(a);
    const Tensor& B = g.value(b);
    const std::size_t m = A.rows();
    const std::size_t k = A.cols();
    const std::size_t n = B.cols();
    require(B.rows() == k, "matmul",
            "inner extents differ: " + shape_string(A.shape()) + " x " + shape_string(B.shape()));
    Tensor C(matrix_shape(m, n));
    kernels::gemm_nn(m, k, n, A.data().data(), B.data().data(), C.data().data());
    return g.record("matmul", {a, b}, std::move(C), [a, b, m, k, n](Graph& g, std::span<const double> dC) {
        if (g.needs_grad(a)) {
            kernels::gemm_nt(m, n, k, dC.data(), g.value(b).data().data(), g.grad_of(a).data());
        }
        if (g.needs_grad(b)) {
            kernels::gemm_tn(m, k, n, g.value(a).data().data(), dC.data(), g.grad_of(b).data());
        }
    });
}

Var add(Graph& g, Var a, Var b) {
    const Tensor& A = g.value(a);
    const Tensor& B = g.value(b);
    require(A.size() == B.size() && A.cols() == B.cols(), "add",
            shape_string(A.shape()) + " vs " + shape_string(B.shape()));
    Tensor C(A.shape());
    for (std::size_t i = 0; i < C.size(); ++i) {
        C[i] = A[i] + B[i];
    }
    return g.record("add", {a, b}, std::move(C), [a, b](Graph& g, std::span<const double> dC) {
        for (Var v : {a, b}) {
            if (g.needs_grad(v)) {
                auto d = g.grad_of(v);
                for (std::size_t i = 0; i < d.size(); ++i) {
                    d[i] += dC[i];
                }
            }
        }
    });
}

Var mul(Graph& g, Var a, Var b) {
    const Tensor& A = g.value(a);
    const Tensor& B = g.value(b);
    require(A.size() == B.size(), "mul", shape_string(A.shape()) + " vs " + shape_string(B.shape()));
    Tensor C(A.shape());
    for (std::size_t i = 0; i < C.size(); ++i) {
        C[i] = A[i] * B[i];
    }
    return g.record("mul", {a, b}, std::move(C), [a, b](Graph& g, std::span<const double> dC) {
        const Tensor& A = g.value(a);
        const Tensor& B = g.value(b);
        if (g.needs_grad(a)) {
            auto d = g.grad_of(a);
            for (std::size_t i = 0; i < d.size(); ++i) {
                d[i] += dC[i] * B[i];
            }
        }
        if (g.needs_grad(b)) {
            auto d = g.grad_of(b);
            for (std::size_t i = 0; i < d.size(); ++i) {
                d[i] += dC[i] * A[i];
            }
        }
    });
}

Var scale(Graph& g, Var x, double factor) {
    const Tensor& X = g.value(x);
    Tensor Y(X.shape());
    for (std::size_t i = 0; i < Y.size(); ++i) {
        Y[i] = X[i] * factor;
    }
    return g.record("scale", {x}, std::move(Y), [x, factor](Graph& g, std::span<const double> dY) {
        auto d = g.grad_of(x);
        for (std::size_t i = 0; i < d.size(); ++i) {
            d[i] += factor * dY[i];
        }
    });
}

Var add_bias(Graph& g, Var x, Var bias) {
    const Tensor& X = g.value(x);
    const Tensor& b = g.value(bias);
    const std::size_t m = X.rows();
    const std::size_t n = X.cols();
    require(b.size() == n, "add_bias", "bias length " + std::to_string(b.size()) + " for width " + std::to_string(n));
    Tensor Y(matrix_shape(m, n));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            Y.at(i, j) = X.at(i, j) + b[j];
        }
    }
    return g.record("add_bias", {x, bias}, std::move(Y), [x, bias, m, n](Graph& g, std::span<const double> dY) {
        if (g.needs_grad(x)) {
            auto d = g.grad_of(x);
            for (std::size_t i = 0; i < d.size(); ++i) {
                d[i] += dY[i];
            }
        }
        if (g.needs_grad(bias)) {
            auto d = g.grad_of(bias);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    d[j] += dY[i * n + j];
                }
            }
        }
    });
}

Var standardize(Graph& g, Var x, std::span<const double> mean, std::span<const double> inv_std) {
    const Tensor& X = g.value(x);
    const std::size_t m = X.rows();
    const std::size_t n = X.cols();
    require(mean.size() == n && inv_std.size() == n, "standardize",
            "statistics of length " + std::to_string(mean.size()) + " for width " + std::to_string(n));
    Tensor Y(matrix_shape(m, n));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            Y.at(i, j) = (X.at(i, j) - mean[j]) * inv_std[j];
        }
    }
    std::vector<double> scale(inv_std.begin(), inv_std.end());
    return g.record("standardize", {x}, std::move(Y), [x, n, scale = std::move(scale)](Graph& g, std::span<const double> dY) {
        auto d = g.grad_of(x);
        for (std::size_t i = 0; i < d.size(); ++i) {
            d[i] += dY[i] * scale[i % n];
        }
    });
}

Var linear(Graph& g, Var x, Var weight, Var bias) { return add_bias(g, matmul(g, x, weight), bias); }

Var relu(Graph& g, Var x) {
    const Tensor& X = g.value(x);
    Tensor Y(X.shape());
    for (std::size_t i = 0; i < Y.size(); ++i) {
        Y[i] = X[i] > 0.0 ? X[i] : 0.0;
    }
    return g.record("relu", {x}, std::move(Y), [x](Graph& g, std::span<const double> dY) {
        const Tensor& X = g.value(x);
        auto d = g.grad_of(x);
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (X[i] > 0.0) {
                d[i] += dY[i];
            }
        }
    });
}

Var gelu(Graph& g, Var x) {
    const Tensor& X = g.value(x);
    Tensor Y(X.shape());
    for (std::size_t i = 0; i < Y.size(); ++i) {
        Y[i] = 0.5 * X[i] * (1.0 + std::erf(X[i] * std::numbers::sqrt2 / 2.0));
    }
    return g.record("gelu", {x}, std::move(Y), [x](Graph& g, std::span<const double> dY) {
        const Tensor& X = g.value(x);
        auto d = g.grad_of(x);
        const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
        for (std::size_t i = 0; i < d.size(); ++i) {
            const double v = X[i];
            const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
            const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
            d[i] += dY[i] * (cdf + v * pdf);
        }
    });
}

Var layer_norm(Graph& g, Var x, Var gain, Var bias, double eps) {
    const Tensor& X = g.value(x);
    const Tensor& G = g.value(gain);
    const Tensor& Bv = g.value(bias);
    const std::size_t m = X.rows();
    const std::size_t n = X.cols();
    require(G.size() == n && Bv.size() == n, "layer_norm", "parameter width mismatch");

    Tensor Y(matrix_shape(m, n));
    std::vector<double> xhat(m * n);
    std::vector<double> inv_std(m);
    for (std::size_t i = 0; i < m; ++i) {
        const auto row = X.row(i);
        double mean = 0.0;
        for (double v : row) {
            mean += v;
        }
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double v : row) {
            var += (v - mean) * (v - mean);
        }
        var /= static_cast<double>(n);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) {
            const double h = (row[j] - mean) * inv_std[i];
            xhat[i * n + j] = h;
            Y.at(i, j) = G[j] * h + Bv[j];
        }
    }
    return g.record("layer_norm", {x, gain, bias}, std::move(Y),
                    [x, gain, bias, m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                        Graph& g, std::span<const double> dY) {
                        if (g.needs_grad(gain)) {
                            auto d = g.grad_of(gain);
                            for (std::size_t i = 0; i < m; ++i) {
                                for (std::size_t j = 0; j < n; ++j) {
                                    d[j] += dY[i * n + j] * xhat[i * n + j];
                                }
                            }
                        }
                        if (g.needs_grad(bias)) {
                            auto d = g.grad_of(bias);
                            for (std::size_t i = 0; i < m; ++i) {
                                for (std::size_t j = 0; j < n; ++j) {
                                    d[j] += dY[i * n + j];
                                }
                            }
                        }
                        if (g.needs_grad(x)) {
                            const Tensor& G = g.value(gain);
                            auto d = g.grad_of(x);
                            std::vector<double> dxhat(n);
                            for (std::size_t i = 0; i < m; ++i) {
                                double mean_d = 0.0;
                                double mean_dx = 0.0;
                                for (std::size_t j = 0; j < n; ++j) {
                                    dxhat[j] = dY[i * n + j] * G[j];
                                    mean_d += dxhat[j];
                                    mean_dx += dxhat[j] * xhat[i * n + j];
                                }
                                mean_d /= static_cast<double>(n);
                                mean_dx /= static_cast<double>(n);
                                for (std::size_t j = 0; j < n; ++j) {
                                    d[i * n + j] += inv_std[i] * (dxhat[j] - mean_d - xhat[i * n + j] * mean_dx);
                                }
                            }
                        }
                    });
}

Var embedding(Graph& g, Var table, std::span<const std::size_t> ids) {
    const Tensor& T = g.value(table);
    const std::size_t d = T.cols();
    const std::size_t vocab = T.rows();
    Tensor Y(matrix_shape(ids.size(), d));
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= vocab) {
            throw InvalidArgument("token id " + std::to_string(ids[i]) + " outside vocabulary of size " +
                                  std::to_string(vocab));
        }
        std::ranges::copy(T.row(ids[i]), Y.row(i).begin());
    }
    std::vector<std::size_t> saved(ids.begin(), ids.end());
    return g.record("embedding", {table}, std::move(Y), [table, d, saved = std::move(saved)](Graph& g, std::span<const double> dY) {
        auto dT = g.grad_of(table);
        for (std::size_t i = 0; i < saved.size(); ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                dT[saved[i] * d + j] += dY[i * d + j];
            }
        }
    });
}

Var leading_rows(Graph& g, Var table, std::size_t n) {
    const Tensor& T = g.value(table);
    require(n >= 1 && n <= T.rows(), "leading_rows", "row count out of range");
    const std::size_t d = T.cols();
    Tensor Y(matrix_shape(n, d), std::vector<double>(T.data().begin(), T.data().begin() + static_cast<std::ptrdiff_t>(n * d)));
    return g.record("leading_rows", {table}, std::move(Y), [table](Graph& g, std::span<const double> dY) {
        auto dT = g.grad_of(table);
        for (std::size_t i = 0; i < dY.size(); ++i) {
            dT[i] += dY[i];
        }
    });
}

Var causal_attention(Graph& g, Var q, Var k, Var v, std::size_t heads) {
    const Tensor& Q = g.value(q);
    const Tensor& K = g.value(k);
    const Tensor& V = g.value(v);
    const std::size_t n = Q.rows();
    const std::size_t d = Q.cols();
    require(K.rows() == n && V.rows() == n && K.cols() == d && V.cols() == d, "causal_attention", "projection shapes differ");
    require(heads >= 1 && d % heads == 0, "causal_attention", "heads must divide width");
    const std::size_t dh = d / heads;
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    // probs[h][i][j] for j <= i, stored densely as heads x n x n.
    std::vector<double> probs(heads * n * n, 0.0);
    Tensor Y(matrix_shape(n, d));
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * dh;
        for (std::size_t i = 0; i < n; ++i) {
            double* p = probs.data() + (h * n + i) * n;
            const double* qi = Q.data().data() + i * d + off;
            double max_score = -INFINITY;
            for (std::size_t j = 0; j <= i; ++j) {
                const double* kj = K.data().data() + j * d + off;
                double s = 0.0;
                for (std::size_t t = 0; t < dh; ++t) {
                    s += qi[t] * kj[t];
                }
                p[j] = s * inv_scale;
                max_score = std::max(max_score, p[j]);
            }
            double total = 0.0;
            for (std::size_t j = 0; j <= i; ++j) {
                p[j] = std::exp(p[j] - max_score);
                total += p[j];
            }
            double* yi = Y.data().data() + i * d + off;
            for (std::size_t j = 0; j <= i; ++j) {
                p[j] /= total;
                const double* vj = V.data().data() + j * d + off;
                for (std::size_t t = 0; t < dh; ++t) {
                    yi[t] += p[j] * vj[t];
                }
            }
        }
    }
    return g.record(
        "causal_attention", {q, k, v}, std::move(Y),
        [q, k, v, n, d, dh, heads, inv_scale, probs = std::move(probs)](Graph& g, std::span<const double> dY) {
            const double* Qd = g.value(q).data().data();
            const double* Kd = g.value(k).data().data();
            const double* Vd = g.value(v).data().data();
            double* dQ = g.needs_grad(q) ? g.grad_of(q).data() : nullptr;
            double* dK = g.needs_grad(k) ? g.grad_of(k).data() : nullptr;
            double* dV = g.needs_grad(v) ? g.grad_of(v).data() : nullptr;
            std::vector<double> dp(n);
            for (std::size_t h = 0; h < heads; ++h) {
                const std::size_t off = h * dh;
                for (std::size_t i = 0; i < n; ++i) {
                    const double* p = probs.data() + (h * n + i) * n;
                    const double* dyi = dY.data() + i * d + off;
                    double weighted = 0.0;
                    for (std::size_t j = 0; j <= i; ++j) {
                        const double* vj = Vd + j * d + off;
                        double s = 0.0;
                        for (std::size_t t = 0; t < dh; ++t) {
                            s += dyi[t] * vj[t];
                        }
                        dp[j] = s;
                        weighted += p[j] * s;
                        if (dV != nullptr) {
                            double* dvj = dV + j * d + off;
                            for (std::size_t t = 0; t < dh; ++t) {
                                dvj[t] += p[j] * dyi[t];
                            }
                        }
                    }
                    if (dQ == nullptr && dK == nullptr) {
                        continue;
                    }
                    const double* qi = Qd + i * d + off;
                    for (std::size_t j = 0; j <= i; ++j) {
                        const double ds = p[j] * (dp[j] - weighted) * inv_scale;
                        if (ds == 0.0) {
                            continue;
                        }
                        const double* kj = Kd + j * d + off;
                        if (dQ != nullptr) {
                            double* dqi = dQ + i * d + off;
                            for (std::size_t t = 0; t < dh; ++t) {
                                dqi[t] += ds * kj[t];
                            }
                        }
                        if (dK != nullptr) {
                            double* dkj = dK + j * d + off;
                            for (std::size_t t = 0; t < dh; ++t) {
                                dkj[t] += ds * qi[t];
                            }
                        }
                    }
                }
            }
        });
}

Var select_row(Graph& g, Var x, std::size_t row) {
    const Tensor& X = g.value(x);
    require(row < X.rows(), "select_row", "row " + std::to_string(row) + " out of range");
    const std::size_t n = X.cols();
    Tensor Y(matrix_shape(1, n));
    std::ranges::copy(X.row(row), Y.data().begin());
    return g.record("select_row", {x}, std::move(Y), [x, row, n](Graph& g, std::span<const double> dY) {
        auto d = g.grad_of(x);
        for (std::size_t j = 0; j < n; ++j) {
            d[row * n + j] += dY[j];
        }
    });
}

namespace {

Var reduce_rows(Graph& g, Var x, bool average) {
    const Tensor& X = g.value(x);
    const std::size_t m = X.rows();
    const std::size_t n = X.cols();
    const double factor = average ? 1.0 / static_cast<double>(m) : 1.0;
    Tensor Y(matrix_shape(1, n));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            Y[j] += X.at(i, j);
        }
    }
    if (average) {
        for (std::size_t j = 0; j < n; ++j) {
            Y[j] *= factor;
        }
    }
    return g.record(average ? "mean_rows" : "sum_rows", {x}, std::move(Y),
                    [x, m, n, factor](Graph& g, std::span<const double> dY) {
                        auto d = g.grad_of(x);
                        for (std::size_t i = 0; i < m; ++i) {
                            for (std::size_t j = 0; j < n; ++j) {
                                d[i * n + j] += factor * dY[j];
                            }
                        }
                    });
}

} // namespace

Var sum_rows(Graph& g, Var x) { return reduce_rows(g, x, false); }

Var mean_rows(Graph& g, Var x) { return reduce_rows(g, x, true); }

Var sum(Graph& g, Var x) {
    const Tensor& X = g.value(x);
    double total = 0.0;
    for (double v : X.data()) {
        total += v;
    }
    return g.record("sum", {x}, Tensor::scalar(total), [x](Graph& g, std::span<const double> dY) {
        auto d = g.grad_of(x);
        for (double& v : d) {
            v += dY[0];
        }
    });
}

Var mean_of(Graph& g, std::span<const Var> scalars) {
    require(!scalars.empty(), "mean_of", "no terms");
    double total = 0.0;
    for (Var s : scalars) {
        require(g.value(s).size() == 1, "mean_of", "terms must be scalars");
        total += g.value(s)[0];
    }
    const double inv = 1.0 / static_cast<double>(scalars.size());
    std::vector<Var> inputs(scalars.begin(), scalars.end());
    return g.record("mean_of", inputs, Tensor::scalar(total * inv), [inputs, inv](Graph& g, std::span<const double> dY) {
        for (Var s : inputs) {
            if (g.needs_grad(s)) {
                g.grad_of(s)[0] += inv * dY[0];
            }
        }
    });
}

Var softmax_cross_entropy(Graph& g, Var logits, std::span<const std::size_t> labels) {
    const Tensor& Z = g.value(logits);
    const std::size_t m = Z.rows();
    const std::size_t k = Z.cols();
    require(labels.size() == m, "softmax_cross_entropy", "one label per row required");
    std::vector<double> probs(m * k);
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        if (labels[i] >= k) {
            throw InvalidArgument("label " + std::to_string(labels[i]) + " out of range for " + std::to_string(k) + " classes");
        }
        const auto p = numerics::softmax(Z.row(i));
        std::ranges::copy(p, probs.begin() + static_cast<std::ptrdiff_t>(i * k));
        total += -std::log(std::max(p[labels[i]], numerics::kLogClamp));
    }
    const double inv_m = 1.0 / static_cast<double>(m);
    std::vector<std::size_t> saved(labels.begin(), labels.end());
    return g.record("softmax_cross_entropy", {logits}, Tensor::scalar(total * inv_m),
                    [logits, m, k, inv_m, probs = std::move(probs), saved = std::move(saved)](
                        Graph& g, std::span<const double> dY) {
                        auto d = g.grad_of(logits);
                        for (std::size_t i = 0; i < m; ++i) {
                            const double* p = probs.data() + i * k;
                            if (p[saved[i]] < numerics::kLogClamp) {
                                continue; // clamped branch is constant
                            }
                            for (std::size_t j = 0; j < k; ++j) {
                                const double target = j == saved[i] ? 1.0 : 0.0;
                                d[i * k + j] += dY[0] * inv_m * (p[j] - target);
                            }
                        }
                    });
}

Var mse(Graph& g, Var predictions, std::span<const double> targets) {
    const Tensor& P = g.value(predictions);
    require(P.size() == targets.size(), "mse", "one target per prediction required");
    const double inv_m = 1.0 / static_cast<double>(P.size());
    double total = 0.0;
    for (std::size_t i = 0; i < P.size(); ++i) {
        const double e = P[i] - targets[i];
        total += e * e;
    }
    std::vector<double> saved(targets.begin(), targets.end());
    return g.record("mse", {predictions}, Tensor::scalar(total * inv_m),
                    [predictions, inv_m, saved = std::move(saved)](Graph& g, std::span<const double> dY) {
                        const Tensor& P = g.value(predictions);
                        auto d = g.grad_of(predictions);
                        for (std::size_t i = 0; i < d.size(); ++i) {
                            d[i] += dY[0] * 2.0 * inv_m * (P[i] - saved[i]);
                        }
                    });
}

} // namespace laet::ops
