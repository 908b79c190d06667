#include "laet/kernels.hpp"

#include <algorithm>
#include <vector>

namespace laet::kernels {

namespace {

// GCC/Clang vector extension; lowers to scalar code on targets without SIMD.
using Vec = double __attribute__((vector_size(32)));
constexpr std::size_t kLanes = sizeof(Vec) / sizeof(double);

// 6 x 8 keeps twelve accumulators plus two B vectors within 16 registers.
constexpr std::size_t kTileRows = 6;
constexpr std::size_t kTileCols = 8;

// C[R x W] += sum over t < depth of A(r, t) * B[t, :], where A(r, t) is
// a[r * rs + t * ts]. Every output sums its terms in ascending t.

template <std::size_t R, std::size_t W>
void tile(std::size_t depth, std::size_t n, const double* a, std::size_t rs, std::size_t ts, const double* b,
          double* c) {
    constexpr std::size_t V = W / kLanes;
    Vec acc[R][V] = {};
    for (std::size_t t = 0; t < depth; ++t) {
        const double* bt = b + t * n;
        Vec bv[V];
        for (std::size_t v = 0; v < V; ++v) {
            __builtin_memcpy(&bv[v], bt + v * kLanes, sizeof(Vec));
        }
        for (std::size_t r = 0; r < R; ++r) {
            const double ar = a[r * rs + t * ts];
            for (std::size_t v = 0; v < V; ++v) {
                acc[r][v] += ar * bv[v];
            }
        }
    }
    for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t v = 0; v < V; ++v) {
            for (std::size_t j = 0; j < kLanes; ++j) {
                c[r * n + v * kLanes + j] += acc[r][v][j];
            }
        }
    }
}

void edge(std::size_t rows, std::size_t width, std::size_t depth, std::size_t n, const double* a, std::size_t rs,
          std::size_t ts, const double* b, double* c) {
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < width; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < depth; ++t) {
                acc += a[r * rs + t * ts] * b[t * n + j];
            }
            c[r * n + j] += acc;
        }
    }
}

void strided(std::size_t m, std::size_t depth, std::size_t n, const double* a, std::size_t rs, std::size_t ts,
             const double* b, double* c) {
    const std::size_t full_rows = m - m % kTileRows;
    const std::size_t full_cols = n - n % kTileCols;
    for (std::size_t i = 0; i < m; i += kTileRows) {
        const std::size_t rows = std::min(kTileRows, m - i);
        const double* ai = a + i * rs;
        double* ci = c + i * n;
        for (std::size_t j = 0; j < full_cols; j += kTileCols) {
            if (i < full_rows) {
                tile<kTileRows, kTileCols>(depth, n, ai, rs, ts, b + j, ci + j);
            } else {
                edge(rows, kTileCols, depth, n, ai, rs, ts, b + j, ci + j);
            }
        }
        if (full_cols < n) {
            edge(rows, n - full_cols, depth, n, ai, rs, ts, b + full_cols, ci + full_cols);
        }
    }
}

} // namespace

void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c) {
    strided(m, k, n, a, k, 1, b, c);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* d, const double* b, double* c) {
    // Transpose B once so the inner loop streams contiguously.
    std::vector<double> bt(n * k);
    for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t j = 0; j < n; ++j) {
            bt[j * k + p] = b[p * n + j];
        }
    }
    gemm_nn(m, n, k, d, bt.data(), c);
}

void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* d, double* c) {
    strided(k, m, n, a, 1, k, d, c);
}

} // namespace laet::kernels
