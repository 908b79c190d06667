#pragma once

#include <cstddef>

// Row-major GEMM kernels; every routine accumulates into C.
namespace laet::kernels {

// C[m x n] += A[m x k] * B[k x n]
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c);

// C[m x k] += D[m x n] * B[k x n]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* d, const double* b, double* c);

// C[k x n] += A[m x k]^T * D[m x n]
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* d, double* c);

} // namespace laet::kernels
