#pragma once

#include <cstddef>

#include "nse/common.hpp"

// Dense and sparse inner loops shared by the autodiff ops, feature propagation
// and the power-flow assembly. Every kernel comes in a _serial reference
// version and an _omp version parallelized over independent output rows, so
// the two produce bit-identical results and the dispatching wrapper can pick
// either. tools/bench_kernels compares them.
namespace nse::kernels {

// Work threshold below which the dispatchers stay serial.
inline constexpr size_t kOmpThreshold = 1u << 15;

// C[n x m] = (accumulate ? C : 0) + A[n x k] * B[k x m]
void matmul_serial(const double* A, const double* B, double* C, int n, int k, int m,
                   bool accumulate = false);
void matmul_omp(const double* A, const double* B, double* C, int n, int k, int m,
                bool accumulate = false);
void matmul(const double* A, const double* B, double* C, int n, int k, int m,
            bool accumulate = false);

// C[k x m] += A^T * B  with A stored [n x k], B [n x m]
void matmul_tn_serial(const double* A, const double* B, double* C, int n, int k, int m,
                      bool accumulate = true);
void matmul_tn_omp(const double* A, const double* B, double* C, int n, int k, int m,
                   bool accumulate = true);
void matmul_tn(const double* A, const double* B, double* C, int n, int k, int m,
               bool accumulate = true);

// C[n x k] += A * B^T  with A stored [n x m], B [k x m]
void matmul_nt_serial(const double* A, const double* B, double* C, int n, int m, int k,
                      bool accumulate = true);
void matmul_nt_omp(const double* A, const double* B, double* C, int n, int m, int k,
                   bool accumulate = true);
void matmul_nt(const double* A, const double* B, double* C, int n, int m, int k,
               bool accumulate = true);

// out[i, :] = in[rows[i], :] for i in [0, n_out)
void gather_rows_serial(const double* in, const int* rows, double* out, int n_out, int c);
void gather_rows_omp(const double* in, const int* rows, double* out, int n_out, int c);
void gather_rows(const double* in, const int* rows, double* out, int n_out, int c);

// out[s, :] = (accumulate ? out[s, :] : 0) + sum over p in [offsets[s], offsets[s+1])
// of values[order ? order[p] : p, :]. Rows of one segment are summed in index
// order by a single thread, so scheduling cannot change the result.
void segment_sum_serial(const double* values, const int* order, const int* offsets,
                        int n_segments, int c, double* out, bool accumulate = false);
void segment_sum_omp(const double* values, const int* order, const int* offsets,
                     int n_segments, int c, double* out, bool accumulate = false);
void segment_sum(const double* values, const int* order, const int* offsets,
                 int n_segments, int c, double* out, bool accumulate = false);

// y[n x c] = M * x[M.cols x c] for CSR M
void spmm_serial(const Csr& M, const double* x, double* y, int c);
void spmm_omp(const Csr& M, const double* x, double* y, int c);
void spmm(const Csr& M, const double* x, double* y, int c);

// out[i] = a[i] op b[i]; the omp variants chunk the flat range.
void add_serial(const double* a, const double* b, double* out, size_t n);
void add_omp(const double* a, const double* b, double* out, size_t n);
void add(const double* a, const double* b, double* out, size_t n);
void mul_serial(const double* a, const double* b, double* out, size_t n);
void mul_omp(const double* a, const double* b, double* out, size_t n);
void mul(const double* a, const double* b, double* out, size_t n);

}  // namespace nse::kernels
