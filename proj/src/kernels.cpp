#include "nse/kernels.hpp"

#include <cstring>

namespace nse::kernels {

namespace {

// Shared element loops. Both the serial and omp entry points funnel through
// these so the floating-point evaluation order per output row is identical.
inline void matmul_row(const double* A, const double* B, double* C, int i, int k, int m,
                       bool accumulate) {
  double* c = C + static_cast<size_t>(i) * m;
  if (!accumulate) std::memset(c, 0, sizeof(double) * m);
  const double* a = A + static_cast<size_t>(i) * k;
  for (int l = 0; l < k; ++l) {
    const double av = a[l];
    const double* b = B + static_cast<size_t>(l) * m;
    for (int j = 0; j < m; ++j) c[j] += av * b[j];
  }
}

inline void matmul_tn_row(const double* A, const double* B, double* C, int i, int n, int k,
                          int m, bool accumulate) {
  // row i of C = column i of A dotted against all of B
  double* c = C + static_cast<size_t>(i) * m;
  if (!accumulate) std::memset(c, 0, sizeof(double) * m);
  for (int r = 0; r < n; ++r) {
    const double av = A[static_cast<size_t>(r) * k + i];
    const double* b = B + static_cast<size_t>(r) * m;
    for (int j = 0; j < m; ++j) c[j] += av * b[j];
  }
}

inline void matmul_nt_row(const double* A, const double* B, double* C, int i, int m, int k,
                          bool accumulate) {
  const double* a = A + static_cast<size_t>(i) * m;
  double* c = C + static_cast<size_t>(i) * k;
  for (int j = 0; j < k; ++j) {
    const double* b = B + static_cast<size_t>(j) * m;
    double s = accumulate ? c[j] : 0.0;
    for (int l = 0; l < m; ++l) s += a[l] * b[l];
    c[j] = s;
  }
}

inline void segment_row(const double* values, const int* order, const int* offsets, int s,
                        int c, double* out, bool accumulate) {
  double* o = out + static_cast<size_t>(s) * c;
  if (!accumulate) std::memset(o, 0, sizeof(double) * c);
  for (int p = offsets[s]; p < offsets[s + 1]; ++p) {
    const int r = order ? order[p] : p;
    const double* v = values + static_cast<size_t>(r) * c;
    for (int j = 0; j < c; ++j) o[j] += v[j];
  }
}

inline void spmm_row(const Csr& M, const double* x, double* y, int i, int c) {
  double* o = y + static_cast<size_t>(i) * c;
  std::memset(o, 0, sizeof(double) * c);
  for (int p = M.ptr[i]; p < M.ptr[i + 1]; ++p) {
    const double w = M.val[p];
    const double* v = x + static_cast<size_t>(M.idx[p]) * c;
    for (int j = 0; j < c; ++j) o[j] += w * v[j];
  }
}

}  // namespace

void matmul_serial(const double* A, const double* B, double* C, int n, int k, int m,
                   bool accumulate) {
  for (int i = 0; i < n; ++i) matmul_row(A, B, C, i, k, m, accumulate);
}

void matmul_omp(const double* A, const double* B, double* C, int n, int k, int m,
                bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) matmul_row(A, B, C, i, k, m, accumulate);
}

void matmul(const double* A, const double* B, double* C, int n, int k, int m,
            bool accumulate) {
  if (static_cast<size_t>(n) * k * m >= kOmpThreshold)
    matmul_omp(A, B, C, n, k, m, accumulate);
  else
    matmul_serial(A, B, C, n, k, m, accumulate);
}

void matmul_tn_serial(const double* A, const double* B, double* C, int n, int k, int m,
                      bool accumulate) {
  for (int i = 0; i < k; ++i) matmul_tn_row(A, B, C, i, n, k, m, accumulate);
}

void matmul_tn_omp(const double* A, const double* B, double* C, int n, int k, int m,
                   bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < k; ++i) matmul_tn_row(A, B, C, i, n, k, m, accumulate);
}

void matmul_tn(const double* A, const double* B, double* C, int n, int k, int m,
               bool accumulate) {
  if (static_cast<size_t>(n) * k * m >= kOmpThreshold)
    matmul_tn_omp(A, B, C, n, k, m, accumulate);
  else
    matmul_tn_serial(A, B, C, n, k, m, accumulate);
}

void matmul_nt_serial(const double* A, const double* B, double* C, int n, int m, int k,
                      bool accumulate) {
  for (int i = 0; i < n; ++i) matmul_nt_row(A, B, C, i, m, k, accumulate);
}

void matmul_nt_omp(const double* A, const double* B, double* C, int n, int m, int k,
                   bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) matmul_nt_row(A, B, C, i, m, k, accumulate);
}

void matmul_nt(const double* A, const double* B, double* C, int n, int m, int k,
               bool accumulate) {
  if (static_cast<size_t>(n) * k * m >= kOmpThreshold)
    matmul_nt_omp(A, B, C, n, m, k, accumulate);
  else
    matmul_nt_serial(A, B, C, n, m, k, accumulate);
}

void gather_rows_serial(const double* in, const int* rows, double* out, int n_out, int c) {
  for (int i = 0; i < n_out; ++i)
    std::memcpy(out + static_cast<size_t>(i) * c, in + static_cast<size_t>(rows[i]) * c,
                sizeof(double) * c);
}

void gather_rows_omp(const double* in, const int* rows, double* out, int n_out, int c) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n_out; ++i)
    std::memcpy(out + static_cast<size_t>(i) * c, in + static_cast<size_t>(rows[i]) * c,
                sizeof(double) * c);
}

void gather_rows(const double* in, const int* rows, double* out, int n_out, int c) {
  if (static_cast<size_t>(n_out) * c >= kOmpThreshold)
    gather_rows_omp(in, rows, out, n_out, c);
  else
    gather_rows_serial(in, rows, out, n_out, c);
}

void segment_sum_serial(const double* values, const int* order, const int* offsets,
                        int n_segments, int c, double* out, bool accumulate) {
  for (int s = 0; s < n_segments; ++s) segment_row(values, order, offsets, s, c, out, accumulate);
}

void segment_sum_omp(const double* values, const int* order, const int* offsets,
                     int n_segments, int c, double* out, bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int s = 0; s < n_segments; ++s) segment_row(values, order, offsets, s, c, out, accumulate);
}

void segment_sum(const double* values, const int* order, const int* offsets, int n_segments,
                 int c, double* out, bool accumulate) {
  const size_t work = n_segments ? static_cast<size_t>(offsets[n_segments]) * c : 0;
  if (work >= kOmpThreshold)
    segment_sum_omp(values, order, offsets, n_segments, c, out, accumulate);
  else
    segment_sum_serial(values, order, offsets, n_segments, c, out, accumulate);
}

void spmm_serial(const Csr& M, const double* x, double* y, int c) {
  for (int i = 0; i < M.rows; ++i) spmm_row(M, x, y, i, c);
}

void spmm_omp(const Csr& M, const double* x, double* y, int c) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < M.rows; ++i) spmm_row(M, x, y, i, c);
}

void spmm(const Csr& M, const double* x, double* y, int c) {
  if (M.val.size() * c >= kOmpThreshold)
    spmm_omp(M, x, y, c);
  else
    spmm_serial(M, x, y, c);
}

void add_serial(const double* a, const double* b, double* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void add_omp(const double* a, const double* b, double* out, size_t n) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) out[i] = a[i] + b[i];
}

void add(const double* a, const double* b, double* out, size_t n) {
  if (n >= kOmpThreshold)
    add_omp(a, b, out, n);
  else
    add_serial(a, b, out, n);
}

void mul_serial(const double* a, const double* b, double* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void mul_omp(const double* a, const double* b, double* out, size_t n) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) out[i] = a[i] * b[i];
}

void mul(const double* a, const double* b, double* out, size_t n) {
  if (n >= kOmpThreshold)
    mul_omp(a, b, out, n);
  else
    mul_serial(a, b, out, n);
}

}  // namespace nse::kernels
