// Compares the serial reference kernels against their OpenMP variants:
// wall time, speedup and a bit-identical check on shared random inputs.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "nse/common.hpp"
#include "nse/kernels.hpp"

using namespace nse;

namespace {

Mat random_mat(int r, int c, Rng& rng) {
  Mat m(r, c);
  for (double& v : m.data) v = rng.uniform(-1.0, 1.0);
  return m;
}

Csr random_csr(int n, int nnz_per_row, Rng& rng) {
  Csr m;
  m.rows = m.cols = n;
  m.ptr.push_back(0);
  for (int r = 0; r < n; ++r) {
    for (int k = 0; k < nnz_per_row; ++k) {
      m.idx.push_back(rng.uniform_int(n));
      m.val.push_back(rng.uniform(0.1, 1.0));
    }
    m.ptr.push_back(static_cast<int>(m.idx.size()));
  }
  return m;
}

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void report(const std::string& name, const Mat& serial_out, const Mat& omp_out, double t_serial,
            double t_omp) {
  const bool identical = serial_out.data.size() == omp_out.data.size() &&
                         std::memcmp(serial_out.data.data(), omp_out.data.data(),
                                     serial_out.data.size() * sizeof(double)) == 0;
  std::printf("%-14s %10.3f ms %10.3f ms %7.2fx   %s\n", name.c_str(), t_serial, t_omp,
              t_serial / t_omp, identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP; the _omp kernels fall back to serial loops\n");
#endif
  std::printf("%-14s %13s %13s %9s\n", "kernel", "serial", "omp", "speedup");

  Rng rng(7);
  const int reps = 5;

  {
    const int n = 512, k = 256, m = 256;
    const Mat a = random_mat(n, k, rng), b = random_mat(k, m, rng);
    Mat cs(n, m), co(n, m);
    const double ts = time_ms(
        [&] { kernels::matmul_serial(a.data.data(), b.data.data(), cs.data.data(), n, k, m); },
        reps);
    const double to = time_ms(
        [&] { kernels::matmul_omp(a.data.data(), b.data.data(), co.data.data(), n, k, m); }, reps);
    report("matmul", cs, co, ts, to);
  }
  {
    const int n = 512, k = 256, m = 256;
    const Mat a = random_mat(n, k, rng), g = random_mat(n, m, rng);
    Mat cs(k, m), co(k, m);
    const double ts = time_ms(
        [&] {
          kernels::matmul_tn_serial(a.data.data(), g.data.data(), cs.data.data(), n, k, m, false);
        },
        reps);
    const double to = time_ms(
        [&] {
          kernels::matmul_tn_omp(a.data.data(), g.data.data(), co.data.data(), n, k, m, false);
        },
        reps);
    report("matmul_tn", cs, co, ts, to);
  }
  {
    const int n = 4096, c = 64;
    const Csr m = random_csr(n, 8, rng);
    const Mat x = random_mat(n, c, rng);
    Mat ys(n, c), yo(n, c);
    const double ts =
        time_ms([&] { kernels::spmm_serial(m, x.data.data(), ys.data.data(), c); }, reps);
    const double to = time_ms([&] { kernels::spmm_omp(m, x.data.data(), yo.data.data(), c); }, reps);
    report("spmm", ys, yo, ts, to);
  }
  {
    const int n = 1 << 20;
    const Mat a = random_mat(n, 1, rng), b = random_mat(n, 1, rng);
    Mat cs(n, 1), co(n, 1);
    const double ts = time_ms(
        [&] { kernels::add_serial(a.data.data(), b.data.data(), cs.data.data(), n); }, reps);
    const double to =
        time_ms([&] { kernels::add_omp(a.data.data(), b.data.data(), co.data.data(), n); }, reps);
    report("add", cs, co, ts, to);
  }
  {
    const int rows = 1 << 18, c = 16, n_out = 1 << 18;
    const Mat a = random_mat(rows, c, rng);
    std::vector<int> index(n_out);
    for (int& v : index) v = rng.uniform_int(rows);
    Mat cs(n_out, c), co(n_out, c);
    const double ts = time_ms(
        [&] { kernels::gather_rows_serial(a.data.data(), index.data(), cs.data.data(), n_out, c); },
        reps);
    const double to = time_ms(
        [&] { kernels::gather_rows_omp(a.data.data(), index.data(), co.data.data(), n_out, c); },
        reps);
    report("gather_rows", cs, co, ts, to);
  }
  {
    const int segs = 1 << 15, per = 8, c = 16;
    std::vector<int> offsets(segs + 1);
    for (int s = 0; s <= segs; ++s) offsets[s] = s * per;
    const Mat a = random_mat(segs * per, c, rng);
    Mat cs(segs, c), co(segs, c);
    const double ts = time_ms(
        [&] {
          kernels::segment_sum_serial(a.data.data(), nullptr, offsets.data(), segs, c,
                                      cs.data.data());
        },
        reps);
    const double to = time_ms(
        [&] {
          kernels::segment_sum_omp(a.data.data(), nullptr, offsets.data(), segs, c,
                                   co.data.data());
        },
        reps);
    report("segment_sum", cs, co, ts, to);
  }
  return 0;
}
