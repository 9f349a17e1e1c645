#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <vector>

#include "nse/common.hpp"
#include "nse/kernels.hpp"
#include "testutil.hpp"

using namespace nse;
using namespace nse::kernels;

namespace {

Eigen::MatrixXd to_eigen(const Mat& m) {
  Eigen::MatrixXd out(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) out(r, c) = m(r, c);
  return out;
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

// Random sparse matrix with ~density nonzeros, plus its CSR form.
Csr random_csr(Rng& rng, int rows, int cols, double density, Mat& dense) {
  dense = Mat(rows, cols);
  Csr m;
  m.rows = rows;
  m.cols = cols;
  m.ptr.push_back(0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (rng.uniform01() < density) {
        const double v = rng.uniform(-2.0, 2.0);
        dense(r, c) = v;
        m.idx.push_back(c);
        m.val.push_back(v);
      }
    }
    m.ptr.push_back(static_cast<int>(m.idx.size()));
  }
  return m;
}

}  // namespace

TEST_CASE("matmul matches a dense linear algebra oracle") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + rng.uniform_int(12);
    const int k = 1 + rng.uniform_int(12);
    const int m = 1 + rng.uniform_int(12);
    const Mat a = tu::random_mat(rng, n, k);
    const Mat b = tu::random_mat(rng, k, m);
    Mat c(n, m);
    matmul(a.data.data(), b.data.data(), c.data.data(), n, k, m);
    CHECK(max_abs(to_eigen(c) - to_eigen(a) * to_eigen(b)) < 1e-12);
  }
}

TEST_CASE("matmul accumulate adds onto the output") {
  Rng rng(2);
  const Mat a = tu::random_mat(rng, 3, 4);
  const Mat b = tu::random_mat(rng, 4, 2);
  Mat c = tu::random_mat(rng, 3, 2);
  const Eigen::MatrixXd expect = to_eigen(c) + to_eigen(a) * to_eigen(b);
  matmul(a.data.data(), b.data.data(), c.data.data(), 3, 4, 2, /*accumulate=*/true);
  CHECK(max_abs(to_eigen(c) - expect) < 1e-12);
}

TEST_CASE("matmul_tn and matmul_nt match transposed oracles") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 1 + rng.uniform_int(10);
    const int k = 1 + rng.uniform_int(10);
    const int m = 1 + rng.uniform_int(10);

    // C[k x m] += A^T B with A [n x k], B [n x m]
    const Mat a = tu::random_mat(rng, n, k);
    const Mat b = tu::random_mat(rng, n, m);
    Mat c = tu::random_mat(rng, k, m);
    Eigen::MatrixXd expect = to_eigen(c) + to_eigen(a).transpose() * to_eigen(b);
    matmul_tn(a.data.data(), b.data.data(), c.data.data(), n, k, m);
    CHECK(max_abs(to_eigen(c) - expect) < 1e-12);

    // C[n x k] += A B^T with A [n x m], B [k x m]
    const Mat a2 = tu::random_mat(rng, n, m);
    const Mat b2 = tu::random_mat(rng, k, m);
    Mat c2 = tu::random_mat(rng, n, k);
    expect = to_eigen(c2) + to_eigen(a2) * to_eigen(b2).transpose();
    matmul_nt(a2.data.data(), b2.data.data(), c2.data.data(), n, m, k);
    CHECK(max_abs(to_eigen(c2) - expect) < 1e-12);
  }
}

TEST_CASE("serial and OpenMP kernels are bit-identical") {
  Rng rng(4);
  // Large enough that the OpenMP paths actually run multi-chunk schedules.
  const int n = 67, k = 41, m = 53;
  const Mat a = tu::random_mat(rng, n, k);
  const Mat b = tu::random_mat(rng, k, m);

  SUBCASE("matmul") {
    Mat cs(n, m), co(n, m);
    matmul_serial(a.data.data(), b.data.data(), cs.data.data(), n, k, m);
    matmul_omp(a.data.data(), b.data.data(), co.data.data(), n, k, m);
    CHECK(cs.data == co.data);
  }
  SUBCASE("matmul_tn") {
    const Mat b2 = tu::random_mat(rng, n, m);
    Mat cs(k, m, 0.5), co(k, m, 0.5);
    matmul_tn_serial(a.data.data(), b2.data.data(), cs.data.data(), n, k, m);
    matmul_tn_omp(a.data.data(), b2.data.data(), co.data.data(), n, k, m);
    CHECK(cs.data == co.data);
  }
  SUBCASE("matmul_nt") {
    const Mat a2 = tu::random_mat(rng, n, m);
    const Mat b2 = tu::random_mat(rng, k, m);
    Mat cs(n, k, -1.0), co(n, k, -1.0);
    matmul_nt_serial(a2.data.data(), b2.data.data(), cs.data.data(), n, m, k);
    matmul_nt_omp(a2.data.data(), b2.data.data(), co.data.data(), n, m, k);
    CHECK(cs.data == co.data);
  }
  SUBCASE("elementwise add and mul") {
    const Mat x = tu::random_mat(rng, n, m);
    const Mat y = tu::random_mat(rng, n, m);
    Mat zs(n, m), zo(n, m);
    add_serial(x.data.data(), y.data.data(), zs.data.data(), x.size());
    add_omp(x.data.data(), y.data.data(), zo.data.data(), x.size());
    CHECK(zs.data == zo.data);
    mul_serial(x.data.data(), y.data.data(), zs.data.data(), x.size());
    mul_omp(x.data.data(), y.data.data(), zo.data.data(), x.size());
    CHECK(zs.data == zo.data);
  }
}

TEST_CASE("gather_rows copies the selected rows") {
  Rng rng(5);
  const Mat src = tu::random_mat(rng, 9, 4);
  std::vector<int> rows = {3, 3, 0, 8, 1};
  Mat out_s(5, 4), out_o(5, 4);
  gather_rows_serial(src.data.data(), rows.data(), out_s.data.data(), 5, 4);
  gather_rows_omp(src.data.data(), rows.data(), out_o.data.data(), 5, 4);
  CHECK(out_s.data == out_o.data);
  for (int i = 0; i < 5; ++i)
    for (int c = 0; c < 4; ++c) CHECK(out_s(i, c) == src(rows[i], c));
}

TEST_CASE("segment_sum matches a naive per-segment loop") {
  Rng rng(6);
  const Mat values = tu::random_mat(rng, 12, 3);
  const std::vector<int> offsets = {0, 0, 3, 5, 12};  // includes an empty segment
  const std::vector<int> order = {4, 2, 0, 11, 1, 3, 5, 6, 7, 8, 9, 10};

  Mat naive(4, 3);
  for (int s = 0; s < 4; ++s)
    for (int p = offsets[s]; p < offsets[s + 1]; ++p)
      for (int c = 0; c < 3; ++c) naive(s, c) += values(order[p], c);

  Mat out_s(4, 3), out_o(4, 3);
  segment_sum_serial(values.data.data(), order.data(), offsets.data(), 4, 3, out_s.data.data());
  segment_sum_omp(values.data.data(), order.data(), offsets.data(), 4, 3, out_o.data.data());
  CHECK(out_s.data == out_o.data);
  CHECK(tu::max_abs_diff(out_s, naive) == 0.0);

  // Without an order array rows are taken in index order.
  Mat plain(4, 3);
  segment_sum(values.data.data(), nullptr, offsets.data(), 4, 3, plain.data.data());
  Mat naive2(4, 3);
  for (int s = 0; s < 4; ++s)
    for (int p = offsets[s]; p < offsets[s + 1]; ++p)
      for (int c = 0; c < 3; ++c) naive2(s, c) += values(p, c);
  CHECK(tu::max_abs_diff(plain, naive2) == 0.0);

  // accumulate=true adds onto existing output.
  Mat acc(4, 3, 1.0);
  segment_sum(values.data.data(), nullptr, offsets.data(), 4, 3, acc.data.data(), true);
  for (int s = 0; s < 4; ++s)
    for (int c = 0; c < 3; ++c) CHECK(acc(s, c) == doctest::Approx(naive2(s, c) + 1.0));
}

TEST_CASE("spmm matches dense multiplication") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const int rows = 1 + rng.uniform_int(20);
    const int cols = 1 + rng.uniform_int(20);
    const int c = 1 + rng.uniform_int(5);
    Mat dense;
    const Csr m = random_csr(rng, rows, cols, 0.3, dense);
    const Mat x = tu::random_mat(rng, cols, c);
    Mat y_s(rows, c), y_o(rows, c);
    spmm_serial(m, x.data.data(), y_s.data.data(), c);
    spmm_omp(m, x.data.data(), y_o.data.data(), c);
    CHECK(y_s.data == y_o.data);
    CHECK(max_abs(to_eigen(y_s) - to_eigen(dense) * to_eigen(x)) < 1e-12);
  }
}
