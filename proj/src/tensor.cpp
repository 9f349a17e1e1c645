#include "nse/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <utility>

#include "nse/kernels.hpp"

namespace nse::nn {

void Tape::check(int id) const {
  if (id < 0 || id >= static_cast<int>(nodes_.size()))
    throw ValidationError("tape node id out of range");
}

int Tape::push(Mat val, bool requires_grad, std::function<void()> back) {
  Node n;
  n.val = std::move(val);
  n.requires_grad = requires_grad;
  n.back = requires_grad ? std::move(back) : std::function<void()>{};
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Mat& Tape::grad_buf(int id) {
  Node& n = nodes_[id];
  if (n.grad.data.empty()) n.grad = Mat(n.val.rows, n.val.cols);
  return n.grad;
}

int Tape::leaf(Mat value, bool requires_grad) {
  return push(std::move(value), requires_grad, {});
}

int Tape::matmul(int a, int b) {
  check(a);
  check(b);
  const Mat& A = nodes_[a].val;
  const Mat& B = nodes_[b].val;
  if (A.cols != B.rows) throw ValidationError("matmul: inner dimensions differ");
  Mat C(A.rows, B.cols);
  kernels::matmul(A.data.data(), B.data.data(), C.data.data(), A.rows, A.cols, B.cols);
  bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
  int id = push(std::move(C), rg, {});
  if (rg) {
    nodes_[id].back = [this, id, a, b] {
      const Mat& g = nodes_[id].grad;
      const Mat& A = nodes_[a].val;
      const Mat& B = nodes_[b].val;
      if (nodes_[a].requires_grad) {
        Mat& da = grad_buf(a);
        kernels::matmul_nt(g.data.data(), B.data.data(), da.data.data(), g.rows, g.cols, B.rows);
      }
      if (nodes_[b].requires_grad) {
        Mat& db = grad_buf(b);
        kernels::matmul_tn(A.data.data(), g.data.data(), db.data.data(), A.rows, A.cols, g.cols);
      }
    };
  }
  return id;
}

int Tape::spmm(const Csr* m, const Csr* mt, int x) {
  check(x);
  const Mat& X = nodes_[x].val;
  if (m->cols != X.rows) throw ValidationError("spmm: matrix columns != feature rows");
  Mat Y(m->rows, X.cols);
  kernels::spmm(*m, X.data.data(), Y.data.data(), X.cols);
  bool rg = nodes_[x].requires_grad;
  int id = push(std::move(Y), rg, {});
  if (rg) {
    nodes_[id].back = [this, id, mt, x] {
      const Mat& g = nodes_[id].grad;
      Mat tmp(mt->rows, g.cols);
      kernels::spmm(*mt, g.data.data(), tmp.data.data(), g.cols);
      Mat& dx = grad_buf(x);
      kernels::add(dx.data.data(), tmp.data.data(), dx.data.data(), dx.size());
    };
  }
  return id;
}

int Tape::add(int a, int b) {
  check(a);
  check(b);
  const Mat& A = nodes_[a].val;
  const Mat& B = nodes_[b].val;
  const bool broadcast = B.rows == 1 && B.cols == A.cols && A.rows != 1;
  if (!A.same_shape(B) && !broadcast) throw ValidationError("add: incompatible shapes");
  Mat C(A.rows, A.cols);
  if (broadcast) {
    for (int r = 0; r < A.rows; ++r)
      for (int c = 0; c < A.cols; ++c) C(r, c) = A(r, c) + B(0, c);
  } else {
    kernels::add(A.data.data(), B.data.data(), C.data.data(), A.size());
  }
  bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
  int id = push(std::move(C), rg, {});
  if (rg) {
    nodes_[id].back = [this, id, a, b, broadcast] {
      const Mat& g = nodes_[id].grad;
      if (nodes_[a].requires_grad) {
        Mat& da = grad_buf(a);
        kernels::add(da.data.data(), g.data.data(), da.data.data(), da.size());
      }
      if (nodes_[b].requires_grad) {
        Mat& db = grad_buf(b);
        if (broadcast) {
          for (int r = 0; r < g.rows; ++r)
            for (int c = 0; c < g.cols; ++c) db(0, c) += g(r, c);
        } else {
          kernels::add(db.data.data(), g.data.data(), db.data.data(), db.size());
        }
      }
    };
  }
  return id;
}

int Tape::mul(int a, int b) {
  check(a);
  check(b);
  const Mat& A = nodes_[a].val;
  const Mat& B = nodes_[b].val;
  enum class Mode { Full, Col, Scalar } mode;
  if (B.rows == 1 && B.cols == 1)
    mode = Mode::Scalar;
  else if (B.cols == 1 && B.rows == A.rows && A.cols != 1)
    mode = Mode::Col;
  else if (A.same_shape(B))
    mode = Mode::Full;
  else
    throw ValidationError("mul: incompatible shapes");
  Mat C(A.rows, A.cols);
  switch (mode) {
    case Mode::Full:
      kernels::mul(A.data.data(), B.data.data(), C.data.data(), A.size());
      break;
    case Mode::Col:
      for (int r = 0; r < A.rows; ++r)
        for (int c = 0; c < A.cols; ++c) C(r, c) = A(r, c) * B(r, 0);
      break;
    case Mode::Scalar:
      for (size_t i = 0; i < A.size(); ++i) C.data[i] = A.data[i] * B.data[0];
      break;
  }
  bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
  int id = push(std::move(C), rg, {});
  if (rg) {
    nodes_[id].back = [this, id, a, b, mode] {
      const Mat& g = nodes_[id].grad;
      const Mat& A = nodes_[a].val;
      const Mat& B = nodes_[b].val;
      if (nodes_[a].requires_grad) {
        Mat& da = grad_buf(a);
        switch (mode) {
          case Mode::Full:
            for (size_t i = 0; i < da.size(); ++i) da.data[i] += g.data[i] * B.data[i];
            break;
          case Mode::Col:
            for (int r = 0; r < g.rows; ++r)
              for (int c = 0; c < g.cols; ++c) da(r, c) += g(r, c) * B(r, 0);
            break;
          case Mode::Scalar:
            for (size_t i = 0; i < da.size(); ++i) da.data[i] += g.data[i] * B.data[0];
            break;
        }
      }
      if (nodes_[b].requires_grad) {
        Mat& db = grad_buf(b);
        switch (mode) {
          case Mode::Full:
            for (size_t i = 0; i < db.size(); ++i) db.data[i] += g.data[i] * A.data[i];
            break;
          case Mode::Col:
            for (int r = 0; r < g.rows; ++r)
              for (int c = 0; c < g.cols; ++c) db(r, 0) += g(r, c) * A(r, c);
            break;
          case Mode::Scalar:
            for (size_t i = 0; i < g.size(); ++i) db.data[0] += g.data[i] * A.data[i];
            break;
        }
      }
    };
  }
  return id;
}

int Tape::relu(int a) { return leaky_relu(a, 0.0); }

int Tape::leaky_relu(int a, double slope) {
  check(a);
  const Mat& A = nodes_[a].val;
  Mat C(A.rows, A.cols);
  for (size_t i = 0; i < A.size(); ++i)
    C.data[i] = A.data[i] > 0.0 ? A.data[i] : slope * A.data[i];
  bool rg = nodes_[a].requires_grad;
  int id = push(std::move(C), rg, {});
  if (rg) {
    nodes_[id].back = [this, id, a, slope] {
      const Mat& g = nodes_[id].grad;
      const Mat& A = nodes_[a].val;
      Mat& da = grad_buf(a);
      for (size_t i = 0; i < da.size(); ++i)
        da.data[i] += g.data[i] * (A.data[i] > 0.0 ? 1.0 : slope);
    };
  }
  return id;
}

int Tape::exp(int a) {
  check(a);
  const Mat& A = nodes_[a].val;
  Mat C(A.rows, A.cols);
  for (size_t i = 0; i < A.size(); ++i) C.data[i] = std::exp(A.data[i]);
  bool rg = nodes_[a].requires_grad;
  int id = push(std::move(C), rg, {});
  if (rg) {
    nodes_[id].back = [this, id, a] {
      const Mat& g = nodes_[id].grad;
      const Mat& y = nodes_[id].val;
      Mat& da = grad_buf(a);
      for (size_t i = 0; i < da.size(); ++i) da.data[i] += g.data[i] * y.data[i];
    };
  }
  return id;
}

int Tape::log(int a) {
  check(a);
  const Mat& A = nodes_[a].val;
  Mat C(A.rows, A.cols);
  for (size_t i = 0; i < A.size(); ++i) C.data[i] = std::log(A.data[i]);
  bool rg = nodes_[a].requires_grad;
  int id = push(std::move(C), rg, {});
  if (rg) {
    nodes_[id].back = [this, id, a] {
      const Mat& g = nodes_[id].grad;
      const Mat& A = nodes_[a].val;
      Mat& da = grad_buf(a);
      for (size_t i = 0; i < da.size(); ++i) da.data[i] += g.data[i] / A.data[i];
    };
  }
  return id;
}

int Tape::concat_cols(int a, int b) {
  check(a);
  check(b);
  const Mat& A = nodes_[a].val;
  const Mat& B = nodes_[b].val;
  if (A.rows != B.rows) throw ValidationError("concat_cols: row counts differ");
  Mat C(A.rows, A.cols + B.cols);
  for (int r = 0; r < A.rows; ++r) {
    std::copy(A.row(r), A.row(r) + A.cols, C.row(r));
    std::copy(B.row(r), B.row(r) + B.cols, C.row(r) + A.cols);
  }
  bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
  int id = push(std::move(C), rg, {});
  if (rg) {
    nodes_[id].back = [this, id, a, b] {
      const Mat& g = nodes_[id].grad;
      const int ca = nodes_[a].val.cols;
      const int cb = nodes_[b].val.cols;
      if (nodes_[a].requires_grad) {
        Mat& da = grad_buf(a);
        for (int r = 0; r < g.rows; ++r)
          for (int c = 0; c < ca; ++c) da(r, c) += g(r, c);
      }
      if (nodes_[b].requires_grad) {
        Mat& db = grad_buf(b);
        for (int r = 0; r < g.rows; ++r)
          for (int c = 0; c < cb; ++c) db(r, c) += g(r, ca + c);
      }
    };
  }
  return id;
}

int Tape::gather_rows(int a, std::vector<int> index) {
  check(a);
  const Mat& A = nodes_[a].val;
  for (int r : index)
    if (r < 0 || r >= A.rows) throw ValidationError("gather_rows: index out of range");
  Mat C(static_cast<int>(index.size()), A.cols);
  kernels::gather_rows(A.data.data(), index.data(), C.data.data(),
                       static_cast<int>(index.size()), A.cols);
  bool rg = nodes_[a].requires_grad;
  int id = push(std::move(C), rg, {});
  if (rg) {
    nodes_[id].back = [this, id, a, index = std::move(index)] {
      const Mat& g = nodes_[id].grad;
      Mat& da = grad_buf(a);
      for (int i = 0; i < g.rows; ++i)
        for (int c = 0; c < g.cols; ++c) da(index[i], c) += g(i, c);
    };
  }
  return id;
}

int Tape::segment_sum(int a, SegmentIndex seg) {
  check(a);
  const Mat& A = nodes_[a].val;
  if (seg.rows() != A.rows) throw ValidationError("segment_sum: offsets do not cover the rows");
  Mat C(seg.segments(), A.cols);
  kernels::segment_sum(A.data.data(), nullptr, seg.offsets.data(), seg.segments(), A.cols,
                       C.data.data());
  bool rg = nodes_[a].requires_grad;
  int id = push(std::move(C), rg, {});
  if (rg) {
    nodes_[id].back = [this, id, a, seg = std::move(seg)] {
      const Mat& g = nodes_[id].grad;
      Mat& da = grad_buf(a);
      for (int s = 0; s < seg.segments(); ++s)
        for (int p = seg.offsets[s]; p < seg.offsets[s + 1]; ++p)
          for (int c = 0; c < g.cols; ++c) da(p, c) += g(s, c);
    };
  }
  return id;
}

int Tape::segment_mean(int a, SegmentIndex seg) {
  check(a);
  const Mat& A = nodes_[a].val;
  if (seg.rows() != A.rows) throw ValidationError("segment_mean: offsets do not cover the rows");
  Mat C(seg.segments(), A.cols);
  kernels::segment_sum(A.data.data(), nullptr, seg.offsets.data(), seg.segments(), A.cols,
                       C.data.data());
  for (int s = 0; s < seg.segments(); ++s) {
    const int count = seg.offsets[s + 1] - seg.offsets[s];
    if (count > 1)
      for (int c = 0; c < C.cols; ++c) C(s, c) /= count;
  }
  bool rg = nodes_[a].requires_grad;
  int id = push(std::move(C), rg, {});
  if (rg) {
    nodes_[id].back = [this, id, a, seg = std::move(seg)] {
      const Mat& g = nodes_[id].grad;
      Mat& da = grad_buf(a);
      for (int s = 0; s < seg.segments(); ++s) {
        const int count = seg.offsets[s + 1] - seg.offsets[s];
        if (count == 0) continue;
        const double inv = 1.0 / count;
        for (int p = seg.offsets[s]; p < seg.offsets[s + 1]; ++p)
          for (int c = 0; c < g.cols; ++c) da(p, c) += g(s, c) * inv;
      }
    };
  }
  return id;
}

int Tape::neighbor_softmax(int logits, SegmentIndex seg) {
  check(logits);
  const Mat& L = nodes_[logits].val;
  if (L.cols != 1) throw ValidationError("neighbor_softmax expects a column of logits");
  if (seg.rows() != L.rows)
    throw ValidationError("neighbor_softmax: offsets do not cover the logits");
  Mat C(L.rows, 1);
  for (int s = 0; s < seg.segments(); ++s) {
    const int lo = seg.offsets[s], hi = seg.offsets[s + 1];
    if (lo == hi) continue;
    double m = -std::numeric_limits<double>::infinity();
    for (int p = lo; p < hi; ++p) m = std::max(m, L(p, 0));
    double z = 0.0;
    for (int p = lo; p < hi; ++p) {
      C(p, 0) = std::exp(L(p, 0) - m);
      z += C(p, 0);
    }
    for (int p = lo; p < hi; ++p) C(p, 0) /= z;
  }
  bool rg = nodes_[logits].requires_grad;
  int id = push(std::move(C), rg, {});
  if (rg) {
    nodes_[id].back = [this, id, logits, seg = std::move(seg)] {
      const Mat& g = nodes_[id].grad;
      const Mat& alpha = nodes_[id].val;
      Mat& dl = grad_buf(logits);
      for (int s = 0; s < seg.segments(); ++s) {
        const int lo = seg.offsets[s], hi = seg.offsets[s + 1];
        double dot = 0.0;
        for (int p = lo; p < hi; ++p) dot += alpha(p, 0) * g(p, 0);
        for (int p = lo; p < hi; ++p) dl(p, 0) += alpha(p, 0) * (g(p, 0) - dot);
      }
    };
  }
  return id;
}

int Tape::scale(int a, double s) {
  check(a);
  const Mat& A = nodes_[a].val;
  Mat C(A.rows, A.cols);
  for (size_t i = 0; i < A.size(); ++i) C.data[i] = A.data[i] * s;
  bool rg = nodes_[a].requires_grad;
  int id = push(std::move(C), rg, {});
  if (rg) {
    nodes_[id].back = [this, id, a, s] {
      const Mat& g = nodes_[id].grad;
      Mat& da = grad_buf(a);
      for (size_t i = 0; i < da.size(); ++i) da.data[i] += g.data[i] * s;
    };
  }
  return id;
}

int Tape::sum(int a) {
  check(a);
  const Mat& A = nodes_[a].val;
  Mat C(1, 1);
  for (double v : A.data) C.data[0] += v;
  bool rg = nodes_[a].requires_grad;
  int id = push(std::move(C), rg, {});
  if (rg) {
    nodes_[id].back = [this, id, a] {
      const double g = nodes_[id].grad.data[0];
      Mat& da = grad_buf(a);
      for (size_t i = 0; i < da.size(); ++i) da.data[i] += g;
    };
  }
  return id;
}

int Tape::mse_loss(int pred, int target) {
  check(pred);
  return mse_loss(pred, target,
                  std::vector<uint8_t>(static_cast<size_t>(nodes_[pred].val.rows), 1));
}

int Tape::mse_loss(int pred, int target, const std::vector<uint8_t>& row_mask) {
  check(pred);
  check(target);
  const Mat& P = nodes_[pred].val;
  const Mat& T = nodes_[target].val;
  if (!P.same_shape(T)) throw ValidationError("mse_loss: shape mismatch");
  if (static_cast<int>(row_mask.size()) != P.rows)
    throw ValidationError("mse_loss: mask length != rows");
  long selected = std::count_if(row_mask.begin(), row_mask.end(), [](uint8_t m) { return m != 0; });
  if (selected == 0) throw ValidationError("mse_loss: mask selects no rows");
  const double denom = static_cast<double>(selected) * P.cols;
  Mat C(1, 1);
  for (int r = 0; r < P.rows; ++r) {
    if (!row_mask[r]) continue;
    for (int c = 0; c < P.cols; ++c) {
      const double d = P(r, c) - T(r, c);
      C.data[0] += d * d;
    }
  }
  C.data[0] /= denom;
  bool rg = nodes_[pred].requires_grad || nodes_[target].requires_grad;
  int id = push(std::move(C), rg, {});
  if (rg) {
    nodes_[id].back = [this, id, pred, target, row_mask, denom] {
      const double g = nodes_[id].grad.data[0];
      const Mat& P = nodes_[pred].val;
      const Mat& T = nodes_[target].val;
      const double k = 2.0 * g / denom;
      if (nodes_[pred].requires_grad) {
        Mat& dp = grad_buf(pred);
        for (int r = 0; r < P.rows; ++r) {
          if (!row_mask[r]) continue;
          for (int c = 0; c < P.cols; ++c) dp(r, c) += k * (P(r, c) - T(r, c));
        }
      }
      if (nodes_[target].requires_grad) {
        Mat& dt = grad_buf(target);
        for (int r = 0; r < P.rows; ++r) {
          if (!row_mask[r]) continue;
          for (int c = 0; c < P.cols; ++c) dt(r, c) -= k * (P(r, c) - T(r, c));
        }
      }
    };
  }
  return id;
}

void Tape::backward(int root) {
  check(root);
  if (nodes_[root].val.rows != 1 || nodes_[root].val.cols != 1)
    throw ValidationError("backward requires a scalar loss");
  grad_buf(root).data[0] = 1.0;
  for (int i = root; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.back && !n.grad.data.empty()) n.back();
  }
}

void adam_step(Mat& param, const Mat& grad, AdamState& state, const AdamConfig& cfg) {
  if (!param.same_shape(grad)) throw ValidationError("adam_step: gradient shape mismatch");
  if (state.m.data.empty()) {
    state.m = Mat(param.rows, param.cols);
    state.v = Mat(param.rows, param.cols);
  }
  if (!state.m.same_shape(param)) throw ValidationError("adam_step: state shape mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < param.size(); ++i) {
    state.m.data[i] = cfg.beta1 * state.m.data[i] + (1.0 - cfg.beta1) * grad.data[i];
    state.v.data[i] = cfg.beta2 * state.v.data[i] + (1.0 - cfg.beta2) * grad.data[i] * grad.data[i];
    const double mhat = state.m.data[i] / bc1;
    const double vhat = state.v.data[i] / bc2;
    param.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

Mat glorot_uniform(int rows, int cols, uint64_t seed) {
  Mat m(rows, cols);
  const double limit = std::sqrt(6.0 / (rows + cols));
  Rng rng(seed);
  for (double& v : m.data) v = rng.uniform(-limit, limit);
  return m;
}

void save_parameters(std::ostream& out, const std::vector<Parameter>& params) {
  out << std::setprecision(17);
  for (const auto& p : params) {
    out << "tensor " << p.name << ' ' << p.value.rows << ' ' << p.value.cols << '\n';
    for (int r = 0; r < p.value.rows; ++r) {
      for (int c = 0; c < p.value.cols; ++c) {
        if (c) out << ' ';
        out << p.value(r, c);
      }
      out << '\n';
    }
  }
}

std::vector<Parameter> load_parameters(std::istream& in) {
  std::vector<Parameter> params;
  std::string keyword;
  while (in >> keyword) {
    if (keyword != "tensor") throw ParseError("checkpoint: expected 'tensor', got '" + keyword + "'");
    Parameter p;
    int rows = 0, cols = 0;
    if (!(in >> p.name >> rows >> cols) || rows < 0 || cols < 0)
      throw ParseError("checkpoint: malformed tensor header");
    p.value = Mat(rows, cols);
    for (double& v : p.value.data)
      if (!(in >> v)) throw ParseError("checkpoint: truncated tensor '" + p.name + "'");
    params.push_back(std::move(p));
  }
  return params;
}

}  // namespace nse::nn
