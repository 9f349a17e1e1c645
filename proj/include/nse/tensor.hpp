#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "nse/common.hpp"

// Reverse-mode automatic differentiation over dense 2-D matrices, plus Adam.
// A Tape records one forward computation; backward() walks it in reverse
// creation order (which is a topological order by construction) and fills the
// gradients of every leaf created with requires_grad. Tapes are cheap and are
// rebuilt every training step; parameters live outside the tape as plain Mats.
namespace nse::nn {

// Rows of an edge-endpoint matrix grouped contiguously into segments
// (e.g. edges sorted by destination node). offsets has segments()+1 entries.
struct SegmentIndex {
  std::vector<int> offsets;

  int segments() const { return static_cast<int>(offsets.size()) - 1; }
  int rows() const { return offsets.empty() ? 0 : offsets.back(); }
};

class Tape {
public:
  // Leaves. Gradients are only tracked for nodes reachable from a
  // requires_grad leaf.
  int leaf(Mat value, bool requires_grad = false);

  const Mat& val(int id) const { return nodes_[id].val; }
  // Valid after backward(); zero-shaped if the node had no gradient path.
  const Mat& grad(int id) const { return nodes_[id].grad; }

  // C = A * B
  int matmul(int a, int b);
  // y = M * x for a constant sparse M; mt must hold M^T (used by the adjoint).
  // Both pointers must outlive the tape.
  int spmm(const Csr* m, const Csr* mt, int x);
  // same shape, or b 1 x cols broadcast across rows (bias)
  int add(int a, int b);
  // elementwise; b may be same shape, rows x 1 (per-row factor) or 1 x 1 (scalar)
  int mul(int a, int b);
  int relu(int a);
  int leaky_relu(int a, double slope);
  int exp(int a);
  int log(int a);
  // [A | B] side by side; rows must match
  int concat_cols(int a, int b);
  // out.row(i) = a.row(index[i]); indices may repeat
  int gather_rows(int a, std::vector<int> index);
  // out.row(s) = sum / mean of a's rows in segment s
  int segment_sum(int a, SegmentIndex seg);
  int segment_mean(int a, SegmentIndex seg);
  // softmax over each segment of a column of logits (rows x 1)
  int neighbor_softmax(int logits, SegmentIndex seg);
  int scale(int a, double s);
  // 1 x 1 total sum
  int sum(int a);
  // mean squared error over the rows selected by row_mask (all rows if empty
  // mask vector is disallowed: pass {} sized a.rows to select explicitly, or
  // use the overload without a mask for all rows)
  int mse_loss(int pred, int target);
  int mse_loss(int pred, int target, const std::vector<uint8_t>& row_mask);

  // Accumulates gradients of everything reachable from root (a 1x1 scalar).
  void backward(int root);

  int size() const { return static_cast<int>(nodes_.size()); }

private:
  struct Node {
    Mat val;
    Mat grad;
    bool requires_grad = false;
    std::function<void()> back;  // empty for leaves and constant subtrees
  };

  int push(Mat val, bool requires_grad, std::function<void()> back);
  Mat& grad_buf(int id);
  void check(int id) const;

  std::vector<Node> nodes_;
};

struct AdamConfig {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Mat m;
  Mat v;
  long step = 0;
};

// Standard bias-corrected Adam update, in place.
void adam_step(Mat& param, const Mat& grad, AdamState& state, const AdamConfig& cfg);

// Named trainable tensor with its optimizer state.
struct Parameter {
  std::string name;
  Mat value;
  AdamState opt;
};

Mat glorot_uniform(int rows, int cols, uint64_t seed);

// Checkpoints: flat list of named tensors, decimal text, exact round-trip.
void save_parameters(std::ostream& out, const std::vector<Parameter>& params);
std::vector<Parameter> load_parameters(std::istream& in);

}  // namespace nse::nn
