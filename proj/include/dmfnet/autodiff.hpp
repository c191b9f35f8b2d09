#pragma once

#include <deque>
#include <functional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dmfnet/params.hpp"
#include "dmfnet/tensor.hpp"

namespace dmfnet {

class Tape;

/// Handle to one recorded value on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool defined() const { return tape != nullptr; }
  const Tensor& value() const;
  const std::vector<int64_t>& shape() const { return value().shape(); }
  int64_t dim(int axis) const { return value().dim(axis); }
};

/// Recompute a node's output from its input values (used for replay checks).
using ForwardFn = std::function<Tensor(const std::vector<const Tensor*>&)>;

/// Accumulate input gradients: arguments are (input values, node value,
/// gradient of the loss w.r.t. the node value, gradient buffers to += into).
using BackwardFn = std::function<void(const std::vector<const Tensor*>&, const Tensor&,
                                      const Tensor&, const std::vector<Tensor*>&)>;

/// Reverse-mode differentiation record. Nodes are appended in execution order
/// so the list is topological by construction; replaying the forward functions
/// from the leaves reproduces every recorded value bit-exactly.
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  Var input(Tensor value);
  Var param(Parameter& p);  // one node per parameter, reused across calls

  Var record(const char* op, std::vector<Var> inputs, Tensor output, ForwardFn forward,
             BackwardFn backward);

  const Tensor& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  size_t node_count() const { return nodes_.size(); }
  bool grad_enabled() const { return grad_enabled_; }

  /// Accumulate d(loss)/d(p) into every parameter recorded on this tape.
  /// `loss` must be scalar. Parameters the loss does not reach are untouched.
  void backward(Var loss);

  /// Re-run every forward function from the leaves and compare against the
  /// recorded values. True iff everything reproduces bit-exactly.
  bool replay_matches() const;

 private:
  struct Node {
    const char* op;
    std::vector<int> inputs;
    Tensor value;
    Parameter* parameter = nullptr;
    ForwardFn forward;
    BackwardFn backward;
  };

  Var push(Node node);

  // Deque, not vector: Var::value() hands out references into this storage,
  // and they must survive later record() calls appending new nodes.
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
  bool grad_enabled_;
};

// ---------------------------------------------------------------------------
// Primitive operations. Each validates shapes, computes the forward value and
// records the backward rule on the tape of its inputs.
// ---------------------------------------------------------------------------

Var matmul(Var a, Var b);
Var transpose2d(Var x);
Var linear(Var x, Var w, Var b);  // last-axis affine map, w [cin x cout], b [cout]
Var linear_nobias(Var x, Var w);
Var relu(Var x);
Var tanh(Var x);
Var softmax_last(Var x);
Var layer_norm(Var x, Var gain, Var bias);  // normalizes the last axis, eps 1e-5
Var concat(const std::vector<Var>& xs, int axis);
Var slice_last(Var x, int64_t start, int64_t len);
std::pair<Var, IndexArray> max_over_axis(Var x, int axis);  // ties -> smallest index
Var mean_over_axis(Var x, int axis);
Var sum_all(Var x);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var row_scale(Var x, Var s);  // x [n x c] scaled per-row by s [n x 1]
Var scalar_mul(Var x, double c);
Var reshape(Var x, std::vector<int64_t> shape);

/// values [n x c] gathered by an arbitrary-shaped index array -> [idx... x c].
/// Backward scatter-adds, so it also implements every replication pattern.
Var gather_rows(Var values, const IndexArray& idx);

/// x [h x w x cin] cross-correlated with kernels [kh x kw x cin x cout];
/// zero padding (k-1)/2, output (h + 2p - kh) / stride + 1. No bias term.
Var conv2d(Var x, Var kernels, int stride);

/// Point splitting: x [n x cin], w [cin x r x cout] -> [(r n) x cout], where
/// output row r*i+j depends only on input row i (kernel = stride = r).
Var transpose_conv1d(Var x, int ratio, Var w);

/// Scaled dot-product attention with per-head splits of the projected
/// q/k/v (scale 1/sqrt(d/heads)), concatenated heads, output projection.
Var multi_head_attention(Var q, Var k, Var v, int heads, Var wq, Var wk, Var wv, Var wo);

// Index builders for the gather-based replication patterns.
IndexArray replicate_index(int64_t n);                  // [n] zeros: repeat a 1 x c row n times
IndexArray interleave_index(int64_t n, int64_t ratio);  // [r*n]: j -> j / r (parent of child j)
IndexArray self_rows_index(int64_t n, int64_t k);       // [n x k] row i filled with i

}  // namespace dmfnet
