#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "attacklab/errors.hpp"
#include "attacklab/random.hpp"

namespace attacklab::ad {

using attacklab::Matrix;

/// A named trainable tensor. `grad` always has the shape of `value` and is
/// accumulated into by Tape::backward; it is mutable so that a backward pass
/// through a logically-const model can populate it.
struct Parameter {
  Matrix value;
  mutable Matrix grad;
  std::string name;

  Parameter() = default;
  Parameter(Matrix v, std::string n)
      : value(std::move(v)),
        grad(Matrix::Zero(value.rows(), value.cols())),
        name(std::move(n)) {}

  void zero_grad() const { grad.setZero(); }
};

void zero_grads(const std::vector<Parameter*>& params);

/// Undirected neighbor structure over a unified node index space.
/// Built once per graph snapshot and shared (read-only) by the
/// graph-structured primitives below.
struct Adjacency {
  std::vector<std::vector<int>> neighbors;
  int size() const { return static_cast<int>(neighbors.size()); }
  int degree(int i) const { return static_cast<int>(neighbors[i].size()); }
};
using AdjacencyPtr = std::shared_ptr<const Adjacency>;

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid as long as the tape lives.
struct Value {
  Tape* tape = nullptr;
  int node = -1;

  const Matrix& mat() const;
  Eigen::Index rows() const { return mat().rows(); }
  Eigen::Index cols() const { return mat().cols(); }
};

enum class EltOp { Relu, Sigmoid, Elu, Exp, Log };

/// Record of primitive operations for reverse-mode differentiation.
///
/// Every op appends one node holding the forward result and a closure that
/// routes the node's output gradient to its operands. backward() walks the
/// record in reverse creation order exactly once; gradients accumulate
/// additively across fan-out. Single-threaded by design.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf with no gradient requirement.
  Value constant(Matrix m);
  /// Leaf bound to a Parameter; backward() accumulates into param.grad.
  Value leaf(const Parameter& param);

  /// Runs reverse-mode accumulation from `loss` (must be 1x1 and recorded on
  /// this tape). Populates Parameter::grad for every reachable parameter.
  void backward(Value loss);

  const Matrix& value(int node) const { return nodes_[node].value; }
  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  friend struct Value;
  friend class OpBuilder;

  struct Node {
    Matrix value;
    bool needs_grad = false;
    const Parameter* param = nullptr;
    // Pulls this node's output gradient into the operands' slots.
    std::function<void(const Matrix& out_grad, std::vector<Matrix>& grads)> pull;
  };

  int push(Node node);
  void accumulate(std::vector<Matrix>& grads, int node, const Matrix& delta) const;

  std::vector<Node> nodes_;
};

// --- dense primitives ------------------------------------------------------

Value matmul(Value a, Value b);
Value add(Value a, Value b);
Value sub(Value a, Value b);
/// a (n x d) plus a broadcast row vector (1 x d); the bias term of a linear layer.
Value add_rowvec(Value a, Value row);
Value scale(Value a, double c);
Value hadamard(Value a, Value b);
Value transpose(Value a);
Value elementwise(EltOp op, Value a);
Value relu(Value a);
Value sigmoid(Value a);
Value elu(Value a);
/// Row-wise softmax with per-row max subtraction.
Value softmax_rows(Value a);
/// Stacks the given rows of `a` (duplicates allowed; gradients accumulate).
Value row_gather(Value a, std::vector<int> rows);
Value concat_cols(Value a, Value b);
Value reduce_sum(Value a);
Value reduce_mean(Value a);
/// Mean over rows of -log softmax(logits)[label]; labels are class indices.
Value cross_entropy_logits(Value logits, std::vector<int> labels);

// --- graph-structured primitives -------------------------------------------

/// out_i = sum_{j in N(i)} h_j
Value neighbor_sum(Value h, AdjacencyPtr adj);
/// out_i = mean_{j in N(i)} h_j, zero row for isolated nodes.
Value neighbor_mean(Value h, AdjacencyPtr adj);
/// out_i = sum_{j in N(i)} h_j / sqrt((deg_i + 1)(deg_j + 1))
Value neighbor_normalized_sum(Value h, AdjacencyPtr adj);
/// Attention-weighted neighbor sum. Per center i and neighbor j:
///   e_j = leaky_relu(src_score_j + dst_score_i),  alpha = softmax_j(e),
///   out_i = sum_j alpha_j z_j.
/// `src_scores`/`dst_scores` are n x 1 columns; gradients flow into all three
/// differentiable inputs.
Value attention_weighted_sum(Value z, Value src_scores, Value dst_scores,
                             AdjacencyPtr adj, double leaky_slope = 0.2);

/// Forward-only attention coefficients, row i holding alpha over N(i) in
/// neighbor-list order. Shares the math of attention_weighted_sum.
std::vector<std::vector<double>> attention_coefficients(const Matrix& src_scores,
                                                        const Matrix& dst_scores,
                                                        const Adjacency& adj,
                                                        double leaky_slope = 0.2);

// --- optimizer --------------------------------------------------------------

/// value <- value - lr * grad for every parameter, then grads are zeroed.
void sgd_step(const std::vector<Parameter*>& params, double lr);

/// SGD with optional momentum; keeps a velocity slot per parameter.
class Sgd {
 public:
  explicit Sgd(double lr, double momentum = 0.0);
  void step(const std::vector<Parameter*>& params);

 private:
  double lr_;
  double momentum_;
  std::vector<std::pair<Parameter*, Matrix>> velocity_;
};

}  // namespace attacklab::ad
