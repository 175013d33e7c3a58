#pragma once

// Minimal reverse-mode automatic differentiation over dense double matrices.
//
// A Tape records every operation of one forward pass in creation order.
// Backward walks the tape in reverse, so nodes never need explicit
// topological sorting. Trainable weights live in Parameter objects that
// outlive tapes; the tape copies their value into a leaf and, after
// backward, adds the leaf gradient into Parameter::grad.

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace mgvc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Parameter {
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(Eigen::Index rows, Eigen::Index cols)
      : value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

// A parameter together with its stable name, used by optimizers and
// checkpoints.
struct NamedParameter {
  std::string name;
  Parameter* param;
};

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  // Value of a 1x1 node.
  double scalar() const { return value()(0, 0); }

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  // With record_grad == false no backward closures are stored; use it for
  // inference.
  explicit Tape(bool record_grad = true) : record_grad_(record_grad) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  // One leaf per parameter per tape; repeated calls return the same node.
  Var param(Parameter& p);

  // Runs reverse accumulation from a 1x1 root. Node gradients from any
  // previous backward on this tape are discarded first. Parameter leaves
  // add their gradient into Parameter::grad.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }
  bool recording() const { return record_grad_; }

  // Internal interface used by the operations below.
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    std::function<void()> backward;
  };
  Node& node(std::size_t id) { return nodes_[id]; }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  Var push(Matrix value, bool requires_grad, std::function<void()> backward);
  // Gradient buffer of a node, zero-allocated on first use.
  Matrix& grad_of(std::size_t id);

 private:
  bool record_grad_;
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_leaf_;
};

// Linear algebra.
Var matmul(Var a, Var b);     // a * b
Var matmul_tn(Var a, Var b);  // a^T * b
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
// w * x + b for a column vector x.
Var affine(Var w, Var x, Var b);

// Elementwise nonlinearities.
Var sigmoid(Var a);
Var tanh(Var a);
Var exp(Var a);
Var relu(Var a);

// Structure.
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> columns);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var column(Var a, Eigen::Index j);

// Reductions and losses. All return 1x1 nodes.
Var sum(Var a);
Var sum(std::span<const Var> scalars);
Var squared_norm(Var a);
Var l1_distance(Var a, Var b);
// -log softmax(logits)[target] for a column of logits.
Var cross_entropy(Var logits, Eigen::Index target);

// Softmax over a column vector.
Var softmax(Var a);

// Value-level helpers shared by the graph code and the tests.
Vector softmax_values(const Vector& logits);

}  // namespace mgvc
