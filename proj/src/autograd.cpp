#include "mgvc/autograd.hpp"

#include <cmath>
#include <string>

#include "mgvc/errors.hpp"

namespace mgvc {

const Matrix& Var::value() const { return tape_->node(id_).value; }
const Matrix& Var::grad() const { return tape_->grad_of(id_); }

Var Tape::push(Matrix value, bool requires_grad, std::function<void()> backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = record_grad_ && requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Matrix& Tape::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::param(Parameter& p) {
  if (auto it = param_leaf_.find(&p); it != param_leaf_.end()) return Var(this, it->second);
  Var v = push(p.value, true, nullptr);
  nodes_[v.id()].param = &p;
  param_leaf_.emplace(&p, v.id());
  return v;
}

void Tape::backward(Var root) {
  if (root.tape() != this) throw ShapeError("backward: root belongs to another tape");
  if (root.rows() != 1 || root.cols() != 1) throw ShapeError("backward: root must be 1x1");
  if (!record_grad_) throw ConfigError("backward: tape was created without gradient recording");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  grad_of(root.id())(0, 0) = 1.0;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward();
    if (n.param != nullptr) {
      if (n.param->grad.rows() != n.value.rows() || n.param->grad.cols() != n.value.cols())
        n.param->zero_grad();
      n.param->grad += n.grad;
    }
  }
}

namespace {

Tape& tape_of(Var a) { return *a.tape(); }

bool needs(Var a) { return a.tape()->node(a.id()).requires_grad; }

void check_same_tape(Var a, Var b, const char* op) {
  if (a.tape() != b.tape()) throw ShapeError(std::string(op) + ": operands on different tapes");
}

void check_same_shape(Var a, Var b, const char* op) {
  check_same_tape(a, b, op);
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
}

// Elementwise unary op whose derivative is expressed through (input, output).
template <typename Fwd, typename Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  Tape& t = tape_of(a);
  Matrix out = a.value().unaryExpr(fwd);
  const std::size_t ia = a.id();
  std::size_t io = t.size();
  return t.push(std::move(out), needs(a), [&t, ia, io, deriv] {
    const Matrix& x = t.node(ia).value;
    const Matrix& y = t.node(io).value;
    const Matrix& g = t.node(io).grad;
    Matrix& ga = t.grad_of(ia);
    for (Eigen::Index k = 0; k < x.size(); ++k) ga(k) += g(k) * deriv(x(k), y(k));
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  check_same_tape(a, b, "matmul");
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.rows()));
  Tape& t = tape_of(a);
  const std::size_t ia = a.id(), ib = b.id(), io = t.size();
  return t.push(a.value() * b.value(), needs(a) || needs(b), [&t, ia, ib, io] {
    const Matrix& g = t.node(io).grad;
    if (t.node(ia).requires_grad) t.grad_of(ia).noalias() += g * t.node(ib).value.transpose();
    if (t.node(ib).requires_grad) t.grad_of(ib).noalias() += t.node(ia).value.transpose() * g;
  });
}

Var matmul_tn(Var a, Var b) {
  check_same_tape(a, b, "matmul_tn");
  if (a.rows() != b.rows())
    throw ShapeError("matmul_tn: row counts " + std::to_string(a.rows()) + " vs " +
                     std::to_string(b.rows()));
  Tape& t = tape_of(a);
  const std::size_t ia = a.id(), ib = b.id(), io = t.size();
  return t.push(a.value().transpose() * b.value(), needs(a) || needs(b), [&t, ia, ib, io] {
    const Matrix& g = t.node(io).grad;
    if (t.node(ia).requires_grad) t.grad_of(ia).noalias() += t.node(ib).value * g.transpose();
    if (t.node(ib).requires_grad) t.grad_of(ib).noalias() += t.node(ia).value * g;
  });
}

Var add(Var a, Var b) {
  check_same_shape(a, b, "add");
  Tape& t = tape_of(a);
  const std::size_t ia = a.id(), ib = b.id(), io = t.size();
  return t.push(a.value() + b.value(), needs(a) || needs(b), [&t, ia, ib, io] {
    const Matrix& g = t.node(io).grad;
    if (t.node(ia).requires_grad) t.grad_of(ia) += g;
    if (t.node(ib).requires_grad) t.grad_of(ib) += g;
  });
}

Var sub(Var a, Var b) {
  check_same_shape(a, b, "sub");
  Tape& t = tape_of(a);
  const std::size_t ia = a.id(), ib = b.id(), io = t.size();
  return t.push(a.value() - b.value(), needs(a) || needs(b), [&t, ia, ib, io] {
    const Matrix& g = t.node(io).grad;
    if (t.node(ia).requires_grad) t.grad_of(ia) += g;
    if (t.node(ib).requires_grad) t.grad_of(ib) -= g;
  });
}

Var mul(Var a, Var b) {
  check_same_shape(a, b, "mul");
  Tape& t = tape_of(a);
  const std::size_t ia = a.id(), ib = b.id(), io = t.size();
  return t.push(a.value().cwiseProduct(b.value()), needs(a) || needs(b), [&t, ia, ib, io] {
    const Matrix& g = t.node(io).grad;
    if (t.node(ia).requires_grad) t.grad_of(ia) += g.cwiseProduct(t.node(ib).value);
    if (t.node(ib).requires_grad) t.grad_of(ib) += g.cwiseProduct(t.node(ia).value);
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  const std::size_t ia = a.id(), io = t.size();
  return t.push(a.value() * s, needs(a), [&t, ia, io, s] { t.grad_of(ia) += s * t.node(io).grad; });
}

Var add_scalar(Var a, double s) {
  Tape& t = tape_of(a);
  const std::size_t ia = a.id(), io = t.size();
  return t.push(a.value().array() + s, needs(a), [&t, ia, io] { t.grad_of(ia) += t.node(io).grad; });
}

Var affine(Var w, Var x, Var b) {
  Var y = matmul(w, x);
  if (b.rows() != y.rows() || b.cols() != y.cols())
    throw ShapeError("affine: bias has " + std::to_string(b.rows()) + " rows, expected " +
                     std::to_string(y.rows()));
  return add(y, b);
}

Var sigmoid(Var a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var exp(Var a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var relu(Var a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  Tape& t = tape_of(parts.front());
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.front().cols();
  bool req = false;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    check_same_tape(parts.front(), p, "concat_rows");
    if (p.cols() != cols) throw ShapeError("concat_rows: column count mismatch");
    rows += p.rows();
    req = req || needs(p);
    ids.push_back(p.id());
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  const std::size_t io = t.size();
  return t.push(std::move(out), req, [&t, ids = std::move(ids), io] {
    const Matrix& g = t.node(io).grad;
    Eigen::Index r = 0;
    for (std::size_t id : ids) {
      const Eigen::Index n = t.node(id).value.rows();
      if (t.node(id).requires_grad) t.grad_of(id) += g.middleRows(r, n);
      r += n;
    }
  });
}

Var concat_cols(std::span<const Var> columns) {
  if (columns.empty()) throw ShapeError("concat_cols: no operands");
  Tape& t = tape_of(columns.front());
  const Eigen::Index rows = columns.front().rows();
  Eigen::Index cols = 0;
  bool req = false;
  std::vector<std::size_t> ids;
  for (const Var& c : columns) {
    check_same_tape(columns.front(), c, "concat_cols");
    if (c.rows() != rows) throw ShapeError("concat_cols: row count mismatch");
    cols += c.cols();
    req = req || needs(c);
    ids.push_back(c.id());
  }
  Matrix out(rows, cols);
  Eigen::Index k = 0;
  for (const Var& c : columns) {
    out.middleCols(k, c.cols()) = c.value();
    k += c.cols();
  }
  const std::size_t io = t.size();
  return t.push(std::move(out), req, [&t, ids = std::move(ids), io] {
    const Matrix& g = t.node(io).grad;
    Eigen::Index k = 0;
    for (std::size_t id : ids) {
      const Eigen::Index n = t.node(id).value.cols();
      if (t.node(id).requires_grad) t.grad_of(id) += g.middleCols(k, n);
      k += n;
    }
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows())
    throw ShapeError("slice_rows: range [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") outside " + std::to_string(a.rows()) +
                     " rows");
  Tape& t = tape_of(a);
  const std::size_t ia = a.id(), io = t.size();
  return t.push(a.value().middleRows(start, count), needs(a), [&t, ia, io, start, count] {
    t.grad_of(ia).middleRows(start, count) += t.node(io).grad;
  });
}

Var column(Var a, Eigen::Index j) {
  if (j < 0 || j >= a.cols())
    throw ShapeError("column: index " + std::to_string(j) + " outside " +
                     std::to_string(a.cols()) + " columns");
  Tape& t = tape_of(a);
  const std::size_t ia = a.id(), io = t.size();
  return t.push(a.value().col(j), needs(a),
                [&t, ia, io, j] { t.grad_of(ia).col(j) += t.node(io).grad; });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  const std::size_t ia = a.id(), io = t.size();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t.push(std::move(out), needs(a),
                [&t, ia, io] { t.grad_of(ia).array() += t.node(io).grad(0, 0); });
}

Var sum(std::span<const Var> scalars) {
  if (scalars.empty()) throw ShapeError("sum: no operands");
  for (const Var& s : scalars)
    if (s.rows() != 1 || s.cols() != 1) throw ShapeError("sum: operands must be 1x1");
  return sum(concat_rows(scalars));
}

Var squared_norm(Var a) {
  Tape& t = tape_of(a);
  const std::size_t ia = a.id(), io = t.size();
  Matrix out(1, 1);
  out(0, 0) = a.value().squaredNorm();
  return t.push(std::move(out), needs(a), [&t, ia, io] {
    t.grad_of(ia) += 2.0 * t.node(io).grad(0, 0) * t.node(ia).value;
  });
}

Var l1_distance(Var a, Var b) {
  check_same_shape(a, b, "l1_distance");
  Tape& t = tape_of(a);
  const std::size_t ia = a.id(), ib = b.id(), io = t.size();
  Matrix out(1, 1);
  out(0, 0) = (a.value() - b.value()).cwiseAbs().sum();
  return t.push(std::move(out), needs(a) || needs(b), [&t, ia, ib, io] {
    const double g = t.node(io).grad(0, 0);
    // sign(0) = 0 is the subgradient used at coincident entries.
    Matrix s = (t.node(ia).value - t.node(ib).value).unaryExpr([](double d) {
      return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    });
    if (t.node(ia).requires_grad) t.grad_of(ia) += g * s;
    if (t.node(ib).requires_grad) t.grad_of(ib) -= g * s;
  });
}

Vector softmax_values(const Vector& logits) {
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

Var softmax(Var a) {
  if (a.cols() != 1) throw ShapeError("softmax: expects a column vector");
  Tape& t = tape_of(a);
  const std::size_t ia = a.id(), io = t.size();
  return t.push(softmax_values(a.value().col(0)), needs(a), [&t, ia, io] {
    const Matrix& y = t.node(io).value;
    const Matrix& g = t.node(io).grad;
    const double dot = y.col(0).dot(g.col(0));
    t.grad_of(ia) += y.cwiseProduct((g.array() - dot).matrix());
  });
}

Var cross_entropy(Var logits, Eigen::Index target) {
  if (logits.cols() != 1) throw ShapeError("cross_entropy: expects a column vector");
  if (target < 0 || target >= logits.rows())
    throw VocabularyError("cross_entropy: target id " + std::to_string(target) +
                          " outside vocabulary of size " + std::to_string(logits.rows()));
  Tape& t = tape_of(logits);
  const Vector z = logits.value().col(0);
  const double m = z.maxCoeff();
  const double lse = m + std::log((z.array() - m).exp().sum());
  Matrix out(1, 1);
  out(0, 0) = lse - z(target);
  const std::size_t ia = logits.id(), io = t.size();
  return t.push(std::move(out), needs(logits), [&t, ia, io, target] {
    const double g = t.node(io).grad(0, 0);
    Vector p = softmax_values(t.node(ia).value.col(0));
    p(target) -= 1.0;
    t.grad_of(ia) += g * p;
  });
}

}  // namespace mgvc
