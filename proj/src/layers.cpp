#include "mgvc/layers.hpp"

#include <array>

#include "mgvc/errors.hpp"

namespace mgvc {

void fill_uniform(Matrix& m, Rng& rng, double range) {
  // Column-major traversal fixes the order in which the stream is consumed.
  for (Eigen::Index k = 0; k < m.size(); ++k) m(k) = rng.uniform(-range, range);
}

LstmParams::LstmParams(Eigen::Index input_dim, Eigen::Index hidden)
    : w_input(4 * hidden, input_dim), w_hidden(4 * hidden, hidden), bias(4 * hidden, 1) {}

void LstmParams::init_uniform(Rng& rng, double range) {
  fill_uniform(w_input.value, rng, range);
  fill_uniform(w_hidden.value, rng, range);
  fill_uniform(bias.value, rng, range);
}

void LstmParams::append_to(std::vector<NamedParameter>& out, const std::string& prefix) {
  out.push_back({prefix + ".w_input", &w_input});
  out.push_back({prefix + ".w_hidden", &w_hidden});
  out.push_back({prefix + ".bias", &bias});
}

LstmState zero_lstm_state(Tape& tape, Eigen::Index hidden) {
  return {tape.constant(Matrix::Zero(hidden, 1)), tape.constant(Matrix::Zero(hidden, 1))};
}

LstmState lstm_step(Tape& tape, LstmParams& params, Var input, const LstmState& prev,
                    const std::string& where) {
  const Eigen::Index h = params.hidden_dim();
  if (input.rows() != params.input_dim() || input.cols() != 1)
    throw ShapeError(where + ": input has " + std::to_string(input.rows()) + " rows, expected " +
                     std::to_string(params.input_dim()));
  if (prev.hidden.rows() != h || prev.cell.rows() != h)
    throw ShapeError(where + ": recurrent state has " + std::to_string(prev.hidden.rows()) +
                     " rows, expected " + std::to_string(h));
  Var gates = add(affine(tape.param(params.w_input), input, tape.param(params.bias)),
                  matmul(tape.param(params.w_hidden), prev.hidden));
  Var i = sigmoid(slice_rows(gates, 0, h));
  Var f = sigmoid(slice_rows(gates, h, h));
  Var o = sigmoid(slice_rows(gates, 2 * h, h));
  Var g = tanh(slice_rows(gates, 3 * h, h));
  Var c = add(mul(f, prev.cell), mul(i, g));
  return {mul(o, tanh(c)), c};
}

GruParams::GruParams(Eigen::Index input_dim, Eigen::Index hidden)
    : w_input(3 * hidden, input_dim),
      w_hidden(3 * hidden, hidden),
      bias_input(3 * hidden, 1),
      bias_hidden(3 * hidden, 1) {}

void GruParams::init_uniform(Rng& rng, double range) {
  fill_uniform(w_input.value, rng, range);
  fill_uniform(w_hidden.value, rng, range);
  fill_uniform(bias_input.value, rng, range);
  fill_uniform(bias_hidden.value, rng, range);
}

void GruParams::append_to(std::vector<NamedParameter>& out, const std::string& prefix) {
  out.push_back({prefix + ".w_input", &w_input});
  out.push_back({prefix + ".w_hidden", &w_hidden});
  out.push_back({prefix + ".bias_input", &bias_input});
  out.push_back({prefix + ".bias_hidden", &bias_hidden});
}

Var gru_step(Tape& tape, GruParams& params, Var input, Var prev_hidden, const std::string& where) {
  const Eigen::Index h = params.hidden_dim();
  if (input.rows() != params.input_dim() || input.cols() != 1)
    throw ShapeError(where + ": input has " + std::to_string(input.rows()) + " rows, expected " +
                     std::to_string(params.input_dim()));
  if (prev_hidden.rows() != h)
    throw ShapeError(where + ": recurrent state has " + std::to_string(prev_hidden.rows()) +
                     " rows, expected " + std::to_string(h));
  Var xs = affine(tape.param(params.w_input), input, tape.param(params.bias_input));
  Var hs = affine(tape.param(params.w_hidden), prev_hidden, tape.param(params.bias_hidden));
  Var r = sigmoid(add(slice_rows(xs, 0, h), slice_rows(hs, 0, h)));
  Var z = sigmoid(add(slice_rows(xs, h, h), slice_rows(hs, h, h)));
  Var n = tanh(add(slice_rows(xs, 2 * h, h), mul(r, slice_rows(hs, 2 * h, h))));
  Var keep = add_scalar(scale(z, -1.0), 1.0);
  return add(mul(keep, n), mul(z, prev_hidden));
}

LinearParams::LinearParams(Eigen::Index in, Eigen::Index out) : weight(out, in), bias(out, 1) {}

void LinearParams::init_uniform(Rng& rng, double range) {
  fill_uniform(weight.value, rng, range);
  fill_uniform(bias.value, rng, range);
}

void LinearParams::append_to(std::vector<NamedParameter>& out, const std::string& prefix) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

Var linear(Tape& tape, LinearParams& params, Var x) {
  return affine(tape.param(params.weight), x, tape.param(params.bias));
}

}  // namespace mgvc
