#pragma once

#include <string>
#include <vector>

#include "mgvc/autograd.hpp"
#include "mgvc/random.hpp"

namespace mgvc {

// Long short-term memory cell. Gate rows are stacked as
// [input; forget; output; candidate], each `hidden` rows tall.
struct LstmParams {
  Parameter w_input;   // 4h x input_dim
  Parameter w_hidden;  // 4h x h
  Parameter bias;      // 4h x 1

  LstmParams() = default;
  LstmParams(Eigen::Index input_dim, Eigen::Index hidden);

  Eigen::Index input_dim() const { return w_input.value.cols(); }
  Eigen::Index hidden_dim() const { return w_hidden.value.cols(); }

  void init_uniform(Rng& rng, double range);
  void append_to(std::vector<NamedParameter>& out, const std::string& prefix);
};

struct LstmState {
  Var hidden;
  Var cell;
};

// One LSTM step. `where` names the layer/step in shape errors.
LstmState lstm_step(Tape& tape, LstmParams& params, Var input, const LstmState& prev,
                    const std::string& where);

LstmState zero_lstm_state(Tape& tape, Eigen::Index hidden);

// Gated recurrent unit. Rows stacked as [reset; update; candidate].
//   r = sigmoid(Wr x + br_x + Ur h + br_h)
//   z = sigmoid(Wz x + bz_x + Uz h + bz_h)
//   n = tanh(Wn x + bn_x + r * (Un h + bn_h))
//   h' = (1 - z) * n + z * h
struct GruParams {
  Parameter w_input;      // 3h x input_dim
  Parameter w_hidden;     // 3h x h
  Parameter bias_input;   // 3h x 1
  Parameter bias_hidden;  // 3h x 1

  GruParams() = default;
  GruParams(Eigen::Index input_dim, Eigen::Index hidden);

  Eigen::Index input_dim() const { return w_input.value.cols(); }
  Eigen::Index hidden_dim() const { return w_hidden.value.cols(); }

  void init_uniform(Rng& rng, double range);
  void append_to(std::vector<NamedParameter>& out, const std::string& prefix);
};

Var gru_step(Tape& tape, GruParams& params, Var input, Var prev_hidden, const std::string& where);

// y = W x + b.
struct LinearParams {
  Parameter weight;  // out x in
  Parameter bias;    // out x 1

  LinearParams() = default;
  LinearParams(Eigen::Index in, Eigen::Index out);

  void init_uniform(Rng& rng, double range);
  void append_to(std::vector<NamedParameter>& out, const std::string& prefix);
};

Var linear(Tape& tape, LinearParams& params, Var x);

void fill_uniform(Matrix& m, Rng& rng, double range);

}  // namespace mgvc
