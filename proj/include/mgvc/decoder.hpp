#pragma once

#include <span>
#include <utility>
#include <vector>

#include "mgvc/autograd.hpp"
#include "mgvc/dims.hpp"
#include "mgvc/encoder.hpp"
#include "mgvc/layers.hpp"

namespace mgvc {

inline constexpr int kDefaultMaxCaptionLength = 30;

// Bilinear attention energies query^T W H, plus the dimension-preserving
// linear map applied to the attended vector before it enters the decoder.
struct AttentionParams {
  Parameter W;        // hidden x hidden
  LinearParams post;  // hidden -> hidden

  AttentionParams() = default;
  explicit AttentionParams(int hidden) : W(hidden, hidden), post(hidden, hidden) {}
};

struct DecoderParams {
  AttentionParams attention;
  LstmParams cell;          // (hidden + d_emb) -> hidden
  LinearParams projection;  // hidden -> V

  DecoderParams() = default;
  explicit DecoderParams(const ModelDims& dims);

  void init_uniform(Rng& rng);
  void append_to(std::vector<NamedParameter>& out);
};

struct AttentionGraph {
  Var context;  // a = H lambda
  Var weights;  // lambda = softmax(query^T W H)
};

AttentionGraph attend(Tape& tape, Var query, Var H, AttentionParams& params);

// Value-only attention: returns (a, lambda).
std::pair<Vector, Vector> attend(const Vector& query, const Matrix& H, AttentionParams& params);

struct DecoderStepGraph {
  Var logits;
  Var probs;           // p_t; invalid unless requested
  Var soft_embedding;  // E p_t; invalid unless requested
  LstmState state;     // decoder hidden/cell after this step
  AttentionGraph attention;
};

// One decoder step. The attention query is the previous decoder hidden
// state; the LSTM input is [post(a_t); input_embedding].
DecoderStepGraph decoder_step(Tape& tape, const LstmState& prev, Var input_embedding, Var H, Var E,
                              DecoderParams& params, bool with_probs = true);

// Sum over t of -log p_t[target_t]. `tokens` is the full BOS ... EOS
// sequence; step t reads tokens[t-1] and predicts tokens[t].
Var teacher_forced_loss(Tape& tape, const EncoderGraph& encoded, std::span<const int> tokens,
                        Var E, DecoderParams& params);

struct SoftSequence {
  std::vector<Var> soft;   // s_soft_1..s_soft_M
  std::vector<Var> probs;  // p_1..p_M
  std::vector<int> ids;    // argmax of each p_t
};

// Feeds E p_t back as the next input instead of a sampled word, so the
// whole sequence stays differentiable. Stops after max_len steps or, when
// stop_at_eos, after the first step whose argmax is EOS (that step is kept).
SoftSequence generate_soft(Tape& tape, const EncoderGraph& encoded, Var E, DecoderParams& params,
                           int max_len, bool stop_at_eos = true);

// Greedy argmax decoding with hard word embeddings. The returned ids include
// the terminating EOS when one was produced.
std::vector<int> generate_greedy(Tape& tape, const EncoderGraph& encoded, Var E,
                                 DecoderParams& params, int max_len);

int argmax(const Matrix& column);

}  // namespace mgvc
