#include "mgvc/decoder.hpp"

#include <cmath>

#include "mgvc/embeddings.hpp"
#include "mgvc/errors.hpp"

namespace mgvc {

DecoderParams::DecoderParams(const ModelDims& dims)
    : attention(dims.hidden),
      cell(dims.hidden + dims.d_emb, dims.hidden),
      projection(dims.hidden, dims.vocab) {}

void DecoderParams::init_uniform(Rng& rng) {
  const double range = 1.0 / std::sqrt(static_cast<double>(cell.hidden_dim()));
  fill_uniform(attention.W.value, rng, range);
  attention.post.init_uniform(rng, range);
  cell.init_uniform(rng, range);
  projection.init_uniform(rng, range);
}

void DecoderParams::append_to(std::vector<NamedParameter>& out) {
  out.push_back({"attention.W", &attention.W});
  attention.post.append_to(out, "attention.post");
  cell.append_to(out, "decoder.cell");
  projection.append_to(out, "decoder.projection");
}

int argmax(const Matrix& column) {
  Eigen::Index best = 0;
  column.col(0).maxCoeff(&best);
  return static_cast<int>(best);
}

AttentionGraph attend(Tape& tape, Var query, Var H, AttentionParams& params) {
  if (H.cols() < 1) throw ShapeError("attention: H has no columns");
  if (query.rows() != H.rows())
    throw ShapeError("attention: query has " + std::to_string(query.rows()) + " rows, H has " +
                     std::to_string(H.rows()));
  // (query^T W H)^T = H^T (W^T query)
  Var energies = matmul_tn(H, matmul_tn(tape.param(params.W), query));
  Var weights = softmax(energies);
  return {matmul(H, weights), weights};
}

std::pair<Vector, Vector> attend(const Vector& query, const Matrix& H, AttentionParams& params) {
  Tape tape(false);
  const AttentionGraph g = attend(tape, tape.constant(query), tape.constant(H), params);
  return {g.context.value().col(0), g.weights.value().col(0)};
}

DecoderStepGraph decoder_step(Tape& tape, const LstmState& prev, Var input_embedding, Var H, Var E,
                              DecoderParams& params, bool with_probs) {
  if (input_embedding.rows() != E.rows())
    throw ShapeError("decoder: input embedding has " + std::to_string(input_embedding.rows()) +
                     " rows, expected " + std::to_string(E.rows()));
  DecoderStepGraph out;
  out.attention = attend(tape, prev.hidden, H, params.attention);
  const Var parts[] = {linear(tape, params.attention.post, out.attention.context), input_embedding};
  out.state = lstm_step(tape, params.cell, concat_rows(parts), prev, "decoder.cell");
  out.logits = linear(tape, params.projection, out.state.hidden);
  if (out.logits.rows() != E.cols())
    throw ShapeError("decoder: projection emits " + std::to_string(out.logits.rows()) +
                     " logits for a vocabulary of " + std::to_string(E.cols()));
  if (with_probs) {
    out.probs = softmax(out.logits);
    out.soft_embedding = matmul(E, out.probs);
  }
  return out;
}

Var teacher_forced_loss(Tape& tape, const EncoderGraph& encoded, std::span<const int> tokens,
                        Var E, DecoderParams& params) {
  if (tokens.size() < 2) throw InputError("teacher_forced_loss: need BOS plus at least one target");
  if (tokens.front() != Vocabulary::kBos)
    throw InputError("teacher_forced_loss: sequence must start with BOS");
  for (int id : tokens)
    if (id < 0 || id >= E.cols())
      throw VocabularyError("teacher_forced_loss: token id " + std::to_string(id) +
                            " outside vocabulary of size " + std::to_string(E.cols()));
  LstmState state = encoded.final_lower;
  std::vector<Var> step_losses;
  for (std::size_t t = 1; t < tokens.size(); ++t) {
    const DecoderStepGraph s =
        decoder_step(tape, state, column(E, tokens[t - 1]), encoded.H, E, params, false);
    step_losses.push_back(cross_entropy(s.logits, tokens[t]));
    state = s.state;
  }
  return sum(step_losses);
}

SoftSequence generate_soft(Tape& tape, const EncoderGraph& encoded, Var E, DecoderParams& params,
                           int max_len, bool stop_at_eos) {
  if (max_len < 1) throw InputError("generate_soft: max_len must be at least 1");
  SoftSequence out;
  LstmState state = encoded.final_lower;
  Var input = column(E, Vocabulary::kBos);
  for (int t = 0; t < max_len; ++t) {
    const DecoderStepGraph s = decoder_step(tape, state, input, encoded.H, E, params, true);
    out.soft.push_back(s.soft_embedding);
    out.probs.push_back(s.probs);
    out.ids.push_back(argmax(s.probs.value()));
    state = s.state;
    input = s.soft_embedding;
    if (stop_at_eos && out.ids.back() == Vocabulary::kEos) break;
  }
  return out;
}

std::vector<int> generate_greedy(Tape& tape, const EncoderGraph& encoded, Var E,
                                 DecoderParams& params, int max_len) {
  if (max_len < 1) throw InputError("generate_greedy: max_len must be at least 1");
  std::vector<int> ids;
  LstmState state = encoded.final_lower;
  int prev = Vocabulary::kBos;
  for (int t = 0; t < max_len; ++t) {
    const DecoderStepGraph s = decoder_step(tape, state, column(E, prev), encoded.H, E, params, false);
    prev = argmax(s.logits.value());
    ids.push_back(prev);
    state = s.state;
    if (prev == Vocabulary::kEos) break;
  }
  return ids;
}

}  // namespace mgvc
