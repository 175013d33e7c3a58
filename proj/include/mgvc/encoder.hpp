#pragma once

#include <span>
#include <string>
#include <vector>

#include "mgvc/autograd.hpp"
#include "mgvc/data.hpp"
#include "mgvc/dims.hpp"
#include "mgvc/layers.hpp"

namespace mgvc {

struct EncoderInputDims {
  int upper_in;  // frame feature size
  int lower_in;  // hidden + embedding size
  int hidden;

  bool operator==(const EncoderInputDims&) const = default;
};

EncoderInputDims encoder_input_dims(const ModelDims& dims);

// Two stacked LSTMs. The upper one reads frame features; the lower one reads
// the upper hidden state concatenated with the frame's object embedding.
struct EncoderParams {
  LstmParams upper;
  LstmParams lower;

  EncoderParams() = default;
  explicit EncoderParams(const ModelDims& dims);

  void init_uniform(Rng& rng);
  void append_to(std::vector<NamedParameter>& out);
};

struct EncoderGraph {
  std::vector<Var> upper_hidden;  // h_1..h_N
  Var H;                          // hidden x N, columns h_1..h_N
  LstmState final_lower;          // initial decoder state
};

// `frames` is N x d_vis; `object_embeddings` holds one d_emb column per frame.
EncoderGraph encode(Tape& tape, const FrameMatrix& frames, std::span<const Var> object_embeddings,
                    EncoderParams& params);

struct EncoderOutput {
  Matrix H;
  Vector final_hidden;
  Vector final_cell;
};

// Value-only forward pass. `object_embeddings` is d_emb x N.
EncoderOutput encode(const FeaturePack& pack, const Matrix& object_embeddings,
                     EncoderParams& params);

}  // namespace mgvc
