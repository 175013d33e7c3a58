#include "mgvc/encoder.hpp"

#include <cmath>

#include "mgvc/errors.hpp"

namespace mgvc {

EncoderInputDims encoder_input_dims(const ModelDims& dims) {
  return {dims.d_vis, dims.hidden + dims.d_emb, dims.hidden};
}

EncoderParams::EncoderParams(const ModelDims& dims) {
  const auto in = encoder_input_dims(dims);
  upper = LstmParams(in.upper_in, in.hidden);
  lower = LstmParams(in.lower_in, in.hidden);
}

void EncoderParams::init_uniform(Rng& rng) {
  const double range = 1.0 / std::sqrt(static_cast<double>(upper.hidden_dim()));
  upper.init_uniform(rng, range);
  lower.init_uniform(rng, range);
}

void EncoderParams::append_to(std::vector<NamedParameter>& out) {
  upper.append_to(out, "encoder.upper");
  lower.append_to(out, "encoder.lower");
}

EncoderGraph encode(Tape& tape, const FrameMatrix& frames, std::span<const Var> object_embeddings,
                    EncoderParams& params) {
  const Eigen::Index n = frames.rows();
  if (n < 1) throw ShapeError("encoder: no frames");
  if (frames.cols() != params.upper.input_dim())
    throw ShapeError("encoder.upper step 0: frame features have " + std::to_string(frames.cols()) +
                     " dims, expected " + std::to_string(params.upper.input_dim()));
  if (static_cast<Eigen::Index>(object_embeddings.size()) != n)
    throw ShapeError("encoder.lower: " + std::to_string(object_embeddings.size()) +
                     " object embeddings for " + std::to_string(n) + " frames");

  const Eigen::Index h = params.upper.hidden_dim();
  EncoderGraph out;
  LstmState upper = zero_lstm_state(tape, h);
  LstmState lower = zero_lstm_state(tape, params.lower.hidden_dim());
  for (Eigen::Index t = 0; t < n; ++t) {
    const std::string step = " step " + std::to_string(t);
    Var x = tape.constant(frames.row(t).transpose().cast<double>());
    upper = lstm_step(tape, params.upper, x, upper, "encoder.upper" + step);
    out.upper_hidden.push_back(upper.hidden);
    const Var fused_parts[] = {upper.hidden, object_embeddings[static_cast<std::size_t>(t)]};
    lower = lstm_step(tape, params.lower, concat_rows(fused_parts), lower, "encoder.lower" + step);
  }
  out.H = concat_cols(out.upper_hidden);
  out.final_lower = lower;
  return out;
}

EncoderOutput encode(const FeaturePack& pack, const Matrix& object_embeddings,
                     EncoderParams& params) {
  Tape tape(false);
  std::vector<Var> objects;
  for (Eigen::Index t = 0; t < object_embeddings.cols(); ++t)
    objects.push_back(tape.constant(object_embeddings.col(t)));
  const EncoderGraph g = encode(tape, pack.frame_features, objects, params);
  return {g.H.value(), g.final_lower.hidden.value().col(0), g.final_lower.cell.value().col(0)};
}

}  // namespace mgvc
