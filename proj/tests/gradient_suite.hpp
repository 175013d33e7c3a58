#pragma once

// The four end-to-end gradient checks on a toy model: encoder, attention +
// decoder + cross-entropy, soft-embedding path into loss_sim, sentence
// encoder.

#include <vector>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "mgvc/meaning.hpp"
#include "mgvc/model.hpp"

namespace mgvc::testing {

struct GradientSuite {
  Rng rng{11};
  CaptionModel model{toy_dims(), toy_vocab(), rng};
  FeaturePack pack = random_pack(rng, "v", 4, 8);
  std::vector<std::string> caption{"a", "dog", "is", "running"};
  Matrix probe_h = Matrix::Random(8, 4);
  Matrix probe_v = Matrix::Random(8, 1);

  GradientSuite() {
    // Larger weights than the default init so every nonlinearity is away
    // from its linear regime.
    for (auto& p : model.parameters()) p.param->value *= 2.0;
  }

  std::vector<NamedParameter> encoder_params() {
    std::vector<NamedParameter> out;
    model.encoder.append_to(out);
    out.push_back({"embeddings.E", &model.embeddings.E});
    return out;
  }

  GradCheckResult encoder() {
    return gradient_check(
        [&](Tape& t) {
          const EncoderGraph g = encode_video(t, model, pack);
          Var a = sum(mul(g.H, t.constant(probe_h)));
          Var b = sum(mul(g.final_lower.hidden, t.constant(probe_v)));
          Var c = sum(mul(g.final_lower.cell, t.constant(probe_v)));
          const Var parts[] = {a, b, c};
          return sum(parts);
        },
        encoder_params());
  }

  GradCheckResult decoder() {
    return gradient_check([&](Tape& t) { return caption_loss(t, model, pack, caption); },
                          model.captioner_parameters());
  }

  GradCheckResult soft_path() {
    return gradient_check(
        [&](Tape& t) {
          const EncoderGraph enc = encode_video(t, model, pack);
          const SoftSequence soft =
              generate_soft(t, enc, t.param(model.embeddings.E), model.decoder, 4, false);
          Var gen = embed_sentence(t, soft.soft, model.meaning);
          Var gt = embed_sentence(t, ground_truth_sequence(t, model, caption), model.meaning);
          return loss_sim(gen, gt);
        },
        model.parameters());
  }

  GradCheckResult sentence_encoder() {
    std::vector<Matrix> words;
    for (int i = 0; i < 5; ++i) words.push_back(Matrix::Random(8, 1));
    return gradient_check(
        [&](Tape& t) {
          std::vector<Var> seq;
          for (const auto& w : words) seq.push_back(t.constant(w));
          return sum(mul(embed_sentence(t, seq, model.meaning), t.constant(probe_v)));
        },
        model.meaning_parameters());
  }
};

}  // namespace mgvc::testing
