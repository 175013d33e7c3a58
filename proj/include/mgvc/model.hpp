#pragma once

#include <span>
#include <string>
#include <vector>

#include "mgvc/autograd.hpp"
#include "mgvc/data.hpp"
#include "mgvc/decoder.hpp"
#include "mgvc/dims.hpp"
#include "mgvc/embeddings.hpp"
#include "mgvc/encoder.hpp"
#include "mgvc/meaning.hpp"

namespace mgvc {

// Every trainable tensor of the captioner and its meaning head.
struct CaptionModel {
  ModelDims dims;
  Vocabulary vocab;
  EmbeddingMatrix embeddings;
  EncoderParams encoder;
  DecoderParams decoder;
  SentenceEncoderParams meaning;

  CaptionModel() = default;
  // Allocates with dims.vocab forced to vocab.size(); parameters drawn from
  // `rng`, pretrained vectors copied into E where available.
  CaptionModel(ModelDims dims, Vocabulary vocab, Rng& rng,
               const PretrainedVectors& pretrained = {});

  CaptionModel(const CaptionModel&) = delete;
  CaptionModel& operator=(const CaptionModel&) = delete;
  CaptionModel(CaptionModel&&) = default;
  CaptionModel& operator=(CaptionModel&&) = default;

  // Stable order: E, encoder, attention, decoder, meaning head.
  std::vector<NamedParameter> parameters();
  // Encoder, attention, decoder and E.
  std::vector<NamedParameter> captioner_parameters();
  std::vector<NamedParameter> meaning_parameters();

  void zero_grad();
};

// Per-frame token ids of the dominant object (kNoObject for empty frames).
std::vector<int> object_ids(const Vocabulary& vocab, const FeaturePack& pack);

EncoderGraph encode_video(Tape& tape, CaptionModel& model, const FeaturePack& pack);

// BOS + caption ids + EOS.
std::vector<int> wrap_caption(const Vocabulary& vocab, const std::vector<std::string>& tokens);

Var caption_loss(Tape& tape, CaptionModel& model, const FeaturePack& pack,
                 const std::vector<std::string>& tokens);

// Ground-truth sentence as E columns of its tokens followed by EOS, the
// same layout a soft-generated caption ends with.
std::vector<Var> ground_truth_sequence(Tape& tape, CaptionModel& model,
                                       const std::vector<std::string>& tokens);

// Greedy caption tokens (EOS stripped).
std::vector<std::string> greedy_caption(CaptionModel& model, const FeaturePack& pack, int max_len);

}  // namespace mgvc
