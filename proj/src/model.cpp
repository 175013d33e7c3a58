#include "mgvc/model.hpp"

#include "mgvc/errors.hpp"

namespace mgvc {

CaptionModel::CaptionModel(ModelDims d, Vocabulary v, Rng& rng, const PretrainedVectors& pretrained)
    : dims(d), vocab(std::move(v)) {
  dims.vocab = vocab.size();
  if (dims.d_vis < 1 || dims.d_emb < 1 || dims.hidden < 1 || dims.meaning_hidden < 1 ||
      dims.sentence_dim < 1)
    throw ConfigError("model dims: every size must be at least 1");
  embeddings = import_pretrained(vocab, pretrained, dims.d_emb, rng);
  encoder = EncoderParams(dims);
  decoder = DecoderParams(dims);
  meaning = SentenceEncoderParams(dims);
  encoder.init_uniform(rng);
  decoder.init_uniform(rng);
  meaning.init_uniform(rng);
}

std::vector<NamedParameter> CaptionModel::captioner_parameters() {
  std::vector<NamedParameter> out{{"embeddings.E", &embeddings.E}};
  encoder.append_to(out);
  decoder.append_to(out);
  return out;
}

std::vector<NamedParameter> CaptionModel::meaning_parameters() {
  std::vector<NamedParameter> out;
  meaning.append_to(out);
  return out;
}

std::vector<NamedParameter> CaptionModel::parameters() {
  auto out = captioner_parameters();
  for (auto& p : meaning_parameters()) out.push_back(p);
  return out;
}

void CaptionModel::zero_grad() {
  for (auto& p : parameters()) p.param->zero_grad();
}

std::vector<int> object_ids(const Vocabulary& vocab, const FeaturePack& pack) {
  std::vector<int> ids;
  ids.reserve(pack.detections.size());
  for (const auto& frame : pack.detections) ids.push_back(object_token_id(vocab, dominant_object(frame)));
  return ids;
}

EncoderGraph encode_video(Tape& tape, CaptionModel& model, const FeaturePack& pack) {
  Var E = tape.param(model.embeddings.E);
  std::vector<Var> objects;
  for (int id : object_ids(model.vocab, pack)) objects.push_back(column(E, id));
  return encode(tape, pack.frame_features, objects, model.encoder);
}

std::vector<int> wrap_caption(const Vocabulary& vocab, const std::vector<std::string>& tokens) {
  std::vector<int> ids{Vocabulary::kBos};
  for (int id : vocab.encode(tokens)) ids.push_back(id);
  ids.push_back(Vocabulary::kEos);
  return ids;
}

Var caption_loss(Tape& tape, CaptionModel& model, const FeaturePack& pack,
                 const std::vector<std::string>& tokens) {
  const EncoderGraph enc = encode_video(tape, model, pack);
  const auto ids = wrap_caption(model.vocab, tokens);
  return teacher_forced_loss(tape, enc, ids, tape.param(model.embeddings.E), model.decoder);
}

std::vector<Var> ground_truth_sequence(Tape& tape, CaptionModel& model,
                                       const std::vector<std::string>& tokens) {
  Var E = tape.param(model.embeddings.E);
  std::vector<Var> seq;
  for (int id : model.vocab.encode(tokens)) seq.push_back(column(E, id));
  seq.push_back(column(E, Vocabulary::kEos));
  return seq;
}

std::vector<std::string> greedy_caption(CaptionModel& model, const FeaturePack& pack, int max_len) {
  Tape tape(false);
  const EncoderGraph enc = encode_video(tape, model, pack);
  const auto ids = generate_greedy(tape, enc, tape.param(model.embeddings.E), model.decoder, max_len);
  return model.vocab.decode(ids);
}

}  // namespace mgvc
