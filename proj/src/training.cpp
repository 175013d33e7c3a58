#include "mgvc/training.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "mgvc/errors.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace mgvc {

// ---------------------------------------------------------------- config

namespace {

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

json config_to_json(const TrainingConfig& c) {
  return json{{"batch_size", c.batch_size},
              {"max_frames", c.max_frames},
              {"d_vis", c.d_vis},
              {"d_emb", c.d_emb},
              {"hidden", c.hidden},
              {"meaning_hidden", c.meaning_hidden},
              {"sentence_dim", c.sentence_dim},
              {"vocab_min_count", c.vocab_min_count},
              {"lr_all", c.lr_all},
              {"lr_meaning", c.lr_meaning},
              {"clip_norm", c.clip_norm},
              {"meaning_phase_probability", c.meaning_phase_probability},
              {"triplet_margin", c.triplet_margin},
              {"pairing", c.pairing},
              {"seed", c.seed},
              {"patience", c.patience},
              {"max_len", c.max_len},
              {"word_max_epochs", c.word_max_epochs},
              {"pretrain_epochs", c.pretrain_epochs},
              {"mixed_steps", c.mixed_steps},
              {"pretrained_vectors", c.pretrained_vectors}};
}

TrainingConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  TrainingConfig c;
  for (const auto& [key, value] : j.items()) {
    auto get = [&](auto& dst) {
      try {
        dst = value.get<std::remove_reference_t<decltype(dst)>>();
      } catch (const json::exception&) {
        throw ConfigError("config: key '" + key + "' has the wrong type");
      }
    };
    if (key == "batch_size") get(c.batch_size);
    else if (key == "max_frames") get(c.max_frames);
    else if (key == "d_vis") get(c.d_vis);
    else if (key == "d_emb") get(c.d_emb);
    else if (key == "hidden") get(c.hidden);
    else if (key == "meaning_hidden") get(c.meaning_hidden);
    else if (key == "sentence_dim") get(c.sentence_dim);
    else if (key == "vocab_min_count") get(c.vocab_min_count);
    else if (key == "lr_all") get(c.lr_all);
    else if (key == "lr_meaning") get(c.lr_meaning);
    else if (key == "clip_norm") get(c.clip_norm);
    else if (key == "meaning_phase_probability") get(c.meaning_phase_probability);
    else if (key == "triplet_margin") get(c.triplet_margin);
    else if (key == "pairing") get(c.pairing);
    else if (key == "seed") get(c.seed);
    else if (key == "patience") get(c.patience);
    else if (key == "max_len") get(c.max_len);
    else if (key == "word_max_epochs") get(c.word_max_epochs);
    else if (key == "pretrain_epochs") get(c.pretrain_epochs);
    else if (key == "mixed_steps") get(c.mixed_steps);
    else if (key == "pretrained_vectors") get(c.pretrained_vectors);
    else throw ConfigError("config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

}  // namespace

void TrainingConfig::validate() const {
  auto positive = [](int v, const char* key) {
    if (v < 1) throw ConfigError(std::string("config: '") + key + "' must be at least 1");
  };
  if (batch_size < 2 || batch_size % 2 != 0)
    throw ConfigError("config: 'batch_size' must be a positive even number");
  positive(max_frames, "max_frames");
  positive(d_vis, "d_vis");
  positive(d_emb, "d_emb");
  positive(hidden, "hidden");
  positive(meaning_hidden, "meaning_hidden");
  positive(sentence_dim, "sentence_dim");
  positive(vocab_min_count, "vocab_min_count");
  positive(max_len, "max_len");
  if (!(lr_all > 0.0)) throw ConfigError("config: 'lr_all' must be positive");
  if (!(lr_meaning > 0.0)) throw ConfigError("config: 'lr_meaning' must be positive");
  if (!(meaning_phase_probability >= 0.0 && meaning_phase_probability <= 1.0))
    throw ConfigError("config: 'meaning_phase_probability' must be in [0, 1]");
  if (!(triplet_margin > 0.0)) throw ConfigError("config: 'triplet_margin' must be positive");
  if (patience < 0) throw ConfigError("config: 'patience' must be non-negative");
  if (word_max_epochs < 0 || pretrain_epochs < 0 || mixed_steps < 0)
    throw ConfigError("config: epoch and step counts must be non-negative");
  pairing_from_string(pairing);
}

ModelDims TrainingConfig::dims(int vocab_size) const {
  return {d_vis, d_emb, hidden, vocab_size, meaning_hidden, sentence_dim};
}

std::string TrainingConfig::to_json() const { return config_to_json(*this).dump(); }

TrainingConfig TrainingConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return config_from_json(j);
}

TrainingConfig TrainingConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json(text);
}

std::uint64_t TrainingConfig::hash() const {
  const std::string s = to_json();
  return fnv1a(s.data(), s.size());
}

// ------------------------------------------------------------ checkpoint

const Matrix& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, m] : tensors)
    if (n == name) return m;
  throw FormatError("checkpoint: no tensor named '" + name + "'");
}

namespace {

constexpr char kMagic[8] = {'M', 'G', 'V', 'C', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kFloat64 = 8;

template <typename T>
void put(std::string& buf, T v) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i)
    buf.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const std::string& buf, std::size_t end) : buf_(buf), end_(end) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == end_; }

 private:
  void need(std::size_t n) const {
    if (n > end_ - pos_) throw FormatError("checkpoint: truncated archive");
  }
  const std::string& buf_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

json dims_to_json(const ModelDims& d) {
  return {{"d_vis", d.d_vis},   {"d_emb", d.d_emb},
          {"hidden", d.hidden}, {"vocab", d.vocab},
          {"meaning_hidden", d.meaning_hidden}, {"sentence_dim", d.sentence_dim}};
}

json state_to_json(const TrainerState& s) {
  return {{"phase", s.phase},
          {"epoch", s.epoch},
          {"epoch_seed", s.epoch_seed},
          {"batch_cursor", s.batch_cursor},
          {"rng_state", s.rng_state},
          {"adam_all_steps", s.adam_all_steps},
          {"adam_meaning_steps", s.adam_meaning_steps},
          {"word_steps", s.word_steps},
          {"meaning_steps", s.meaning_steps},
          {"pretrain_steps", s.pretrain_steps}};
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const fs::path& path) {
  const json meta = {{"format", "mgvc-checkpoint"},
                     {"version", kVersion},
                     {"config", config_to_json(ck.config)},
                     {"config_hash", hex64(ck.config.hash())},
                     {"dims", dims_to_json(ck.dims)},
                     {"vocab", ck.vocab_tokens},
                     {"state", state_to_json(ck.state)}};
  const std::string meta_text = meta.dump();

  std::string buf(kMagic, sizeof kMagic);
  put<std::uint32_t>(buf, kVersion);
  put<std::uint64_t>(buf, meta_text.size());
  buf += meta_text;
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& [name, m] : ck.tensors) {
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(name.size()));
    buf += name;
    put<std::uint8_t>(buf, kFloat64);
    put<std::uint64_t>(buf, static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(buf, static_cast<std::uint64_t>(m.cols()));
    // Row-major payload.
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) put<std::uint64_t>(buf, std::bit_cast<std::uint64_t>(m(r, c)));
  }
  put<std::uint64_t>(buf, fnv1a(buf.data(), buf.size()));

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw FormatError(path.string() + ": write failed");
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open checkpoint");
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = path.string() + ": ";
  if (buf.size() < sizeof kMagic + 8 || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0)
    throw FormatError(where + "not a checkpoint archive (bad magic)");
  const std::size_t body = buf.size() - 8;
  Reader tail(buf, buf.size());
  (void)tail.bytes(body);
  if (tail.get<std::uint64_t>() != fnv1a(buf.data(), body))
    throw FormatError(where + "checksum mismatch, archive is corrupt");

  Reader r(buf, body);
  (void)r.bytes(sizeof kMagic);
  if (const auto v = r.get<std::uint32_t>(); v != kVersion)
    throw FormatError(where + "unsupported version " + std::to_string(v));
  const auto meta_len = r.get<std::uint64_t>();
  json meta;
  try {
    meta = json::parse(r.bytes(static_cast<std::size_t>(meta_len)));
  } catch (const json::exception& e) {
    throw FormatError(where + "metadata: " + e.what());
  }

  Checkpoint ck;
  try {
    ck.config = config_from_json(meta.at("config"));
    if (meta.at("config_hash").get<std::string>() != hex64(ck.config.hash()))
      throw FormatError(where + "config hash does not match the stored config");
    ck.vocab_tokens = meta.at("vocab").get<std::vector<std::string>>();
    const json& d = meta.at("dims");
    ck.dims = {d.at("d_vis").get<int>(),  d.at("d_emb").get<int>(),
               d.at("hidden").get<int>(), d.at("vocab").get<int>(),
               d.at("meaning_hidden").get<int>(), d.at("sentence_dim").get<int>()};
    const json& s = meta.at("state");
    ck.state.phase = s.at("phase").get<std::string>();
    ck.state.epoch = s.at("epoch").get<std::int64_t>();
    ck.state.epoch_seed = s.at("epoch_seed").get<std::uint64_t>();
    ck.state.batch_cursor = s.at("batch_cursor").get<std::int64_t>();
    ck.state.rng_state = s.at("rng_state").get<std::string>();
    ck.state.adam_all_steps = s.at("adam_all_steps").get<std::int64_t>();
    ck.state.adam_meaning_steps = s.at("adam_meaning_steps").get<std::int64_t>();
    ck.state.word_steps = s.at("word_steps").get<std::int64_t>();
    ck.state.meaning_steps = s.at("meaning_steps").get<std::int64_t>();
    ck.state.pretrain_steps = s.at("pretrain_steps").get<std::int64_t>();
  } catch (const json::exception& e) {
    throw FormatError(where + "metadata: " + e.what());
  }

  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name = r.bytes(r.get<std::uint32_t>());
    if (r.get<std::uint8_t>() != kFloat64)
      throw FormatError(where + "tensor '" + name + "' has an unsupported dtype");
    const auto rows = static_cast<Eigen::Index>(r.get<std::uint64_t>());
    const auto cols = static_cast<Eigen::Index>(r.get<std::uint64_t>());
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = std::bit_cast<double>(r.get<std::uint64_t>());
    ck.tensors.emplace_back(std::move(name), std::move(m));
  }
  if (!r.done()) throw FormatError(where + "trailing bytes after tensors");
  return ck;
}

Checkpoint load_checkpoint(const fs::path& path, const TrainingConfig& expected) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.config.hash() != expected.hash())
    throw ConfigError(path.string() + ": checkpoint config hash " + hex64(ck.config.hash()) +
                      " does not match the requested config " + hex64(expected.hash()) +
                      "; refusing to load");
  return ck;
}

namespace {

void load_parameters(std::vector<NamedParameter> params, const Checkpoint& ck) {
  std::map<std::string, const Matrix*> by_name;
  for (const auto& [n, m] : ck.tensors) by_name[n] = &m;
  for (auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw FormatError("checkpoint: missing tensor '" + p.name + "'");
    if (it->second->rows() != p.param->value.rows() || it->second->cols() != p.param->value.cols())
      throw FormatError("checkpoint: tensor '" + p.name + "' has shape " +
                        std::to_string(it->second->rows()) + "x" + std::to_string(it->second->cols()) +
                        ", expected " + std::to_string(p.param->value.rows()) + "x" +
                        std::to_string(p.param->value.cols()));
    p.param->value = *it->second;
    p.param->zero_grad();
  }
}

}  // namespace

CaptionModel model_from_checkpoint(const Checkpoint& ck) {
  Rng scratch(0);
  CaptionModel model(ck.dims, Vocabulary(ck.vocab_tokens), scratch);
  if (model.dims != ck.dims) throw FormatError("checkpoint: dims do not match the vocabulary size");
  load_parameters(model.parameters(), ck);
  return model;
}

// --------------------------------------------------------------- trainer

namespace {

std::vector<std::string> detection_labels(const Dataset& data, Split split) {
  std::set<std::string> labels;
  for (std::size_t i : data.manifest.indices(split))
    for (const auto& frame : data.packs[i].detections)
      for (const auto& d : frame) labels.insert(d.label);
  return {labels.begin(), labels.end()};
}

void check_dataset(const Dataset& data, int d_vis) {
  if (data.manifest.indices(Split::train).empty())
    throw ConfigError("dataset: no training videos");
  if (data.packs.size() != data.manifest.entries.size())
    throw ConfigError("dataset: packs and manifest entries differ in count");
  for (const auto& p : data.packs)
    if (p.visual_dim() != d_vis)
      throw ConfigError("config: 'd_vis' is " + std::to_string(d_vis) + " but pack '" +
                        p.video_id + "' has " + std::to_string(p.visual_dim()) + "-d features");
}

}  // namespace

Trainer::Trainer(const TrainingConfig& config, const Dataset& data)
    : config_(config), data_(&data), rng_(config.seed) {
  config_.validate();
  check_dataset(data, config_.d_vis);
  std::vector<CaptionRecord> train_captions;
  for (std::size_t i : data.manifest.indices(Split::train))
    for (const auto& c : data.manifest.entries[i].captions)
      train_captions.push_back({data.manifest.entries[i].video_id, c});
  Vocabulary vocab = build_vocabulary(train_captions, config_.vocab_min_count,
                                      detection_labels(data, Split::train));
  PretrainedVectors pretrained;
  if (!config_.pretrained_vectors.empty())
    pretrained = load_pretrained_text(config_.pretrained_vectors, config_.d_emb);
  model_ = CaptionModel(config_.dims(vocab.size()), std::move(vocab), rng_, pretrained);
  build_optimizers();
}

Trainer::Trainer(const Checkpoint& ck, const Dataset& data)
    : config_(ck.config), data_(&data), rng_(0) {
  check_dataset(data, config_.d_vis);
  model_ = model_from_checkpoint(ck);
  build_optimizers();
  restore(ck);
}

void Trainer::build_optimizers() {
  opt_all_ = std::make_unique<Adam>(model_.parameters(),
                                    AdamOptions{.lr = config_.lr_all, .clip_norm = config_.clip_norm});
  opt_meaning_ = std::make_unique<Adam>(
      model_.meaning_parameters(), AdamOptions{.lr = config_.lr_meaning, .clip_norm = config_.clip_norm});
}

const TrainerState& Trainer::state() const {
  state_.rng_state = rng_.state();
  state_.adam_all_steps = opt_all_->steps();
  state_.adam_meaning_steps = opt_meaning_->steps();
  return state_;
}

std::size_t Trainer::batches_per_epoch() const {
  return data_->manifest.indices(Split::train).size() / static_cast<std::size_t>(config_.batch_size);
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ck;
  ck.config = config_;
  ck.vocab_tokens = model_.vocab.tokens();
  ck.dims = model_.dims;
  ck.state = state();
  for (const auto& p : const_cast<CaptionModel&>(model_).parameters())
    ck.tensors.emplace_back(p.name, p.param->value);
  for (auto& t : opt_all_->state("opt_all")) ck.tensors.push_back(std::move(t));
  for (auto& t : opt_meaning_->state("opt_meaning")) ck.tensors.push_back(std::move(t));
  return ck;
}

void Trainer::restore(const Checkpoint& ck) {
  if (ck.config.hash() != config_.hash())
    throw ConfigError("restore: checkpoint config does not match the trainer config");
  if (ck.vocab_tokens != model_.vocab.tokens())
    throw FormatError("restore: checkpoint vocabulary differs from the model's");
  load_parameters(model_.parameters(), ck);
  opt_all_->load_state("opt_all", ck.tensors, ck.state.adam_all_steps);
  opt_meaning_->load_state("opt_meaning", ck.tensors, ck.state.adam_meaning_steps);
  state_ = ck.state;
  rng_.set_state(ck.state.rng_state);
  batches_.clear();
  if (state_.epoch > 0)
    batches_ = make_batches(data_->manifest, static_cast<std::size_t>(config_.batch_size),
                            state_.epoch_seed);
}

const Batch& Trainer::next_batch() {
  if (batches_.empty() || state_.batch_cursor >= static_cast<std::int64_t>(batches_.size())) {
    state_.epoch_seed = rng_.next_u64();
    batches_ = make_batches(data_->manifest, static_cast<std::size_t>(config_.batch_size),
                            state_.epoch_seed);
    state_.batch_cursor = 0;
    ++state_.epoch;
  }
  return batches_[static_cast<std::size_t>(state_.batch_cursor++)];
}

double Trainer::word_step() {
  const Batch& batch = next_batch();
  Tape tape;
  std::vector<Var> losses;
  for (std::size_t i = 0; i < batch.entries.size(); ++i)
    losses.push_back(caption_loss(tape, model_, data_->packs[batch.entries[i]], batch.captions[i]));
  Var loss = scale(sum(losses), 1.0 / static_cast<double>(losses.size()));
  model_.zero_grad();
  tape.backward(loss);
  opt_all_->step();
  ++state_.word_steps;
  return loss.scalar();
}

namespace {

struct BatchEmbeddings {
  std::vector<Var> generated;
  std::vector<Var> ground_truth;
  std::size_t encodings = 0;
};

// Each generated and each ground-truth caption is encoded exactly once.
BatchEmbeddings embed_batch(Tape& tape, CaptionModel& model, const Dataset& data,
                            const Batch& batch, int max_len) {
  SentenceEncoder encoder(model.meaning);
  BatchEmbeddings out;
  Var E = tape.param(model.embeddings.E);
  for (std::size_t i = 0; i < batch.entries.size(); ++i) {
    const EncoderGraph enc = encode_video(tape, model, data.packs[batch.entries[i]]);
    const SoftSequence soft = generate_soft(tape, enc, E, model.decoder, max_len);
    out.generated.push_back(encoder.embed(tape, soft.soft));
  }
  for (std::size_t i = 0; i < batch.entries.size(); ++i)
    out.ground_truth.push_back(encoder.embed(tape, ground_truth_sequence(tape, model, batch.captions[i])));
  out.encodings = encoder.calls();
  return out;
}

}  // namespace

PretrainStepResult Trainer::pretrain_step() {
  const Batch& batch = next_batch();
  Tape tape;
  const BatchEmbeddings emb = embed_batch(tape, model_, *data_, batch, config_.max_len);
  const std::size_t b = emb.generated.size();
  std::vector<Var> per_anchor;
  std::size_t negatives = 0;
  for (std::size_t i = 0; i < b; ++i) {
    std::vector<Var> negs;
    for (std::size_t j = 0; j < b; ++j)
      if (j != i) negs.push_back(emb.ground_truth[j]);
    negatives = negs.size();
    per_anchor.push_back(triplet_loss(emb.generated[i], emb.ground_truth[i], negs, config_.triplet_margin));
  }
  Var loss = scale(sum(per_anchor), 1.0 / static_cast<double>(b));
  model_.zero_grad();
  tape.backward(loss);
  opt_meaning_->step();
  ++state_.pretrain_steps;
  return {loss.scalar(), negatives};
}

MeaningStepResult Trainer::meaning_step(MeaningStepOptions options) {
  const Batch& batch = next_batch();
  Tape tape;
  const BatchEmbeddings emb = embed_batch(tape, model_, *data_, batch, config_.max_len);
  const auto pairing = pairing_from_string(config_.pairing);
  const MeaningLoss ml = batch_meaning_loss(emb.generated, emb.ground_truth, batch.video_ids, pairing);

  MeaningStepResult out;
  out.similar = ml.similar.scalar();
  out.dissimilar = ml.dissimilar.scalar();
  out.sentence_encodings = emb.encodings;
  out.similar_pairs = ml.similar_pairs;
  out.dissimilar_pairs = ml.dissimilar_pair_count;
  for (const auto& p : dissimilar_pairs(batch.video_ids.size(), pairing))
    if (batch.video_ids[p.first] == batch.video_ids[p.second]) out.dissimilar_pairs_cross_videos = false;

  // Both gradients come from the same forward pass; updates happen after.
  if (options.similar) {
    model_.zero_grad();
    tape.backward(ml.similar);
    std::vector<NamedParameter> enc;
    model_.encoder.append_to(enc);
    out.encoder_grad_norm = global_grad_norm(enc);
    opt_all_->step();
  }
  if (options.dissimilar) {
    model_.zero_grad();
    tape.backward(ml.dissimilar);
    opt_meaning_->step();
  }
  ++state_.meaning_steps;
  return out;
}

MixedStepResult Trainer::mixed_step() {
  const double u = rng_.uniform();
  if (u < config_.meaning_phase_probability) {
    const MeaningStepResult r = meaning_step();
    return {true, r.similar + r.dissimilar};
  }
  return {false, word_step()};
}

double Trainer::mean_caption_loss(Split split) {
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i : data_->manifest.indices(split)) {
    for (const auto& caption : data_->manifest.entries[i].captions) {
      Tape tape(false);
      total += caption_loss(tape, model_, data_->packs[i], caption).scalar();
      ++n;
    }
  }
  if (n == 0) throw InputError("mean_caption_loss: split '" + to_string(split) + "' is empty");
  return total / static_cast<double>(n);
}

double Trainer::similar_term(Split split) {
  const auto idx = data_->manifest.indices(split);
  if (idx.empty()) throw InputError("similar_term: split '" + to_string(split) + "' is empty");
  double total = 0.0;
  for (std::size_t i : idx) {
    Tape tape(false);
    Var E = tape.param(model_.embeddings.E);
    const EncoderGraph enc = encode_video(tape, model_, data_->packs[i]);
    const SoftSequence soft = generate_soft(tape, enc, E, model_.decoder, config_.max_len);
    Var gen = embed_sentence(tape, soft.soft, model_.meaning);
    Var gt = embed_sentence(tape, ground_truth_sequence(tape, model_, data_->manifest.entries[i].captions.front()),
                            model_.meaning);
    total += loss_sim(gen, gt).scalar();
  }
  return total / static_cast<double>(idx.size());
}

// ---------------------------------------------------------------- phases

PhaseReport run_word_phase(Trainer& trainer) {
  trainer.set_phase("word");
  PhaseReport report;
  const Split monitor =
      trainer.data().manifest.indices(Split::val).empty() ? Split::train : Split::val;
  const std::size_t steps = trainer.batches_per_epoch();
  double best = std::numeric_limits<double>::infinity();
  Checkpoint best_ck = trainer.checkpoint();
  int stale = 0;
  for (int epoch = 0; epoch < trainer.config().word_max_epochs; ++epoch) {
    double total = 0.0;
    for (std::size_t k = 0; k < steps; ++k) total += trainer.word_step();
    report.train_losses.push_back(total / static_cast<double>(steps));
    report.word_steps += steps;
    ++report.epochs;
    const double m = trainer.mean_caption_loss(monitor);
    report.monitor_losses.push_back(m);
    if (m < best) {
      best = m;
      best_ck = trainer.checkpoint();
      stale = 0;
    } else if (++stale > trainer.config().patience) {
      break;
    }
  }
  trainer.restore(best_ck);
  return report;
}

PhaseReport run_pretrain_phase(Trainer& trainer) {
  trainer.set_phase("pretrain");
  PhaseReport report;
  const std::size_t steps = trainer.batches_per_epoch();
  for (int epoch = 0; epoch < trainer.config().pretrain_epochs; ++epoch) {
    double total = 0.0;
    for (std::size_t k = 0; k < steps; ++k) total += trainer.pretrain_step().loss;
    report.train_losses.push_back(total / static_cast<double>(steps));
    ++report.epochs;
  }
  return report;
}

PhaseReport run_mixed_phase(Trainer& trainer) {
  trainer.set_phase("mixed");
  PhaseReport report;
  for (int s = 0; s < trainer.config().mixed_steps; ++s) {
    const MixedStepResult r = trainer.mixed_step();
    report.train_losses.push_back(r.loss);
    if (r.meaning)
      ++report.meaning_steps;
    else
      ++report.word_steps;
  }
  return report;
}

Checkpoint train_word_phase(const TrainingConfig& config, const Dataset& data, PhaseReport* report) {
  Trainer trainer(config, data);
  PhaseReport r = run_word_phase(trainer);
  if (report) *report = std::move(r);
  return trainer.checkpoint();
}

namespace {

void require_same_config(const TrainingConfig& config, const Checkpoint& ck) {
  if (config.hash() != ck.config.hash())
    throw ConfigError("checkpoint config does not match the requested config; refusing to continue");
}

}  // namespace

Checkpoint pretrain_meaning(const TrainingConfig& config, const Dataset& data,
                            const Checkpoint& checkpoint, PhaseReport* report) {
  require_same_config(config, checkpoint);
  Trainer trainer(checkpoint, data);
  PhaseReport r = run_pretrain_phase(trainer);
  if (report) *report = std::move(r);
  return trainer.checkpoint();
}

Checkpoint train_mixed_phase(const TrainingConfig& config, const Dataset& data,
                             const Checkpoint& checkpoint, PhaseReport* report) {
  require_same_config(config, checkpoint);
  Trainer trainer(checkpoint, data);
  PhaseReport r = run_mixed_phase(trainer);
  if (report) *report = std::move(r);
  return trainer.checkpoint();
}

}  // namespace mgvc
