#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mgvc/data.hpp"
#include "mgvc/meaning.hpp"
#include "mgvc/model.hpp"
#include "mgvc/optimizer.hpp"
#include "mgvc/random.hpp"

namespace mgvc {

struct TrainingConfig {
  int batch_size = 50;
  int max_frames = kDefaultMaxFrames;
  int d_vis = kDefaultVisualDim;
  int d_emb = kDefaultEmbeddingDim;
  int hidden = 1000;
  int meaning_hidden = 1000;
  int sentence_dim = 1000;
  int vocab_min_count = 1;
  double lr_all = 1e-3;
  double lr_meaning = 1e-3;
  double clip_norm = 5.0;
  double meaning_phase_probability = 0.7;
  double triplet_margin = 1.0;
  std::string pairing = "mixed";
  std::uint64_t seed = 0;
  int patience = 5;
  int max_len = kDefaultMaxCaptionLength;
  int word_max_epochs = 100;
  int pretrain_epochs = 5;
  int mixed_steps = 1000;
  std::string pretrained_vectors;  // optional path to a text vector file

  // Throws ConfigError naming the offending key.
  void validate() const;
  ModelDims dims(int vocab_size) const;

  // Flat JSON object. from_json rejects unknown keys; missing keys keep
  // their defaults.
  std::string to_json() const;
  static TrainingConfig from_json(const std::string& text);
  static TrainingConfig load(const std::filesystem::path& path);

  // FNV-1a 64 of the canonical JSON form.
  std::uint64_t hash() const;
};

// Bookkeeping needed to resume a run at exactly the next batch.
struct TrainerState {
  std::string phase = "init";
  std::int64_t epoch = 0;          // epochs whose batch order has been drawn
  std::uint64_t epoch_seed = 0;    // seed of the current epoch's batch order
  std::int64_t batch_cursor = 0;   // next batch within the current epoch
  std::string rng_state;
  std::int64_t adam_all_steps = 0;
  std::int64_t adam_meaning_steps = 0;
  std::int64_t word_steps = 0;
  std::int64_t meaning_steps = 0;
  std::int64_t pretrain_steps = 0;
};

struct Checkpoint {
  TrainingConfig config;
  std::vector<std::string> vocab_tokens;
  ModelDims dims;
  TrainerState state;
  // Model parameters followed by optimizer moments.
  std::vector<std::pair<std::string, Matrix>> tensors;

  const Matrix& tensor(const std::string& name) const;
};

// Single-file archive: magic, metadata JSON, named little-endian float64
// tensors, trailing FNV-1a checksum.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Refuses (ConfigError) when the stored config hash differs from `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const TrainingConfig& expected);

// Rebuilds the model stored in a checkpoint.
CaptionModel model_from_checkpoint(const Checkpoint& checkpoint);

struct MeaningStepOptions {
  bool similar = true;     // apply the similar term through the all-parameter optimizer
  bool dissimilar = true;  // apply the dissimilar term through the meaning-head optimizer
};

struct MeaningStepResult {
  double similar = 0.0;
  double dissimilar = 0.0;
  std::size_t sentence_encodings = 0;
  std::size_t similar_pairs = 0;
  std::size_t dissimilar_pairs = 0;
  bool dissimilar_pairs_cross_videos = true;
  double encoder_grad_norm = 0.0;  // similar-term gradient norm on encoder parameters
};

struct PretrainStepResult {
  double loss = 0.0;
  std::size_t negatives_per_anchor = 0;
};

struct MixedStepResult {
  bool meaning = false;
  double loss = 0.0;
};

// Owns the model, both optimizers and the run's random stream. Not
// copyable: optimizers hold pointers into the model.
class Trainer {
 public:
  Trainer(const TrainingConfig& config, const Dataset& data);
  Trainer(const Checkpoint& checkpoint, const Dataset& data);
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  CaptionModel& model() { return model_; }
  const TrainingConfig& config() const { return config_; }
  const TrainerState& state() const;
  const Dataset& data() const { return *data_; }
  std::size_t batches_per_epoch() const;

  // Next batch of the current epoch; draws a new epoch order when the
  // current one is exhausted.
  const Batch& next_batch();

  // Teacher-forced cross-entropy step (mean over the batch) with the
  // all-parameter optimizer.
  double word_step();
  // Triplet step on the meaning head only: anchors are generated captions,
  // positives their ground truth, negatives the other B-1 ground truths.
  PretrainStepResult pretrain_step();
  // Meaning-guided step. The similar term updates every parameter; the
  // dissimilar term updates only the meaning head.
  MeaningStepResult meaning_step(MeaningStepOptions options = {});
  // Meaning step with probability meaning_phase_probability, word step
  // otherwise.
  MixedStepResult mixed_step();

  // Mean teacher-forced loss per caption over every caption in the split.
  double mean_caption_loss(Split split);
  // Mean similar-pair loss between the soft-generated caption and the first
  // reference of each video in the split.
  double similar_term(Split split);

  Checkpoint checkpoint() const;
  void restore(const Checkpoint& checkpoint);
  void set_phase(const std::string& phase) { state_.phase = phase; }

 private:
  void build_optimizers();

  TrainingConfig config_;
  const Dataset* data_;
  Rng rng_;
  CaptionModel model_;
  std::unique_ptr<Adam> opt_all_;
  std::unique_ptr<Adam> opt_meaning_;
  mutable TrainerState state_;
  std::vector<Batch> batches_;
};

struct PhaseReport {
  std::vector<double> train_losses;    // per epoch (word, pretrain) or per step (mixed)
  std::vector<double> monitor_losses;  // validation (or training) loss per epoch
  int epochs = 0;
  std::size_t word_steps = 0;
  std::size_t meaning_steps = 0;
};

// Runs the word phase in place until the monitored loss has not improved for
// `patience` consecutive epochs (or word_max_epochs), then restores the best
// epoch. The monitor is the validation split, or the training split when no
// validation videos exist.
PhaseReport run_word_phase(Trainer& trainer);
PhaseReport run_pretrain_phase(Trainer& trainer);
PhaseReport run_mixed_phase(Trainer& trainer);

Checkpoint train_word_phase(const TrainingConfig& config, const Dataset& data,
                            PhaseReport* report = nullptr);
// Both continue from `checkpoint`, whose config must hash-match `config`.
Checkpoint pretrain_meaning(const TrainingConfig& config, const Dataset& data,
                            const Checkpoint& checkpoint, PhaseReport* report = nullptr);
Checkpoint train_mixed_phase(const TrainingConfig& config, const Dataset& data,
                             const Checkpoint& checkpoint, PhaseReport* report = nullptr);

}  // namespace mgvc
