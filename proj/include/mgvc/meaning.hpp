#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mgvc/autograd.hpp"
#include "mgvc/dims.hpp"
#include "mgvc/layers.hpp"

namespace mgvc {

// Bidirectional GRU over a sequence of word vectors followed by a linear
// reduction of [forward final; backward final] to the sentence size.
struct SentenceEncoderParams {
  GruParams forward;
  GruParams backward;
  LinearParams reduce;  // 2 * meaning_hidden -> sentence_dim

  SentenceEncoderParams() = default;
  explicit SentenceEncoderParams(const ModelDims& dims);

  void init_uniform(Rng& rng);
  void append_to(std::vector<NamedParameter>& out);
};

Var embed_sentence(Tape& tape, std::span<const Var> sequence, SentenceEncoderParams& params);

// embed_sentence with a call counter, used to audit how many sentence
// encodings a training step performs.
class SentenceEncoder {
 public:
  explicit SentenceEncoder(SentenceEncoderParams& params) : params_(&params) {}

  Var embed(Tape& tape, std::span<const Var> sequence) {
    ++calls_;
    return embed_sentence(tape, sequence, *params_);
  }
  std::size_t calls() const { return calls_; }

 private:
  SentenceEncoderParams* params_;
  std::size_t calls_ = 0;
};

// Siamese Manhattan similarity losses with d = ||v1 - v2||_1:
//   similar pair:    1 - exp(-d)   (0 for identical, -> 1 as d grows)
//   dissimilar pair: exp(-d)       (1 for identical, -> 0 as d grows)
double loss_sim(const Vector& v1, const Vector& v2);
double loss_dis(const Vector& v3, const Vector& v4);
Var loss_sim(Var v1, Var v2);
Var loss_dis(Var v3, Var v4);

// How dissimilar pairs are formed between the two halves of a batch.
// With h = B/2 and i < h:
//   gt_gt  : (gt[i], gt[h+i])
//   gen_gt : (gen[i], gt[h+i]) and (gen[h+i], gt[i])
//   mixed  : (gt[i], gt[h+i]) and (gen[i], gt[h+i])
//   all    : gt_gt followed by gen_gt
enum class DissimilarPairing { gt_gt, gen_gt, mixed, all };

std::string to_string(DissimilarPairing p);
DissimilarPairing pairing_from_string(const std::string& s);

struct DissimilarPair {
  enum class Side { generated, ground_truth };
  Side first_side;
  std::size_t first;
  Side second_side;
  std::size_t second;
};

// Throws ConfigError for odd or zero batch sizes.
std::vector<DissimilarPair> dissimilar_pairs(std::size_t batch_size, DissimilarPairing pairing);

struct MeaningLoss {
  Var similar;     // mean over the B (generated, ground truth) pairs
  Var dissimilar;  // mean over the dissimilar pairs
  Var total;
  std::size_t similar_pairs = 0;
  std::size_t dissimilar_pair_count = 0;
};

// `generated` and `ground_truth` hold one sentence embedding per batch row;
// every row must come from a distinct video.
MeaningLoss batch_meaning_loss(std::span<const Var> generated, std::span<const Var> ground_truth,
                               std::span<const std::string> video_ids,
                               DissimilarPairing pairing = DissimilarPairing::mixed);

// Value form over B x sentence_dim matrices (one embedding per row).
double batch_meaning_loss(const Matrix& generated, const Matrix& ground_truth,
                          std::span<const std::string> video_ids,
                          DissimilarPairing pairing = DissimilarPairing::mixed);

// Mean over negatives of max(0, |a-p|_1 - |a-n|_1 + margin).
double triplet_loss(const Vector& anchor, const Vector& positive,
                    std::span<const Vector> negatives, double margin);
Var triplet_loss(Var anchor, Var positive, std::span<const Var> negatives, double margin);

}  // namespace mgvc
