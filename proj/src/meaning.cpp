#include "mgvc/meaning.hpp"

#include <cmath>
#include <set>

#include "mgvc/errors.hpp"

namespace mgvc {

SentenceEncoderParams::SentenceEncoderParams(const ModelDims& dims)
    : forward(dims.d_emb, dims.meaning_hidden),
      backward(dims.d_emb, dims.meaning_hidden),
      reduce(2 * dims.meaning_hidden, dims.sentence_dim) {}

void SentenceEncoderParams::init_uniform(Rng& rng) {
  const double range = 1.0 / std::sqrt(static_cast<double>(forward.hidden_dim()));
  forward.init_uniform(rng, range);
  backward.init_uniform(rng, range);
  reduce.init_uniform(rng, 1.0 / std::sqrt(2.0 * static_cast<double>(forward.hidden_dim())));
}

void SentenceEncoderParams::append_to(std::vector<NamedParameter>& out) {
  forward.append_to(out, "meaning.forward");
  backward.append_to(out, "meaning.backward");
  reduce.append_to(out, "meaning.reduce");
}

Var embed_sentence(Tape& tape, std::span<const Var> sequence, SentenceEncoderParams& params) {
  if (sequence.empty()) throw InputError("embed_sentence: empty sequence");
  const Eigen::Index h = params.forward.hidden_dim();
  Var fwd = tape.constant(Matrix::Zero(h, 1));
  for (std::size_t t = 0; t < sequence.size(); ++t)
    fwd = gru_step(tape, params.forward, sequence[t], fwd, "meaning.forward step " + std::to_string(t));
  Var bwd = tape.constant(Matrix::Zero(h, 1));
  for (std::size_t t = sequence.size(); t-- > 0;)
    bwd = gru_step(tape, params.backward, sequence[t], bwd, "meaning.backward step " + std::to_string(t));
  const Var both[] = {fwd, bwd};
  return linear(tape, params.reduce, concat_rows(both));
}

double loss_sim(const Vector& v1, const Vector& v2) {
  return 1.0 - std::exp(-(v1 - v2).cwiseAbs().sum());
}

double loss_dis(const Vector& v3, const Vector& v4) { return std::exp(-(v3 - v4).cwiseAbs().sum()); }

Var loss_sim(Var v1, Var v2) { return add_scalar(scale(loss_dis(v1, v2), -1.0), 1.0); }

Var loss_dis(Var v3, Var v4) { return exp(scale(l1_distance(v3, v4), -1.0)); }

std::string to_string(DissimilarPairing p) {
  switch (p) {
    case DissimilarPairing::gt_gt: return "gt_gt";
    case DissimilarPairing::gen_gt: return "gen_gt";
    case DissimilarPairing::mixed: return "mixed";
    case DissimilarPairing::all: return "all";
  }
  return "mixed";
}

DissimilarPairing pairing_from_string(const std::string& s) {
  if (s == "gt_gt") return DissimilarPairing::gt_gt;
  if (s == "gen_gt") return DissimilarPairing::gen_gt;
  if (s == "mixed") return DissimilarPairing::mixed;
  if (s == "all") return DissimilarPairing::all;
  throw ConfigError("pairing: unknown value '" + s + "' (expected gt_gt, gen_gt, mixed or all)");
}

std::vector<DissimilarPair> dissimilar_pairs(std::size_t batch_size, DissimilarPairing pairing) {
  if (batch_size == 0 || batch_size % 2 != 0)
    throw ConfigError("batch_size: intra-batch pairing needs a positive even size, got " +
                      std::to_string(batch_size));
  using S = DissimilarPair::Side;
  const std::size_t h = batch_size / 2;
  std::vector<DissimilarPair> out;
  auto gt_gt = [&] {
    for (std::size_t i = 0; i < h; ++i) out.push_back({S::ground_truth, i, S::ground_truth, h + i});
  };
  auto gen_first_half = [&] {
    for (std::size_t i = 0; i < h; ++i) out.push_back({S::generated, i, S::ground_truth, h + i});
  };
  auto gen_second_half = [&] {
    for (std::size_t i = 0; i < h; ++i) out.push_back({S::generated, h + i, S::ground_truth, i});
  };
  switch (pairing) {
    case DissimilarPairing::gt_gt: gt_gt(); break;
    case DissimilarPairing::gen_gt: gen_first_half(); gen_second_half(); break;
    case DissimilarPairing::mixed: gt_gt(); gen_first_half(); break;
    case DissimilarPairing::all: gt_gt(); gen_first_half(); gen_second_half(); break;
  }
  return out;
}

namespace {

void check_batch(std::size_t gen, std::size_t gt, std::span<const std::string> video_ids) {
  if (gen != gt || gen != video_ids.size())
    throw ShapeError("batch_meaning_loss: " + std::to_string(gen) + " generated, " +
                     std::to_string(gt) + " ground-truth embeddings for " +
                     std::to_string(video_ids.size()) + " videos");
  std::set<std::string> seen(video_ids.begin(), video_ids.end());
  if (seen.size() != video_ids.size())
    throw InputError("batch_meaning_loss: video_ids must be distinct within a batch");
}

}  // namespace

MeaningLoss batch_meaning_loss(std::span<const Var> generated, std::span<const Var> ground_truth,
                               std::span<const std::string> video_ids, DissimilarPairing pairing) {
  check_batch(generated.size(), ground_truth.size(), video_ids);
  const auto pairs = dissimilar_pairs(generated.size(), pairing);
  const double b = static_cast<double>(generated.size());

  // Similar terms are reduced first, dissimilar ones added afterwards.
  std::vector<Var> sim;
  for (std::size_t i = 0; i < generated.size(); ++i) sim.push_back(loss_sim(generated[i], ground_truth[i]));
  std::vector<Var> dis;
  for (const DissimilarPair& p : pairs) {
    auto pick = [&](DissimilarPair::Side s, std::size_t i) {
      return s == DissimilarPair::Side::generated ? generated[i] : ground_truth[i];
    };
    dis.push_back(loss_dis(pick(p.first_side, p.first), pick(p.second_side, p.second)));
  }
  MeaningLoss out;
  out.similar = scale(sum(sim), 1.0 / b);
  out.dissimilar = scale(sum(dis), 1.0 / static_cast<double>(dis.size()));
  out.total = add(out.similar, out.dissimilar);
  out.similar_pairs = sim.size();
  out.dissimilar_pair_count = dis.size();
  return out;
}

double batch_meaning_loss(const Matrix& generated, const Matrix& ground_truth,
                          std::span<const std::string> video_ids, DissimilarPairing pairing) {
  check_batch(static_cast<std::size_t>(generated.rows()),
              static_cast<std::size_t>(ground_truth.rows()), video_ids);
  const auto pairs = dissimilar_pairs(static_cast<std::size_t>(generated.rows()), pairing);
  double sim = 0.0;
  for (Eigen::Index i = 0; i < generated.rows(); ++i)
    sim += loss_sim(generated.row(i).transpose(), ground_truth.row(i).transpose());
  double dis = 0.0;
  for (const DissimilarPair& p : pairs) {
    auto pick = [&](DissimilarPair::Side s, std::size_t i) -> Vector {
      const auto r = static_cast<Eigen::Index>(i);
      return s == DissimilarPair::Side::generated ? generated.row(r).transpose()
                                                  : ground_truth.row(r).transpose();
    };
    dis += loss_dis(pick(p.first_side, p.first), pick(p.second_side, p.second));
  }
  return sim / static_cast<double>(generated.rows()) + dis / static_cast<double>(pairs.size());
}

double triplet_loss(const Vector& anchor, const Vector& positive,
                    std::span<const Vector> negatives, double margin) {
  if (negatives.empty()) throw InputError("triplet_loss: no negatives");
  if (!(margin > 0.0)) throw ConfigError("triplet_loss: margin must be positive");
  const double dp = (anchor - positive).cwiseAbs().sum();
  double total = 0.0;
  for (const Vector& n : negatives)
    total += std::max(0.0, dp - (anchor - n).cwiseAbs().sum() + margin);
  return total / static_cast<double>(negatives.size());
}

Var triplet_loss(Var anchor, Var positive, std::span<const Var> negatives, double margin) {
  if (negatives.empty()) throw InputError("triplet_loss: no negatives");
  if (!(margin > 0.0)) throw ConfigError("triplet_loss: margin must be positive");
  Var dp = l1_distance(anchor, positive);
  std::vector<Var> hinges;
  for (const Var& n : negatives)
    hinges.push_back(relu(add_scalar(sub(dp, l1_distance(anchor, n)), margin)));
  return scale(sum(hinges), 1.0 / static_cast<double>(negatives.size()));
}

}  // namespace mgvc
