#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mgvc/autograd.hpp"
#include "mgvc/data.hpp"
#include "mgvc/random.hpp"

namespace mgvc {

inline constexpr int kDefaultEmbeddingDim = 300;

// Bijective token <-> id map. Ids 0..4 are reserved.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kNoObject = 4;
  static constexpr int kReserved = 5;

  Vocabulary();
  // Rebuilds from an id-ordered token list (e.g. from a checkpoint). The
  // first five tokens must be the reserved ones.
  explicit Vocabulary(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  // Id of `token`, or kUnk when absent.
  int id(const std::string& token) const;
  bool contains(const std::string& token) const { return ids_.contains(token); }
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Appends `token` if new; returns its id.
  int add(const std::string& token);

  // Caption tokens -> ids, unknown words to kUnk. No BOS/EOS added.
  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  // Ids -> tokens, stopping at the first EOS and skipping PAD/BOS.
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

const std::vector<std::string>& reserved_tokens();

// Words with frequency >= min_count, sorted by descending frequency then
// lexicographically. `extra_tokens` (detector labels) are always added.
Vocabulary build_vocabulary(const std::vector<CaptionRecord>& captions, int min_count,
                            const std::vector<std::string>& extra_tokens = {});

// Shared d_emb x V word embedding matrix E.
struct EmbeddingMatrix {
  Parameter E;
  bool trainable = true;

  Eigen::Index dim() const { return E.value.rows(); }
  Eigen::Index vocab_size() const { return E.value.cols(); }
};

// Column of E for `token`: UNK column for unknown words, NOOBJ column for a
// missing object (nullopt).
Vector embed_token(const Vocabulary& vocab, const EmbeddingMatrix& E,
                   const std::optional<std::string>& token);

// Id used for a frame's dominant object: its vocabulary id, or kNoObject.
int object_token_id(const Vocabulary& vocab, const std::optional<std::string>& label);

using PretrainedVectors = std::unordered_map<std::string, Vector>;

// Columns present in `vectors` are copied; the rest are uniform in
// [-0.1, 0.1] drawn from `rng` in id order.
EmbeddingMatrix import_pretrained(const Vocabulary& vocab, const PretrainedVectors& vectors,
                                  int dim, Rng& rng);

// Text format: `token v1 ... vD` per line. A leading word2vec-style
// "<count> <dim>" header line is skipped.
PretrainedVectors load_pretrained_text(const std::filesystem::path& path, int dim);

}  // namespace mgvc
