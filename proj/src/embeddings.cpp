#include "mgvc/embeddings.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "mgvc/errors.hpp"

namespace mgvc {

const std::vector<std::string>& reserved_tokens() {
  static const std::vector<std::string> kTokens = {"<pad>", "<bos>", "<eos>", "<unk>", "<noobj>"};
  return kTokens;
}

Vocabulary::Vocabulary() {
  for (const auto& t : reserved_tokens()) add(t);
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) {
  const auto& reserved = reserved_tokens();
  if (tokens.size() < reserved.size() ||
      !std::equal(reserved.begin(), reserved.end(), tokens.begin()))
    throw FormatError("vocabulary: reserved tokens missing or out of order");
  for (const auto& t : tokens) {
    if (t.empty()) throw FormatError("vocabulary: empty token");
    if (contains(t)) throw FormatError("vocabulary: duplicate token '" + t + "'");
    add(t);
  }
}

int Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size())
    throw VocabularyError("vocabulary: id " + std::to_string(id) + " outside [0, " +
                          std::to_string(size()) + ")");
  return tokens_[static_cast<std::size_t>(id)];
}

int Vocabulary::add(const std::string& token) {
  if (auto it = ids_.find(token); it != ids_.end()) return it->second;
  const int id = size();
  tokens_.push_back(token);
  ids_.emplace(token, id);
  return id;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  for (int i : ids) {
    if (i == kEos) break;
    if (i == kPad || i == kBos) continue;
    out.push_back(token(i));
  }
  return out;
}

Vocabulary build_vocabulary(const std::vector<CaptionRecord>& captions, int min_count,
                            const std::vector<std::string>& extra_tokens) {
  if (captions.empty()) throw InputError("build_vocabulary: no captions");
  std::map<std::string, int> freq;
  for (const auto& c : captions)
    for (const auto& t : c.tokens) ++freq[t];
  std::vector<std::pair<std::string, int>> kept;
  for (const auto& [tok, n] : freq)
    if (n >= min_count && !tok.empty()) kept.emplace_back(tok, n);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (const auto& [tok, n] : kept) v.add(tok);
  for (const auto& tok : extra_tokens)
    if (!tok.empty()) v.add(tok);
  return v;
}

int object_token_id(const Vocabulary& vocab, const std::optional<std::string>& label) {
  return label ? vocab.id(*label) : Vocabulary::kNoObject;
}

Vector embed_token(const Vocabulary& vocab, const EmbeddingMatrix& E,
                   const std::optional<std::string>& token) {
  if (E.vocab_size() != vocab.size())
    throw ShapeError("embed_token: E has " + std::to_string(E.vocab_size()) +
                     " columns for a vocabulary of " + std::to_string(vocab.size()));
  return E.E.value.col(object_token_id(vocab, token));
}

EmbeddingMatrix import_pretrained(const Vocabulary& vocab, const PretrainedVectors& vectors,
                                  int dim, Rng& rng) {
  for (const auto& [tok, vec] : vectors)
    if (vec.size() != dim)
      throw FormatError("pretrained vector for '" + tok + "' has length " +
                        std::to_string(vec.size()) + ", expected " + std::to_string(dim));
  EmbeddingMatrix m;
  m.E = Parameter(dim, vocab.size());
  for (int id = 0; id < vocab.size(); ++id) {
    if (auto it = vectors.find(vocab.token(id)); it != vectors.end()) {
      m.E.value.col(id) = it->second;
    } else {
      for (int r = 0; r < dim; ++r) m.E.value(r, id) = rng.uniform(-0.1, 0.1);
    }
  }
  return m;
}

PretrainedVectors load_pretrained_text(const std::filesystem::path& path, int dim) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open");
  PretrainedVectors out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    std::istringstream is(line);
    std::string token;
    if (!(is >> token)) continue;
    std::vector<double> values;
    std::string field;
    while (is >> field) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": '" + field +
                          "' is not a number");
      }
    }
    if (lineno == 1 && values.size() == 1 && dim != 1) continue;  // "<count> <dim>" header
    if (static_cast<int>(values.size()) != dim)
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": vector for '" + token +
                        "' has length " + std::to_string(values.size()) + ", expected " +
                        std::to_string(dim));
    out[token] = Eigen::Map<const Vector>(values.data(), dim);
  }
  return out;
}

}  // namespace mgvc
