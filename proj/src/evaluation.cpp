#include "mgvc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mgvc/errors.hpp"

namespace mgvc {

namespace {

using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts ngrams(const Tokens& s, std::size_t n) {
  NgramCounts out;
  for (std::size_t i = 0; i + n <= s.size(); ++i)
    ++out[Tokens(s.begin() + static_cast<std::ptrdiff_t>(i), s.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return out;
}

void check_corpus(const std::vector<Tokens>& candidates, const std::vector<std::vector<Tokens>>& references,
                  const char* metric) {
  if (candidates.empty()) throw InputError(std::string(metric) + ": empty candidate set");
  if (candidates.size() != references.size())
    throw InputError(std::string(metric) + ": " + std::to_string(candidates.size()) + " candidates but " +
                     std::to_string(references.size()) + " reference sets");
  for (std::size_t i = 0; i < references.size(); ++i)
    if (references[i].empty())
      throw InputError(std::string(metric) + ": candidate " + std::to_string(i) + " has no references");
}

}  // namespace

// ------------------------------------------------------------------ BLEU

double bleu4(const std::vector<Tokens>& candidates, const std::vector<std::vector<Tokens>>& references,
             bool smooth) {
  check_corpus(candidates, references, "bleu4");
  double clipped[4] = {0, 0, 0, 0};
  double total[4] = {0, 0, 0, 0};
  double cand_len = 0.0;
  double ref_len = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Tokens& c = candidates[i];
    const auto clen = static_cast<long>(c.size());
    cand_len += static_cast<double>(clen);
    long best = static_cast<long>(references[i].front().size());
    for (const auto& r : references[i]) {
      const long rlen = static_cast<long>(r.size());
      const long d = std::labs(rlen - clen), bd = std::labs(best - clen);
      if (d < bd || (d == bd && rlen < best)) best = rlen;
    }
    ref_len += static_cast<double>(best);
    for (std::size_t n = 1; n <= 4; ++n) {
      NgramCounts max_ref;
      for (const auto& r : references[i])
        for (const auto& [g, k] : ngrams(r, n)) max_ref[g] = std::max(max_ref[g], k);
      for (const auto& [g, k] : ngrams(c, n)) {
        auto it = max_ref.find(g);
        clipped[n - 1] += std::min(k, it == max_ref.end() ? 0 : it->second);
        total[n - 1] += k;
      }
    }
  }
  if (cand_len == 0.0) return 0.0;
  double log_sum = 0.0;
  for (int n = 0; n < 4; ++n) {
    double num = clipped[n], den = total[n];
    if (smooth && n > 0) {
      num += 1.0;
      den += 1.0;
    }
    if (num == 0.0 || den == 0.0) return 0.0;
    log_sum += 0.25 * std::log(num / den);
  }
  const double bp = cand_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len);
  return std::min(1.0, bp * std::exp(log_sum));
}

// ----------------------------------------------------------------- CIDEr

namespace {

using TfIdf = std::map<std::vector<std::string>, double>;

TfIdf tfidf(const NgramCounts& counts, const std::map<std::vector<std::string>, int>& df, double log_docs) {
  TfIdf v;
  for (const auto& [g, k] : counts) {
    auto it = df.find(g);
    const double d = it == df.end() ? 1.0 : std::max(1.0, static_cast<double>(it->second));
    v[g] = static_cast<double>(k) * (log_docs - std::log(d));
  }
  return v;
}

double norm(const TfIdf& v) {
  double s = 0.0;
  for (const auto& [g, x] : v) s += x * x;
  return std::sqrt(s);
}

double cosine(const TfIdf& a, const TfIdf& b) {
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  double dot = 0.0;
  for (const auto& [g, x] : a) {
    auto it = b.find(g);
    if (it != b.end()) dot += x * it->second;
  }
  return dot / (na * nb);
}

}  // namespace

double cider(const std::vector<Tokens>& candidates, const std::vector<std::vector<Tokens>>& references) {
  check_corpus(candidates, references, "cider");
  if (candidates.size() < 2) throw InputError("cider: needs at least two videos for document frequencies");
  const double log_docs = std::log(static_cast<double>(candidates.size()));
  double score = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    std::map<std::vector<std::string>, int> df;
    for (const auto& refs : references) {
      std::set<std::vector<std::string>> seen;
      for (const auto& r : refs)
        for (const auto& [g, k] : ngrams(r, n)) seen.insert(g);
      for (const auto& g : seen) ++df[g];
    }
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const TfIdf c = tfidf(ngrams(candidates[i], n), df, log_docs);
      double s = 0.0;
      for (const auto& r : references[i]) s += cosine(c, tfidf(ngrams(r, n), df, log_docs));
      score += 0.25 * s / static_cast<double>(references[i].size());
    }
  }
  return 10.0 * score / static_cast<double>(candidates.size());
}

// ---------------------------------------------------------------- METEOR

std::string simple_stem(const std::string& word) {
  auto strip = [&](const std::string& suffix) -> std::optional<std::string> {
    if (word.size() > suffix.size() + 2 && word.ends_with(suffix)) return word.substr(0, word.size() - suffix.size());
    return std::nullopt;
  };
  for (const char* suffix : {"ing", "ed", "es", "s"})
    if (auto s = strip(suffix)) return *s;
  return word;
}

MeteorAlignment meteor_align(const Tokens& candidate, const Tokens& reference) {
  std::vector<int> link(candidate.size(), -1);
  std::vector<bool> used(reference.size(), false);
  auto stage = [&](auto&& key) {
    for (std::size_t i = 0; i < candidate.size(); ++i) {
      if (link[i] >= 0) continue;
      for (std::size_t j = 0; j < reference.size(); ++j) {
        if (!used[j] && key(candidate[i]) == key(reference[j])) {
          link[i] = static_cast<int>(j);
          used[j] = true;
          break;
        }
      }
    }
  };
  stage([](const std::string& w) { return w; });
  stage([](const std::string& w) { return simple_stem(w); });

  MeteorAlignment a;
  int prev = -2;
  bool in_chunk = false;
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    if (link[i] < 0) {
      in_chunk = false;
      continue;
    }
    ++a.matches;
    if (!in_chunk || link[i] != prev + 1) ++a.chunks;
    in_chunk = true;
    prev = link[i];
  }
  return a;
}

double meteor_segment(const Tokens& candidate, const Tokens& reference) {
  const MeteorAlignment a = meteor_align(candidate, reference);
  if (a.matches == 0) return 0.0;
  const double m = static_cast<double>(a.matches);
  const double p = m / static_cast<double>(candidate.size());
  const double r = m / static_cast<double>(reference.size());
  const double fmean = 10.0 * p * r / (r + 9.0 * p);
  const double frag = static_cast<double>(a.chunks) / m;
  return fmean * (1.0 - 0.5 * frag * frag * frag);
}

double meteor_lite(const std::vector<Tokens>& candidates,
                   const std::vector<std::vector<Tokens>>& references) {
  check_corpus(candidates, references, "meteor_lite");
  double total = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double best = 0.0;
    for (const auto& r : references[i]) best = std::max(best, meteor_segment(candidates[i], r));
    total += best;
  }
  return total / static_cast<double>(candidates.size());
}

// --------------------------------------------------------------- reports

std::vector<GeneratedCaption> generate_captions(CaptionModel& model, const Dataset& data, Split split,
                                                int max_len) {
  std::vector<GeneratedCaption> out;
  for (std::size_t i : data.manifest.indices(split)) {
    Tape tape(false);
    const EncoderGraph enc = encode_video(tape, model, data.packs[i]);
    const auto ids = generate_greedy(tape, enc, tape.param(model.embeddings.E), model.decoder, max_len);
    out.push_back({data.manifest.entries[i].video_id, model.vocab.decode(ids),
                   !ids.empty() && ids.back() == Vocabulary::kEos});
  }
  return out;
}

MetricRow score_captions(const std::string& model_name, const std::vector<GeneratedCaption>& captions,
                         const Dataset& data) {
  std::vector<Tokens> cands;
  std::vector<std::vector<Tokens>> refs;
  for (const auto& c : captions) {
    cands.push_back(c.tokens);
    refs.push_back(data.manifest.entry(c.video_id).captions);
  }
  return {model_name, bleu4(cands, refs), meteor_lite(cands, refs), cider(cands, refs)};
}

EvalReport evaluate_model(const Checkpoint& checkpoint, const Dataset& data, Split split,
                          const std::string& model_name) {
  if (data.manifest.indices(split).empty())
    throw InputError("evaluate: split '" + to_string(split) + "' has no videos");
  CaptionModel model = model_from_checkpoint(checkpoint);
  EvalReport report;
  report.split = to_string(split);
  report.captions = generate_captions(model, data, split, checkpoint.config.max_len);
  report.rows.push_back(score_captions(model_name, report.captions, data));
  return report;
}

namespace {

std::string join(const Tokens& t) {
  std::string s;
  for (const auto& w : t) {
    if (!s.empty()) s += ' ';
    s += w;
  }
  return s;
}

std::string fixed(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

}  // namespace

std::string report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["split"] = report.split;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : report.rows)
    j["rows"].push_back({{"model", r.model}, {"bleu4", r.bleu4}, {"meteor_lite", r.meteor_lite}, {"cider", r.cider}});
  j["captions"] = nlohmann::ordered_json::array();
  for (const auto& c : report.captions)
    j["captions"].push_back({{"video_id", c.video_id}, {"caption", join(c.tokens)}, {"terminated", c.terminated}});
  return j.dump(2) + "\n";
}

std::string report_table(const EvalReport& report) {
  std::size_t width = 5;
  for (const auto& r : report.rows) width = std::max(width, r.model.size());
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %8s  %11s  %8s\n", static_cast<int>(width), "model", "BLEU4",
                "METEOR-lite", "CIDEr");
  out << buf;
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %8.4f  %11.4f  %8.4f\n", static_cast<int>(width), r.model.c_str(),
                  r.bleu4, r.meteor_lite, r.cider);
    out << buf;
  }
  return out.str();
}

std::string report_csv(const EvalReport& report) {
  std::string s = "model,split,bleu4,meteor_lite,cider\n";
  for (const auto& r : report.rows)
    s += r.model + "," + report.split + "," + fixed(r.bleu4, 6) + "," + fixed(r.meteor_lite, 6) + "," +
         fixed(r.cider, 6) + "\n";
  return s;
}

}  // namespace mgvc
