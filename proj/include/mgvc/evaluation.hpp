#pragma once

#include <string>
#include <vector>

#include "mgvc/data.hpp"
#include "mgvc/training.hpp"

namespace mgvc {

using Tokens = std::vector<std::string>;

// Corpus BLEU-4: clipped n-gram precisions for n = 1..4, uniform weights,
// brevity penalty against the closest reference length (shorter wins ties).
// With `smooth`, precisions for n >= 2 use add-one counts.
double bleu4(const std::vector<Tokens>& candidates, const std::vector<std::vector<Tokens>>& references,
             bool smooth = false);

// CIDEr with tf-idf weights from the reference sets, cosine per n-gram order
// averaged over references, orders weighted 1/4, scaled by 10. Needs at
// least two videos.
double cider(const std::vector<Tokens>& candidates, const std::vector<std::vector<Tokens>>& references);

// Suffix stripper used by the stem matcher: ing, ed, es, s.
std::string simple_stem(const std::string& word);

struct MeteorAlignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
};

// Greedy exact matches first, then stem matches on what is left.
MeteorAlignment meteor_align(const Tokens& candidate, const Tokens& reference);
double meteor_segment(const Tokens& candidate, const Tokens& reference);

// Exact + stem matching only (no synonyms or paraphrases). Per candidate the
// best reference counts; the corpus score is the mean over candidates.
double meteor_lite(const std::vector<Tokens>& candidates,
                   const std::vector<std::vector<Tokens>>& references);

struct MetricRow {
  std::string model;
  double bleu4 = 0.0;
  double meteor_lite = 0.0;
  double cider = 0.0;
};

struct GeneratedCaption {
  std::string video_id;
  Tokens tokens;
  bool terminated = false;  // EOS emitted before max_len
};

struct EvalReport {
  std::string split;
  std::vector<MetricRow> rows;
  std::vector<GeneratedCaption> captions;
};

// Greedy captions for every video of a split.
std::vector<GeneratedCaption> generate_captions(CaptionModel& model, const Dataset& data, Split split,
                                                int max_len);

// Scores captions against every reference of their video.
MetricRow score_captions(const std::string& model_name, const std::vector<GeneratedCaption>& captions,
                         const Dataset& data);

EvalReport evaluate_model(const Checkpoint& checkpoint, const Dataset& data, Split split,
                          const std::string& model_name = "mgvc");

std::string report_json(const EvalReport& report);
std::string report_table(const EvalReport& report);
std::string report_csv(const EvalReport& report);

}  // namespace mgvc
