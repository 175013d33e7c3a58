#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mgvc/data.hpp"
#include "mgvc/model.hpp"
#include "mgvc/random.hpp"
#include "mgvc/training.hpp"

namespace mgvc::testing {

// hidden = d_vis = 8, V = 20.
inline ModelDims toy_dims() { return {8, 8, 8, 20, 8, 8}; }

inline Vocabulary toy_vocab() {
  Vocabulary v;
  for (const char* w : {"a", "dog", "cat", "is", "running", "jumping", "eating", "man", "woman", "car",
                        "tree", "ball", "chair", "sitting", "person"})
    v.add(w);
  return v;
}

inline FeaturePack random_pack(Rng& rng, const std::string& id, int frames, int d_vis) {
  FeaturePack p;
  p.video_id = id;
  p.frame_features.resize(frames, d_vis);
  for (int i = 0; i < frames; ++i)
    for (int j = 0; j < d_vis; ++j) p.frame_features(i, j) = static_cast<float>(rng.normal());
  const char* labels[] = {"dog", "cat", "car", "person"};
  for (int i = 0; i < frames; ++i) {
    std::vector<Detection> dets;
    if (i % 3 != 2) {
      dets.push_back({labels[rng.below(4)], rng.uniform(0.2, 0.9), {0.1, 0.1, 0.5, 0.5}});
      dets.push_back({labels[rng.below(4)], rng.uniform(0.2, 0.9), {0.2, 0.3, 0.4, 0.4}});
    }
    p.detections.push_back(dets);
  }
  return p;
}

inline SyntheticOptions toy_synthetic(int videos, std::uint64_t seed = 7) {
  SyntheticOptions o;
  o.n_videos = videos;
  o.vocab_events = 5;
  o.seed = seed;
  o.visual_dim = 8;
  return o;
}

// Desk-scale config that overfits the 10-video synthetic set quickly.
inline TrainingConfig toy_config() {
  TrainingConfig c;
  c.batch_size = 2;
  c.d_vis = 8;
  c.d_emb = 8;
  c.hidden = 16;
  c.meaning_hidden = 16;
  c.sentence_dim = 16;
  c.lr_all = 1e-2;
  c.max_len = 10;
  c.word_max_epochs = 100;
  c.pretrain_epochs = 2;
  c.mixed_steps = 20;
  c.seed = 3;
  return c;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("mgvc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace mgvc::testing
