#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "mgvc/data.hpp"
#include "mgvc/errors.hpp"

using namespace mgvc;
using namespace mgvc::testing;
namespace fs = std::filesystem;

namespace {

FeaturePack numbered_pack(int frames, int d = 3) {
  FeaturePack p;
  p.video_id = "v";
  p.frame_features.resize(frames, d);
  for (int i = 0; i < frames; ++i)
    for (int j = 0; j < d; ++j) p.frame_features(i, j) = static_cast<float>(i * 10 + j) + 0.25f;
  p.detections.assign(static_cast<std::size_t>(frames), {});
  for (int i = 0; i < frames; i += 2) p.detections[static_cast<std::size_t>(i)].push_back({"dog", 0.5, {0, 0, 1, 1}});
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = slurp(e.path());
  return out;
}

DatasetManifest manifest_with_train(int n) {
  DatasetManifest m;
  for (int i = 0; i < n; ++i) {
    const std::string id = "v" + std::to_string(i);
    m.entries.push_back({id, "packs/" + id, {{"a", "dog"}, {"a", "cat", "runs"}}});
    m.split[id] = Split::train;
  }
  return m;
}

}  // namespace

TEST(FeaturePack, EightyFramesUnchanged) {
  const auto dir = scratch_dir("pack80");
  const FeaturePack p = numbered_pack(80);
  write_feature_pack(p, dir);
  const FeaturePack q = load_feature_pack(dir, 80);
  EXPECT_EQ(q.frame_count(), 80);
  EXPECT_EQ(q.frame_features, p.frame_features);
}

TEST(FeaturePack, OneSixtyFramesTakeEvenIndices) {
  const auto dir = scratch_dir("pack160");
  const FeaturePack p = numbered_pack(160);
  write_feature_pack(p, dir);
  const FeaturePack q = load_feature_pack(dir, 80);
  ASSERT_EQ(q.frame_count(), 80);
  for (int i = 0; i < 80; ++i) {
    EXPECT_EQ(q.frame_features.row(i), p.frame_features.row(2 * i));
    EXPECT_EQ(q.detections[static_cast<std::size_t>(i)].size(), p.detections[static_cast<std::size_t>(2 * i)].size());
  }
  const auto idx = subsample_indices(160, 80);
  EXPECT_EQ(idx.front(), 0);
  EXPECT_EQ(idx.back(), 158);
}

TEST(FeaturePack, SingleFrame) {
  const auto dir = scratch_dir("pack1");
  write_feature_pack(numbered_pack(1), dir);
  EXPECT_EQ(load_feature_pack(dir).frame_count(), 1);
}

TEST(FeaturePack, RoundTripIsBitExact) {
  const auto dir = scratch_dir("pack_rt");
  Rng rng(5);
  FeaturePack p = random_pack(rng, "rt", 7, 11);
  p.frame_features(3, 4) = -0.0f;
  p.frame_features(0, 0) = std::numeric_limits<float>::denorm_min();
  write_feature_pack(p, dir);
  const FeaturePack q = load_feature_pack(dir);
  ASSERT_EQ(q.frame_count(), 7);
  EXPECT_EQ(std::memcmp(p.frame_features.data(), q.frame_features.data(), sizeof(float) * 77), 0);
  ASSERT_EQ(q.detections.size(), p.detections.size());
  for (std::size_t i = 0; i < p.detections.size(); ++i) {
    ASSERT_EQ(q.detections[i].size(), p.detections[i].size());
    for (std::size_t k = 0; k < p.detections[i].size(); ++k) {
      EXPECT_EQ(q.detections[i][k].label, p.detections[i][k].label);
      EXPECT_EQ(q.detections[i][k].objectness, p.detections[i][k].objectness);
      EXPECT_EQ(q.detections[i][k].bbox, p.detections[i][k].bbox);
    }
  }
}

TEST(FeaturePack, SubsamplingIsStrictlyIncreasing) {
  for (Eigen::Index n : {81, 100, 159, 160, 161, 1000, 4321}) {
    const auto idx = subsample_indices(n, 80);
    ASSERT_EQ(idx.size(), 80u);
    EXPECT_EQ(idx.front(), 0);
    EXPECT_LT(idx.back(), n);
    for (std::size_t i = 1; i < idx.size(); ++i) EXPECT_LT(idx[i - 1], idx[i]);
  }
}

TEST(FeaturePack, MalformedInputsNameTheField) {
  const auto dir = scratch_dir("pack_bad");
  write_feature_pack(numbered_pack(4), dir);

  {  // dimension mismatch
    std::ofstream(dir / "meta.json") << R"({"video_id":"v","n_frames":4,"d_vis":5})";
    try {
      load_feature_pack(dir);
      FAIL();
    } catch (const FormatError& e) {
      EXPECT_NE(std::string(e.what()).find("frames.bin"), std::string::npos);
    }
  }
  {  // missing header field
    std::ofstream(dir / "meta.json") << R"({"video_id":"v","d_vis":3})";
    try {
      load_feature_pack(dir);
      FAIL();
    } catch (const FormatError& e) {
      EXPECT_NE(std::string(e.what()).find("n_frames"), std::string::npos);
    }
  }
  {  // non-finite value
    FeaturePack p = numbered_pack(4);
    write_feature_pack(p, dir);
    std::fstream f(dir / "frames.bin", std::ios::in | std::ios::out | std::ios::binary);
    const float nan = std::numeric_limits<float>::quiet_NaN();
    f.seekp(4 * 5);
    f.write(reinterpret_cast<const char*>(&nan), 4);
    f.close();
    try {
      load_feature_pack(dir);
      FAIL();
    } catch (const FormatError& e) {
      EXPECT_NE(std::string(e.what()).find("non-finite"), std::string::npos);
    }
  }
  {  // detections of the wrong length
    write_feature_pack(numbered_pack(4), dir);
    std::ofstream(dir / "objects.json") << "[[],[]]";
    EXPECT_THROW(load_feature_pack(dir), FormatError);
  }
  {  // objectness out of range
    write_feature_pack(numbered_pack(4), dir);
    std::ofstream(dir / "objects.json") << R"([[{"label":"x","objectness":1.5,"bbox":[0,0,1,1]}],[],[],[]])";
    EXPECT_THROW(load_feature_pack(dir), FormatError);
  }
}

TEST(DominantObject, HighestObjectnessWins) {
  EXPECT_EQ(dominant_object({{"dog", 0.9, {}}, {"cat", 0.8, {}}}), "dog");
}

TEST(DominantObject, EmptyGivesSentinel) { EXPECT_EQ(dominant_object({}), std::nullopt); }

TEST(DominantObject, TieGoesToLowestIndex) {
  EXPECT_EQ(dominant_object({{"cat", 0.7, {}}, {"dog", 0.7, {}}}), "cat");
}

TEST(DominantObject, ResultIsAlwaysAnInputLabel) {
  Rng rng(9);
  const char* labels[] = {"a", "b", "c", "d"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Detection> dets(rng.below(5));
    std::set<std::string> present;
    double best = -1.0;
    for (auto& d : dets) {
      d.label = labels[rng.below(4)];
      d.objectness = static_cast<double>(rng.below(4)) / 4.0;
      present.insert(d.label);
      best = std::max(best, d.objectness);
    }
    const auto got = dominant_object(dets);
    if (dets.empty()) {
      EXPECT_FALSE(got.has_value());
      continue;
    }
    ASSERT_TRUE(got.has_value());
    EXPECT_TRUE(present.contains(*got));
    for (const auto& d : dets)
      if (d.objectness == best) {
        EXPECT_EQ(d.label, *got);
        break;
      }
  }
}

TEST(Captions, TokenizeLowercasesAndStripsPunctuation) {
  EXPECT_EQ(tokenize_caption("A Dog, is RUNNING!  "), (std::vector<std::string>{"a", "dog", "is", "running"}));
  EXPECT_TRUE(tokenize_caption(" ... ").empty());
}

TEST(Captions, JsonlRoundTrip) {
  const auto dir = scratch_dir("captions");
  const std::vector<CaptionRecord> recs{{"v1", {"a", "dog"}}, {"v2", {"a", "cat", "is", "eating"}}};
  write_captions_jsonl(recs, dir / "c.jsonl");
  const auto back = load_captions_jsonl(dir / "c.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].video_id, "v2");
  EXPECT_EQ(back[1].tokens, recs[1].tokens);
}

TEST(Manifest, ValidationRejectsBrokenManifests) {
  DatasetManifest m = manifest_with_train(3);
  EXPECT_NO_THROW(m.validate());
  DatasetManifest dup = m;
  dup.entries[1].video_id = "v0";
  EXPECT_THROW(dup.validate(), FormatError);
  DatasetManifest empty_caps = m;
  empty_caps.entries[0].captions.clear();
  EXPECT_THROW(empty_caps.validate(), FormatError);
  DatasetManifest no_split = m;
  no_split.split.erase("v2");
  EXPECT_THROW(no_split.validate(), FormatError);
}

TEST(Manifest, RoundTripThroughJson) {
  const auto dir = scratch_dir("manifest");
  DatasetManifest m = manifest_with_train(4);
  m.split["v3"] = Split::test;
  write_manifest(m, dir / "manifest.json");
  const DatasetManifest back = load_manifest(dir / "manifest.json");
  ASSERT_EQ(back.entries.size(), 4u);
  EXPECT_EQ(back.entries[2].captions, m.entries[2].captions);
  EXPECT_EQ(back.indices(Split::train).size(), 3u);
  EXPECT_EQ(back.indices(Split::test), std::vector<std::size_t>{3});
}

TEST(Batches, HundredVideosMakeTwoBatchesOfFifty) {
  const auto batches = make_batches(manifest_with_train(100), 50, 1);
  ASSERT_EQ(batches.size(), 2u);
  std::set<std::string> all;
  for (const auto& b : batches) {
    EXPECT_EQ(std::set<std::string>(b.video_ids.begin(), b.video_ids.end()).size(), 50u);
    all.insert(b.video_ids.begin(), b.video_ids.end());
  }
  EXPECT_EQ(all.size(), 100u);
}

TEST(Batches, TwoVideosOneBatch) {
  const auto batches = make_batches(manifest_with_train(2), 2, 0);
  ASSERT_EQ(batches.size(), 1u);
  EXPECT_EQ(std::set<std::string>(batches[0].video_ids.begin(), batches[0].video_ids.end()),
            (std::set<std::string>{"v0", "v1"}));
}

TEST(Batches, SameSeedSameSequence) {
  const auto m = manifest_with_train(30);
  const auto a = make_batches(m, 6, 77);
  const auto b = make_batches(m, 6, 77);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].video_ids, b[i].video_ids);
    EXPECT_EQ(a[i].captions, b[i].captions);
  }
  const auto c = make_batches(m, 6, 78);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= a[i].video_ids != c[i].video_ids;
  EXPECT_TRUE(differs);
}

TEST(Batches, CaptionBelongsToItsVideo) {
  const auto m = manifest_with_train(10);
  for (const auto& b : make_batches(m, 2, 4))
    for (std::size_t i = 0; i < b.entries.size(); ++i) {
      const auto& caps = m.entries[b.entries[i]].captions;
      EXPECT_NE(std::find(caps.begin(), caps.end(), b.captions[i]), caps.end());
    }
}

TEST(Batches, RejectsOddOrOversizedBatches) {
  const auto m = manifest_with_train(4);
  EXPECT_THROW(make_batches(m, 3, 0), ConfigError);
  EXPECT_THROW(make_batches(m, 0, 0), ConfigError);
  EXPECT_THROW(make_batches(m, 6, 0), ConfigError);
}

TEST(Synthetic, TenVideosFiveTemplates) {
  SyntheticOptions o;
  o.n_videos = 10;
  o.vocab_events = 5;
  o.visual_dim = 16;
  const Dataset d = generate_synthetic_dataset(o);
  ASSERT_EQ(d.packs.size(), 10u);
  std::set<std::vector<std::string>> templates;
  for (std::size_t i = 0; i < d.packs.size(); ++i) {
    EXPECT_NO_THROW(d.packs[i].validate());
    ASSERT_EQ(d.manifest.entries[i].captions.size(), 1u);
    const auto& cap = d.manifest.entries[i].captions[0];
    templates.insert(cap);
    ASSERT_EQ(cap.size(), 4u);
    EXPECT_EQ(cap[0], "a");
    EXPECT_EQ(cap[2], "is");
    EXPECT_TRUE(cap[3].ends_with("ing"));
    // Dominant detection of every non-empty frame is the subject.
    for (const auto& frame : d.packs[i].detections)
      if (!frame.empty()) EXPECT_EQ(dominant_object(frame), cap[1]);
  }
  EXPECT_EQ(templates.size(), 5u);
}

TEST(Synthetic, FixedSeedIsByteIdentical) {
  SyntheticOptions o = toy_synthetic(10, 7);
  o.val_fraction = 0.2;
  const auto a = scratch_dir("synth_a"), b = scratch_dir("synth_b");
  write_dataset(generate_synthetic_dataset(o), a);
  write_dataset(generate_synthetic_dataset(o), b);
  EXPECT_EQ(tree(a), tree(b));
  EXPECT_FALSE(tree(a).empty());
}

TEST(Synthetic, PrototypesArePairwiseSeparated) {
  SyntheticOptions o;
  o.vocab_events = 20;
  o.visual_dim = 32;
  const auto events = synthetic_events(o);
  for (std::size_t i = 0; i < events.size(); ++i)
    for (std::size_t j = i + 1; j < events.size(); ++j) {
      EXPECT_GT((events[i].prototype - events[j].prototype).norm(), 0.0f);
      EXPECT_FALSE(events[i].subject == events[j].subject && events[i].verb == events[j].verb);
    }
}

TEST(Synthetic, DatasetRoundTripsThroughDisk) {
  const auto dir = scratch_dir("synth_rt");
  SyntheticOptions o = toy_synthetic(6, 1);
  o.test_fraction = 0.34;
  const Dataset d = generate_synthetic_dataset(o);
  write_dataset(d, dir);
  const Dataset back = load_dataset(dir / "manifest.json");
  ASSERT_EQ(back.packs.size(), d.packs.size());
  for (std::size_t i = 0; i < d.packs.size(); ++i) EXPECT_EQ(back.packs[i].frame_features, d.packs[i].frame_features);
  EXPECT_EQ(back.manifest.indices(Split::test), d.manifest.indices(Split::test));
  EXPECT_FALSE(d.manifest.indices(Split::test).empty());
}

TEST(Dataset, MissingPackIsReported) {
  const auto dir = scratch_dir("missing_pack");
  write_dataset(generate_synthetic_dataset(toy_synthetic(4)), dir);
  fs::remove_all(dir / "packs" / "vid0002");
  try {
    load_dataset(dir / "manifest.json");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("vid0002"), std::string::npos);
  }
}
