#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mgvc {

inline constexpr int kDefaultMaxFrames = 80;
inline constexpr int kDefaultVisualDim = 2048;

struct Detection {
  std::string label;
  double objectness = 0.0;
  std::array<double, 4> bbox{};  // normalized x, y, w, h
};

using FrameMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Per-video frame features (one row per frame) plus per-frame detections.
struct FeaturePack {
  std::string video_id;
  FrameMatrix frame_features;  // N x d_vis
  std::vector<std::vector<Detection>> detections;  // length N

  Eigen::Index frame_count() const { return frame_features.rows(); }
  Eigen::Index visual_dim() const { return frame_features.cols(); }

  // Throws FormatError naming the first violated field.
  void validate(int max_frames = kDefaultMaxFrames) const;
};

// Reads `dir/meta.json`, `dir/frames.bin`, `dir/objects.json`. Packs longer
// than max_frames are subsampled to frames floor(i * n / max_frames).
FeaturePack load_feature_pack(const std::filesystem::path& dir, int max_frames = kDefaultMaxFrames);
void write_feature_pack(const FeaturePack& pack, const std::filesystem::path& dir);

// Frame indices kept when subsampling n stored frames down to max_frames.
std::vector<Eigen::Index> subsample_indices(Eigen::Index n, Eigen::Index max_frames);

// Label of the highest-objectness detection; first one wins ties.
std::optional<std::string> dominant_object(const std::vector<Detection>& detections);

struct CaptionRecord {
  std::string video_id;
  std::vector<std::string> tokens;
};

// Lowercases, strips ASCII punctuation and splits on whitespace.
std::vector<std::string> tokenize_caption(const std::string& text);

std::vector<CaptionRecord> load_captions_jsonl(const std::filesystem::path& path);
void write_captions_jsonl(const std::vector<CaptionRecord>& captions,
                          const std::filesystem::path& path);

enum class Split { train, val, test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct ManifestEntry {
  std::string video_id;
  std::string pack_path;  // relative to the manifest directory
  std::vector<std::vector<std::string>> captions;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::map<std::string, Split> split;

  // Throws FormatError on duplicate ids, caption-less entries, empty tokens
  // or videos missing a split assignment.
  void validate() const;
  // Entry indices in manifest order.
  std::vector<std::size_t> indices(Split s) const;
  const ManifestEntry& entry(const std::string& video_id) const;
};

DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Manifest plus the packs it references, aligned with manifest.entries.
struct Dataset {
  DatasetManifest manifest;
  std::vector<FeaturePack> packs;

  std::vector<CaptionRecord> caption_records() const;
};

Dataset load_dataset(const std::filesystem::path& manifest_path,
                     int max_frames = kDefaultMaxFrames);
// Writes manifest.json, captions.jsonl and every pack under `dir`.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

struct Batch {
  std::vector<std::size_t> entries;  // manifest entry indices
  std::vector<std::string> video_ids;
  std::vector<std::vector<std::string>> captions;  // one sampled caption per video
};

// Shuffles the training videos with `seed`, cuts them into batches of
// batch_size distinct videos and samples one caption per video. A trailing
// partial batch is dropped.
std::vector<Batch> make_batches(const DatasetManifest& manifest, std::size_t batch_size,
                                std::uint64_t seed);

struct SyntheticOptions {
  int n_videos = 10;
  int vocab_events = 5;
  std::uint64_t seed = 0;
  int visual_dim = kDefaultVisualDim;
  int min_frames = 4;
  int max_frames = 8;
  double noise = 0.1;
  double val_fraction = 0.0;
  double test_fraction = 0.0;
};

struct SyntheticEvent {
  std::string subject;
  std::string verb;  // already in -ing form
  Eigen::VectorXf prototype;
};

// Event `k` of a synthetic dataset: subject/verb pair and feature prototype.
std::vector<SyntheticEvent> synthetic_events(const SyntheticOptions& options);

// Desk-scale stand-in for a captioning corpus: every frame of a video is a
// noisy copy of one event prototype, the caption is "a <subject> is <verb>"
// and the dominant detection in each non-empty frame is the subject.
Dataset generate_synthetic_dataset(const SyntheticOptions& options);

}  // namespace mgvc
