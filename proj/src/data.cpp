#include "mgvc/data.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mgvc/errors.hpp"
#include "mgvc/random.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace mgvc {

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw FormatError(path.string() + ": write failed");
}

template <typename T>
T field(const json& j, const char* name, const std::string& where) {
  if (!j.is_object() || !j.contains(name))
    throw FormatError(where + ": missing field '" + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw FormatError(where + ": field '" + name + "' has the wrong type");
  }
}

std::uint32_t to_little(std::uint32_t x) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((x & 0xffu) << 24) | ((x & 0xff00u) << 8) | ((x >> 8) & 0xff00u) | (x >> 24);
  }
  return x;
}

}  // namespace

void FeaturePack::validate(int max_frames) const {
  const Eigen::Index n = frame_count();
  if (video_id.empty()) throw FormatError("video_id: empty");
  if (n < 1) throw FormatError("n_frames: must be at least 1");
  if (n > max_frames)
    throw FormatError("n_frames: " + std::to_string(n) + " exceeds max_frames " +
                      std::to_string(max_frames));
  if (visual_dim() < 1) throw FormatError("d_vis: must be at least 1");
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < visual_dim(); ++j)
      if (!std::isfinite(frame_features(i, j)))
        throw FormatError("frames.bin: non-finite value at frame " + std::to_string(i) +
                          ", dim " + std::to_string(j));
  if (static_cast<Eigen::Index>(detections.size()) != n)
    throw FormatError("objects.json: " + std::to_string(detections.size()) +
                      " frames of detections, expected " + std::to_string(n));
  for (std::size_t i = 0; i < detections.size(); ++i)
    for (const Detection& d : detections[i]) {
      if (d.label.empty())
        throw FormatError("objects.json: empty label in frame " + std::to_string(i));
      if (!(d.objectness >= 0.0 && d.objectness <= 1.0))
        throw FormatError("objects.json: objectness outside [0,1] in frame " +
                          std::to_string(i));
    }
}

std::vector<Eigen::Index> subsample_indices(Eigen::Index n, Eigen::Index max_frames) {
  std::vector<Eigen::Index> idx;
  if (n <= max_frames) {
    idx.resize(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    return idx;
  }
  idx.reserve(static_cast<std::size_t>(max_frames));
  for (Eigen::Index i = 0; i < max_frames; ++i) idx.push_back(i * n / max_frames);
  return idx;
}

FeaturePack load_feature_pack(const fs::path& dir, int max_frames) {
  if (max_frames < 1) throw ConfigError("max_frames: must be at least 1");
  const json meta = read_json(dir / "meta.json");
  const std::string where = (dir / "meta.json").string();
  FeaturePack pack;
  pack.video_id = field<std::string>(meta, "video_id", where);
  const auto n = field<long long>(meta, "n_frames", where);
  const auto d = field<long long>(meta, "d_vis", where);
  if (n < 1) throw FormatError(where + ": n_frames must be at least 1");
  if (d < 1) throw FormatError(where + ": d_vis must be at least 1");

  const fs::path bin = dir / "frames.bin";
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw FormatError(bin.string() + ": cannot open");
  const auto expected = static_cast<std::uintmax_t>(n) * static_cast<std::uintmax_t>(d) * 4u;
  const auto actual = fs::file_size(bin);
  if (actual != expected)
    throw FormatError(bin.string() + ": expected " + std::to_string(expected) +
                      " bytes for n_frames x d_vis, found " + std::to_string(actual));
  FrameMatrix frames(n, d);
  std::vector<std::uint32_t> raw(static_cast<std::size_t>(n * d));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(expected));
  if (!in) throw FormatError(bin.string() + ": short read");
  for (std::size_t k = 0; k < raw.size(); ++k) {
    const std::uint32_t bits = to_little(raw[k]);
    frames.data()[k] = std::bit_cast<float>(bits);
  }

  const json objects = read_json(dir / "objects.json");
  const std::string owhere = (dir / "objects.json").string();
  if (!objects.is_array()) throw FormatError(owhere + ": expected an array");
  if (static_cast<long long>(objects.size()) != n)
    throw FormatError(owhere + ": " + std::to_string(objects.size()) +
                      " frames of detections, expected n_frames = " + std::to_string(n));
  std::vector<std::vector<Detection>> detections(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (!objects[i].is_array())
      throw FormatError(owhere + ": frame " + std::to_string(i) + " is not an array");
    for (const json& o : objects[i]) {
      const std::string w = owhere + ": frame " + std::to_string(i);
      Detection det;
      det.label = field<std::string>(o, "label", w);
      det.objectness = field<double>(o, "objectness", w);
      const auto bbox = field<std::vector<double>>(o, "bbox", w);
      if (bbox.size() != 4) throw FormatError(w + ": field 'bbox' must have 4 entries");
      std::copy(bbox.begin(), bbox.end(), det.bbox.begin());
      detections[i].push_back(std::move(det));
    }
  }

  pack.frame_features = std::move(frames);
  pack.detections = std::move(detections);
  // Validate at the stored length first so errors name stored frame indices.
  pack.validate(static_cast<int>(std::max<long long>(n, max_frames)));
  if (n > max_frames) {
    const auto keep = subsample_indices(n, max_frames);
    FrameMatrix sub(max_frames, d);
    std::vector<std::vector<Detection>> sub_det;
    for (std::size_t i = 0; i < keep.size(); ++i) {
      sub.row(static_cast<Eigen::Index>(i)) = pack.frame_features.row(keep[i]);
      sub_det.push_back(pack.detections[static_cast<std::size_t>(keep[i])]);
    }
    pack.frame_features = std::move(sub);
    pack.detections = std::move(sub_det);
  }
  return pack;
}

void write_feature_pack(const FeaturePack& pack, const fs::path& dir) {
  pack.validate(static_cast<int>(std::max<Eigen::Index>(pack.frame_count(), 1)));
  fs::create_directories(dir);
  json meta = {{"video_id", pack.video_id},
               {"n_frames", pack.frame_count()},
               {"d_vis", pack.visual_dim()}};
  write_text(dir / "meta.json", meta.dump(2) + "\n");

  std::vector<std::uint32_t> raw(static_cast<std::size_t>(pack.frame_features.size()));
  for (std::size_t k = 0; k < raw.size(); ++k)
    raw[k] = to_little(std::bit_cast<std::uint32_t>(pack.frame_features.data()[k]));
  std::ofstream out(dir / "frames.bin", std::ios::binary);
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(std::uint32_t)));
  if (!out) throw FormatError((dir / "frames.bin").string() + ": write failed");

  json objects = json::array();
  for (const auto& frame : pack.detections) {
    json arr = json::array();
    for (const Detection& d : frame)
      arr.push_back({{"label", d.label},
                     {"objectness", d.objectness},
                     {"bbox", std::vector<double>(d.bbox.begin(), d.bbox.end())}});
    objects.push_back(std::move(arr));
  }
  write_text(dir / "objects.json", objects.dump() + "\n");
}

std::optional<std::string> dominant_object(const std::vector<Detection>& detections) {
  if (detections.empty()) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t i = 1; i < detections.size(); ++i)
    if (detections[i].objectness > detections[best].objectness) best = i;
  return detections[best].label;
}

std::vector<std::string> tokenize_caption(const std::string& text) {
  std::string clean;
  clean.reserve(text.size());
  for (unsigned char c : text) {
    if (std::ispunct(c)) continue;
    clean.push_back(static_cast<char>(std::isspace(c) ? ' ' : std::tolower(c)));
  }
  std::istringstream is(clean);
  std::vector<std::string> tokens;
  for (std::string tok; is >> tok;) tokens.push_back(tok);
  return tokens;
}

namespace {

std::string join(const std::vector<std::string>& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s += ' ';
    s += tokens[i];
  }
  return s;
}

}  // namespace

std::vector<CaptionRecord> load_captions_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open");
  std::vector<CaptionRecord> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
    CaptionRecord rec;
    rec.video_id = field<std::string>(j, "video_id", where);
    rec.tokens = tokenize_caption(field<std::string>(j, "caption", where));
    if (rec.tokens.empty()) throw FormatError(where + ": field 'caption' has no tokens");
    out.push_back(std::move(rec));
  }
  return out;
}

void write_captions_jsonl(const std::vector<CaptionRecord>& captions, const fs::path& path) {
  std::string text;
  for (const auto& c : captions)
    text += json{{"video_id", c.video_id}, {"caption", join(c.tokens)}}.dump() + "\n";
  write_text(path, text);
}

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ConfigError("split: unknown value '" + s + "' (expected train, val or test)");
}

void DatasetManifest::validate() const {
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (e.video_id.empty()) throw FormatError("manifest: entry with empty video_id");
    if (!ids.insert(e.video_id).second)
      throw FormatError("manifest: duplicate video_id '" + e.video_id + "'");
    if (e.captions.empty())
      throw FormatError("manifest: video '" + e.video_id + "' has no captions");
    for (const auto& cap : e.captions) {
      if (cap.empty()) throw FormatError("manifest: video '" + e.video_id + "' has an empty caption");
      for (const auto& tok : cap)
        if (tok.empty() || tok.find_first_of(" \t\r\n") != std::string::npos)
          throw FormatError("manifest: video '" + e.video_id + "' has a malformed token");
    }
    if (!split.contains(e.video_id))
      throw FormatError("manifest: video '" + e.video_id + "' has no split assignment");
  }
  for (const auto& [id, s] : split)
    if (!ids.contains(id)) throw FormatError("manifest: split names unknown video '" + id + "'");
}

std::vector<std::size_t> DatasetManifest::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto it = split.find(entries[i].video_id);
    if (it != split.end() && it->second == s) out.push_back(i);
  }
  return out;
}

const ManifestEntry& DatasetManifest::entry(const std::string& video_id) const {
  for (const auto& e : entries)
    if (e.video_id == video_id) return e;
  throw InputError("manifest: unknown video '" + video_id + "'");
}

DatasetManifest load_manifest(const fs::path& path) {
  const json j = read_json(path);
  const std::string where = path.string();
  DatasetManifest m;
  const auto entries = field<json>(j, "entries", where);
  if (!entries.is_array()) throw FormatError(where + ": field 'entries' must be an array");
  for (const json& e : entries) {
    ManifestEntry me;
    me.video_id = field<std::string>(e, "video_id", where);
    me.pack_path = field<std::string>(e, "pack", where + ": " + me.video_id);
    for (const auto& c : field<std::vector<std::string>>(e, "captions", where + ": " + me.video_id))
      me.captions.push_back(tokenize_caption(c));
    m.entries.push_back(std::move(me));
  }
  const auto split = field<json>(j, "split", where);
  for (const char* name : {"train", "val", "test"}) {
    if (!split.contains(name)) continue;
    for (const auto& id : field<std::vector<std::string>>(split, name, where + ": split")) {
      if (m.split.contains(id))
        throw FormatError(where + ": video '" + id + "' assigned to more than one split");
      m.split[id] = split_from_string(name);
    }
  }
  m.validate();
  return m;
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  manifest.validate();
  json entries = json::array();
  for (const auto& e : manifest.entries) {
    std::vector<std::string> caps;
    for (const auto& c : e.captions) caps.push_back(join(c));
    entries.push_back({{"video_id", e.video_id}, {"pack", e.pack_path}, {"captions", caps}});
  }
  json split = {{"train", json::array()}, {"val", json::array()}, {"test", json::array()}};
  for (const auto& e : manifest.entries) split[to_string(manifest.split.at(e.video_id))].push_back(e.video_id);
  write_text(path, json{{"entries", entries}, {"split", split}}.dump(2) + "\n");
}

std::vector<CaptionRecord> Dataset::caption_records() const {
  std::vector<CaptionRecord> out;
  for (const auto& e : manifest.entries)
    for (const auto& c : e.captions) out.push_back({e.video_id, c});
  return out;
}

Dataset load_dataset(const fs::path& manifest_path, int max_frames) {
  Dataset ds;
  ds.manifest = load_manifest(manifest_path);
  const fs::path root = manifest_path.parent_path();
  for (const auto& e : ds.manifest.entries) {
    const fs::path dir = root / e.pack_path;
    if (!fs::exists(dir))
      throw FormatError("feature pack for '" + e.video_id + "' not found at " + dir.string());
    FeaturePack pack = load_feature_pack(dir, max_frames);
    if (pack.video_id != e.video_id)
      throw FormatError(dir.string() + ": video_id '" + pack.video_id +
                        "' does not match manifest entry '" + e.video_id + "'");
    ds.packs.push_back(std::move(pack));
  }
  return ds;
}

void write_dataset(const Dataset& dataset, const fs::path& dir) {
  if (dataset.packs.size() != dataset.manifest.entries.size())
    throw InputError("write_dataset: packs and manifest entries differ in count");
  fs::create_directories(dir);
  for (std::size_t i = 0; i < dataset.packs.size(); ++i)
    write_feature_pack(dataset.packs[i], dir / dataset.manifest.entries[i].pack_path);
  write_manifest(dataset.manifest, dir / "manifest.json");
  write_captions_jsonl(dataset.caption_records(), dir / "captions.jsonl");
}

std::vector<Batch> make_batches(const DatasetManifest& manifest, std::size_t batch_size,
                                std::uint64_t seed) {
  if (batch_size == 0 || batch_size % 2 != 0)
    throw ConfigError("batch_size: must be a positive even number, got " +
                      std::to_string(batch_size));
  std::vector<std::size_t> train = manifest.indices(Split::train);
  if (batch_size > train.size())
    throw ConfigError("batch_size: " + std::to_string(batch_size) + " exceeds the " +
                      std::to_string(train.size()) + " training videos");
  Rng rng(seed);
  for (std::size_t i = train.size(); i > 1; --i) std::swap(train[i - 1], train[rng.below(i)]);

  std::vector<Batch> batches;
  for (std::size_t start = 0; start + batch_size <= train.size(); start += batch_size) {
    Batch b;
    for (std::size_t k = start; k < start + batch_size; ++k) {
      const ManifestEntry& e = manifest.entries[train[k]];
      b.entries.push_back(train[k]);
      b.video_ids.push_back(e.video_id);
      b.captions.push_back(e.captions[rng.below(e.captions.size())]);
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

std::vector<SyntheticEvent> synthetic_events(const SyntheticOptions& options) {
  static const char* const kSubjects[] = {"dog",   "cat", "man", "woman",  "bird",
                                          "horse", "girl", "boy", "monkey", "panda"};
  static const char* const kVerbs[] = {"running", "jumping", "swimming", "eating",  "dancing",
                                       "riding",  "singing", "cooking",  "playing", "sleeping"};
  constexpr int kPairs = 10;
  if (options.vocab_events < 2 || options.vocab_events > kPairs * kPairs)
    throw ConfigError("vocab_events: must be in [2, 100], got " +
                      std::to_string(options.vocab_events));
  if (options.visual_dim < 1) throw ConfigError("visual_dim: must be at least 1");
  // Prototypes come from a stream separate from per-video noise so adding
  // videos never moves an event.
  Rng rng(options.seed ^ 0x5eed5eed5eed5eedULL);
  std::vector<SyntheticEvent> events;
  for (int k = 0; k < options.vocab_events; ++k) {
    SyntheticEvent ev;
    ev.subject = kSubjects[k % kPairs];
    ev.verb = kVerbs[(k + k / kPairs) % kPairs];
    ev.prototype.resize(options.visual_dim);
    for (int j = 0; j < options.visual_dim; ++j) ev.prototype(j) = static_cast<float>(rng.normal());
    events.push_back(std::move(ev));
  }
  return events;
}

Dataset generate_synthetic_dataset(const SyntheticOptions& options) {
  if (options.n_videos < 2) throw ConfigError("n_videos: must be at least 2");
  if (options.min_frames < 1 || options.max_frames < options.min_frames)
    throw ConfigError("frames: need 1 <= min_frames <= max_frames");
  if (options.val_fraction < 0 || options.test_fraction < 0 ||
      options.val_fraction + options.test_fraction >= 1.0)
    throw ConfigError("split fractions: need val, test >= 0 and val + test < 1");
  static const char* const kDistractors[] = {"car", "tree", "ball", "chair"};

  const auto events = synthetic_events(options);
  Rng rng(options.seed);
  Dataset ds;
  for (int i = 0; i < options.n_videos; ++i) {
    const SyntheticEvent& ev = events[static_cast<std::size_t>(i % options.vocab_events)];
    char id[32];
    std::snprintf(id, sizeof id, "vid%04d", i);

    FeaturePack pack;
    pack.video_id = id;
    const int span = options.max_frames - options.min_frames + 1;
    const int n = options.min_frames + static_cast<int>(rng.below(static_cast<std::uint64_t>(span)));
    pack.frame_features.resize(n, options.visual_dim);
    for (int t = 0; t < n; ++t)
      for (int j = 0; j < options.visual_dim; ++j)
        pack.frame_features(t, j) =
            ev.prototype(j) + static_cast<float>(options.noise * rng.normal());
    pack.detections.resize(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) {
      auto& frame = pack.detections[static_cast<std::size_t>(t)];
      if (rng.uniform() < 0.1) continue;  // detector miss
      Detection subject{ev.subject, rng.uniform(0.6, 0.95),
                        {rng.uniform(0, 0.5), rng.uniform(0, 0.5), 0.4, 0.4}};
      if (rng.uniform() < 0.5) {
        Detection other{kDistractors[rng.below(4)], rng.uniform(0.1, 0.5),
                        {rng.uniform(0, 0.5), rng.uniform(0, 0.5), 0.2, 0.2}};
        if (rng.uniform() < 0.5) {
          frame.push_back(std::move(other));
          frame.push_back(std::move(subject));
        } else {
          frame.push_back(std::move(subject));
          frame.push_back(std::move(other));
        }
      } else {
        frame.push_back(std::move(subject));
      }
    }

    ManifestEntry entry;
    entry.video_id = id;
    entry.pack_path = std::string("packs/") + id;
    entry.captions.push_back({"a", ev.subject, "is", ev.verb});
    ds.manifest.entries.push_back(std::move(entry));
    ds.packs.push_back(std::move(pack));
  }

  const auto n = static_cast<std::size_t>(options.n_videos);
  const auto n_test = static_cast<std::size_t>(std::llround(options.test_fraction * options.n_videos));
  const auto n_val = static_cast<std::size_t>(std::llround(options.val_fraction * options.n_videos));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  for (std::size_t k = 0; k < n; ++k) {
    const Split s = k < n_test ? Split::test : (k < n_test + n_val ? Split::val : Split::train);
    ds.manifest.split[ds.manifest.entries[order[k]].video_id] = s;
  }
  return ds;
}

}  // namespace mgvc
