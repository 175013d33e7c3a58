// mgvc: synth | prepare | train | generate | evaluate
//
// Exit codes: 0 success, 1 input error (bad flag, missing or malformed
// file, invalid config), 2 internal error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mgvc/data.hpp"
#include "mgvc/errors.hpp"
#include "mgvc/evaluation.hpp"
#include "mgvc/random.hpp"
#include "mgvc/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

// Relative data paths resolve against MGVC_DATA_ROOT when it is set.
fs::path data_path(const std::string& p) {
  fs::path path(p);
  if (path.is_relative()) {
    if (const char* root = std::getenv("MGVC_DATA_ROOT"); root && *root) return fs::path(root) / path;
  }
  return path;
}

fs::path manifest_path(const std::string& data) {
  fs::path p = data_path(data.empty() ? "manifest.json" : data);
  if (fs::is_directory(p)) p /= "manifest.json";
  if (!fs::exists(p)) throw mgvc::InputError(p.string() + ": manifest not found");
  return p;
}

fs::path require_out(const Globals& g, const char* what) {
  if (g.out.empty()) throw mgvc::InputError(std::string(what) + ": --out is required");
  return g.out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw mgvc::InputError(path.string() + ": cannot open for writing");
  out << text;
}

mgvc::TrainingConfig load_config(const Globals& g) {
  mgvc::TrainingConfig c;
  if (!g.config.empty()) {
    if (!fs::exists(g.config)) throw mgvc::InputError(g.config + ": config not found");
    c = mgvc::TrainingConfig::load(g.config);
  }
  if (g.seed) c.seed = *g.seed;
  c.validate();
  return c;
}

mgvc::Checkpoint load_checkpoint_arg(const std::string& path) {
  if (!fs::exists(path)) throw mgvc::InputError(path + ": checkpoint not found");
  return mgvc::load_checkpoint(path);
}

json phase_json(const mgvc::PhaseReport& r) {
  return {{"epochs", r.epochs},
          {"word_steps", r.word_steps},
          {"meaning_steps", r.meaning_steps},
          {"train_losses", r.train_losses},
          {"monitor_losses", r.monitor_losses}};
}

// ------------------------------------------------------------- commands

struct SynthArgs {
  int videos = 10;
  int events = 5;
  int d_vis = mgvc::kDefaultVisualDim;
  int min_frames = 4;
  int max_frames = 8;
  double noise = 0.1;
  double val_fraction = 0.0;
  double test_fraction = 0.0;
};

int cmd_synth(const Globals& g, const SynthArgs& a) {
  mgvc::SyntheticOptions o;
  o.n_videos = a.videos;
  o.vocab_events = a.events;
  o.seed = g.seed.value_or(0);
  o.visual_dim = a.d_vis;
  o.min_frames = a.min_frames;
  o.max_frames = a.max_frames;
  o.noise = a.noise;
  o.val_fraction = a.val_fraction;
  o.test_fraction = a.test_fraction;
  const fs::path out = require_out(g, "synth");
  mgvc::write_dataset(mgvc::generate_synthetic_dataset(o), out);
  std::cout << "wrote " << a.videos << " videos to " << out.string() << "\n";
  return 0;
}

struct PrepareArgs {
  std::string captions;
  std::string packs;
  double val_fraction = 0.0;
  double test_fraction = 0.0;
};

int cmd_prepare(const Globals& g, const PrepareArgs& a) {
  const fs::path out = require_out(g, "prepare");
  const fs::path captions = data_path(a.captions);
  const fs::path packs = data_path(a.packs);
  if (!fs::exists(captions)) throw mgvc::InputError(captions.string() + ": captions file not found");
  if (!fs::is_directory(packs)) throw mgvc::InputError(packs.string() + ": pack directory not found");
  if (a.val_fraction < 0 || a.test_fraction < 0 || a.val_fraction + a.test_fraction >= 1.0)
    throw mgvc::ConfigError("--val-fraction/--test-fraction: must be non-negative and sum below 1");

  std::map<std::string, std::vector<std::vector<std::string>>> by_video;
  for (auto& rec : mgvc::load_captions_jsonl(captions)) by_video[rec.video_id].push_back(std::move(rec.tokens));

  mgvc::DatasetManifest m;
  fs::create_directories(out);
  for (auto& [id, caps] : by_video) {
    const fs::path dir = packs / id;
    if (!fs::exists(dir / "meta.json"))
      throw mgvc::InputError(dir.string() + ": feature pack missing for video '" + id + "'");
    m.entries.push_back({id, fs::relative(fs::absolute(dir), fs::absolute(out)).generic_string(), std::move(caps)});
  }
  if (m.entries.empty()) throw mgvc::InputError(captions.string() + ": no captions");

  mgvc::Rng rng(g.seed.value_or(0));
  std::vector<std::size_t> order(m.entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const auto n = static_cast<double>(order.size());
  const auto n_test = static_cast<std::size_t>(a.test_fraction * n);
  const auto n_val = static_cast<std::size_t>(a.val_fraction * n);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const mgvc::Split s = k < n_test ? mgvc::Split::test : k < n_test + n_val ? mgvc::Split::val : mgvc::Split::train;
    m.split[m.entries[order[k]].video_id] = s;
  }
  m.validate();
  mgvc::write_manifest(m, out / "manifest.json");
  std::cout << "wrote " << (out / "manifest.json").string() << " (" << m.entries.size() << " videos)\n";
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string phase = "all";
  std::string from;
};

int cmd_train(const Globals& g, const TrainArgs& a) {
  const fs::path out = require_out(g, "train");
  const mgvc::TrainingConfig config = load_config(g);
  const mgvc::Dataset data = mgvc::load_dataset(manifest_path(a.data), config.max_frames);
  fs::create_directories(out);

  std::optional<mgvc::Checkpoint> ck;
  if (!a.from.empty()) ck = mgvc::load_checkpoint(a.from, config);
  json log;
  log["config_hash"] = config.hash();

  const bool all = a.phase == "all";
  if (all || a.phase == "word") {
    mgvc::PhaseReport r;
    ck = mgvc::train_word_phase(config, data, &r);
    mgvc::save_checkpoint(*ck, out / "word.ckpt");
    log["word"] = phase_json(r);
  }
  if (all || a.phase == "pretrain") {
    if (!ck) throw mgvc::InputError("train --phase pretrain: --from checkpoint is required");
    mgvc::PhaseReport r;
    ck = mgvc::pretrain_meaning(config, data, *ck, &r);
    mgvc::save_checkpoint(*ck, out / "pretrain.ckpt");
    log["pretrain"] = phase_json(r);
  }
  if (all || a.phase == "mixed") {
    if (!ck) throw mgvc::InputError("train --phase mixed: --from checkpoint is required");
    mgvc::PhaseReport r;
    ck = mgvc::train_mixed_phase(config, data, *ck, &r);
    mgvc::save_checkpoint(*ck, out / "mixed.ckpt");
    log["mixed"] = phase_json(r);
  }
  mgvc::save_checkpoint(*ck, out / "final.ckpt");
  write_text(out / "train_log.json", log.dump(2) + "\n");
  std::cout << "wrote " << (out / "final.ckpt").string() << "\n";
  return 0;
}

struct DecodeArgs {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  std::string csv;
};

int cmd_generate(const Globals& g, const DecodeArgs& a) {
  const fs::path out = require_out(g, "generate");
  const mgvc::Checkpoint ck = load_checkpoint_arg(a.checkpoint);
  const mgvc::Dataset data = mgvc::load_dataset(manifest_path(a.data), ck.config.max_frames);
  mgvc::CaptionModel model = mgvc::model_from_checkpoint(ck);
  std::vector<mgvc::CaptionRecord> records;
  for (auto& c : mgvc::generate_captions(model, data, mgvc::split_from_string(a.split), ck.config.max_len))
    records.push_back({c.video_id, std::move(c.tokens)});
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  mgvc::write_captions_jsonl(records, out);
  std::cout << "wrote " << records.size() << " captions to " << out.string() << "\n";
  return 0;
}

int cmd_evaluate(const Globals& g, const DecodeArgs& a) {
  const fs::path out = require_out(g, "evaluate");
  const mgvc::Checkpoint ck = load_checkpoint_arg(a.checkpoint);
  const mgvc::Dataset data = mgvc::load_dataset(manifest_path(a.data), ck.config.max_frames);
  const mgvc::EvalReport report = mgvc::evaluate_model(ck, data, mgvc::split_from_string(a.split));
  write_text(out, mgvc::report_json(report));
  if (!a.csv.empty()) write_text(a.csv, mgvc::report_csv(report));
  std::cout << mgvc::report_table(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meaning-guided video captioning toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "Training config (JSON)");
  app.add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) { g.seed = s; },
                                         "Seed for every random draw");
  app.add_option("--out", g.out, "Output path");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Write a synthetic dataset (exit 0 ok, 1 input error, 2 internal)");
  s->add_option("--videos", synth.videos)->check(CLI::Range(2, 1000000));
  s->add_option("--events", synth.events)->check(CLI::Range(2, 100));
  s->add_option("--d-vis", synth.d_vis)->check(CLI::PositiveNumber);
  s->add_option("--min-frames", synth.min_frames)->check(CLI::PositiveNumber);
  s->add_option("--max-frames", synth.max_frames)->check(CLI::PositiveNumber);
  s->add_option("--noise", synth.noise)->check(CLI::NonNegativeNumber);
  s->add_option("--val-fraction", synth.val_fraction)->check(CLI::Range(0.0, 1.0));
  s->add_option("--test-fraction", synth.test_fraction)->check(CLI::Range(0.0, 1.0));

  PrepareArgs prep;
  auto* p = app.add_subcommand("prepare", "Build manifest.json from captions.jsonl and a pack directory (exit 0/1/2)");
  p->add_option("--captions", prep.captions)->required();
  p->add_option("--packs", prep.packs)->required();
  p->add_option("--val-fraction", prep.val_fraction);
  p->add_option("--test-fraction", prep.test_fraction);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Word phase, triplet pretraining, mixed phase (exit 0/1/2)");
  t->add_option("--data", train.data, "Manifest file or dataset directory");
  t->add_option("--phase", train.phase)->check(CLI::IsMember({"all", "word", "pretrain", "mixed"}));
  t->add_option("--from", train.from, "Checkpoint to continue from");

  DecodeArgs gen;
  auto* gc = app.add_subcommand("generate", "Greedy captions for a split to JSONL (exit 0/1/2)");
  gc->add_option("--checkpoint", gen.checkpoint)->required();
  gc->add_option("--data", gen.data);
  gc->add_option("--split", gen.split)->check(CLI::IsMember({"train", "val", "test"}));

  DecodeArgs ev;
  auto* e = app.add_subcommand("evaluate", "BLEU4, METEOR-lite and CIDEr report (exit 0/1/2)");
  e->add_option("--checkpoint", ev.checkpoint)->required();
  e->add_option("--data", ev.data);
  e->add_option("--split", ev.split)->check(CLI::IsMember({"train", "val", "test"}));
  e->add_option("--csv", ev.csv, "Also write the metric rows as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*s) return cmd_synth(g, synth);
    if (*p) return cmd_prepare(g, prep);
    if (*t) return cmd_train(g, train);
    if (*gc) return cmd_generate(g, gen);
    if (*e) return cmd_evaluate(g, ev);
  } catch (const mgvc::FormatError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const mgvc::ConfigError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const mgvc::InputError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "internal error: " << err.what() << "\n";
    return 2;
  }
  return 2;
}
