#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"

namespace fs = std::filesystem;
using namespace mgvc::testing;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CliRun cli(const std::string& args, const fs::path& dir) {
  const fs::path o = dir / "stdout.txt", e = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + MGVC_CLI_PATH + "\" " + args + " >\"" + o.string() + "\" 2>\"" + e.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(o), slurp(e)};
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& f : fs::recursive_directory_iterator(root))
    if (f.is_regular_file()) out[fs::relative(f.path(), root).generic_string()] = slurp(f.path());
  return out;
}

void write_config(const fs::path& p) {
  std::ofstream(p) << R"({"batch_size":2,"d_vis":8,"d_emb":8,"hidden":16,"meaning_hidden":16,"sentence_dim":16,)"
                   << R"("lr_all":0.01,"word_max_epochs":40,"patience":5,"pretrain_epochs":1,"mixed_steps":6,"max_len":10,"seed":3})";
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST(Cli, SynthIsByteIdenticalForTheSameSeed) {
  const fs::path dir = scratch_dir("cli_synth");
  ASSERT_EQ(cli("--seed 7 --out " + q(dir / "a") + " synth --videos 10", dir).code, 0);
  ASSERT_EQ(cli("--seed 7 --out " + q(dir / "b") + " synth --videos 10", dir).code, 0);
  ASSERT_EQ(cli("--seed 8 --out " + q(dir / "c") + " synth --videos 10", dir).code, 0);
  const auto a = tree(dir / "a");
  EXPECT_TRUE(a.contains("manifest.json"));
  EXPECT_EQ(a, tree(dir / "b"));
  EXPECT_NE(a, tree(dir / "c"));
}

TEST(Cli, TrainGenerateEvaluate) {
  const fs::path dir = scratch_dir("cli_train");
  write_config(dir / "c.json");
  ASSERT_EQ(cli("--seed 5 --out " + q(dir / "data") + " synth --videos 6 --d-vis 8 --val-fraction 0.34", dir).code, 0);
  const CliRun train = cli("--config " + q(dir / "c.json") + " --out " + q(dir / "run") + " train --data " + q(dir / "data"), dir);
  ASSERT_EQ(train.code, 0) << train.err;
  for (const char* f : {"word.ckpt", "pretrain.ckpt", "mixed.ckpt", "final.ckpt", "train_log.json"})
    EXPECT_TRUE(fs::exists(dir / "run" / f)) << f;
  const auto log = nlohmann::json::parse(slurp(dir / "run" / "train_log.json"));
  EXPECT_TRUE(log.contains("word"));
  EXPECT_TRUE(log.contains("mixed"));

  const std::string ck = " --checkpoint " + q(dir / "run" / "final.ckpt") + " --data " + q(dir / "data");
  const CliRun ev = cli("--out " + q(dir / "rep.json") + " evaluate --split val --csv " + q(dir / "rep.csv") + ck, dir);
  ASSERT_EQ(ev.code, 0) << ev.err;
  const auto rep = nlohmann::json::parse(slurp(dir / "rep.json"));
  EXPECT_EQ(rep["split"], "val");
  EXPECT_EQ(rep["captions"].size(), 2u);
  EXPECT_NE(ev.out.find("METEOR-lite"), std::string::npos);
  EXPECT_EQ(slurp(dir / "rep.csv").substr(0, 36), "model,split,bleu4,meteor_lite,cider\n");

  const CliRun gen = cli("--out " + q(dir / "caps.jsonl") + " generate --split train" + ck, dir);
  ASSERT_EQ(gen.code, 0) << gen.err;
  std::ifstream in(dir / "caps.jsonl");
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line); ++lines) EXPECT_TRUE(nlohmann::json::parse(line).contains("video_id"));
  EXPECT_EQ(lines, 4u);

  // Resuming with a different config is refused.
  std::ofstream(dir / "other.json") << R"({"batch_size":2,"d_vis":8,"d_emb":8,"hidden":16,"meaning_hidden":16,)"
                                    << R"("sentence_dim":16,"lr_all":0.02,"max_len":10})";
  const CliRun bad = cli("--config " + q(dir / "other.json") + " --out " + q(dir / "run2") + " train --phase mixed --from " +
                           q(dir / "run" / "word.ckpt") + " --data " + q(dir / "data"),
                       dir);
  EXPECT_EQ(bad.code, 1) << bad.err;
}

TEST(Cli, PrepareBuildsAManifest) {
  const fs::path dir = scratch_dir("cli_prepare");
  ASSERT_EQ(cli("--seed 2 --out " + q(dir / "syn") + " synth --videos 5 --d-vis 8", dir).code, 0);
  const CliRun r = cli("--seed 1 --out " + q(dir / "prep") + " prepare --captions " + q(dir / "syn" / "captions.jsonl") +
                         " --packs " + q(dir / "syn" / "packs") + " --test-fraction 0.2",
                     dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = nlohmann::json::parse(slurp(dir / "prep" / "manifest.json"));
  EXPECT_FALSE(m.dump().empty());
  const CliRun missing = cli("--out " + q(dir / "p2") + " prepare --captions " + q(dir / "nope.jsonl") + " --packs " +
                               q(dir / "syn" / "packs"),
                           dir);
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.err.find("nope.jsonl"), std::string::npos);
}

TEST(Cli, MissingCheckpointIsAnInputError) {
  const fs::path dir = scratch_dir("cli_missing");
  const CliRun r = cli("--out " + q(dir / "r.json") + " evaluate --checkpoint " + q(dir / "absent.ckpt"), dir);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("absent.ckpt"), std::string::npos);
}

TEST(Cli, UsageErrorsExitOne) {
  const fs::path dir = scratch_dir("cli_usage");
  EXPECT_EQ(cli("synth --no-such-flag", dir).code, 1);
  EXPECT_EQ(cli("--out x evaluate", dir).code, 1);
  EXPECT_EQ(cli("--out x train --phase sideways", dir).code, 1);
  write_config(dir / "c.json");
  std::ofstream(dir / "bad.json") << R"({"hidden":16,"not_a_key":1})";
  EXPECT_EQ(cli("--config " + q(dir / "bad.json") + " --out x train", dir).code, 1);
}
