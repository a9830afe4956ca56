// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "acstep/corpus_io.hpp"
#include "acstep/errors.hpp"
#include "commands.hpp"

namespace acstep {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

ExperimentConfig tiny_experiment(std::vector<std::string> extra = {}) {
  std::vector<std::string> args{"--task.vocab_size", "3", "--task.frame_dim", "3",
                                "--task.train_size", "12", "--task.dev_size", "4",
                                "--task.test_size", "5", "--task.lm_text_size", "30",
                                "--task.labels_max", "4", "--encoder.units", "4",
                                "--halting.channels", "4", "--decoder.units", "5",
                                "--decoder.embed_dim", "3", "--lm.units", "4",
                                "--lm.embed_dim", "3", "--train.epochs", "2",
                                "--lm_train.epochs", "2"};
  args.insert(args.end(), extra.begin(), extra.end());
  return cli::load_experiment(std::nullopt, args);
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("acstep_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  fs::path data() {
    const fs::path d = root_ / "data";
    if (!fs::exists(d / "train.jsonl")) cli::gen_data(tiny_experiment(), d, log_);
    return d;
  }
  fs::path trained(const std::string& name = "run", std::vector<std::string> extra = {}) {
    const fs::path out = root_ / name;
    if (!fs::exists(out / "model.ckpt")) {
      cli::train_model(tiny_experiment(extra), data(), out, std::nullopt, log_);
    }
    return out;
  }
  cli::DecodeOptions decode_opts(const fs::path& model_dir, const std::string& out) {
    cli::DecodeOptions o;
    o.checkpoint = model_dir / "model.ckpt";
    o.corpus = data() / "test.jsonl";
    o.output = root_ / out;
    return o;
  }

  fs::path root_;
  std::ostringstream log_;
};

TEST_F(CliTest, GenDataWritesAllFilesDeterministically) {
  const ExperimentConfig cfg = tiny_experiment();
  cli::gen_data(cfg, root_ / "a", log_);
  cli::gen_data(cfg, root_ / "b", log_);
  for (const char* f : {"train.jsonl", "dev.jsonl", "test.jsonl", "lm_text.txt", "vocab.txt",
                        "config.txt"}) {
    ASSERT_TRUE(fs::exists(root_ / "a" / f)) << f;
    EXPECT_EQ(slurp(root_ / "a" / f), slurp(root_ / "b" / f)) << f;
  }
  EXPECT_EQ(line_count(root_ / "a" / "train.jsonl"), 12u);
  EXPECT_EQ(line_count(root_ / "a" / "dev.jsonl"), 4u);
  EXPECT_EQ(line_count(root_ / "a" / "test.jsonl"), 5u);
  EXPECT_EQ(line_count(root_ / "a" / "vocab.txt"), 7u);
}

TEST_F(CliTest, GenDataHonoursMaxFrames) {
  cli::gen_data(tiny_experiment({"--task.max_frames", "14"}), root_ / "short", log_);
  EXPECT_NE(log_.str().find("over-length draws replaced"), std::string::npos) << log_.str();
  for (const CorpusRecord& r : read_corpus(root_ / "short" / "train.jsonl")) {
    EXPECT_LE(r.frames.length(), 14u);
  }
}

TEST_F(CliTest, OverridesAcceptBothSpellings) {
  const ExperimentConfig a = cli::load_experiment(std::nullopt, {"--train.epochs=3"});
  const ExperimentConfig b = cli::load_experiment(std::nullopt, {"--train.epochs", "3"});
  EXPECT_EQ(a.train.epochs, 3u);
  EXPECT_EQ(b.train.epochs, 3u);
  EXPECT_THROW(cli::load_experiment(std::nullopt, {"--train.epochs"}), ConfigError);
  EXPECT_THROW(cli::load_experiment(std::nullopt, {"train.epochs", "3"}), ConfigError);
  const fs::path cfg = root_ / "exp.cfg";
  std::ofstream(cfg) << "train.epochs = 9\ntask.seed = 4\n";
  const ExperimentConfig c = cli::load_experiment(cfg, {"--train.epochs", "2"});
  EXPECT_EQ(c.train.epochs, 2u);
  EXPECT_EQ(c.task.seed, 4u);
}

TEST_F(CliTest, TrainWritesOneReportLinePerEpochAndEchoesConfig) {
  const fs::path out = trained();
  EXPECT_EQ(line_count(out / "train_report.jsonl"), 2u);
  EXPECT_TRUE(fs::exists(out / "model.ckpt.cfg"));
  const KeyValues echoed = KeyValues::load(out / "config.txt");
  EXPECT_EQ(echoed.get("train.epochs"), "2");
  const AcsModel m = cli::load_model(out / "model.ckpt");
  EXPECT_EQ(m.config.encoder.units, 4u);
}

TEST_F(CliTest, ResumeContinuesFromCheckpoint) {
  const fs::path first = trained();
  const fs::path second = root_ / "resumed";
  cli::train_model(tiny_experiment({"--train.epochs", "1"}), data(), second,
                   first / "model.ckpt", log_);
  EXPECT_EQ(line_count(second / "train_report.jsonl"), 1u);
  EXPECT_THROW(cli::train_model(tiny_experiment({"--encoder.units", "5"}), data(), root_ / "bad",
                                first / "model.ckpt", log_),
               ValidationError);
}

TEST_F(CliTest, VocabularyMismatchIsRejectedBeforeTraining) {
  const fs::path d = data();
  std::ofstream(d / "vocab.txt") << "<PAD>\n<UNK>\n<SOS>\n<EOS>\nl0\n";
  EXPECT_THROW(cli::train_model(tiny_experiment(), d, root_ / "x", std::nullopt, log_),
               ValidationError);
  EXPECT_FALSE(fs::exists(root_ / "x" / "model.ckpt"));
}

TEST_F(CliTest, EarlyStopOnPlateauIsReported) {
  const fs::path d = root_ / "noise";
  cli::gen_data(tiny_experiment({"--task.noise_std", "1000"}), d, log_);
  const TrainReport r = cli::train_model(
      tiny_experiment({"--train.epochs", "15", "--train.patience", "2",
                       "--train.learning_rate", "1e-300"}),
      d, root_ / "plateau", std::nullopt, log_);
  EXPECT_TRUE(r.early_stopped);
  EXPECT_LT(r.epochs.size(), 15u);
  EXPECT_EQ(line_count(root_ / "plateau" / "train_report.jsonl"), r.epochs.size());
}

TEST_F(CliTest, BeamOneEqualsGreedyTranscript) {
  const fs::path run = trained();
  const AcsModel m = cli::load_model(run / "model.ckpt");
  cli::DecodeOptions o = decode_opts(run, "beam1.txt");
  o.beam.width = 1;
  cli::decode(o);
  const Vocab v = Vocab::load(data() / "vocab.txt");
  const Corpus test = read_corpus(data() / "test.jsonl");
  const auto lines = cli::read_transcripts(o.output);
  ASSERT_EQ(lines.size(), test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Hypothesis g = greedy_decode(m, test[i].frames).best();
    std::vector<std::string> symbols;
    for (int y : g.symbols) symbols.push_back(v.symbol(y));
    EXPECT_EQ(lines[i].id, test[i].id);
    EXPECT_EQ(lines[i].symbols, symbols);
  }
}

TEST_F(CliTest, GammaZeroMatchesNoLanguageModel) {
  const fs::path run = trained();
  cli::train_language_model(tiny_experiment(), data(), root_ / "lm", log_);
  EXPECT_EQ(line_count(root_ / "lm" / "lm_report.jsonl"), 2u);
  cli::DecodeOptions plain = decode_opts(run, "plain.txt");
  cli::DecodeOptions fused = decode_opts(run, "fused.txt");
  fused.lm = root_ / "lm" / "lm.ckpt";
  cli::decode(plain);
  cli::decode(fused);
  EXPECT_EQ(slurp(plain.output), slurp(fused.output));
}

TEST_F(CliTest, OnlineEqualsOffline) {
  const fs::path run = trained();
  for (std::size_t w : {0u, 1u}) {
    cli::DecodeOptions off = decode_opts(run, "off.txt");
    cli::DecodeOptions on = decode_opts(run, "on.txt");
    off.beam.window = on.beam.window = w;
    off.beam.nbest = on.beam.nbest = 3;
    on.online = true;
    cli::decode(off);
    cli::decode(on);
    EXPECT_EQ(slurp(off.output), slurp(on.output)) << w;
  }
}

TEST_F(CliTest, DecodeRejectsIncompatibleFlags) {
  const fs::path run = trained();
  cli::DecodeOptions o = decode_opts(run, "x.txt");
  o.beam.window = 3;
  EXPECT_THROW(cli::decode(o), ValidationError);

  const fs::path bi = trained("bi", {"--encoder.bidirectional", "true"});
  cli::DecodeOptions b = decode_opts(bi, "y.txt");
  b.online = true;
  EXPECT_THROW(cli::decode(b), ValidationError);

  LmConfig other;
  other.vocab_size = 5;
  cli::save_language_model(root_ / "small_lm.ckpt", LanguageModel(other));
  cli::DecodeOptions l = decode_opts(run, "z.txt");
  l.lm = root_ / "small_lm.ckpt";
  EXPECT_THROW(cli::decode(l), ValidationError);
}

TEST_F(CliTest, EvalOfReferencesIsZero) {
  const fs::path d = data();
  const Vocab v = Vocab::load(d / "vocab.txt");
  const Corpus test = read_corpus(d / "test.jsonl");
  {
    std::ofstream out(root_ / "perfect.txt");
    for (const CorpusRecord& r : test) {
      out << cli::format_transcript(r.id, Hypothesis{r.labels, 0.0}, v) << "\n";
    }
  }
  const cli::EvalReport rep = cli::evaluate(d / "test.jsonl", root_ / "perfect.txt", d / "vocab.txt");
  EXPECT_EQ(rep.ler, 0.0);
  std::ostringstream printed;
  cli::print_eval(rep, printed);
  EXPECT_NE(printed.str().find("LER 0"), std::string::npos) << printed.str();

  {
    std::ofstream out(root_ / "partial.txt");
    out << cli::format_transcript(test[0].id, Hypothesis{test[0].labels, 0.0}, v) << "\n";
    out << cli::format_transcript("stranger", Hypothesis{{4}, 0.0}, v) << "\n";
  }
  try {
    cli::evaluate(d / "test.jsonl", root_ / "partial.txt", d / "vocab.txt");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("stranger"), std::string::npos) << msg;
    EXPECT_NE(msg.find(test[1].id), std::string::npos) << msg;
  }
}

TEST_F(CliTest, AlignmentHasOneRowPerEncoderStep) {
  const fs::path run = trained();
  const AcsModel m = cli::load_model(run / "model.ckpt");
  const Corpus test = read_corpus(data() / "test.jsonl");
  std::ostringstream out;
  cli::inspect_alignment(run / "model.ckpt", data() / "test.jsonl", test[2].id,
                         root_ / "a.svg", out);
  const std::size_t steps = encoded_length(test[2].frames.length(), m.config.encoder);
  std::size_t lines = 0;
  std::istringstream in(out.str());
  for (std::string line; std::getline(in, line);) ++lines;
  EXPECT_EQ(lines, steps + 1);  // header
  const std::string svg = slurp(root_ / "a.svg");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_THROW(cli::inspect_alignment(run / "model.ckpt", data() / "test.jsonl", "nope",
                                      std::nullopt, out),
               ValidationError);
}

TEST(AlignmentRows, FollowTheTrace) {
  HaltingTrace tr = segment(std::vector{0.4, 0.7, 0.2, 0.3}, 0.01);
  close_tail(tr);
  const auto rows = cli::alignment_rows(tr);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_FALSE(rows[0].emitted);
  EXPECT_TRUE(rows[1].emitted);
  EXPECT_NEAR(rows[1].probability, 0.6, 1e-12);
  EXPECT_NEAR(rows[1].running_sum, 1.1, 1e-12);
  EXPECT_EQ(rows[2].segment, 1u);
  EXPECT_NEAR(rows[3].running_sum, 0.5, 1e-12);
  EXPECT_TRUE(rows[3].emitted);
}

#ifdef ACSTEP_TOOL_PATH
TEST_F(CliTest, ExitCodes) {
  const std::string tool = ACSTEP_TOOL_PATH;
  const std::string ok = tool + " gen-data --out " + (root_ / "g").string() +
                         " --task.train_size 2 --task.dev_size 1 --task.test_size 1"
                         " --task.lm_text_size 1 > /dev/null";
  EXPECT_EQ(std::system(ok.c_str()), 0);
  const std::string bad = tool + " gen-data --out " + (root_ / "h").string() +
                          " --task.nonsense 2 2> /dev/null";
  EXPECT_NE(std::system(bad.c_str()), 0);
  const std::string missing = tool + " eval --refs " + (root_ / "none.jsonl").string() +
                              " --hyps x 2> /dev/null";
  EXPECT_NE(std::system(missing.c_str()), 0);
}
#endif

}  // namespace
}  // namespace acstep
