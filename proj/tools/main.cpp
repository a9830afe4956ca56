// SPDX-License-Identifier: Apache-2.0
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "acstep/errors.hpp"
#include "commands.hpp"

namespace cli = acstep::cli;
namespace fs = std::filesystem;

namespace {

std::optional<fs::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acstep: adaptive computation steps sequence transduction"};
  app.require_subcommand(1);

  std::string config;
  std::string data_dir;
  std::string out_dir;
  std::string resume;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  gen->add_option("--config", config, "flat key = value config file");
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->allow_extras();

  auto* trn = app.add_subcommand("train", "train an ACS model");
  trn->add_option("--config", config, "flat key = value config file");
  trn->add_option("--data", data_dir, "directory written by gen-data")->required();
  trn->add_option("--out", out_dir, "output directory")->required();
  trn->add_option("--resume", resume, "start from this checkpoint");
  trn->allow_extras();

  auto* tlm = app.add_subcommand("train-lm", "train the label language model");
  tlm->add_option("--config", config, "flat key = value config file");
  tlm->add_option("--data", data_dir, "directory written by gen-data")->required();
  tlm->add_option("--out", out_dir, "output directory")->required();
  tlm->allow_extras();

  cli::DecodeOptions dec_opts;
  std::string checkpoint;
  std::string corpus;
  std::string output;
  std::string lm;
  std::string vocab;
  bool online = false;
  bool offline = false;
  auto* dec = app.add_subcommand("decode", "decode a corpus");
  dec->add_option("--checkpoint", checkpoint)->required();
  dec->add_option("--corpus", corpus)->required();
  dec->add_option("--out", output, "transcript file")->required();
  dec->add_option("--beam", dec_opts.beam.width, "beam width")->capture_default_str();
  dec->add_option("--gamma", dec_opts.beam.gamma, "LM weight")->capture_default_str();
  dec->add_option("--window", dec_opts.beam.window, "context window w")->capture_default_str();
  dec->add_option("--nbest", dec_opts.beam.nbest, "hypotheses per utterance")->capture_default_str();
  dec->add_option("--lm", lm, "language model checkpoint");
  dec->add_option("--vocab", vocab, "vocabulary file");
  auto* on_flag = dec->add_flag("--online", online, "frame-by-frame streaming decode");
  dec->add_flag("--offline", offline, "whole-utterance decode (default)")->excludes(on_flag);

  std::string refs;
  std::string hyps;
  auto* ev = app.add_subcommand("eval", "label error rate of a transcript file");
  ev->add_option("--refs", refs, "reference corpus")->required();
  ev->add_option("--hyps", hyps, "transcript file")->required();
  ev->add_option("--vocab", vocab, "vocabulary file");

  std::string utterance;
  std::string svg;
  auto* ins = app.add_subcommand("inspect-alignment", "print the halting alignment of one utterance");
  ins->add_option("--checkpoint", checkpoint)->required();
  ins->add_option("--corpus", corpus)->required();
  ins->add_option("--utt", utterance, "utterance id")->required();
  ins->add_option("--svg", svg, "also write an SVG plot");

  cli::DecodeOptions tune_opts;
  auto* tune = app.add_subcommand("tune-gamma", "pick the LM weight on a dev corpus");
  tune->add_option("--checkpoint", checkpoint)->required();
  tune->add_option("--lm", lm)->required();
  tune->add_option("--corpus", corpus, "dev corpus")->required();
  tune->add_option("--beam", tune_opts.beam.width)->capture_default_str();
  tune->add_option("--window", tune_opts.beam.window)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    auto overrides = [&](CLI::App* sub) {
      return cli::load_experiment(opt_path(config), sub->remaining());
    };
    if (*gen) {
      cli::gen_data(overrides(gen), out_dir, std::cout);
    } else if (*trn) {
      cli::train_model(overrides(trn), data_dir, out_dir, opt_path(resume), std::cout);
    } else if (*tlm) {
      cli::train_language_model(overrides(tlm), data_dir, out_dir, std::cout);
    } else if (*dec) {
      dec_opts.checkpoint = checkpoint;
      dec_opts.corpus = corpus;
      dec_opts.output = output;
      dec_opts.lm = opt_path(lm);
      dec_opts.vocab = opt_path(vocab);
      dec_opts.online = online;
      cli::decode(dec_opts);
    } else if (*ev) {
      cli::print_eval(cli::evaluate(refs, hyps, opt_path(vocab)), std::cout);
    } else if (*ins) {
      cli::inspect_alignment(checkpoint, corpus, utterance, opt_path(svg), std::cout);
    } else if (*tune) {
      auto res = cli::tune_gamma(checkpoint, lm, corpus, tune_opts.beam,
                                 acstep::default_gamma_grid());
      for (std::size_t i = 0; i < res.grid.size(); ++i) {
        std::cout << "gamma " << res.grid[i] << "\tLER " << res.error_rates[i] << "\n";
      }
      std::cout << "best gamma " << res.gamma << "\n";
    }
  } catch (const acstep::Error& e) {
    std::cerr << "acstep: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
