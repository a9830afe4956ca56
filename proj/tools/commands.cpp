// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "acstep/checkpoint.hpp"
#include "acstep/corpus_io.hpp"
#include "acstep/errors.hpp"
#include "acstep/streaming.hpp"
#include "acstep/tasks.hpp"

namespace acstep::cli {

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::string format_score(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

Vocab data_vocab(const fs::path& data_dir, const ExperimentConfig& cfg) {
  const fs::path p = data_dir / "vocab.txt";
  Vocab v = fs::exists(p) ? Vocab::load(p) : Vocab::with_labels(cfg.task.vocab_size);
  if (v.size() != cfg.model.decoder.vocab_size) {
    throw ValidationError("vocabulary has " + std::to_string(v.size()) +
                          " entries, model expects " +
                          std::to_string(cfg.model.decoder.vocab_size));
  }
  return v;
}

void check_names(const ParamStore& expected, const ParamStore& loaded, const fs::path& path) {
  if (expected.names() != loaded.names()) {
    throw ValidationError(path.string() + ": parameters do not match the stored configuration");
  }
}

const CorpusRecord& find_record(const Corpus& corpus, const std::string& id) {
  for (const auto& r : corpus) {
    if (r.id == id) return r;
  }
  throw ValidationError("utterance '" + id + "' not in corpus");
}

}  // namespace

ExperimentConfig load_experiment(const std::optional<fs::path>& file,
                                 const std::vector<std::string>& overrides) {
  ExperimentConfig cfg;
  if (file) cfg.apply(KeyValues::load(*file));
  KeyValues kv;
  for (std::size_t i = 0; i < overrides.size(); ++i) {
    std::string key = overrides[i];
    if (key.rfind("--", 0) != 0) throw ConfigError("unexpected argument '" + key + "'");
    key = key.substr(2);
    const auto eq = key.find('=');
    if (eq != std::string::npos) {
      kv.set(key.substr(0, eq), key.substr(eq + 1));
    } else {
      if (i + 1 >= overrides.size()) throw ConfigError("--" + key + " needs a value");
      kv.set(key, overrides[++i]);
    }
  }
  cfg.apply(kv);
  cfg.resolve();
  return cfg;
}

Vocab resolve_vocab(const std::optional<fs::path>& path, std::size_t vocab_size) {
  Vocab v = path ? Vocab::load(*path) : Vocab::with_labels(vocab_size - Vocab::kSpecialCount);
  if (v.size() != vocab_size) {
    throw ValidationError("vocabulary size " + std::to_string(v.size()) + " does not match " +
                          std::to_string(vocab_size));
  }
  return v;
}

void gen_data(const ExperimentConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  ensure_dir(out_dir);
  GeneratedCorpus data = generate_corpus(cfg.task);
  write_corpus(out_dir / "train.jsonl", data.train);
  write_corpus(out_dir / "dev.jsonl", data.dev);
  write_corpus(out_dir / "test.jsonl", data.test);
  write_label_text(out_dir / "lm_text.txt", data.lm_text, data.vocab);
  data.vocab.save(out_dir / "vocab.txt");
  cfg.to_key_values().save(out_dir / "config.txt");
  log << "wrote " << data.train.size() << "/" << data.dev.size() << "/" << data.test.size()
      << " utterances and " << data.lm_text.size() << " LM sequences to " << out_dir.string()
      << " (" << data.regenerated << " over-length draws replaced)\n";
}

void save_model(const fs::path& checkpoint, const AcsModel& model) {
  save_checkpoint(checkpoint, model.params);
  model_key_values(model.config).save(sidecar_path(checkpoint));
}

AcsModel load_model(const fs::path& checkpoint) {
  AcsModel model(model_config_from(KeyValues::load(sidecar_path(checkpoint))));
  ParamStore loaded = load_checkpoint(checkpoint);
  check_names(model.params, loaded, checkpoint);
  model.params.assign_values(loaded);
  return model;
}

void save_language_model(const fs::path& checkpoint, const LanguageModel& lm) {
  save_checkpoint(checkpoint, lm.params);
  lm_key_values(lm.config).save(sidecar_path(checkpoint));
}

LanguageModel load_language_model(const fs::path& checkpoint) {
  LanguageModel lm(lm_config_from(KeyValues::load(sidecar_path(checkpoint))));
  ParamStore loaded = load_checkpoint(checkpoint);
  check_names(lm.params, loaded, checkpoint);
  lm.params.assign_values(loaded);
  return lm;
}

TrainReport train_model(const ExperimentConfig& cfg, const fs::path& data_dir,
                        const fs::path& out_dir, const std::optional<fs::path>& resume,
                        std::ostream& log) {
  const Vocab vocab = data_vocab(data_dir, cfg);
  Corpus train_set = read_corpus(data_dir / "train.jsonl");
  Corpus dev_set = read_corpus(data_dir / "dev.jsonl");
  validate_corpus(train_set, vocab, cfg.task.frame_dim);
  validate_corpus(dev_set, vocab, cfg.task.frame_dim);

  AcsModel model = AcsModel::create(cfg.model, cfg.init_range, cfg.init_seed);
  if (resume) {
    AcsModel previous = load_model(*resume);
    if (model_key_values(previous.config).entries() != model_key_values(cfg.model).entries()) {
      throw ValidationError(resume->string() + ": model configuration differs from the config");
    }
    model.params.assign_values(previous.params);
    log << "resumed from " << resume->string() << "\n";
  }

  ensure_dir(out_dir);
  cfg.to_key_values().save(out_dir / "config.txt");
  std::ofstream report_out = open_out(out_dir / "train_report.jsonl");
  TrainReport report = train(model, train_set, dev_set, cfg.train, [&](const EpochReport& e) {
    report_out << epoch_to_json(e) << "\n";
    report_out.flush();
    log << "epoch " << e.epoch << "  train " << format_score(e.train_loss) << "  dev "
        << format_score(e.dev_loss) << "  dev LER " << format_score(e.dev_ler)
        << (e.improved ? "  *" : "") << "\n";
  });
  save_model(out_dir / "model.ckpt", model);
  log << "best epoch " << report.best_epoch << (report.early_stopped ? " (early stop)" : "")
      << "; checkpoint " << (out_dir / "model.ckpt").string() << "\n";
  return report;
}

std::vector<double> train_language_model(const ExperimentConfig& cfg, const fs::path& data_dir,
                                         const fs::path& out_dir, std::ostream& log) {
  const Vocab vocab = data_vocab(data_dir, cfg);
  auto sequences = read_label_text(data_dir / "lm_text.txt", vocab);
  LanguageModel lm(cfg.lm);
  std::vector<double> losses = train_lm(lm, sequences, cfg.lm_train);
  ensure_dir(out_dir);
  cfg.to_key_values().save(out_dir / "config.txt");
  std::ofstream report_out = open_out(out_dir / "lm_report.jsonl");
  for (std::size_t e = 0; e < losses.size(); ++e) {
    report_out << "{\"epoch\":" << e + 1 << ",\"loss\":" << format_score(losses[e]) << "}\n";
    log << "epoch " << e + 1 << "  loss " << format_score(losses[e]) << "\n";
  }
  save_language_model(out_dir / "lm.ckpt", lm);
  return losses;
}

std::string format_transcript(const std::string& id, const Hypothesis& hyp, const Vocab& vocab) {
  std::string line = id + "\t";
  for (std::size_t i = 0; i < hyp.symbols.size(); ++i) {
    if (i) line += ' ';
    line += vocab.symbol(hyp.symbols[i]);
  }
  return line + "\t" + format_score(hyp.score);
}

void decode(const DecodeOptions& opts) {
  opts.beam.validate();
  const AcsModel model = load_model(opts.checkpoint);
  if (!model.config.decoder.has_window(opts.beam.window)) {
    throw ValidationError("checkpoint has no decoder head for --window " +
                          std::to_string(opts.beam.window));
  }
  if (opts.online && model.config.encoder.bidirectional) {
    throw ValidationError("--online needs a unidirectional encoder checkpoint");
  }
  std::optional<LanguageModel> lm;
  if (opts.lm) {
    lm = load_language_model(*opts.lm);
    if (lm->config.vocab_size != model.config.decoder.vocab_size) {
      throw ValidationError("language model vocabulary differs from the model's");
    }
  }
  const Vocab vocab = resolve_vocab(opts.vocab, model.config.decoder.vocab_size);
  const Corpus corpus = read_corpus(opts.corpus);
  validate_corpus(corpus, vocab, model.config.encoder.input_dim);

  std::ofstream out = open_out(opts.output);
  const LanguageModel* lm_ptr = lm ? &*lm : nullptr;
  for (const CorpusRecord& r : corpus) {
    DecodeResult res = opts.online ? streaming_decode(model, lm_ptr, r.frames, opts.beam)
                                   : beam_decode(model, lm_ptr, r.frames, opts.beam);
    if (opts.beam.nbest == 1) {
      out << format_transcript(r.id, res.best(), vocab) << "\n";
    } else {
      for (std::size_t k = 0; k < res.nbest.size(); ++k) {
        std::string line = format_transcript(r.id, res.nbest[k], vocab);
        line.insert(r.id.size() + 1, std::to_string(k + 1) + "\t");
        out << line << "\n";
      }
    }
  }
  if (!out) throw IoError("failed writing " + opts.output.string());
}

std::vector<Transcript> read_transcripts(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Transcript> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (line.back() == '\t') fields.emplace_back();
    if (fields.size() == 4) {
      if (fields[1] != "1") continue;
      fields.erase(fields.begin() + 1);
    }
    if (fields.size() != 3) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected 3 or 4 fields");
    }
    Transcript t;
    t.id = fields[0];
    std::stringstream syms(fields[1]);
    std::string s;
    while (syms >> s) t.symbols.push_back(s);
    try {
      t.score = std::stod(fields[2]);
    } catch (const std::exception&) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": bad score");
    }
    out.push_back(std::move(t));
  }
  return out;
}

EvalReport evaluate(const fs::path& refs, const fs::path& transcripts,
                    const std::optional<fs::path>& vocab_path) {
  const Corpus corpus = read_corpus(refs);
  const std::vector<Transcript> hyps = read_transcripts(transcripts);
  std::map<std::string, const Transcript*> by_id;
  for (const auto& t : hyps) by_id[t.id] = &t;

  std::size_t max_label = 0;
  for (const auto& r : corpus) {
    for (int l : r.labels) max_label = std::max<std::size_t>(max_label, static_cast<std::size_t>(l));
  }
  const Vocab vocab = vocab_path ? Vocab::load(*vocab_path)
                                 : Vocab::with_labels(max_label + 1 - Vocab::kSpecialCount);

  std::vector<std::string> missing;
  std::set<std::string> ref_ids;
  for (const auto& r : corpus) {
    ref_ids.insert(r.id);
    if (!by_id.count(r.id)) missing.push_back("no transcript for " + r.id);
  }
  for (const auto& t : hyps) {
    if (!ref_ids.count(t.id)) missing.push_back("no reference for " + t.id);
  }
  if (!missing.empty()) {
    std::string msg = "ids do not align:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw ValidationError(msg);
  }

  EvalReport report;
  std::vector<std::vector<int>> ref_seqs;
  std::vector<std::vector<int>> hyp_seqs;
  for (const auto& r : corpus) {
    std::vector<int> hyp;
    for (const auto& s : by_id.at(r.id)->symbols) hyp.push_back(vocab.id(s));
    report.utterances.push_back({r.id, edit_distance(r.labels, hyp), r.labels.size()});
    ref_seqs.push_back(r.labels);
    hyp_seqs.push_back(std::move(hyp));
  }
  report.ler = label_error_rate(ref_seqs, hyp_seqs);
  return report;
}

void print_eval(const EvalReport& report, std::ostream& out) {
  for (const auto& u : report.utterances) {
    out << u.id << "\t" << u.errors << "/" << u.ref_length << "\n";
  }
  out << "LER " << format_score(report.ler) << "\n";
}

std::vector<AlignmentRow> alignment_rows(const HaltingTrace& trace) {
  std::vector<AlignmentRow> rows(trace.activations.size());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    rows[j].step = j;
    rows[j].activation = trace.activations[j];
    rows[j].probability = trace.probabilities[j];
  }
  auto fill = [&](const Segment& seg, std::size_t index, bool emitted) {
    double running = 0.0;
    for (std::size_t j = seg.begin; j < seg.end; ++j) {
      running += trace.activations[j];
      rows[j].running_sum = running;
      rows[j].segment = index;
    }
    if (emitted && seg.end > seg.begin) rows[seg.end - 1].emitted = true;
  };
  for (std::size_t i = 0; i < trace.segments.size(); ++i) fill(trace.segments[i], i, true);
  if (trace.tail) fill(*trace.tail, trace.segments.size(), false);
  return rows;
}

void print_alignment(const std::vector<AlignmentRow>& rows, std::ostream& out) {
  out << "step\ta\trunning\tp\tsegment\temitted\n";
  for (const auto& r : rows) {
    out << r.step << "\t" << format_score(r.activation) << "\t" << format_score(r.running_sum)
        << "\t" << format_score(r.probability) << "\t" << r.segment << "\t"
        << (r.emitted ? "yes" : "no") << "\n";
  }
}

std::string alignment_svg(const std::vector<AlignmentRow>& rows,
                          const std::vector<std::size_t>& true_boundaries) {
  const double bar = 16.0;
  const double height = 160.0;
  const double top = 20.0;
  const double width = bar * static_cast<double>(std::max<std::size_t>(rows.size(), 1)) + 40.0;
  auto y = [&](double v) { return top + height * (1.0 - std::min(v, 1.0)); };
  std::ostringstream svg;
  svg << std::fixed << std::setprecision(2);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height + 60.0 << "\">\n";
  svg << "<line x1=\"20\" y1=\"" << y(0.0) << "\" x2=\"" << width - 20.0 << "\" y2=\"" << y(0.0)
      << "\" stroke=\"#444\"/>\n";
  for (const auto& r : rows) {
    const double x = 20.0 + bar * static_cast<double>(r.step);
    svg << "<rect x=\"" << x + 2.0 << "\" y=\"" << y(r.activation) << "\" width=\"" << bar - 4.0
        << "\" height=\"" << height * std::min(r.activation, 1.0) << "\" fill=\""
        << (r.segment % 2 ? "#7aa6d8" : "#d89a7a") << "\"/>\n";
    if (r.emitted) {
      svg << "<line x1=\"" << x + bar << "\" y1=\"" << top << "\" x2=\"" << x + bar << "\" y2=\""
          << y(0.0) << "\" stroke=\"#000\" stroke-dasharray=\"3,2\"/>\n";
    }
  }
  svg << "<polyline fill=\"none\" stroke=\"#2a7\" points=\"";
  for (const auto& r : rows) {
    svg << 20.0 + bar * (static_cast<double>(r.step) + 0.5) << "," << y(r.running_sum) << " ";
  }
  svg << "\"/>\n";
  for (std::size_t b : true_boundaries) {
    const double x = 20.0 + bar * static_cast<double>(b + 1);
    svg << "<line x1=\"" << x << "\" y1=\"" << y(0.0) + 4.0 << "\" x2=\"" << x << "\" y2=\""
        << y(0.0) + 14.0 << "\" stroke=\"#c00\" stroke-width=\"2\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void inspect_alignment(const fs::path& checkpoint, const fs::path& corpus,
                       const std::string& utterance, const std::optional<fs::path>& svg,
                       std::ostream& out) {
  const AcsModel model = load_model(checkpoint);
  const Corpus records = read_corpus(corpus);
  const CorpusRecord& r = find_record(records, utterance);
  BatchAlignment al = batch_align(model, r.frames);
  const auto rows = alignment_rows(al.trace);
  print_alignment(rows, out);
  if (svg) {
    std::vector<std::size_t> bounds;
    if (!r.bounds.empty()) bounds = boundary_steps(r, model.config.encoder);
    std::ofstream f = open_out(*svg);
    f << alignment_svg(rows, bounds);
  }
}

GammaSearchResult tune_gamma(const fs::path& checkpoint, const fs::path& lm_path,
                             const fs::path& dev_corpus, const BeamConfig& beam,
                             const std::vector<double>& grid) {
  const AcsModel model = load_model(checkpoint);
  const LanguageModel lm = load_language_model(lm_path);
  const Corpus dev = read_corpus(dev_corpus);
  std::vector<FrameSequence> frames;
  for (const auto& r : dev) frames.push_back(r.frames);
  return acstep::tune_gamma(model, lm, frames, corpus_labels(dev), beam, grid);
}

}  // namespace acstep::cli
