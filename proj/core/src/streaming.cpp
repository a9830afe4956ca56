// SPDX-License-Identifier: Apache-2.0
#include "acstep/streaming.hpp"

#include "acstep/errors.hpp"

namespace acstep {

struct StreamingDecoder::Impl {
  Tape tape{false};
  std::optional<ModelBinding> model;
  std::optional<LmBinding> lm;
  std::optional<StreamingEncoder> encoder;
  std::optional<HaltingStream> halting;
  std::optional<BeamSearch> beam;
  Var zero;
};

StreamingDecoder::StreamingDecoder(const AcsModel& model, const LanguageModel* lm,
                                   const BeamConfig& cfg)
    : model_(&model), cfg_(cfg), impl_(std::make_unique<Impl>()) {
  cfg_.validate();
  if (model.config.encoder.bidirectional) {
    throw ConfigError("streaming decoding requires a unidirectional encoder (offline checkpoint)");
  }
  if (lm && lm->config.vocab_size != model.config.decoder.vocab_size) {
    throw ValidationError("LM vocabulary size differs from decoder vocabulary size");
  }
  Impl& s = *impl_;
  s.model = bind_model(s.tape, model.params, model.config);
  if (lm) s.lm = bind_lm(s.tape, lm->params, lm->config);
  s.encoder.emplace(s.model->encoder);
  s.halting.emplace(s.model->halting);
  s.beam.emplace(s.model->head(cfg_.window), s.lm ? &*s.lm : nullptr, cfg_);
  s.zero = s.tape.zeros(model.config.decoder.context_dim);
}

StreamingDecoder::~StreamingDecoder() = default;

std::size_t StreamingDecoder::outputs_decoded() const { return impl_->beam->steps(); }

std::size_t StreamingDecoder::halting_evaluations() const { return impl_->halting->evaluations(); }

void StreamingDecoder::decode_ready(bool final, std::vector<SymbolEmission>& out) {
  BeamSearch& beam = *impl_->beam;
  while (beam.steps() < contexts_.size() &&
         (final || beam.steps() + cfg_.window < contexts_.size())) {
    const std::size_t i = beam.steps();
    beam.advance(window_contexts(contexts_, i, cfg_.window, impl_->zero));
    out.push_back(SymbolEmission{i, beam.leader().symbols.back(), frames_});
  }
}

void StreamingDecoder::take(std::vector<Var> states, std::vector<SymbolEmission>& out) {
  for (Var h : states) {
    if (auto e = impl_->halting->push(h)) {
      contexts_.push_back(e->context);
      emission_steps_.push_back(e->segment.end - 1);
    }
  }
  decode_ready(false, out);
}

std::vector<SymbolEmission> StreamingDecoder::push(const DenseArray& frame) {
  if (finished_) throw StateError("StreamingDecoder::push after finish");
  if (frame.size() != model_->config.encoder.input_dim || !frame.all_finite()) {
    throw ContractError("frame must be finite with dimension " +
                        std::to_string(model_->config.encoder.input_dim));
  }
  ++frames_;
  std::vector<SymbolEmission> out;
  take(impl_->encoder->push(impl_->tape.constant(frame)), out);
  return out;
}

std::vector<SymbolEmission> StreamingDecoder::finish() {
  if (finished_) throw StateError("StreamingDecoder::finish called twice");
  if (frames_ == 0) throw ContractError("streaming decode received no frames");
  std::vector<SymbolEmission> out;
  take(impl_->encoder->finish(), out);
  for (ContextEmission& e : impl_->halting->finish()) {
    contexts_.push_back(e.context);
    emission_steps_.push_back(e.segment.end - 1);
  }
  finished_ = true;
  decode_ready(true, out);
  return out;
}

DecodeResult StreamingDecoder::result() const {
  if (!finished_) throw StateError("StreamingDecoder::result before finish");
  DecodeResult r;
  auto hyps = impl_->beam->hypotheses();
  hyps.resize(std::min(hyps.size(), cfg_.nbest));
  r.nbest = std::move(hyps);
  r.trace = impl_->halting->trace();
  for (std::size_t i = 0; i < contexts_.size(); ++i) {
    r.contexts.contexts.push_back(contexts_[i].value());
    r.contexts.emission_steps.push_back(emission_steps_[i]);
  }
  r.halting_evaluations = impl_->halting->evaluations();
  return r;
}

DecodeResult streaming_decode(const AcsModel& model, const LanguageModel* lm,
                              const FrameSequence& frames, const BeamConfig& cfg) {
  frames.validate();
  StreamingDecoder dec(model, lm, cfg);
  for (const DenseArray& f : frames.frames) dec.push(f);
  dec.finish();
  return dec.result();
}

}  // namespace acstep
