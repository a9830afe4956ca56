// SPDX-License-Identifier: Apache-2.0
#include "acstep/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "acstep/errors.hpp"

namespace acstep {

namespace {

double sigm(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::size_t layer_input_dim(const EncoderConfig& cfg, std::size_t layer) {
  if (layer == 0) return cfg.input_dim;
  return cfg.downsample[layer] ? 2 * cfg.units : cfg.units;
}

EncoderStates to_states(const std::vector<Var>& vars, std::size_t factor) {
  EncoderStates out;
  out.factor = factor;
  out.states.reserve(vars.size());
  for (Var v : vars) out.states.push_back(v.value());
  return out;
}

}  // namespace

void FrameSequence::validate() const {
  if (frames.empty()) throw ContractError("utterance '" + id + "' has no frames");
  const std::size_t d = frames.front().size();
  for (const DenseArray& f : frames) {
    if (f.size() != d) throw ContractError("utterance '" + id + "' has ragged frames");
    if (!f.all_finite()) throw NumericError("utterance '" + id + "' has non-finite frames");
  }
}

void EncoderConfig::validate() const {
  if (layers < 1) throw ConfigError("encoder needs at least one layer");
  if (units < 1) throw ConfigError("encoder needs at least one unit");
  if (input_dim < 1) throw ConfigError("encoder input dimension must be positive");
  if (downsample.size() != layers) {
    throw ConfigError("downsample mask has " + std::to_string(downsample.size()) +
                      " entries for " + std::to_string(layers) + " layers");
  }
  if (downsample.front()) throw ConfigError("the first encoder layer cannot downsample");
}

std::size_t EncoderConfig::factor() const {
  std::size_t f = 1;
  for (bool d : downsample) f *= d ? 2 : 1;
  return f;
}

EncoderConfig EncoderConfig::full_scale_online(std::size_t input_dim) {
  return EncoderConfig{input_dim, 3, 512, {false, true, true}, false};
}

EncoderConfig EncoderConfig::full_scale_offline(std::size_t input_dim) {
  return EncoderConfig{input_dim, 3, 256, {false, true, true}, true};
}

std::size_t encoded_length(std::size_t frames, const EncoderConfig& cfg) {
  std::size_t n = frames;
  for (bool d : cfg.downsample) {
    if (d) n = (n + 1) / 2;
  }
  return n;
}

void add_gru_params(ParamStore& store, const std::string& prefix, std::size_t input_dim,
                    std::size_t units) {
  store.add(prefix + "/wx", {3 * units, input_dim});
  store.add(prefix + "/wh", {3 * units, units});
  store.add(prefix + "/b", {3 * units});
}

Var gru_cell(Var x, Var h_prev, const GruWeights& w) {
  Tape& t = x.tape();
  const DenseArray& wx = w.wx.value();
  const DenseArray& wh = w.wh.value();
  const DenseArray& bv = w.b.value();
  const std::size_t units = h_prev.size();
  const std::size_t in = x.size();
  if (wx.rank() != 2 || wx.rows() != 3 * units || wx.cols() != in || wh.rank() != 2 ||
      wh.rows() != 3 * units || wh.cols() != units || bv.size() != 3 * units) {
    throw ContractError("gru_cell: weights " + shape_string(wx.shape()) + "/" +
                        shape_string(wh.shape()) + " do not match input " + std::to_string(in) +
                        " and state " + std::to_string(units));
  }
  const double* X = x.value().data().data();
  const double* H = h_prev.value().data().data();
  const double* Wx = wx.data().data();
  const double* Wh = wh.data().data();

  // ax = Wx x + b over all three gates.
  std::vector<double> ax(3 * units);
  for (std::size_t i = 0; i < 3 * units; ++i) {
    const double* r = Wx + i * in;
    double acc = bv[i];
    for (std::size_t j = 0; j < in; ++j) acc += r[j] * X[j];
    ax[i] = acc;
  }
  std::vector<double> z(units), rg(units), n(units), rh(units);
  for (std::size_t i = 0; i < 2 * units; ++i) {
    const double* r = Wh + i * units;
    double acc = 0.0;
    for (std::size_t j = 0; j < units; ++j) acc += r[j] * H[j];
    if (i < units) {
      z[i] = sigm(ax[i] + acc);
    } else {
      rg[i - units] = sigm(ax[i] + acc);
    }
  }
  for (std::size_t j = 0; j < units; ++j) rh[j] = rg[j] * H[j];
  DenseArray out({units});
  for (std::size_t i = 0; i < units; ++i) {
    const double* r = Wh + (2 * units + i) * units;
    double acc = ax[2 * units + i];
    for (std::size_t j = 0; j < units; ++j) acc += r[j] * rh[j];
    n[i] = std::tanh(acc);
    out[i] = (1.0 - z[i]) * n[i] + z[i] * H[i];
  }

  GruWeights wv = w;
  return t.record(
      std::move(out),
      [x, h_prev, wv, units, in, z = std::move(z), rg = std::move(rg), n = std::move(n),
       rh = std::move(rh)](Tape& t, const DenseArray& g) {
        const double* X = t.value(x).data().data();
        const double* H = t.value(h_prev).data().data();
        const double* Wx = t.value(wv.wx).data().data();
        const double* Wh = t.value(wv.wh).data().data();
        double* gX = t.grad_slot(x).data().data();
        double* gH = t.grad_slot(h_prev).data().data();
        double* gWx = t.grad_slot(wv.wx).data().data();
        double* gWh = t.grad_slot(wv.wh).data().data();
        double* gB = t.grad_slot(wv.b).data().data();

        std::vector<double> da(3 * units);  // gradient wrt gate pre-activations
        for (std::size_t i = 0; i < units; ++i) {
          const double dn = g[i] * (1.0 - z[i]);
          const double dz = g[i] * (H[i] - n[i]);
          gH[i] += g[i] * z[i];
          da[i] = dz * z[i] * (1.0 - z[i]);
          da[2 * units + i] = dn * (1.0 - n[i] * n[i]);
        }
        // Candidate path through Un (r * h).
        std::vector<double> drh(units, 0.0);
        for (std::size_t i = 0; i < units; ++i) {
          const double d = da[2 * units + i];
          if (d == 0.0) continue;
          const double* r = Wh + (2 * units + i) * units;
          double* gr = gWh + (2 * units + i) * units;
          for (std::size_t j = 0; j < units; ++j) {
            gr[j] += d * rh[j];
            drh[j] += d * r[j];
          }
        }
        for (std::size_t j = 0; j < units; ++j) {
          const double dr = drh[j] * H[j];
          gH[j] += drh[j] * rg[j];
          da[units + j] = dr * rg[j] * (1.0 - rg[j]);
        }
        // Recurrent weights of z and r.
        for (std::size_t i = 0; i < 2 * units; ++i) {
          const double d = da[i];
          if (d == 0.0) continue;
          const double* r = Wh + i * units;
          double* gr = gWh + i * units;
          for (std::size_t j = 0; j < units; ++j) {
            gr[j] += d * H[j];
            gH[j] += d * r[j];
          }
        }
        // Input weights and bias of all gates.
        for (std::size_t i = 0; i < 3 * units; ++i) {
          const double d = da[i];
          gB[i] += d;
          if (d == 0.0) continue;
          const double* r = Wx + i * in;
          double* gr = gWx + i * in;
          for (std::size_t j = 0; j < in; ++j) {
            gr[j] += d * X[j];
            gX[j] += d * r[j];
          }
        }
      },
      "gru_cell");
}

void add_encoder_params(ParamStore& store, const EncoderConfig& cfg) {
  cfg.validate();
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::size_t in = layer_input_dim(cfg, l);
    add_gru_params(store, "encoder/fwd/l" + std::to_string(l), in, cfg.units);
    if (cfg.bidirectional) add_gru_params(store, "encoder/bwd/l" + std::to_string(l), in, cfg.units);
  }
}

std::vector<Var> pyramidal_stack(std::span<const GruWeights> layers, const EncoderConfig& cfg,
                                 std::span<const Var> inputs) {
  if (inputs.empty()) throw ContractError("encoder: empty frame sequence");
  Tape& t = inputs.front().tape();
  std::vector<Var> seq(inputs.begin(), inputs.end());
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    std::vector<Var> layer_in;
    if (cfg.downsample[l]) {
      if (seq.size() % 2 == 1) seq.push_back(t.zeros(seq.front().size()));
      layer_in.reserve(seq.size() / 2);
      for (std::size_t j = 0; j + 1 < seq.size(); j += 2) {
        const Var pair[2] = {seq[j], seq[j + 1]};
        layer_in.push_back(concat(pair));
      }
    } else {
      layer_in = std::move(seq);
    }
    std::vector<Var> out;
    out.reserve(layer_in.size());
    Var h = t.zeros(cfg.units);
    for (Var x : layer_in) {
      h = gru_cell(x, h, layers[l]);
      out.push_back(h);
    }
    seq = std::move(out);
  }
  return seq;
}

std::vector<Var> pyramidal_forward(const EncoderBinding& enc, std::span<const Var> frames) {
  if (enc.config.bidirectional) {
    throw ConfigError("pyramidal_forward requires a unidirectional encoder config");
  }
  return pyramidal_stack(enc.forward, enc.config, frames);
}

std::vector<Var> bidirectional_forward(const EncoderBinding& enc, std::span<const Var> frames) {
  if (!enc.config.bidirectional) {
    throw ConfigError("bidirectional_forward requires a bidirectional encoder config");
  }
  std::vector<Var> fwd = pyramidal_stack(enc.forward, enc.config, frames);
  std::vector<Var> reversed(frames.rbegin(), frames.rend());
  std::vector<Var> bwd = pyramidal_stack(enc.backward, enc.config, reversed);
  std::reverse(bwd.begin(), bwd.end());
  std::vector<Var> out;
  out.reserve(fwd.size());
  for (std::size_t j = 0; j < fwd.size(); ++j) {
    const Var both[2] = {fwd[j], bwd[j]};
    out.push_back(concat(both));
  }
  return out;
}

std::vector<Var> encode(const EncoderBinding& enc, std::span<const Var> frames) {
  return enc.config.bidirectional ? bidirectional_forward(enc, frames)
                                  : pyramidal_forward(enc, frames);
}

std::vector<Var> frame_vars(Tape& tape, const FrameSequence& frames) {
  frames.validate();
  std::vector<Var> out;
  out.reserve(frames.length());
  for (const DenseArray& f : frames.frames) out.push_back(tape.constant(f));
  return out;
}

EncoderStates pyramidal_forward(const FrameSequence& frames, const EncoderConfig& cfg,
                                const ParamStore& params) {
  Tape tape(false);
  const EncoderBinding enc = bind_encoder(tape, params, cfg);
  const auto inputs = frame_vars(tape, frames);
  return to_states(pyramidal_forward(enc, inputs), cfg.factor());
}

EncoderStates bidirectional_forward(const FrameSequence& frames, const EncoderConfig& cfg,
                                    const ParamStore& params) {
  Tape tape(false);
  const EncoderBinding enc = bind_encoder(tape, params, cfg);
  const auto inputs = frame_vars(tape, frames);
  return to_states(bidirectional_forward(enc, inputs), cfg.factor());
}

StreamingEncoder::StreamingEncoder(const EncoderBinding& enc)
    : tape_(nullptr), input_dim_(enc.config.input_dim) {
  if (enc.config.bidirectional) {
    throw ConfigError("streaming requires a unidirectional encoder");
  }
  if (enc.forward.empty()) throw ContractError("encoder binding has no layers");
  tape_ = &enc.forward.front().wx.tape();
  for (std::size_t l = 0; l < enc.config.layers; ++l) {
    layers_.push_back(Layer{enc.forward[l], static_cast<bool>(enc.config.downsample[l]),
                            tape_->zeros(enc.config.units), std::nullopt});
  }
}

void StreamingEncoder::feed(std::size_t layer, Var input, std::vector<Var>& out) {
  Layer& L = layers_[layer];
  Var x = input;
  if (L.downsample) {
    if (!L.pending) {
      L.pending = input;
      return;
    }
    const Var pair[2] = {*L.pending, input};
    L.pending.reset();
    x = concat(pair);
  }
  L.hidden = gru_cell(x, L.hidden, L.weights);
  if (layer + 1 == layers_.size()) {
    out.push_back(L.hidden);
  } else {
    feed(layer + 1, L.hidden, out);
  }
}

std::vector<Var> StreamingEncoder::push(Var frame) {
  if (finished_) throw StateError("StreamingEncoder::push after finish");
  if (frame.size() != input_dim_) throw ContractError("frame dimension mismatch");
  std::vector<Var> out;
  ++frames_;
  feed(0, frame, out);
  return out;
}

std::vector<Var> StreamingEncoder::finish() {
  if (finished_) throw StateError("StreamingEncoder::finish called twice");
  if (frames_ == 0) throw ContractError("encoder: empty frame sequence");
  finished_ = true;
  std::vector<Var> out;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Layer& L = layers_[l];
    if (L.pending) {
      const Var pad = tape_->zeros(L.pending->size());
      feed(l, pad, out);
    }
  }
  return out;
}

}  // namespace acstep
