// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "acstep/decoder.hpp"
#include "acstep/errors.hpp"
#include "acstep/optim.hpp"
#include "acstep/vocab.hpp"
#include "gradcheck.hpp"

namespace acstep {
namespace {

DecoderConfig small_decoder(std::size_t vocab = 7) {
  DecoderConfig c;
  c.units = 4;
  c.embed_dim = 3;
  c.context_dim = 2;
  c.vocab_size = vocab;
  c.windows = {0, 1};
  return c;
}

ContextSequence contexts(std::size_t n) {
  ContextSequence cs;
  for (std::size_t i = 0; i < n; ++i) {
    cs.contexts.push_back(DenseArray::vector({1.0 + static_cast<double>(i), -1.0 * static_cast<double>(i)}));
    cs.emission_steps.push_back(i);
  }
  return cs;
}

TEST(WindowContexts, ZeroWindowIsTheContext) {
  const ContextSequence cs = contexts(3);
  EXPECT_TRUE(window_contexts(cs, 1, 0) == cs.contexts[1]);
}

TEST(WindowContexts, ZeroFillAtBothEdges) {
  const ContextSequence cs = contexts(1);
  const DenseArray w = window_contexts(cs, 0, 1);
  const std::vector<double> expected{0.0, 0.0, 1.0, -0.0, 0.0, 0.0};
  ASSERT_EQ(w.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(w[i], expected[i]);
}

TEST(WindowContexts, MidSequenceNeighbours) {
  const ContextSequence cs = contexts(4);
  const DenseArray w = window_contexts(cs, 2, 1);
  const std::vector<double> expected{2.0, -1.0, 3.0, -2.0, 4.0, -3.0};
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(w[i], expected[i]);
}

TEST(WindowContexts, TapeVersionAgrees) {
  const ContextSequence cs = contexts(3);
  Tape t(false);
  std::vector<Var> vars;
  for (const auto& c : cs.contexts) vars.push_back(t.constant(c));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_TRUE(window_contexts(vars, i, 1, t.zeros(2)).value() == window_contexts(cs, i, 1));
  }
}

TEST(DecodeStep, DistributionIsNormalised) {
  const DecoderConfig c = small_decoder();
  ParamStore s;
  add_decoder_params(s, c);
  init_uniform(s, -1.0, 1.0, 3);
  DecoderState st = initial_decoder_state(c);
  for (int y : {Vocab::kSos, 4, 5}) {
    auto [next, dist] = decode_step(s, c, 1, st, y, DenseArray::vector({0.5, 1, -1, 0.2, 0, 3}));
    const double total = std::accumulate(dist.probs.begin(), dist.probs.end(), 0.0);
    EXPECT_NEAR(total, 1.0, 1e-12);
    for (double p : dist.probs) EXPECT_GT(p, 0.0);
    EXPECT_EQ(next.step, st.step + 1);
    st = next;
  }
}

TEST(DecodeStep, ZeroOutputLayerIsUniform) {
  const DecoderConfig c = small_decoder();
  ParamStore s;
  add_decoder_params(s, c);
  init_uniform(s, -1.0, 1.0, 4);
  s.value(decoder_prefix(0) + "/out_w").fill(0.0);
  s.value(decoder_prefix(0) + "/out_b").fill(0.0);
  auto [next, dist] = decode_step(s, c, 0, initial_decoder_state(c), Vocab::kSos,
                                  DenseArray::vector({0.3, 0.1}));
  for (double p : dist.probs) EXPECT_NEAR(p, 1.0 / 7.0, 1e-15);
}

TEST(DecodeStep, GradientMatchesFiniteDifferences) {
  DecoderConfig c = small_decoder(3);
  c.windows = {0};
  ParamStore s;
  add_decoder_params(s, c);
  init_uniform(s, -0.8, 0.8, 12);
  auto build = [&](Tape& t) {
    DecoderHead h = bind_decoder_head(t, s, c, 0);
    Var st = t.zeros(c.units);
    DecoderStep a = decode_step(h, st, 2, t.constant(DenseArray::vector({0.4, -0.7})));
    DecoderStep b = decode_step(h, a.state, 1, t.constant(DenseArray::vector({-0.2, 0.9})));
    return add(pick(a.log_probs, 1), pick(b.log_probs, 0));
  };
  auto res = oracle::check_store_gradients(
      s,
      [&] {
        Tape t(false);
        return build(t).item();
      },
      [&] {
        Tape t;
        t.backward(build(t));
      },
      1e-6);
  EXPECT_LT(res.worst, 1e-4) << res.where;
}

TEST(Embed, GradientOnlyOnLookedUpRows) {
  const DecoderConfig c = small_decoder();
  ParamStore s;
  add_decoder_params(s, c);
  init_uniform(s, -0.5, 0.5, 1);
  Tape t;
  DecoderHead h = bind_decoder_head(t, s, c, 0);
  DecoderStep st = decode_step(h, t.zeros(c.units), 5, t.constant(DenseArray::vector({1.0, 2.0})));
  t.backward(pick(st.log_probs, 4));
  const DenseArray& g = s.grad(decoder_prefix(0) + "/embed");
  for (std::size_t r = 0; r < c.vocab_size; ++r) {
    double norm = 0.0;
    for (double v : g.row(r)) norm += v * v;
    if (r == 5) {
      EXPECT_GT(norm, 0.0);
    } else {
      EXPECT_EQ(norm, 0.0) << r;
    }
  }
}

TEST(Embed, DeterministicLookup) {
  const DecoderConfig c = small_decoder();
  ParamStore s;
  add_decoder_params(s, c);
  init_uniform(s, -0.5, 0.5, 1);
  Tape t(false);
  DecoderHead h = bind_decoder_head(t, s, c, 0);
  EXPECT_TRUE(embed(h, 6).value() == embed(h, 6).value());
  for (std::size_t i = 0; i < c.embed_dim; ++i) {
    EXPECT_EQ(embed(h, 6).value()[i], s.value(decoder_prefix(0) + "/embed").at(6, i));
  }
}

TEST(DecoderConfig, HeadsPerWindow) {
  const DecoderConfig c = small_decoder();
  ParamStore s;
  add_decoder_params(s, c);
  EXPECT_TRUE(s.contains("decoder/w0/embed"));
  EXPECT_TRUE(s.contains("decoder/w1/gru/wx"));
  EXPECT_EQ(s.value("decoder/w1/gru/wx").cols(), c.input_dim(1));
  EXPECT_EQ(c.input_dim(1), 3u + 3u * 2u);
  Tape t;
  EXPECT_THROW(bind_decoder_head(t, s, c, 2), ConfigError);
}

TEST(Vocab, ReservedTokensAndRoundTrip) {
  Vocab v = Vocab::with_labels(3);
  EXPECT_EQ(v.size(), 7u);
  EXPECT_EQ(v.symbol(Vocab::kPad), "<PAD>");
  EXPECT_EQ(v.symbol(Vocab::kSos), "<SOS>");
  EXPECT_EQ(v.id("l1"), 5);
  EXPECT_EQ(v.id("missing"), Vocab::kUnk);
  EXPECT_TRUE(Vocab::is_special(3));
  EXPECT_FALSE(Vocab::is_special(4));
  std::istringstream swapped("<PAD>\n<UNK>\n<EOS>\n<SOS>\n");
  EXPECT_THROW(Vocab::parse(swapped), ValidationError);
  std::istringstream dup("<PAD>\n<UNK>\n<SOS>\n<EOS>\na\na\n");
  EXPECT_THROW(Vocab::parse(dup), ValidationError);
}

}  // namespace
}  // namespace acstep
