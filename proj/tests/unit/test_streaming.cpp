// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "acstep/errors.hpp"
#include "acstep/search.hpp"
#include "acstep/streaming.hpp"
#include "fixtures.hpp"

namespace acstep {
namespace {

using fixture::random_frames;
using fixture::tiny_lm;
using fixture::tiny_model;

struct StreamCase {
  std::uint64_t seed;
  std::size_t frames;
  std::size_t window;
  std::size_t width;
  double gamma;
};

class StreamingEquivalence : public ::testing::TestWithParam<StreamCase> {};

TEST_P(StreamingEquivalence, MatchesBatchBitForBit) {
  const StreamCase c = GetParam();
  const AcsModel m = tiny_model(c.seed, 0.2);
  const LanguageModel lm = tiny_lm(c.seed);
  const FrameSequence f = random_frames(c.seed + 50, c.frames);
  BeamConfig bc;
  bc.window = c.window;
  bc.width = c.width;
  bc.nbest = c.width;
  bc.gamma = c.gamma;
  const DecodeResult batch = beam_decode(m, &lm, f, bc);
  const DecodeResult online = streaming_decode(m, &lm, f, bc);
  ASSERT_EQ(batch.nbest.size(), online.nbest.size());
  for (std::size_t k = 0; k < batch.nbest.size(); ++k) {
    EXPECT_EQ(batch.nbest[k].symbols, online.nbest[k].symbols);
    EXPECT_EQ(batch.nbest[k].score, online.nbest[k].score);
  }
  ASSERT_EQ(batch.trace.segments.size(), online.trace.segments.size());
  for (std::size_t i = 0; i < batch.trace.segments.size(); ++i) {
    EXPECT_EQ(batch.trace.segments[i].begin, online.trace.segments[i].begin);
    EXPECT_EQ(batch.trace.segments[i].end, online.trace.segments[i].end);
    EXPECT_EQ(batch.trace.segments[i].remainder, online.trace.segments[i].remainder);
  }
  EXPECT_EQ(batch.trace.probabilities, online.trace.probabilities);
  EXPECT_EQ(batch.halting_evaluations, online.halting_evaluations);
}

INSTANTIATE_TEST_SUITE_P(Cases, StreamingEquivalence,
                         ::testing::Values(StreamCase{1, 1, 0, 1, 0.0}, StreamCase{2, 7, 0, 3, 0.0},
                                           StreamCase{3, 16, 1, 1, 0.0},
                                           StreamCase{4, 33, 1, 4, 0.5},
                                           StreamCase{5, 64, 0, 8, 0.2},
                                           StreamCase{6, 101, 1, 8, 1.0}));

TEST(Streaming, LastSymbolOfWideWindowWaitsForFlush) {
  const AcsModel m = tiny_model(7, 0.3);
  const FrameSequence f = random_frames(7, 60);
  BeamConfig bc;
  bc.window = 1;
  StreamingDecoder dec(m, nullptr, bc);
  std::vector<SymbolEmission> during;
  for (const DenseArray& x : f.frames) {
    auto out = dec.push(x);
    during.insert(during.end(), out.begin(), out.end());
  }
  const auto tail = dec.finish();
  const std::size_t total = dec.result().best().symbols.size();
  ASSERT_GT(total, 1u);
  ASSERT_FALSE(tail.empty());
  EXPECT_EQ(tail.back().index, total - 1);
  for (const SymbolEmission& e : during) EXPECT_LT(e.index, total - 1);
  for (std::size_t i = 0; i < during.size(); ++i) EXPECT_EQ(during[i].index, i);
}

TEST(Streaming, ZeroWindowEmitsBeforeTheEnd) {
  const AcsModel m = tiny_model(8, 0.3);
  const FrameSequence f = random_frames(8, 80);
  BeamConfig bc;
  bc.width = 1;
  StreamingDecoder dec(m, nullptr, bc);
  std::size_t emitted = 0;
  std::size_t last_frames = 0;
  for (const DenseArray& x : f.frames) {
    for (const SymbolEmission& e : dec.push(x)) {
      EXPECT_EQ(e.index, emitted++);
      EXPECT_GE(e.frames_consumed, last_frames);
      EXPECT_LE(e.frames_consumed, dec.frames_consumed());
      last_frames = e.frames_consumed;
    }
  }
  EXPECT_GT(emitted, 0u);
  dec.finish();
  EXPECT_EQ(dec.outputs_decoded(), dec.result().best().symbols.size());
}

TEST(Streaming, HaltingEvaluationsEqualEncoderSteps) {
  const AcsModel m = tiny_model(9);
  for (std::size_t len : {1u, 4u, 5u, 50u, 203u}) {
    const FrameSequence f = random_frames(len, len);
    const DecodeResult r = streaming_decode(m, nullptr, f, BeamConfig{});
    EXPECT_EQ(r.halting_evaluations, encoded_length(len, m.config.encoder)) << len;
  }
}

TEST(Streaming, RejectsBidirectionalAndUseAfterFinish) {
  const AcsModel bi = tiny_model(1, 0.4, 4, true);
  EXPECT_THROW(StreamingDecoder(bi, nullptr, BeamConfig{}), ConfigError);
  const AcsModel m = tiny_model(1);
  StreamingDecoder dec(m, nullptr, BeamConfig{});
  EXPECT_THROW(dec.result(), StateError);
  dec.push(DenseArray::vector({0.1, 0.2, 0.3}));
  dec.finish();
  EXPECT_TRUE(dec.finished());
  EXPECT_THROW(dec.push(DenseArray::vector({0.1, 0.2, 0.3})), StateError);
  EXPECT_THROW(dec.finish(), StateError);
}

}  // namespace
}  // namespace acstep
