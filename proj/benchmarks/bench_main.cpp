// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>

#include "acstep/model.hpp"
#include "acstep/search.hpp"
#include "acstep/tasks.hpp"
#include "acstep/training.hpp"

namespace {

using namespace acstep;

ModelConfig desk_config() {
  ModelConfig c;
  c.decoder.context_dim = c.encoder.output_dim();
  c.decoder.windows = {0, 1};
  return c;
}

FrameSequence frames(std::size_t n) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  FrameSequence f;
  for (std::size_t t = 0; t < n; ++t) {
    DenseArray x = DenseArray::zeros(8);
    for (double& v : x.data()) v = g(rng);
    f.frames.push_back(std::move(x));
  }
  return f;
}

void BM_EncoderForward(benchmark::State& state) {
  const AcsModel m = AcsModel::create(desk_config(), 0.1, 1);
  const FrameSequence f = frames(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(pyramidal_forward(f, m.config.encoder, m.params));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EncoderForward)->Arg(64)->Arg(256)->Arg(1024);

void BM_Segment(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  std::vector<double> a(static_cast<std::size_t>(state.range(0)));
  for (double& x : a) x = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(segment(a, 0.01));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Segment)->Arg(256)->Arg(4096);

void BM_BeamDecode(benchmark::State& state) {
  const AcsModel m = AcsModel::create(desk_config(), 0.1, 1);
  const FrameSequence f = frames(128);
  BeamConfig bc;
  bc.width = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(beam_decode(m, nullptr, f, bc));
}
BENCHMARK(BM_BeamDecode)->Arg(1)->Arg(8);

void BM_TrainStep(benchmark::State& state) {
  TaskConfig tc;
  tc.train_size = 1;
  tc.dev_size = 0;
  tc.test_size = 0;
  tc.lm_text_size = 0;
  const CorpusRecord rec = generate_corpus(tc).train.front();
  AcsModel m = AcsModel::create(desk_config(), 0.1, 1);
  const TrainConfig cfg;
  for (auto _ : state) {
    m.params.zero_grad();
    Tape tape;
    UtteranceLoss ul = utterance_loss(tape, m.params, m.config, rec, cfg);
    tape.backward(ul.total);
    benchmark::DoNotOptimize(ul.total.item());
  }
}
BENCHMARK(BM_TrainStep);

}  // namespace

BENCHMARK_MAIN();
