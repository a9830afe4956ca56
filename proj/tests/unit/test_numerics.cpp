// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "acstep/autodiff.hpp"
#include "acstep/checkpoint.hpp"
#include "acstep/errors.hpp"
#include "acstep/optim.hpp"
#include "acstep/param_store.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

namespace acstep {
namespace {

TEST(DenseArray, ShapeAndData) {
  DenseArray m({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m.at(1, 2), 6.0);
  EXPECT_EQ(m.row(1)[0], 4.0);
  EXPECT_THROW(DenseArray({2, 2}, {1, 2, 3}), ContractError);
  EXPECT_EQ(DenseArray::scalar(2.5).size(), 1u);
  EXPECT_EQ(shape_size({4, 5}), 20u);
}

TEST(ParamStore, RejectsDuplicateNames) {
  ParamStore s;
  s.add("w", {2});
  EXPECT_THROW(s.add("w", {3}), ContractError);
  EXPECT_EQ(s.scalar_count(), 2u);
}

TEST(InitUniform, StaysInRange) {
  ParamStore s;
  s.add("a", {10, 10});
  s.add("b", {50});
  init_uniform(s, -0.1, 0.1, 3);
  for (const auto& [name, p] : s.entries()) {
    for (double v : p.value.data()) {
      EXPECT_GE(v, -0.1);
      EXPECT_LE(v, 0.1);
    }
  }
}

TEST(InitUniform, RejectsEmptyInterval) {
  ParamStore s;
  s.add("a", {3});
  EXPECT_THROW(init_uniform(s, 0.0, 0.0, 1), ConfigError);
}

TEST(InitUniform, SameSeedIsBitIdentical) {
  ParamStore a, b;
  for (ParamStore* s : {&a, &b}) {
    s->add("x", {4, 4});
    s->add("y", {7});
    init_uniform(*s, -0.1, 0.1, 42);
  }
  EXPECT_TRUE(a == b);
  ParamStore c = a;
  init_uniform(c, -0.1, 0.1, 43);
  EXPECT_FALSE(a == c);
}

TEST(Backward, SumOfSquares) {
  ParamStore s;
  s.add("p", DenseArray::vector({1.0, 2.0}));
  Tape t;
  Var p = t.param(s, "p");
  t.backward(sum(square(p)));
  EXPECT_DOUBLE_EQ(s.grad("p")[0], 2.0);
  EXPECT_DOUBLE_EQ(s.grad("p")[1], 4.0);
}

TEST(Backward, ConstantLossGivesZeroGradients) {
  ParamStore s;
  s.add("p", DenseArray::vector({1.0, 2.0}));
  Tape t;
  t.param(s, "p");
  t.backward(t.scalar(3.0));
  EXPECT_EQ(s.grad("p")[0], 0.0);
  EXPECT_EQ(s.grad("p")[1], 0.0);
}

TEST(Backward, NonScalarLossRejected) {
  Tape t;
  Var v = t.constant(DenseArray::vector({1.0, 2.0}));
  EXPECT_THROW(t.backward(v), ContractError);
}

TEST(Backward, SigmoidChainMatchesFiniteDifferences) {
  ParamStore s;
  s.add("w", DenseArray::vector({0.3, -1.2, 0.7}));
  const DenseArray h = DenseArray::vector({0.5, 2.0, -1.5});
  auto build = [&](Tape& t) { return dot(sigmoid(t.param(s, "w")), t.constant(h)); };
  auto loss = [&] {
    Tape t(false);
    return build(t).item();
  };
  auto res = oracle::check_store_gradients(
      s, loss,
      [&] {
        Tape t;
        t.backward(build(t));
      },
      1e-5);
  EXPECT_LT(res.worst, 1e-6) << res.where;
}

// Per-operation checks: loss = r . op(x) with a fixed random projection r.
struct OpCase {
  const char* name;
  std::size_t in_size;
  std::size_t out_size;
  std::function<Var(Tape&, Var)> op;
};

class OpGradient : public ::testing::TestWithParam<OpCase> {};

TEST_P(OpGradient, MatchesFiniteDifferences) {
  const OpCase& c = GetParam();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ParamStore s;
  DenseArray x = DenseArray::zeros(c.in_size);
  for (double& v : x.data()) v = u(rng);
  // Keep relu and clamps away from their kinks.
  for (double& v : x.data()) {
    if (std::fabs(v) < 0.05) v += 0.2;
  }
  s.add("x", x);
  DenseArray r = DenseArray::zeros(c.out_size);
  for (double& v : r.data()) v = u(rng);
  auto build = [&](Tape& t) { return dot(c.op(t, t.param(s, "x")), t.constant(r)); };
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
  EXPECT_LT(res.worst, 1e-4) << c.name << " at " << res.where;
}

DenseArray fixed_matrix(std::size_t m, std::size_t n) {
  DenseArray w({m, n});
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sin(1.0 + static_cast<double>(i));
  return w;
}

INSTANTIATE_TEST_SUITE_P(
    Ops, OpGradient,
    ::testing::Values(
        OpCase{"add", 4, 4, [](Tape&, Var x) { return add(x, square(x)); }},
        OpCase{"sub", 4, 4, [](Tape&, Var x) { return sub(square(x), x); }},
        OpCase{"mul", 4, 4, [](Tape&, Var x) { return mul(x, tanh(x)); }},
        OpCase{"scale", 4, 4, [](Tape&, Var x) { return scale(x, -2.5); }},
        OpCase{"scale_var", 4, 4, [](Tape&, Var x) { return scale(x, pick(x, 1)); }},
        OpCase{"rsub", 4, 4, [](Tape&, Var x) { return rsub(1.0, square(x)); }},
        OpCase{"shift", 4, 4, [](Tape&, Var x) { return square(shift(x, 0.3)); }},
        OpCase{"clamp_max", 4, 4, [](Tape&, Var x) { return clamp_max(x, 0.5); }},
        OpCase{"clamp", 4, 4, [](Tape&, Var x) { return clamp(x, -0.5, 0.5); }},
        OpCase{"reciprocal", 4, 1,
               [](Tape&, Var x) { return reciprocal(shift(square(pick(x, 2)), 0.5)); }},
        OpCase{"sigmoid", 4, 4, [](Tape&, Var x) { return sigmoid(x); }},
        OpCase{"tanh", 4, 4, [](Tape&, Var x) { return tanh(x); }},
        OpCase{"relu", 4, 4, [](Tape&, Var x) { return relu(x); }},
        OpCase{"square", 4, 4, [](Tape&, Var x) { return square(x); }},
        OpCase{"matvec", 4, 3,
               [](Tape& t, Var x) { return matvec(t.constant(fixed_matrix(3, 4)), x); }},
        OpCase{"dot", 4, 1, [](Tape&, Var x) { return dot(x, tanh(x)); }},
        OpCase{"sum", 4, 1, [](Tape&, Var x) { return sum(square(x)); }},
        OpCase{"add_n", 4, 1,
               [](Tape&, Var x) {
                 Var parts[] = {pick(x, 0), pick(x, 3), square(pick(x, 1))};
                 return add_n(parts);
               }},
        OpCase{"concat", 4, 6,
               [](Tape&, Var x) {
                 Var parts[] = {x, slice(x, 1, 2)};
                 return concat(parts);
               }},
        OpCase{"slice", 4, 2, [](Tape&, Var x) { return slice(x, 1, 2); }},
        OpCase{"pick", 4, 1, [](Tape&, Var x) { return pick(x, 2); }},
        OpCase{"log_softmax", 4, 4, [](Tape&, Var x) { return log_softmax(x); }}),
    [](const ::testing::TestParamInfo<OpCase>& info) { return std::string(info.param.name); });

TEST(OpGradient, MatvecWeightAndRowLookup) {
  ParamStore s;
  DenseArray w({3, 4});
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::cos(0.7 * static_cast<double>(i));
  s.add("w", w);
  const DenseArray x = DenseArray::vector({0.2, -0.4, 0.9, 1.1});
  auto build = [&](Tape& t) {
    Var W = t.param(s, "w");
    Var y = matvec(W, t.constant(x));
    return add(sum(tanh(y)), sum(square(row(W, 1))));
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

TEST(Tape, NonFiniteValuesRaise) {
  Tape t;
  Var z = t.scalar(0.0);
  EXPECT_THROW(reciprocal(z), NumericError);
}

TEST(ClipGlobalNorm, SingleGradient) {
  ParamStore s;
  s.add("g", {2});
  s.grad("g") = DenseArray::vector({3.0, 4.0});
  const double scale = clip_global_norm(s, 2.0);
  EXPECT_DOUBLE_EQ(scale, 0.4);
  EXPECT_NEAR(s.grad("g")[0], 1.2, 1e-15);
  EXPECT_NEAR(s.grad("g")[1], 1.6, 1e-15);
}

TEST(ClipGlobalNorm, BelowThresholdUnchanged) {
  ParamStore s;
  s.add("g", {2});
  s.grad("g") = DenseArray::vector({0.9, 1.2});
  EXPECT_EQ(clip_global_norm(s, 2.0), 1.0);
  EXPECT_EQ(s.grad("g")[0], 0.9);
  EXPECT_EQ(s.grad("g")[1], 1.2);
}

TEST(ClipGlobalNorm, GlobalNormOverParameters) {
  ParamStore s;
  s.add("a", {1});
  s.add("b", {1});
  s.grad("a")[0] = 3.0;
  s.grad("b")[0] = 4.0;
  // Concatenation oracle: sqrt(3^2 + 4^2) = 5.
  const std::vector<double> flat{3.0, 4.0};
  double sq = 0.0;
  for (double v : flat) sq += v * v;
  const double expected_scale = 2.0 / std::sqrt(sq);
  EXPECT_DOUBLE_EQ(global_grad_norm(s), std::sqrt(sq));
  EXPECT_DOUBLE_EQ(clip_global_norm(s, 2.0), expected_scale);
  EXPECT_NEAR(s.grad("a")[0], 3.0 * expected_scale, 1e-15);
  EXPECT_NEAR(s.grad("b")[0], 4.0 * expected_scale, 1e-15);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamStore s;
  s.add("p", DenseArray::vector({1.0, -2.0, 0.5}));
  s.grad("p") = DenseArray::vector({0.3, -5.0, 1e-3});
  AdamState st{{0.01, 0.9, 0.999, 1e-8, 0.0}, 0, {}};
  adam_step(s, st);
  // Hand evaluation: m_hat = g, v_hat = g^2, step = lr * g / (|g| + eps).
  const double g[] = {0.3, -5.0, 1e-3};
  const double p0[] = {1.0, -2.0, 0.5};
  for (int i = 0; i < 3; ++i) {
    const double expected = p0[i] - 0.01 * g[i] / (std::fabs(g[i]) + 1e-8);
    EXPECT_NEAR(s.value("p")[static_cast<std::size_t>(i)], expected, 1e-12);
  }
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, ZeroGradientLeavesParametersAndDecaysMoments) {
  ParamStore s;
  s.add("p", DenseArray::vector({1.0, 2.0}));
  AdamState st{{0.01, 0.9, 0.999, 1e-8, 0.0}, 0, {}};
  s.grad("p") = DenseArray::vector({1.0, 1.0});
  adam_step(s, st);
  const DenseArray after_first = s.value("p");
  const DenseArray m1 = st.moments.at("p").m;
  s.zero_grad();
  adam_step(s, st);
  // The moments carry the earlier gradient, so the zero-gradient step still
  // moves the parameters; with zero moments it would not.
  EXPECT_NEAR(st.moments.at("p").m[0], 0.9 * m1[0], 1e-15);
  ParamStore fresh;
  fresh.add("p", DenseArray::vector({1.0, 2.0}));
  AdamState st2{{0.01, 0.9, 0.999, 1e-8, 0.0}, 0, {}};
  adam_step(fresh, st2);
  EXPECT_EQ(fresh.value("p")[0], 1.0);
  EXPECT_EQ(fresh.value("p")[1], 2.0);
  (void)after_first;
}

TEST(Adam, IdenticalRunsGiveIdenticalTrajectories) {
  auto run = [] {
    ParamStore s;
    s.add("p", {5});
    init_uniform(s, -0.1, 0.1, 9);
    AdamState st{{0.01, 0.9, 0.999, 1e-8, 0.0}, 0, {}};
    for (int k = 0; k < 20; ++k) {
      s.zero_grad();
      Tape t;
      t.backward(sum(square(sigmoid(t.param(s, "p")))));
      adam_step(s, st);
    }
    return s;
  };
  EXPECT_TRUE(run() == run());
}

TEST(Adam, InvalidConfigRejected) {
  AdamConfig c;
  c.beta1 = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Checkpoint, RoundTripIsExact) {
  ParamStore s;
  s.add("enc/w", {3, 2});
  s.add("b", {4});
  s.add("scalar", DenseArray::scalar(-0.0));
  init_uniform(s, -1.0, 1.0, 5);
  const std::string bytes = encode_checkpoint(s);
  ParamStore back = decode_checkpoint(bytes);
  EXPECT_TRUE(back == s);
  EXPECT_EQ(encode_checkpoint(back), bytes);
}

TEST(Checkpoint, CorruptInputRejected) {
  ParamStore s;
  s.add("w", {2});
  std::string bytes = encode_checkpoint(s);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 1)), IoError);
  EXPECT_THROW(decode_checkpoint(bytes + "x"), IoError);
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad), IoError);
}

TEST(Checkpoint, LayoutIsLittleEndian) {
  ParamStore s;
  s.add("a", DenseArray::vector({1.0}));
  const std::string bytes = encode_checkpoint(s);
  ASSERT_EQ(bytes.substr(0, 8), "ACSTEPCK");
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), kCheckpointVersion);
  // 8 magic + 4 version + 8 count + (4 + 1) name + (4 + 8) shape + 8 data.
  EXPECT_EQ(bytes.size(), 45u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[44]), 0x3f);
}

}  // namespace
}  // namespace acstep
