// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "shapgraph/corpus.hpp"
#include "shapgraph/error.hpp"
#include "shapgraph/oracle.hpp"
#include "support/harness.hpp"

namespace shapgraph {
namespace {

using testing::backprop;
using testing::rows;
using testing::tiny_model;
using testing::weight;

constexpr double kExact = 1e-12;

Attributes pool(std::vector<int64_t> k, std::vector<int64_t> s = {1, 1},
                std::vector<int64_t> p = {0, 0, 0, 0}) {
  return {{"kernel_shape", std::move(k)}, {"strides", std::move(s)}, {"pads", std::move(p)}};
}

void expect_values(const Tensor& t, const std::vector<double>& want, double tol = kExact) {
  ASSERT_EQ(t.size(), static_cast<int64_t>(want.size()));
  for (size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(t.at(i), want[i], tol) << "index " << i;
}

// Multiplier of a one-coordinate model for target x against reference r.
double scalar_multiplier(const GraphModel& m, double x, double r) {
  return backprop(m, rows({1, 1}, {x}), rows({1, 1}, {r}), rows({1, 1}, {1.0})).input_grad.at(0);
}

Tensor random_row(Shape s, uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  return rng.tensor(DType::kFloat64, s, lo, hi);
}

TEST(GradRuleMatMul, TransposeAction) {
  const GraphModel m = tiny_model(
      {2}, [](GraphBuilder& b) { return b.add("MatMul", {"X", weight(b, {2, 1}, {2, 3})}); });
  const auto r = backprop(m, rows({1, 2}, {0.3, -0.4}), rows({1, 2}, {0, 0}), rows({1, 1}, {1}));
  expect_values(r.input_grad, {2, 3});
}

TEST(GradRuleMatMul, GemmTransposedLayoutGivesSameGradient) {
  const GraphModel m = tiny_model({2}, [](GraphBuilder& b) {
    return b.add("Gemm", {"X", weight(b, {1, 2}, {2, 3}), weight(b, {1}, {5})},
                 {{"transB", int64_t{1}}});
  });
  const auto r = backprop(m, rows({1, 2}, {0.3, -0.4}), rows({1, 2}, {1, 1}), rows({1, 1}, {1}));
  expect_values(r.input_grad, {2, 3});
}

TEST(GradRuleMatMul, DemoMapsReferenceRowsToInputWidth) {
  const GraphModel demo = demo_model();
  const GraphModel linear = tiny_model({32}, [&](GraphBuilder& b) {
    return b.add("MatMul", {"X", b.constant(demo.initializers.at("W"), "W")});
  });
  const Tensor refs = random_references(linear, 5, 3);
  const auto r =
      backprop(linear, random_input(linear, 4), refs, Tensor::filled(DType::kFloat64, {5, 1}, 1));
  EXPECT_EQ(r.input_grad.shape(), (Shape{5, 32}));
  for (int64_t b = 0; b < 5; ++b) {
    for (int64_t i = 0; i < 32; ++i) {
      EXPECT_EQ(r.input_grad.at(b * 32 + i), demo.initializers.at("W").at(i));
    }
  }
}

TEST(GradRuleConv, IdentityFilterPassesGradient) {
  const GraphModel m = tiny_model({1, 3, 3}, [](GraphBuilder& b) {
    return b.add("Conv", {"X", weight(b, {1, 1, 1, 1}, {1})});
  });
  const Tensor g = random_row({1, 1, 3, 3}, 5);
  const auto r = backprop(m, random_row({1, 1, 3, 3}, 6), random_row({1, 1, 3, 3}, 7), g);
  expect_values(r.input_grad, g.to_doubles(), 0);
}

TEST(GradRuleConv, ValidTwoByTwoOverFourByFourMatchesFiniteDifferences) {
  // 3x3 incoming gradient, padded to 5x5 and convolved with the flipped filter.
  const GraphModel m = tiny_model({1, 4, 4}, [](GraphBuilder& b) {
    return b.add("Conv", {"X", weight(b, {1, 1, 2, 2}, {1, 2, 3, 4})});
  });
  const Tensor g = random_row({1, 1, 3, 3}, 8);
  const Tensor x = random_row({1, 1, 4, 4}, 9);
  const auto r = backprop(m, x, random_row({1, 1, 4, 4}, 10), g);
  EXPECT_EQ(r.input_grad.shape(), (Shape{1, 1, 4, 4}));
  EXPECT_LE(testing::max_rel_diff(r.input_grad, testing::weighted_sum_gradient(m, x, g)), 1e-6);
  // Corner cells see exactly one filter tap: g[0,0]*w[0,0] and g[2,2]*w[1,1].
  EXPECT_NEAR(r.input_grad.at(0), g.at(0) * 1, kExact);
  EXPECT_NEAR(r.input_grad.at(15), g.at(8) * 4, kExact);
}

TEST(GradRuleConv, StrideTwoMatchesFiniteDifferences) {
  Rng rng(11);
  const Tensor w = rng.tensor(DType::kFloat64, {1, 1, 3, 3}, -1, 1);
  const GraphModel m = tiny_model({1, 5, 5}, [&](GraphBuilder& b) {
    return b.add("Conv", {"X", b.constant(w, "w")}, {{"strides", std::vector<int64_t>{2, 2}}});
  });
  const Tensor x = random_row({1, 1, 5, 5}, 12);
  const Tensor g = random_row({1, 1, 2, 2}, 13);
  const auto r = backprop(m, x, random_row({1, 1, 5, 5}, 14), g);
  EXPECT_LE(testing::max_rel_diff(r.input_grad, testing::weighted_sum_gradient(m, x, g)), 1e-6);
}

TEST(GradRuleConv, GroupedConvolutionIsUnsupported) {
  const GraphModel m = tiny_model({2, 3, 3}, [](GraphBuilder& b) {
    return b.add("Conv", {"X", weight(b, {2, 1, 1, 1}, {1, 2})}, {{"group", int64_t{2}}});
  });
  const Tensor x = random_row({1, 2, 3, 3}, 1);
  EXPECT_THROW(backprop(m, x, x, random_row({1, 2, 3, 3}, 2)), UnsupportedOp);
}

GraphModel activation(const char* op) {
  return tiny_model({1}, [op](GraphBuilder& b) { return b.add(op, {"X"}); });
}

TEST(GradRuleRescale, SigmoidFallsBackToDerivativeAtZeroDelta) {
  EXPECT_NEAR(scalar_multiplier(activation("Sigmoid"), 0.0, 0.0), 0.25, kExact);
}

TEST(GradRuleRescale, ReluHingeRescale) {
  EXPECT_NEAR(scalar_multiplier(activation("Relu"), 1.0, -1.0), 0.5, kExact);
}

TEST(GradRuleRescale, SigmoidRescaleAtTwo) {
  // (sigma(2) - sigma(0)) / 2, evaluated at high precision.
  EXPECT_NEAR(scalar_multiplier(activation("Sigmoid"), 2.0, 0.0), 0.19039853898894116, 1e-15);
}

TEST(GradRuleRescale, TanhAndExpFallBackBelowThreshold) {
  const double x = 0.7, r = 0.7 + 5e-7;
  EXPECT_NEAR(scalar_multiplier(activation("Tanh"), x, r), 1 - std::tanh(x) * std::tanh(x), kExact);
  EXPECT_NEAR(scalar_multiplier(activation("Exp"), x, r), std::exp(x), kExact);
  // Just above the threshold the secant is used.
  const double r2 = 0.7 + 2e-6;
  EXPECT_NEAR(scalar_multiplier(activation("Exp"), x, r2), (std::exp(x) - std::exp(r2)) / (x - r2),
              1e-9);
}

TEST(GradRuleRescale, AbsoluteDeltaComparison) {
  // A large negative delta is a genuine secant, not the fallback.
  EXPECT_NEAR(scalar_multiplier(activation("Relu"), -3.0, 1.0), 0.25, kExact);
}

TEST(GradRuleRescale, EqualInputsProduceFiniteMultipliers) {
  for (const char* op : {"Sigmoid", "Relu", "Tanh", "Exp"}) {
    const GraphModel m = tiny_model({4}, [op](GraphBuilder& b) { return b.add(op, {"X"}); });
    const Tensor x = rows({1, 4}, {-1, 0, 0.5, 2});
    const auto r = backprop(m, x, x, Tensor::filled(DType::kFloat64, {1, 4}, 1));
    EXPECT_TRUE(r.input_grad.all_finite()) << op;
  }
}

GraphModel softmax_model(int64_t n) {
  return tiny_model(
      {n}, [](GraphBuilder& b) { return b.add("Softmax", {"X"}, {{"axis", int64_t{-1}}}); });
}

TEST(GradRuleSoftmax, EqualInputsGiveJacobianAction) {
  const Tensor x = rows({1, 3}, {0.2, -0.5, 1.1});
  const Tensor g = rows({1, 3}, {0.3, 1.0, -0.7});
  const auto r = backprop(softmax_model(3), x, x, g);
  double z = 0;
  std::vector<double> s(3);
  for (int i = 0; i < 3; ++i) z += std::exp(x.at(i));
  for (int i = 0; i < 3; ++i) s[i] = std::exp(x.at(i)) / z;
  double sg = 0;
  for (int i = 0; i < 3; ++i) sg += s[i] * g.at(i);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(r.input_grad.at(i), s[i] * (g.at(i) - sg), kExact);
}

TEST(GradRuleSoftmax, TwoClassMatchesOracleComposition) {
  const GraphModel m = softmax_model(2);
  const Tensor x = rows({1, 2}, {1, 0}), r = rows({1, 2}, {0, 0});
  const auto got = backprop(m, x, r, rows({1, 2}, {1, 0}));
  const Tensor want = deeplift_multipliers(m, x, r);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(got.input_grad.at(i), want.at(i), 1e-10);
}

TEST(GradRuleSoftmax, SummationToDeltaOfSelectedProbability) {
  const GraphModel m = softmax_model(5);
  const Tensor x = random_row({1, 5}, 21, -2, 2), r = random_row({1, 5}, 22, -2, 2);
  const auto got = backprop(m, x, r, rows({1, 5}, {0, 0, 1, 0, 0}));
  const Tensor yx = execute(m, {{"X", x}}).outputs.begin()->second;
  const Tensor yr = execute(m, {{"X", r}}).outputs.begin()->second;
  double sum = 0;
  for (int i = 0; i < 5; ++i) sum += got.input_grad.at(i) * (x.at(i) - r.at(i));
  EXPECT_NEAR(sum, yx.at(2) - yr.at(2), 1e-8);
}

GraphModel maxpool_1x2() {
  return tiny_model({1, 1, 2},
                    [](GraphBuilder& b) { return b.add("MaxPool", {"X"}, pool({1, 2})); });
}

TEST(GradRuleMaxPool, HandEvaluatedWindow) {
  const auto r = backprop(maxpool_1x2(), rows({1, 1, 1, 2}, {3, 1}), rows({1, 1, 1, 2}, {0, 2}),
                          rows({1, 1, 1, 1}, {1}));
  expect_values(r.input_grad, {1.0 / 3.0, 0.0});
}

TEST(GradRuleMaxPool, EqualInputsGiveZeros) {
  const Tensor x = random_row({1, 2, 4, 4}, 31);
  const GraphModel m = tiny_model({2, 4, 4}, [](GraphBuilder& b) {
    return b.add("MaxPool", {"X"}, pool({2, 2}, {1, 1}, {1, 1, 0, 0}));
  });
  const auto r = backprop(m, x, x, random_row({1, 2, 4, 4}, 32));
  for (int64_t i = 0; i < r.input_grad.size(); ++i) EXPECT_EQ(r.input_grad.at(i), 0.0);
}

TEST(GradRuleMaxPool, TiesRouteToLowestIndex) {
  const auto r = backprop(maxpool_1x2(), rows({1, 1, 1, 2}, {2, 2}), rows({1, 1, 1, 2}, {0, 0}),
                          rows({1, 1, 1, 1}, {1}));
  expect_values(r.input_grad, {1.0, 0.0});
}

TEST(GradRuleMaxPool, OverlappingWindowCompleteness) {
  const GraphModel m = tiny_model({2, 5, 5}, [](GraphBuilder& b) {
    return b.add("MaxPool", {"X"}, pool({3, 3}, {1, 1}, {1, 1, 1, 1}));
  });
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor x = random_row({1, 2, 5, 5}, 100 + seed);
    const Tensor r = random_row({1, 2, 5, 5}, 200 + seed);
    const Tensor g = random_row({1, 2, 5, 5}, 300 + seed);
    const auto got = backprop(m, x, r, g);
    const Tensor yx = execute(m, {{"X", x}}).outputs.begin()->second;
    const Tensor yr = execute(m, {{"X", r}}).outputs.begin()->second;
    double lhs = 0, rhs = 0;
    for (int64_t i = 0; i < x.size(); ++i) lhs += got.input_grad.at(i) * (x.at(i) - r.at(i));
    for (int64_t i = 0; i < g.size(); ++i) rhs += g.at(i) * (yx.at(i) - yr.at(i));
    EXPECT_NEAR(lhs, rhs, 1e-10) << "seed " << seed;
  }
}

TEST(GradRuleAvgPool, GlobalAverageDistributesEqually) {
  const GraphModel m =
      tiny_model({1, 2, 2}, [](GraphBuilder& b) { return b.add("GlobalAveragePool", {"X"}); });
  const auto r = backprop(m, random_row({1, 1, 2, 2}, 1), random_row({1, 1, 2, 2}, 2),
                          rows({1, 1, 1, 1}, {1}));
  expect_values(r.input_grad, {0.25, 0.25, 0.25, 0.25});
}

TEST(GradRuleAvgPool, OverlapCounting) {
  const GraphModel m = tiny_model(
      {1, 3, 3}, [](GraphBuilder& b) { return b.add("AveragePool", {"X"}, pool({2, 2})); });
  const auto r = backprop(m, random_row({1, 1, 3, 3}, 1), random_row({1, 1, 3, 3}, 2),
                          Tensor::filled(DType::kFloat64, {1, 1, 2, 2}, 1));
  // Windows covering each cell, times 1/4.
  expect_values(r.input_grad, {0.25, 0.5, 0.25, 0.5, 1.0, 0.5, 0.25, 0.5, 0.25});
}

TEST(GradRuleAvgPool, PaddedWindowsMatchFiniteDifferences) {
  for (int64_t include : {0, 1}) {
    const GraphModel m = tiny_model({1, 4, 4}, [include](GraphBuilder& b) {
      Attributes a = pool({3, 3}, {2, 2}, {1, 1, 1, 1});
      a["count_include_pad"] = include;
      return b.add("AveragePool", {"X"}, a);
    });
    const Tensor x = random_row({1, 1, 4, 4}, 40);
    const Tensor g = random_row({1, 1, 2, 2}, 41);
    const auto r = backprop(m, x, random_row({1, 1, 4, 4}, 42), g);
    EXPECT_LE(testing::max_rel_diff(r.input_grad, testing::weighted_sum_gradient(m, x, g)), 1e-9);
  }
}

TEST(GradRuleConcat, SlicesFollowDeclarationOrder) {
  // Concat(a[1x3], b[1x2]) where a, b are slices of X: gradient returns intact.
  const GraphModel m = tiny_model({5}, [](GraphBuilder& b) {
    auto p = b.add_multi("Split", {"X"}, 2,
                         {{"axis", int64_t{1}}, {"split", std::vector<int64_t>{3, 2}}});
    return b.add("Concat", {p[1], p[0]}, {{"axis", int64_t{1}}});
  });
  const auto r =
      backprop(m, random_row({1, 5}, 1), random_row({1, 5}, 2), rows({1, 5}, {1, 2, 3, 4, 5}));
  // Output is [x3 x4 x0 x1 x2].
  expect_values(r.input_grad, {3, 4, 5, 1, 2}, 0);
}

TEST(GradRuleConcat, ConstantPieceDropsOut) {
  const GraphModel m = tiny_model({2}, [](GraphBuilder& b) {
    // Greater carries no gradient, so its slice is dropped.
    const std::string mask = b.add("Greater", {"X", weight(b, {1}, {0})});
    return b.add("Concat", {"X", mask, "X"}, {{"axis", int64_t{1}}});
  });
  const auto r =
      backprop(m, random_row({1, 2}, 1), random_row({1, 2}, 2), rows({1, 6}, {1, 2, 30, 40, 5, 6}));
  expect_values(r.input_grad, {6, 8}, 0);
}

GraphModel product_of_halves() {
  return tiny_model({2}, [](GraphBuilder& b) {
    auto p = b.add_multi("Split", {"X"}, 2,
                         {{"axis", int64_t{1}}, {"split", std::vector<int64_t>{1, 1}}});
    return b.add("Mul", {p[0], p[1]});
  });
}

TEST(GradRuleMul, SymmetricSplitIsComplete) {
  const auto r =
      backprop(product_of_halves(), rows({1, 2}, {2, 3}), rows({1, 2}, {0, 1}), rows({1, 1}, {1}));
  expect_values(r.input_grad, {2, 1});
  const double total = r.input_grad.at(0) * 2 + r.input_grad.at(1) * 2;
  EXPECT_NEAR(total, 6.0, kExact);  // 2*3 - 0*1
}

TEST(GradRuleMul, ZeroMaskAnnihilates) {
  const GraphModel m = tiny_model(
      {3}, [](GraphBuilder& b) { return b.add("Mul", {"X", weight(b, {3}, {0, 0, 0})}); });
  const auto r = backprop(m, random_row({1, 3}, 1), random_row({1, 3}, 2), rows({1, 3}, {1, 1, 1}));
  expect_values(r.input_grad, {0, 0, 0}, 0);
}

TEST(GradRuleMul, BroadcastScalarSumsOverPositions) {
  const GraphModel m = tiny_model({5}, [](GraphBuilder& b) {
    auto p = b.add_multi("Split", {"X"}, 2,
                         {{"axis", int64_t{1}}, {"split", std::vector<int64_t>{4, 1}}});
    return b.add("Mul", {p[0], p[1]});
  });
  const Tensor x = random_row({1, 5}, 3), r = random_row({1, 5}, 4), g = random_row({1, 4}, 5);
  const auto got = backprop(m, x, r, g);
  double want = 0;
  for (int i = 0; i < 4; ++i) want += g.at(i) * 0.5 * (x.at(i) + r.at(i));
  EXPECT_NEAR(got.input_grad.at(4), want, kExact);
}

TEST(GradRuleLinear, BatchNormFactor) {
  const GraphModel m = tiny_model({1, 1, 1}, [](GraphBuilder& b) {
    return b.add("BatchNormalization",
                 {"X", weight(b, {1}, {2}), weight(b, {1}, {0.5}), weight(b, {1}, {0.1}),
                  weight(b, {1}, {3})},
                 {{"epsilon", 1.0}});
  });
  const auto r =
      backprop(m, rows({1, 1, 1, 1}, {0.4}), rows({1, 1, 1, 1}, {-0.2}), rows({1, 1, 1, 1}, {1}));
  expect_values(r.input_grad, {1.0});
}

TEST(GradRuleLinear, SkipAddReceivesGradientTwice) {
  const GraphModel m = tiny_model({3}, [](GraphBuilder& b) { return b.add("Add", {"X", "X"}); });
  const auto r = backprop(m, random_row({1, 3}, 1), random_row({1, 3}, 2), rows({1, 3}, {1, 2, 3}));
  expect_values(r.input_grad, {2, 4, 6}, 0);
}

TEST(GradRuleLinear, ReshapeInverts) {
  const GraphModel m = tiny_model({16}, [](GraphBuilder& b) {
    return b.add("Reshape", {"X"}, {{"shape", std::vector<int64_t>{0, 4, 4}}});
  });
  const Tensor g = random_row({1, 4, 4}, 7);
  const auto r = backprop(m, random_row({1, 16}, 1), random_row({1, 16}, 2), g);
  EXPECT_EQ(r.input_grad.shape(), (Shape{1, 16}));
  expect_values(r.input_grad, g.to_doubles(), 0);
}

TEST(GradRuleLinear, TransposeUsesInversePermutation) {
  const GraphModel m = tiny_model({2, 3, 4}, [](GraphBuilder& b) {
    return b.add("Transpose", {"X"}, {{"perm", std::vector<int64_t>{0, 3, 1, 2}}});
  });
  const Tensor x = random_row({1, 2, 3, 4}, 1);
  const Tensor g = random_row({1, 4, 2, 3}, 2);
  const auto r = backprop(m, x, random_row({1, 2, 3, 4}, 3), g);
  EXPECT_LE(testing::max_rel_diff(r.input_grad, testing::weighted_sum_gradient(m, x, g)), 1e-9);
}

TEST(GradRuleDispatch, UnknownOperatorIsUnsupported) {
  GraphModel work;
  GraphBuilder b(work, "bwd/");
  testing::TraceSource acts(1);
  const GraphModel src;
  const ShapeMap shapes;
  const std::set<std::string> diff{"X"};
  RuleEnv env{b, acts, src, shapes, diff};
  Node loop{"Loop", "body_loop", {"X"}, {"Y"}, {}};
  try {
    f_grad(loop, {std::string("g")}, {{"X", true}}, env);
    FAIL() << "expected UnsupportedOp";
  } catch (const UnsupportedOp& e) {
    EXPECT_NE(std::string(e.what()).find("body_loop"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("Loop"), std::string::npos);
  }
  EXPECT_FALSE(has_grad_rule("GatherND"));
  EXPECT_TRUE(has_grad_rule("Sigmoid"));
}

// Sum over inputs of m * (x - r) equals sum of g * (y_x - y_r), per reference.
TEST(GradRuleProperty, NonlinearRulesSumToDelta) {
  for (const auto& net : micro_nets()) {
    const GraphModel& m = net.model;
    const Tensor x = random_input(m, 61);
    const Tensor refs = random_references(m, 3, 62);
    const std::string out = m.outputs[0].name;
    const Tensor yx = execute(m, {{"X", x}}).outputs.at(out);
    const Tensor yr = execute(m, {{"X", refs}}).outputs.at(out);
    Shape gs = yr.shape();
    const Tensor g = random_row(gs, 63);
    const auto got = backprop(m, x, refs, g);
    const int64_t in_row = x.size(), out_row = yx.size();
    for (int64_t b = 0; b < 3; ++b) {
      double lhs = 0, rhs = 0;
      for (int64_t i = 0; i < in_row; ++i) {
        lhs += got.input_grad.at(b * in_row + i) * (x.at(i) - refs.at(b * in_row + i));
      }
      for (int64_t j = 0; j < out_row; ++j) {
        rhs += g.at(b * out_row + j) * (yx.at(j) - yr.at(b * out_row + j));
      }
      EXPECT_NEAR(lhs, rhs, 1e-10) << net.rule << " reference " << b;
    }
  }
}

// Every rule of a purely linear network is an exact gradient.
TEST(GradRuleProperty, LinearRulesMatchFiniteDifferences) {
  const std::set<std::string> linear{"matmul",  "gemm",          "conv",
                                     "avgpool", "globalavgpool", "mul-const",
                                     "add-sub", "batchnorm",     "transpose-reshape",
                                     "flatten", "where"};
  size_t checked = 0;
  for (const auto& net : micro_nets()) {
    if (!linear.count(net.rule)) continue;
    const GraphModel& m = net.model;
    const Tensor x = random_input(m, 71);
    const Tensor refs = random_references(m, 1, 72);
    const Tensor y = execute(m, {{"X", x}}).outputs.begin()->second;
    const Tensor g = random_row(y.shape(), 73);
    const auto got = backprop(m, x, refs, g);
    EXPECT_LE(testing::max_rel_diff(got.input_grad, testing::weighted_sum_gradient(m, x, g)), 1e-6)
        << net.rule;
    ++checked;
  }
  EXPECT_EQ(checked, linear.size());
}

TEST(GradRuleProperty, LinearLayoutChainsMatchFiniteDifferences) {
  std::vector<GraphModel> models;
  models.push_back(tiny_model({6}, [](GraphBuilder& b) {
    auto p = b.add_multi("Split", {"X"}, 3,
                         {{"axis", int64_t{1}}, {"split", std::vector<int64_t>{1, 3, 2}}});
    const std::string c = b.add("Concat", {p[2], p[0], p[1]}, {{"axis", int64_t{1}}});
    return b.add("Sub", {c, b.add("Mul", {"X", weight(b, {6}, {1, -2, 3, -4, 5, -6})})});
  }));
  models.push_back(tiny_model({2, 3}, [](GraphBuilder& b) {
    const std::string t = b.add("Tile", {"X"}, {{"repeats", std::vector<int64_t>{1, 2, 3}}});
    const std::string s =
        b.add("ReduceSum", {t}, {{"axes", std::vector<int64_t>{2}}, {"keepdims", int64_t{0}}});
    return b.add("ReduceMean", {s}, {{"axes", std::vector<int64_t>{1}}, {"keepdims", int64_t{1}}});
  }));
  models.push_back(tiny_model(
      {4}, [](GraphBuilder& b) { return b.add("Div", {"X", weight(b, {4}, {2, -4, 0.5, 8})}); }));
  for (const auto& m : models) {
    const Tensor x = random_input(m, 81);
    const Tensor y = execute(m, {{"X", x}}).outputs.begin()->second;
    const Tensor g = random_row(y.shape(), 82);
    const auto got = backprop(m, x, random_references(m, 1, 83), g);
    EXPECT_LE(testing::max_rel_diff(got.input_grad, testing::weighted_sum_gradient(m, x, g)), 1e-6);
  }
}

TEST(GradRuleProperty, SmoothActivationsAtEqualInputsAreDerivatives) {
  for (const char* op : {"Sigmoid", "Tanh", "Exp"}) {
    const GraphModel m = tiny_model({5}, [op](GraphBuilder& b) { return b.add(op, {"X"}); });
    const Tensor x = random_row({1, 5}, 91);
    const Tensor g = random_row({1, 5}, 92);
    const auto got = backprop(m, x, x, g);
    EXPECT_LE(testing::max_rel_diff(got.input_grad, testing::weighted_sum_gradient(m, x, g)), 1e-6)
        << op;
  }
}

TEST(GradRuleProperty, GradientShapesFollowInputs) {
  for (const auto& net : micro_nets()) {
    const Tensor refs = random_references(net.model, 4, 1);
    const Tensor x = random_input(net.model, 2);
    Shape gs = execute(net.model, {{"X", refs}}).outputs.begin()->second.shape();
    const auto got = backprop(net.model, x, refs, Tensor::filled(DType::kFloat64, gs, 1));
    EXPECT_EQ(got.input_grad.shape(), refs.shape()) << net.rule;
  }
}

}  // namespace
}  // namespace shapgraph
