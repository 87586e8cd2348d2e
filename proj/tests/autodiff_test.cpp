// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapgraph/autodiff.hpp"

#include <gtest/gtest.h>

#include <algorithm>

#include "shapgraph/corpus.hpp"
#include "shapgraph/error.hpp"
#include "shapgraph/explainer.hpp"
#include "shapgraph/oracle.hpp"
#include "support/harness.hpp"

namespace shapgraph {
namespace {

using testing::backprop;
using testing::rows;
using testing::tiny_model;
using testing::weight;

TEST(AutodiffTest, DemoVisitsSigmoidThenMatMul) {
  const GraphModel m = demo_model();
  const Tensor refs = random_references(m, 5, 1);
  const auto r = backprop(m, random_input(m, 2), refs, Tensor::filled(DType::kFloat64, {5, 1}, 1));
  const auto& order = r.list.visit_order;
  const auto sig = std::find(order.begin(), order.end(), m.nodes[1].name);
  const auto mm = std::find(order.begin(), order.end(), m.nodes[0].name);
  ASSERT_NE(sig, order.end());
  ASSERT_NE(mm, order.end());
  EXPECT_LT(sig, mm);
  EXPECT_EQ(r.list.rule_invocations, 2u);
  // The last emitted node is the transposed-weight MatMul.
  EXPECT_EQ(r.list.nodes.back().op_type, "MatMul");
}

GraphModel residual_block() {
  return tiny_model({4}, [](GraphBuilder& b) {
    const std::string h =
        b.add("Relu", {b.add("MatMul", {"X", weight(b, {4, 4},
                                                    {0.5, -0.2, 0.1, 0.3, -0.4, 0.2, 0.6, -0.1, 0.3,
                                                     0.3, -0.5, 0.2, 0.1, -0.6, 0.2, 0.4})})});
    const std::string f =
        b.add("Tanh", {b.add("MatMul", {h, weight(b, {4, 4},
                                                  {0.2, 0.1, -0.3, 0.5, 0.4, -0.2, 0.1, 0.3, -0.1,
                                                   0.6, 0.2, -0.4, 0.3, 0.2, 0.5, 0.1})})});
    return b.add("ReduceSum", {b.add("Add", {h, f})},
                 {{"axes", std::vector<int64_t>{1}}, {"keepdims", int64_t{1}}});
  });
}

TEST(AutodiffTest, ManyToOneWaitsForAllBranches) {
  const GraphModel m = residual_block();
  const auto r = backprop(m, random_input(m, 1), random_references(m, 2, 2),
                          Tensor::filled(DType::kFloat64, {2, 1}, 1));
  const auto& order = r.list.visit_order;
  auto pos = [&](const std::string& k) {
    return std::find(order.begin(), order.end(), k) - order.begin();
  };
  const std::string relu = m.nodes[1].name, tanh = m.nodes[3].name, add = m.nodes[4].name;
  EXPECT_GT(pos(relu), pos(tanh));
  EXPECT_GT(pos(relu), pos(add));
  const BackwardGraph g = build_backward_graph(prepare_model(m).folded);
  EXPECT_EQ(r.list.rule_invocations, g.node_vertex_count());
  EXPECT_EQ(order.size(), g.vertices.size() - 1);  // all but backward_start
  EXPECT_EQ(std::set<std::string>(order.begin(), order.end()).size(), order.size());
}

TEST(AutodiffTest, CorruptedFlowCountIsStuck) {
  const GraphModel m = residual_block();
  PreparedModel p = prepare_model(m);
  p.graph.vertices.at(m.nodes[1].name).forward_times += 1;
  GraphModel work;
  GraphBuilder b(work, "bwd/");
  testing::TraceSource acts(1);
  RuleEnv env{b, acts, p.folded, p.shapes, p.graph.differentiable};
  try {
    differentiate(p.graph, "seed", env);
    FAIL() << "expected StuckError";
  } catch (const StuckError& e) {
    EXPECT_NE(std::string(e.what()).find(m.nodes[1].name), std::string::npos);
  }
}

TEST(AutodiffTest, AccumulationIsLeftFold) {
  GraphModel work;
  GraphBuilder b(work, "bwd/");
  EXPECT_EQ(accumulate_incoming(b, {"g1"}), "g1");
  EXPECT_TRUE(work.nodes.empty());
  const std::string two = accumulate_incoming(b, {"g1", "g2"});
  ASSERT_EQ(work.nodes.size(), 1u);
  EXPECT_EQ(work.nodes[0].inputs, (std::vector<std::string>{"g1", "g2"}));
  const std::string three = accumulate_incoming(b, {"g1", "g2", "g3"});
  ASSERT_EQ(work.nodes.size(), 3u);
  EXPECT_EQ(work.nodes[1].inputs, (std::vector<std::string>{"g1", "g2"}));
  EXPECT_EQ(work.nodes[2].inputs, (std::vector<std::string>{work.nodes[1].outputs[0], "g3"}));
  EXPECT_EQ(three, work.nodes[2].outputs[0]);
  EXPECT_NE(two, three);
}

TEST(AutodiffTest, FlowConservationAtFanOut) {
  // X feeds three consumers; the accumulated gradient is their sum.
  const GraphModel m = tiny_model({2}, [](GraphBuilder& b) {
    const std::string a = b.add("Mul", {"X", weight(b, {2}, {2, 3})});
    const std::string c = b.add("Mul", {"X", weight(b, {2}, {5, 7})});
    return b.add("Add", {b.add("Add", {a, c}), "X"});
  });
  const auto r = backprop(m, rows({1, 2}, {1, 1}), rows({1, 2}, {0, 0}), rows({1, 2}, {1, 1}));
  EXPECT_EQ(r.input_grad.at(0), 2 + 5 + 1);
  EXPECT_EQ(r.input_grad.at(1), 3 + 7 + 1);
}

TEST(AutodiffTest, SplitOutgoingAssignsPerSuccessor) {
  const GraphModel m = tiny_model({4}, [](GraphBuilder& b) {
    const std::string a = b.add("Relu", {"X"});
    const std::string c = b.add("Tanh", {"X"});
    return b.add("Mul", {b.add("Concat", {a, c}, {{"axis", int64_t{1}}}),
                         b.add("Concat", {c, a}, {{"axis", int64_t{1}}})});
  });
  const auto r = backprop(m, random_input(m, 1), random_references(m, 1, 2),
                          Tensor::filled(DType::kFloat64, {1, 8}, 1));
  const BackwardGraph g = build_backward_graph(prepare_model(m).folded);
  const GraphVertex& concat = g.at(m.nodes[2].name);
  RuleOutput fake;
  fake.grad_out = {{m.nodes[0].outputs[0], "ga"}, {m.nodes[1].outputs[0], "gc"}};
  const auto parts = split_outgoing(g, m, concat, fake);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[0].first, m.nodes[0].name);
  EXPECT_EQ(parts[0].second.at(m.nodes[0].outputs[0]), "ga");
  EXPECT_EQ(parts[1].first, m.nodes[1].name);
  EXPECT_EQ(parts[1].second.at(m.nodes[1].outputs[0]), "gc");
  EXPECT_TRUE(r.input_grad.all_finite());
}

// Random layered networks: emitted multipliers equal the oracle's composition.
GraphModel random_layered(uint64_t seed) {
  Rng rng(seed);
  const int64_t in = 2 + static_cast<int64_t>(rng.uniform(0, 7));
  return tiny_model({in}, [&](GraphBuilder& b) {
    std::string cur = "X";
    int64_t width = in;
    std::string skip;
    int64_t skip_width = 0;
    const int depth = 1 + static_cast<int>(rng.uniform(0, 6));
    for (int l = 0; l < depth; ++l) {
      const int64_t next = 2 + static_cast<int64_t>(rng.uniform(0, 7));
      cur = b.add("MatMul",
                  {cur, b.constant(rng.tensor(DType::kFloat64, {width, next}, -1, 1), "w")});
      width = next;
      const double pick = rng.uniform(0, 1);
      if (pick < 0.25) {
        cur = b.add("Relu", {cur});
      } else if (pick < 0.5) {
        cur = b.add("Sigmoid", {cur});
      } else if (pick < 0.7) {
        cur = b.add("Tanh", {cur});
      } else if (pick < 0.85) {
        cur = b.add("Mul", {cur, b.add("Sigmoid", {cur})});
      }
      if (!skip.empty() && skip_width == width) cur = b.add("Add", {cur, skip});
      skip = cur;
      skip_width = width;
    }
    return b.add("Softmax", {cur}, {{"axis", int64_t{-1}}});
  });
}

TEST(AutodiffTest, ChainRuleMatchesOracleOnRandomNetworks) {
  for (uint64_t seed = 0; seed < 25; ++seed) {
    const GraphModel m = random_layered(seed);
    const Tensor refs = random_references(m, 3, seed + 100);
    const Tensor x = random_input(m, seed + 200);
    const auto art = compile(m, refs);
    const Tensor phi = explain(art, x).phi;
    const Tensor want = deeplift_oracle(m, x, refs);
    const auto rep = compare_attributions(phi, want, 1e-10, 0);
    EXPECT_TRUE(rep.all_within()) << "seed " << seed << " max diff " << rep.max_abs_diff;
  }
}

TEST(AutodiffTest, EmissionIsDeterministic) {
  const GraphModel m = build_motif("residual-add");
  const Tensor refs = random_references(m, 2, 1);
  const auto a = compile(m, refs);
  const auto b = compile(m, refs);
  EXPECT_EQ(a.graph, b.graph);
}

}  // namespace
}  // namespace shapgraph
