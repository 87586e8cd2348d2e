// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapgraph/flops.hpp"

#include <gtest/gtest.h>

#include <numeric>

#include "shapgraph/corpus.hpp"
#include "shapgraph/error.hpp"
#include "shapgraph/explainer.hpp"
#include "support/harness.hpp"

namespace shapgraph {
namespace {

using testing::tiny_model;
using testing::weight;

TEST(FlopsTest, DemoMatMul) {
  const FlopReport r = count_flops(demo_model(), 1);
  ASSERT_EQ(r.nodes.size(), 2u);
  EXPECT_EQ(r.nodes[0].op_type, "MatMul");
  EXPECT_EQ(r.nodes[0].flops, 64);
  EXPECT_EQ(r.nodes[1].flops, 4);  // one sigmoid at the activation cost
  EXPECT_EQ(r.total, 68);
  EXPECT_EQ(count_flops(demo_model(), 3).total, 3 * 68);
  FlopOptions o;
  o.activation_cost = 10;
  EXPECT_EQ(count_flops(demo_model(), 1, o).total, 74);
}

TEST(FlopsTest, NodeConventions) {
  Node conv{"Conv", "c", {"X", "W", "B"}, {"Y"}, {}};
  // 2 * (3*3*2 taps) * (4 out channels * 5 * 5) + bias adds.
  EXPECT_EQ(node_flops(conv, {{1, 2, 7, 7}, {4, 2, 3, 3}, {4}}, {{1, 4, 5, 5}}),
            2 * 18 * 100 + 100);
  Node gemm{"Gemm", "g", {"A", "B", "C"}, {"Y"}, {{"transA", int64_t{1}}}};
  EXPECT_EQ(node_flops(gemm, {{5, 2}, {5, 3}, {3}}, {{2, 3}}), 2 * 2 * 3 * 5 + 6);
  Node pool{"MaxPool", "p", {"X"}, {"Y"}, {{"kernel_shape", std::vector<int64_t>{2, 2}}}};
  EXPECT_EQ(node_flops(pool, {{1, 1, 3, 3}}, {{1, 1, 2, 2}}), 16);
  pool.op_type = "AveragePool";
  EXPECT_EQ(node_flops(pool, {{1, 1, 3, 3}}, {{1, 1, 2, 2}}), 20);
  EXPECT_EQ(node_flops({"Softmax", "s", {"X"}, {"Y"}, {}}, {{1, 10}}, {{1, 10}}), 70);
  EXPECT_EQ(node_flops({"Add", "a", {"X", "Z"}, {"Y"}, {}}, {{2, 3}, {3}}, {{2, 3}}), 6);
  EXPECT_EQ(node_flops({"Reshape", "r", {"X"}, {"Y"}, {}}, {{2, 3}}, {{6}}), 0);
  EXPECT_EQ(node_flops({"ReduceMean", "m", {"X"}, {"Y"}, {}}, {{2, 3}}, {{2, 1}}), 8);
}

TEST(FlopsTest, TotalsEqualBreakdown) {
  const GraphModel m = build_motif("scaled-add-mul");
  const FlopReport r = count_flops(compile(m, random_references(m, 2, 1)).graph);
  int64_t sum = 0, fwd = 0;
  for (const auto& n : r.nodes) {
    sum += n.flops;
    if (n.forward) fwd += n.flops;
  }
  EXPECT_EQ(r.total, sum);
  EXPECT_EQ(r.forward, fwd);
  EXPECT_EQ(r.total, r.forward + r.backward);
}

TEST(FlopsTest, NaiveDemoForwardScalesWithJointRows) {
  const GraphModel m = demo_model();
  const Tensor refs = random_references(m, 5, 1);
  const FlopReport opt = count_flops(compile(m, refs, Scheme::kOptimized).graph);
  const FlopReport naive = count_flops(compile(m, refs, Scheme::kNaive).graph);
  EXPECT_EQ(opt.forward, 68);
  EXPECT_EQ(naive.forward, 10 * opt.forward);
  EXPECT_EQ(opt.target_passes, 1);
  EXPECT_EQ(opt.reference_passes, 0);
  EXPECT_EQ(naive.target_passes, 5);
  EXPECT_EQ(naive.reference_passes, 5);
  EXPECT_EQ(opt.reference_count, 5);
}

TEST(FlopsTest, OptimizedIsCheaperWithGrowingGap) {
  for (const auto& tag : motif_tags()) {
    const GraphModel m = build_motif(tag);
    int64_t last_gap = -1;
    for (int64_t b : {1, 2, 5, 16}) {
      const Tensor refs = random_references(m, b, 7);
      const int64_t o = count_flops(compile(m, refs, Scheme::kOptimized).graph).total;
      const int64_t n = count_flops(compile(m, refs, Scheme::kNaive).graph).total;
      EXPECT_LT(o, n) << tag << " B=" << b;
      EXPECT_GE(n - o, last_gap) << tag << " B=" << b;
      last_gap = n - o;
    }
  }
}

TEST(FlopsTest, MemoryProxy) {
  const GraphModel m = demo_model();
  const Tensor refs = random_references(m, 5, 1);
  const FlopReport opt = count_flops(compile(m, refs, Scheme::kOptimized).graph);
  const FlopReport naive = count_flops(compile(m, refs, Scheme::kNaive).graph);
  EXPECT_GT(opt.cache_bytes, 0);
  EXPECT_EQ(naive.cache_bytes, 0);
  EXPECT_DOUBLE_EQ(
      memory_proxy_bound(opt, naive),
      static_cast<double>(naive.peak_forward_bytes) / 10.0 + static_cast<double>(opt.cache_bytes));
  EXPECT_LE(static_cast<double>(opt.peak_forward_bytes), memory_proxy_bound(opt, naive));
  EXPECT_THROW(memory_proxy_bound(opt, FlopReport{}), ValidationError);
  // One input row plus the hidden and output rows.
  EXPECT_EQ(opt.peak_forward_bytes, (32 + 1 + 1) * 8);
}

TEST(FlopsTest, LiveRangesReleaseDeadValues) {
  const GraphModel m = tiny_model({100}, [](GraphBuilder& b) {
    const std::string a = b.add("Relu", {"X"});
    const std::string c = b.add("Tanh", {a});
    return b.add("Sigmoid", {c});
  });
  // X stays, a dies once Tanh has run: peak is X + a + c.
  EXPECT_EQ(count_flops(m, 1).peak_forward_bytes, 300 * 8);
}

TEST(FlopsTest, UnresolvedBatchIsShapeError) {
  EXPECT_THROW(count_flops(demo_model(), -1), ShapeError);
}

TEST(FlopsTest, ReportsRender) {
  const FlopReport r = count_flops(demo_model(), 1);
  EXPECT_NE(format_flop_report(r, true).find("MatMul"), std::string::npos);
  EXPECT_NE(flop_report_json(r).find("\"total\": 68"), std::string::npos);
}

}  // namespace
}  // namespace shapgraph
