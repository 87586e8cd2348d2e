// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapgraph/corpus.hpp"

#include <gtest/gtest.h>

#include <filesystem>

#include "shapgraph/grad_rules.hpp"
#include "shapgraph/serialize.hpp"

namespace shapgraph {
namespace {

int count_op(const GraphModel& m, const std::string& op) {
  int n = 0;
  for (const auto& node : m.nodes) n += node.op_type == op;
  return n;
}

TEST(CorpusTest, MotifJumpStructure) {
  EXPECT_EQ(count_op(build_motif("plain-deep"), "Add"), 0);
  EXPECT_EQ(count_op(build_motif("plain-deep"), "Concat"), 0);
  EXPECT_GE(count_op(build_motif("plain-deep"), "Conv"), 6);
  EXPECT_GE(count_op(build_motif("residual-add"), "Add"), 2);
  EXPECT_GE(count_op(build_motif("dense-concat"), "Concat"), 2);
  EXPECT_GE(count_op(build_motif("scaled-add-mul"), "Add"), 1);
  EXPECT_GE(count_op(build_motif("scaled-add-mul"), "Mul"), 1);
}

TEST(CorpusTest, EntriesShape) {
  const auto corpus = build_corpus(kCorpusSeed, 5, 3);
  ASSERT_EQ(corpus.size(), 4u);
  for (const auto& e : corpus) {
    EXPECT_EQ(e.model.inputs[0].shape, (Shape{kSymbolicBatch, 3, 16, 16}));
    EXPECT_EQ(e.model.outputs[0].shape, (Shape{kSymbolicBatch, 10}));
    EXPECT_EQ(e.references.shape(), (Shape{5, 3, 16, 16}));
    EXPECT_EQ(e.samples.size(), 3u);
  }
}

TEST(CorpusTest, Deterministic) {
  const auto a = build_corpus(kCorpusSeed, 2, 1), b = build_corpus(kCorpusSeed, 2, 1);
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(save_model(a[i].model), save_model(b[i].model));
    EXPECT_EQ(a[i].references, b[i].references);
    EXPECT_EQ(a[i].samples[0], b[i].samples[0]);
  }
  EXPECT_NE(save_model(build_motif("plain-deep", 1)), save_model(build_motif("plain-deep", 2)));
}

TEST(CorpusTest, EverySupportedOpAndRuleIsCovered) {
  const CoverageMatrix cov = op_coverage(build_corpus(kCorpusSeed, 1, 1));
  for (auto op : supported_ops()) {
    EXPECT_FALSE(cov.at(std::string(op)).empty()) << op;
  }
  for (auto op : grad_rule_ops()) EXPECT_FALSE(cov.at(std::string(op)).empty()) << op;
  const std::string table = format_coverage(cov);
  for (const auto& tag : motif_tags()) EXPECT_NE(table.find(tag), std::string::npos);
}

TEST(CorpusTest, ZeroReferences) {
  const Tensor z = zero_references(demo_model(), 3);
  EXPECT_EQ(z.shape(), (Shape{3, 32}));
  for (int64_t i = 0; i < z.size(); ++i) ASSERT_EQ(z.at(i), 0.0);
}

TEST(CorpusTest, MicroNetsCoverEveryRule) {
  std::set<std::string> ops;
  for (const auto& net : micro_nets()) {
    for (const auto& n : net.model.nodes) ops.insert(n.op_type);
  }
  for (auto op : grad_rule_ops()) EXPECT_TRUE(ops.count(std::string(op))) << op;
}

// The checked-in fixtures under data/ must match what the generators produce today.
TEST(CorpusTest, CheckedInFixturesAreFresh) {
  const std::filesystem::path dir(SHAPGRAPH_DATA_DIR);
  const auto corpus = build_corpus(kCorpusSeed, 5, 2);
  for (const auto& e : corpus) {
    EXPECT_EQ(read_file(dir / (e.motif + ".sgm")), save_model(e.model)) << e.motif;
    EXPECT_EQ(read_file(dir / (e.motif + ".refs.stn")), save_tensor(e.references)) << e.motif;
    for (size_t i = 0; i < e.samples.size(); ++i) {
      EXPECT_EQ(read_file(dir / (e.motif + ".x" + std::to_string(i) + ".stn")),
                save_tensor(e.samples[i]))
          << e.motif;
    }
  }
  const GraphModel demo = demo_model();
  EXPECT_EQ(read_file(dir / "demo.sgm"), save_model(demo));
  EXPECT_EQ(read_file(dir / "demo.refs.stn"),
            save_tensor(random_references(demo, 5, kCorpusSeed + 1)));
  EXPECT_EQ(read_file(dir / "demo.x.stn"), save_tensor(random_input(demo, kCorpusSeed + 2)));
  EXPECT_EQ(read_file(dir / "coverage.tsv"), format_coverage(op_coverage(corpus)));
}

}  // namespace
}  // namespace shapgraph
