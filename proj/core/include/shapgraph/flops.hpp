// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SHAPGRAPH_FLOPS_HPP_
#define SHAPGRAPH_FLOPS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "shapgraph/model.hpp"

namespace shapgraph {

struct FlopOptions {
  // Per-element cost of Relu, Sigmoid, Tanh and Exp (Softmax adds 3 more).
  int64_t activation_cost = 4;
};

struct NodeFlops {
  std::string name;
  std::string op_type;
  bool forward = true;  // false for bwd/ and out/ nodes
  int64_t flops = 0;
};

// Analytic cost of one execution of a graph (one explained image for an
// explainer artifact).
struct FlopReport {
  int64_t reference_count = 0;
  int64_t total = 0;  // == forward + backward == sum over nodes
  int64_t forward = 0;
  int64_t backward = 0;
  std::vector<NodeFlops> nodes;
  // Rows pushed through the model's forward section per explained image,
  // split into target rows and reference rows.
  int64_t forward_rows = 0;
  int64_t target_passes = 0;
  int64_t reference_passes = 0;
  // Peak bytes of live intermediate tensors (graph input included, weights
  // excluded) while the forward section runs, and bytes of baked reference
  // activations.
  int64_t peak_forward_bytes = 0;
  int64_t cache_bytes = 0;
};

// `batch` resolves a symbolic batch axis (plain models) and is recorded as the
// reference count when the graph carries no explainer metadata.
// Throws ShapeError when an extent stays unresolved.
FlopReport count_flops(const GraphModel& model, int64_t batch = 1, const FlopOptions& options = {});

// Cost of a single node given its input and output shapes.
int64_t node_flops(const Node& node, const std::vector<Shape>& inputs,
                   const std::vector<Shape>& outputs, const FlopOptions& options = {});

// Memory budget for the optimized forward pass: the naive forward estimate
// spread over its 2B rows, plus the baked reference activations.
double memory_proxy_bound(const FlopReport& optimized, const FlopReport& naive);

std::string format_flop_report(const FlopReport& report, bool per_node = false);
std::string flop_report_json(const FlopReport& report);

}  // namespace shapgraph

#endif  // SHAPGRAPH_FLOPS_HPP_
