// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SHAPGRAPH_REF_OPTIMIZER_HPP_
#define SHAPGRAPH_REF_OPTIMIZER_HPP_

#include <map>
#include <string>

#include "shapgraph/backward_graph.hpp"
#include "shapgraph/grad_rules.hpp"
#include "shapgraph/model.hpp"
#include "shapgraph/shape_inference.hpp"
#include "shapgraph/tensor.hpp"

namespace shapgraph {

enum class Scheme { kOptimized, kNaive };
std::string_view scheme_name(Scheme scheme);
Scheme parse_scheme(std::string_view name);

// Activations of every intermediate value on the reference set, computed once
// at compile time.
struct ReferenceCache {
  std::map<std::string, Tensor> activations;  // value -> B rows; includes the input
  int64_t reference_count = 0;
  std::string reference_digest;  // SHA-256 of the raw reference bytes
};

ReferenceCache precompute_reference_cache(const GraphModel& model, const Tensor& references);

struct CompileOptions {
  std::string output_name;   // empty: first graph output
  int64_t output_index = 0;  // flat index into one row of that output
  double eps_act = kDefaultEpsAct;
  double eps_pool = kDefaultEpsPool;
  double seed_scale = 1.0;  // debugging aid: scales the one-hot seed
};

// The source model after constant folding, with shapes and the backward
// graph. Rejects models whose differentiable values do not keep the batch
// axis leading and row-independent.
struct PreparedModel {
  GraphModel folded;
  ShapeMap shapes;  // batch 1
  BackwardGraph graph;
};

PreparedModel prepare_model(const GraphModel& model, const std::string& output_name = "");

// Checks `references` against the model input: shape [B, ...], B >= 1,
// matching dtype, finite.
void check_references(const GraphModel& model, const Tensor& references);

// One-row forward pass; reference activations come from the cache as
// constants. Unused cache entries are not retained.
GraphModel build_optimized(const PreparedModel& prepared, const ReferenceCache& cache,
                           const CompileOptions& options);

// Joint forward pass over [x tiled B times; references] (2B rows), the way a
// runtime-reference explainer batches it.
GraphModel build_naive(const PreparedModel& prepared, const Tensor& references,
                       const CompileOptions& options);

}  // namespace shapgraph

#endif  // SHAPGRAPH_REF_OPTIMIZER_HPP_
