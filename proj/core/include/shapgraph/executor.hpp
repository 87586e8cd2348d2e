// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SHAPGRAPH_EXECUTOR_HPP_
#define SHAPGRAPH_EXECUTOR_HPP_

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shapgraph/model.hpp"
#include "shapgraph/tensor.hpp"

namespace shapgraph {

using FeedMap = std::map<std::string, Tensor>;
using ExecutionTrace = std::map<std::string, Tensor>;

struct ExecutionResult {
  std::map<std::string, Tensor> outputs;
  std::optional<ExecutionTrace> trace;  // set iff capture was requested
};

// Reference kernels. Every accumulation runs sequentially over ascending
// index, so results are bit-reproducible for fixed inputs.
std::vector<Tensor> eval_node(const Node& node, std::span<const Tensor* const> inputs);
std::vector<Tensor> eval_node(const Node& node, const std::vector<Tensor>& inputs);

// A model prepared for repeated execution: validated once, with the node
// schedule and value lifetimes precomputed.
class Session {
 public:
  explicit Session(GraphModel model);

  const GraphModel& model() const { return *model_; }

  // Checks the feed against the input specs (batch axis free), then runs
  // every node. Intermediates are released after their last use unless
  // `capture` is set.
  ExecutionResult run(const FeedMap& feed, bool capture = false) const;

 private:
  std::shared_ptr<const GraphModel> model_;
  std::vector<size_t> order_;
  // For each scheduled step, values whose last consumer is that step.
  std::vector<std::vector<std::string>> release_;
};

ExecutionResult execute(const GraphModel& model, const FeedMap& feed, bool capture = false);

}  // namespace shapgraph

#endif  // SHAPGRAPH_EXECUTOR_HPP_
