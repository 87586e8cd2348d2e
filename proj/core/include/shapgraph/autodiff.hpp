// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SHAPGRAPH_AUTODIFF_HPP_
#define SHAPGRAPH_AUTODIFF_HPP_

#include <map>
#include <set>
#include <string>
#include <vector>

#include "shapgraph/backward_graph.hpp"
#include "shapgraph/grad_rules.hpp"
#include "shapgraph/graph_builder.hpp"

namespace shapgraph {

struct BackwardNodeList {
  std::vector<Node> nodes;               // emission order
  std::string input_grad;                // multiplier of the explained input, grad_rows() rows
  std::vector<std::string> visit_order;  // vertex keys as processed
  size_t rule_invocations = 0;
};

// Bookkeeping of gradient flows in flight.
struct GradFlowState {
  std::map<std::string, int> arrivals;  // vertex -> flows received
  // vertex -> produced value -> gradients in arrival order
  std::map<std::string, std::map<std::string, std::vector<std::string>>> pending;
  std::set<std::string> visited;
};

// Left fold of Add nodes over `grads` in order; a single gradient passes
// through untouched.
std::string accumulate_incoming(GraphBuilder& builder, const std::vector<std::string>& grads);

// Groups a rule's outgoing gradients by receiving vertex, following the
// vertex's neighbor order.
std::vector<std::pair<std::string, std::map<std::string, std::string>>> split_outgoing(
    const BackwardGraph& graph, const GraphModel& model, const GraphVertex& vertex,
    const RuleOutput& rule);

// Propagates `seed` (shaped like the explained output, grad_rows() rows)
// from the explained output back to the explained input, visiting every
// vertex once, after all of its consumers. Throws StuckError if some vertex
// never becomes ready.
BackwardNodeList differentiate(const BackwardGraph& graph, const std::string& seed, RuleEnv& env);

}  // namespace shapgraph

#endif  // SHAPGRAPH_AUTODIFF_HPP_
