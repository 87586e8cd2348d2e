// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapgraph/autodiff.hpp"

#include "shapgraph/error.hpp"

namespace shapgraph {

std::string accumulate_incoming(GraphBuilder& builder, const std::vector<std::string>& grads) {
  if (grads.empty()) throw Error("no gradient to accumulate");
  std::string acc = grads[0];
  for (size_t i = 1; i < grads.size(); ++i) acc = builder.add("Add", {acc, grads[i]});
  return acc;
}

std::vector<std::pair<std::string, std::map<std::string, std::string>>> split_outgoing(
    const BackwardGraph& graph, const GraphModel& model, const GraphVertex& vertex,
    const RuleOutput& rule) {
  std::map<std::string, std::map<std::string, std::string>> by_vertex;
  for (const auto& [value, grad] : rule.grad_out) {
    std::string key;
    if (value == graph.explained_input) {
      key = graph.input_key();
    } else {
      for (const auto& n : model.nodes) {
        for (const auto& o : n.outputs) {
          if (o == value) key = n.name;
        }
      }
    }
    by_vertex[key][value] = grad;
  }
  std::vector<std::pair<std::string, std::map<std::string, std::string>>> out;
  for (const auto& n : vertex.neighbors) {
    auto it = by_vertex.find(n);
    if (it == by_vertex.end()) {
      throw Error("vertex '" + vertex.key + "' produced no gradient for neighbor '" + n + "'");
    }
    out.emplace_back(n, it->second);
  }
  return out;
}

BackwardNodeList differentiate(const BackwardGraph& graph, const std::string& seed, RuleEnv& env) {
  GraphBuilder& builder = env.builder;
  const GraphModel& model = env.source;
  const size_t first_new = builder.model().nodes.size();
  BackwardNodeList result;
  GradFlowState state;
  std::vector<std::string> stack;

  auto deliver = [&](const std::string& to, const std::map<std::string, std::string>& grads) {
    for (const auto& [value, g] : grads) state.pending[to][value].push_back(g);
    const int n = ++state.arrivals[to];
    const int expected = graph.at(to).forward_times;
    if (n > expected) throw Error("vertex '" + to + "' received more flows than expected");
    if (n == expected) stack.push_back(to);
  };

  const GraphVertex& start = graph.at(kBackwardStart);
  state.visited.insert(kBackwardStart);
  deliver(start.neighbors.at(0), {{graph.explained_output, seed}});

  while (!stack.empty()) {
    const std::string key = stack.back();
    stack.pop_back();
    if (!state.visited.insert(key).second) throw Error("vertex '" + key + "' visited twice");
    result.visit_order.push_back(key);
    const GraphVertex& v = graph.at(key);
    auto& pending = state.pending[key];

    if (v.kind == GraphVertex::Kind::kInput) {
      result.input_grad = accumulate_incoming(builder, pending[graph.explained_input]);
      continue;
    }
    const Node& node = model.nodes[v.node_index];
    std::vector<std::optional<std::string>> grad_in;
    for (const auto& o : node.outputs) {
      auto it = pending.find(o);
      if (it == pending.end() || it->second.empty()) {
        grad_in.emplace_back();
      } else {
        grad_in.emplace_back(accumulate_incoming(builder, it->second));
      }
    }
    const RuleOutput rule = f_grad(node, grad_in, v.pass_grads, env);
    ++result.rule_invocations;
    for (const auto& [to, grads] : split_outgoing(graph, model, v, rule)) deliver(to, grads);
  }

  std::string missing;
  for (const auto& [key, v] : graph.vertices) {
    if (!state.visited.count(key)) missing += (missing.empty() ? "" : ", ") + key;
  }
  if (!missing.empty()) {
    throw StuckError("backward pass stalled; never ready: " + missing);
  }
  const auto& nodes = builder.model().nodes;
  result.nodes.assign(nodes.begin() + static_cast<std::ptrdiff_t>(first_new), nodes.end());
  return result;
}

}  // namespace shapgraph
