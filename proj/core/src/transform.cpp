// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapgraph/transform.hpp"

#include <set>

#include "shapgraph/error.hpp"
#include "shapgraph/executor.hpp"

namespace shapgraph {

GraphModel fold_constants(const GraphModel& model) {
  GraphModel out = model;
  out.nodes.clear();
  std::set<std::string> outputs;
  for (const auto& spec : model.outputs) outputs.insert(spec.name);

  for (size_t idx : topological_order(model)) {
    const Node& node = model.nodes[idx];
    bool foldable = true;
    for (const auto& o : node.outputs) foldable = foldable && !outputs.count(o);
    std::vector<const Tensor*> args;
    for (const auto& in : node.inputs) {
      auto it = out.initializers.find(in);
      if (it == out.initializers.end()) {
        foldable = false;
        break;
      }
      args.push_back(&it->second);
    }
    if (!foldable) {
      out.nodes.push_back(node);
      continue;
    }
    auto results = eval_node(node, args);
    for (size_t i = 0; i < results.size(); ++i) {
      out.initializers.insert_or_assign(node.outputs[i], std::move(results[i]));
    }
  }
  // Keep the original declaration order of the surviving nodes.
  std::set<std::string> kept;
  for (const auto& n : out.nodes) kept.insert(n.name);
  out.nodes.clear();
  for (const auto& n : model.nodes) {
    if (kept.count(n.name)) out.nodes.push_back(n);
  }
  prune_unused_initializers(out);
  return out;
}

void prune_unused_initializers(GraphModel& model) {
  std::set<std::string> used;
  for (const auto& n : model.nodes) used.insert(n.inputs.begin(), n.inputs.end());
  for (const auto& o : model.outputs) used.insert(o.name);
  for (auto it = model.initializers.begin(); it != model.initializers.end();) {
    it = used.count(it->first) ? std::next(it) : model.initializers.erase(it);
  }
}

void rename_value(GraphModel& model, const std::string& from, const std::string& to) {
  if (from == to) return;
  for (auto& n : model.nodes) {
    for (auto& v : n.inputs) {
      if (v == from) v = to;
    }
    for (auto& v : n.outputs) {
      if (v == from) v = to;
    }
  }
  for (auto& s : model.inputs) {
    if (s.name == from) s.name = to;
  }
  for (auto& s : model.outputs) {
    if (s.name == from) s.name = to;
  }
  if (auto node = model.initializers.extract(from)) {
    node.key() = to;
    model.initializers.insert(std::move(node));
  }
}

}  // namespace shapgraph
