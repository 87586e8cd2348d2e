// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapgraph/graph_builder.hpp"

namespace shapgraph {

GraphBuilder::GraphBuilder(GraphModel& model, std::string prefix)
    : model_(model), prefix_(std::move(prefix)) {}

std::string GraphBuilder::fresh(const std::string& stem) {
  // Skip names the model already uses so builders can resume on a model.
  for (;;) {
    std::string name = prefix_ + stem + "_" + std::to_string(counters_[prefix_ + stem]++);
    if (model_.initializers.count(name) || model_.find_node(name)) continue;
    return name;
  }
}

std::string GraphBuilder::add(const std::string& op_type, std::vector<std::string> inputs,
                              Attributes attributes) {
  return add_multi(op_type, std::move(inputs), 1, std::move(attributes))[0];
}

std::vector<std::string> GraphBuilder::add_multi(const std::string& op_type,
                                                 std::vector<std::string> inputs,
                                                 size_t num_outputs, Attributes attributes) {
  Node node;
  node.op_type = op_type;
  node.name = fresh(op_type);
  node.inputs = std::move(inputs);
  node.attributes = std::move(attributes);
  if (num_outputs == 1) {
    node.outputs.push_back(node.name);
  } else {
    for (size_t i = 0; i < num_outputs; ++i)
      node.outputs.push_back(node.name + ":" + std::to_string(i));
  }
  model_.nodes.push_back(node);
  return model_.nodes.back().outputs;
}

std::string GraphBuilder::constant(const Tensor& value, const std::string& hint) {
  std::string name = fresh(hint);
  model_.initializers.emplace(name, value);
  return name;
}

}  // namespace shapgraph
