// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapgraph/backward_graph.hpp"

#include <algorithm>
#include <sstream>

#include "shapgraph/error.hpp"

namespace shapgraph {

bool slot_passes_gradient(const Node& node, size_t slot) {
  const std::string& op = node.op_type;
  if (op == "Greater" || op == "Constant") return false;
  if (op == "Where") return slot == 1 || slot == 2;
  if (op == "Gemm" || op == "Conv" || op == "MatMul") return slot < 2;
  if (op == "BatchNormalization") return slot == 0;
  if (op == "Add" || op == "Sub" || op == "Mul" || op == "Div" || op == "Concat") return true;
  return slot == 0;
}

namespace {

const std::string& sole_input(const GraphModel& model) {
  if (model.inputs.size() != 1) {
    throw ValidationError("model '" + model.name + "' must have exactly one input, has " +
                          std::to_string(model.inputs.size()));
  }
  return model.inputs[0].name;
}

const std::string& first_output(const GraphModel& model) {
  if (model.outputs.empty()) throw ValidationError("model '" + model.name + "' has no outputs");
  return model.outputs[0].name;
}

}  // namespace

std::set<std::string> mark_differentiable(const GraphModel& model, const std::string& input) {
  if (!model.find_input(input)) throw ValidationError("'" + input + "' is not a graph input");
  std::set<std::string> d{input};
  for (size_t idx : topological_order(model)) {
    const Node& node = model.nodes[idx];
    bool live = false;
    for (size_t s = 0; s < node.inputs.size() && !live; ++s) {
      live = slot_passes_gradient(node, s) && d.count(node.inputs[s]);
    }
    if (live) d.insert(node.outputs.begin(), node.outputs.end());
  }
  return d;
}

std::set<std::string> mark_differentiable(const GraphModel& model) {
  return mark_differentiable(model, sole_input(model));
}

IoMaps build_io_maps(const GraphModel& model, const std::string& input) {
  const auto d = mark_differentiable(model, input);
  IoMaps maps;
  for (size_t i = 0; i < model.nodes.size(); ++i) {
    const Node& node = model.nodes[i];
    for (const auto& out : node.outputs) maps.output2node[out] = i;
    for (const auto& in : node.inputs) {
      if (!d.count(in)) continue;
      auto& consumers = maps.input2node[in];
      if (consumers.empty() || consumers.back() != i) consumers.push_back(i);
    }
  }
  return maps;
}

IoMaps build_io_maps(const GraphModel& model) { return build_io_maps(model, sole_input(model)); }

size_t BackwardGraph::node_vertex_count() const {
  return std::count_if(vertices.begin(), vertices.end(),
                       [](const auto& kv) { return kv.second.kind == GraphVertex::Kind::kNode; });
}

BackwardGraph build_backward_graph(const GraphModel& model, const std::string& input,
                                   const std::string& output) {
  validate(model);
  BackwardGraph g;
  g.explained_input = input;
  g.explained_output = output;
  g.differentiable = mark_differentiable(model, input);
  if (!g.differentiable.count(output)) {
    throw NoPathError("output '" + output + "' does not depend differentiably on input '" + input +
                      "'");
  }
  const IoMaps maps = build_io_maps(model, input);

  auto key_of = [&](const std::string& value) {
    if (value == input) return g.input_key();
    return model.nodes[maps.output2node.at(value)].name;
  };

  // Walk backward from the output along live slots.
  std::set<std::string> reached;
  std::vector<std::string> stack{output};
  while (!stack.empty()) {
    const std::string value = stack.back();
    stack.pop_back();
    const std::string key = key_of(value);
    if (!reached.insert(key).second) continue;
    if (value == input) continue;
    const Node& node = model.nodes[maps.output2node.at(value)];
    for (size_t s = 0; s < node.inputs.size(); ++s) {
      if (slot_passes_gradient(node, s) && g.differentiable.count(node.inputs[s])) {
        stack.push_back(node.inputs[s]);
      }
    }
  }

  GraphVertex start;
  start.kind = GraphVertex::Kind::kStart;
  start.key = kBackwardStart;
  start.neighbors = {key_of(output)};
  start.pass_grads[output] = true;
  g.vertices[kBackwardStart] = start;

  GraphVertex in;
  in.kind = GraphVertex::Kind::kInput;
  in.key = g.input_key();
  g.vertices[in.key] = in;

  for (size_t i = 0; i < model.nodes.size(); ++i) {
    const Node& node = model.nodes[i];
    if (!reached.count(node.name)) continue;
    GraphVertex v;
    v.kind = GraphVertex::Kind::kNode;
    v.key = node.name;
    v.node_index = i;
    for (size_t s = 0; s < node.inputs.size(); ++s) {
      const std::string& name = node.inputs[s];
      const bool live = slot_passes_gradient(node, s) && g.differentiable.count(name);
      v.pass_grads[name] = v.pass_grads[name] || live;
      if (!live) continue;
      const std::string nk = key_of(name);
      if (std::find(v.neighbors.begin(), v.neighbors.end(), nk) == v.neighbors.end()) {
        v.neighbors.push_back(nk);
      }
    }
    g.vertices[node.name] = v;
  }

  // One flow per distinct consumer vertex, including the root.
  for (const auto& [key, v] : g.vertices) {
    for (const auto& n : v.neighbors) ++g.vertices.at(n).forward_times;
  }
  return g;
}

BackwardGraph build_backward_graph(const GraphModel& model) {
  return build_backward_graph(model, sole_input(model), first_output(model));
}

std::string dump_backward_graph(const BackwardGraph& graph, const GraphModel& model) {
  std::ostringstream os;
  for (const auto& [key, v] : graph.vertices) {
    os << key;
    if (v.kind == GraphVertex::Kind::kNode) os << " [" << model.nodes[v.node_index].op_type << "]";
    os << " forward_times=" << v.forward_times << " ->";
    for (const auto& n : v.neighbors) os << ' ' << n;
    os << '\n';
  }
  return os.str();
}

}  // namespace shapgraph
