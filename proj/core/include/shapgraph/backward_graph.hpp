// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SHAPGRAPH_BACKWARD_GRAPH_HPP_
#define SHAPGRAPH_BACKWARD_GRAPH_HPP_

#include <map>
#include <set>
#include <string>
#include <vector>

#include "shapgraph/model.hpp"

namespace shapgraph {

// Key of the root vertex whose single neighbor produces the explained output.
inline constexpr const char* kBackwardStart = "backward_start";

// Whether input slot `slot` of `node` can carry a gradient at all (weights
// of Conv/Gemm can; biases, BatchNormalization statistics, Where conditions
// and Greater operands cannot).
bool slot_passes_gradient(const Node& node, size_t slot);

// Values reachable from `input` through gradient-carrying slots.
std::set<std::string> mark_differentiable(const GraphModel& model, const std::string& input);
std::set<std::string> mark_differentiable(const GraphModel& model);  // sole graph input

struct IoMaps {
  // Differentiable value -> indices of consuming nodes, declaration order.
  std::map<std::string, std::vector<size_t>> input2node;
  // Produced value -> index of its producer.
  std::map<std::string, size_t> output2node;
};

IoMaps build_io_maps(const GraphModel& model, const std::string& input);
IoMaps build_io_maps(const GraphModel& model);

struct GraphVertex {
  enum class Kind { kNode, kInput, kStart };
  Kind kind = Kind::kNode;
  std::string key;
  size_t node_index = 0;  // kNode only
  // Vertices the outgoing gradients flow to, in input-slot order.
  std::vector<std::string> neighbors;
  // Number of gradient flows that must arrive before the vertex is ready.
  int forward_times = 0;
  // Per input name: does this vertex send a gradient back through it?
  std::map<std::string, bool> pass_grads;
};

// Vertices are keyed by node name; the explained input becomes a pseudo
// vertex keyed "input:<name>", and kBackwardStart is the root.
struct BackwardGraph {
  std::map<std::string, GraphVertex> vertices;
  std::string explained_input;
  std::string explained_output;
  std::set<std::string> differentiable;

  const GraphVertex& at(const std::string& key) const { return vertices.at(key); }
  std::string input_key() const { return "input:" + explained_input; }
  // Vertices that correspond to model nodes.
  size_t node_vertex_count() const;
};

// Restricts to nodes on a gradient path from `input` to `output`. Throws
// NoPathError when `output` does not depend on `input`.
BackwardGraph build_backward_graph(const GraphModel& model, const std::string& input,
                                   const std::string& output);
BackwardGraph build_backward_graph(const GraphModel& model);  // sole input, first output

// Readable adjacency listing, one vertex per line.
std::string dump_backward_graph(const BackwardGraph& graph, const GraphModel& model);

}  // namespace shapgraph

#endif  // SHAPGRAPH_BACKWARD_GRAPH_HPP_
