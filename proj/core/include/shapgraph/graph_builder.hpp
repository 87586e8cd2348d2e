// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SHAPGRAPH_GRAPH_BUILDER_HPP_
#define SHAPGRAPH_GRAPH_BUILDER_HPP_

#include <map>
#include <string>
#include <vector>

#include "shapgraph/model.hpp"
#include "shapgraph/tensor.hpp"

namespace shapgraph {

using Attributes = std::map<std::string, AttributeValue>;

// Appends nodes and initializers to a model under construction, minting
// unique names "<prefix><op>_<n>". Shapes are not tracked here.
class GraphBuilder {
 public:
  GraphBuilder(GraphModel& model, std::string prefix);

  // Appends a single-output node and returns its output name.
  std::string add(const std::string& op_type, std::vector<std::string> inputs,
                  Attributes attributes = {});
  std::vector<std::string> add_multi(const std::string& op_type, std::vector<std::string> inputs,
                                     size_t num_outputs, Attributes attributes = {});

  // Registers an initializer; returns its (unique) name.
  std::string constant(const Tensor& value, const std::string& hint = "const");

  void set_prefix(std::string prefix) { prefix_ = std::move(prefix); }
  const std::string& prefix() const { return prefix_; }
  GraphModel& model() { return model_; }

 private:
  std::string fresh(const std::string& stem);

  GraphModel& model_;
  std::string prefix_;
  std::map<std::string, int> counters_;
};

}  // namespace shapgraph

#endif  // SHAPGRAPH_GRAPH_BUILDER_HPP_
