// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SHAPGRAPH_TRANSFORM_HPP_
#define SHAPGRAPH_TRANSFORM_HPP_

#include <string>

#include "shapgraph/model.hpp"

namespace shapgraph {

// Evaluates every node whose inputs are all initializers (Constant nodes
// included) and stores the results as initializers. Values bound to graph
// outputs stay computed. Unused initializers are dropped afterwards.
GraphModel fold_constants(const GraphModel& model);

// Drops initializers no node or output refers to.
void prune_unused_initializers(GraphModel& model);

// Renames a produced value everywhere it appears.
void rename_value(GraphModel& model, const std::string& from, const std::string& to);

}  // namespace shapgraph

#endif  // SHAPGRAPH_TRANSFORM_HPP_
