// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SHAPGRAPH_GRAD_RULES_HPP_
#define SHAPGRAPH_GRAD_RULES_HPP_

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "shapgraph/graph_builder.hpp"
#include "shapgraph/model.hpp"
#include "shapgraph/shape_inference.hpp"

namespace shapgraph {

inline constexpr double kDefaultEpsAct = 1e-6;
inline constexpr double kDefaultEpsPool = 1e-7;

// Where the rules read forward activations from. The two build schemes
// differ only here: one reads references from a precomputed cache, the
// other from a joint forward pass.
class ActivationSource {
 public:
  virtual ~ActivationSource() = default;
  // Activation of `value` on the explained input (one row).
  virtual std::string target(const std::string& value) = 0;
  // Activations of `value` on the references (reference_rows() rows).
  virtual std::string reference(const std::string& value) = 0;
  // Lifts a reference_rows()-row tensor of rank `rank` to grad_rows() rows.
  virtual std::string expand(const std::string& value, size_t rank) = 0;
  virtual int64_t reference_rows() const = 0;
  virtual int64_t grad_rows() const = 0;
};

struct RuleEnv {
  GraphBuilder& builder;
  ActivationSource& acts;
  const GraphModel& source;  // constant-folded model being explained
  const ShapeMap& shapes;    // its value shapes at batch 1
  const std::set<std::string>& differentiable;
  double eps_act = kDefaultEpsAct;
  double eps_pool = kDefaultEpsPool;
  DType dtype = DType::kFloat64;
};

struct RuleOutput {
  std::vector<Node> new_nodes;
  // Input name -> gradient value; gradients of repeated inputs are summed.
  std::map<std::string, std::string> grad_out;
};

// Ops with a multiplier rule.
bool has_grad_rule(std::string_view op_type);
std::vector<std::string_view> grad_rule_ops();

// Emits the backward nodes of `node`. `grad_in` holds one optional gradient
// per node output (grad_rows() rows each); gradients are produced for every
// input marked true in `pass_grads`.
RuleOutput f_grad(const Node& node, const std::vector<std::optional<std::string>>& grad_in,
                  const std::map<std::string, bool>& pass_grads, RuleEnv& env);

}  // namespace shapgraph

#endif  // SHAPGRAPH_GRAD_RULES_HPP_
