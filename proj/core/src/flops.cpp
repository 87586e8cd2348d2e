// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapgraph/flops.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "shapgraph/error.hpp"
#include "shapgraph/op_attrs.hpp"
#include "shapgraph/shape_inference.hpp"

namespace shapgraph {

namespace {

bool is_forward(const Node& n) {
  return !n.name.starts_with("bwd/") && !n.name.starts_with("out/");
}

int64_t bytes_of(const ValueInfo& v) {
  return element_count(v.shape) * static_cast<int64_t>(dtype_size(v.dtype));
}

}  // namespace

int64_t node_flops(const Node& node, const std::vector<Shape>& inputs,
                   const std::vector<Shape>& outputs, const FlopOptions& options) {
  const std::string& op = node.op_type;
  const int64_t out = outputs.empty() ? 0 : element_count(outputs[0]);
  const int64_t in = inputs.empty() ? 0 : element_count(inputs[0]);
  if (op == "MatMul") return 2 * out * inputs[0].back();
  if (op == "Gemm") {
    const int64_t k = node.attr_int("transA", 0) ? inputs[0][0] : inputs[0][1];
    return 2 * out * k + (inputs.size() > 2 ? out : 0);
  }
  if (op == "Conv") {
    // Every output element takes one multiply-add per filter tap.
    const Shape& w = inputs[1];
    const int64_t taps = element_count(w) / w[0];
    return 2 * taps * out + (inputs.size() > 2 ? out : 0);
  }
  if (op == "Add" || op == "Sub" || op == "Mul" || op == "Div" || op == "Greater" ||
      op == "Where") {
    return out;
  }
  if (op == "Relu" || op == "Sigmoid" || op == "Tanh" || op == "Exp") {
    return options.activation_cost * out;
  }
  if (op == "Softmax") return (options.activation_cost + 3) * out;
  if (op == "MaxPool" || op == "AveragePool") {
    const Shape& s = inputs[0];
    const WindowGeometry g = window_geometry(node, s);
    return (g.window_size() + (op == "AveragePool" ? 1 : 0)) * out;
  }
  if (op == "GlobalMaxPool") return in;
  if (op == "GlobalAveragePool" || op == "ReduceMean") return in + out;
  if (op == "ReduceSum") return in;
  if (op == "BatchNormalization") return 2 * out;
  // Layout and constant ops move data without arithmetic.
  return 0;
}

FlopReport count_flops(const GraphModel& model, int64_t batch, const FlopOptions& options) {
  const ShapeMap shapes = infer_shapes(model, batch);
  FlopReport r;
  for (const auto& [name, v] : shapes) {
    for (int64_t e : v.shape) {
      if (e < 0) throw ShapeError("value '" + name + "' has unresolved extent");
    }
  }

  const std::vector<size_t> order = topological_order(model);
  for (size_t idx : order) {
    const Node& n = model.nodes[idx];
    std::vector<Shape> ins, outs;
    for (const auto& v : n.inputs) {
      if (!v.empty()) ins.push_back(shapes.at(v).shape);
    }
    for (const auto& v : n.outputs) outs.push_back(shapes.at(v).shape);
    NodeFlops nf{n.name, n.op_type, is_forward(n), node_flops(n, ins, outs, options)};
    (nf.forward ? r.forward : r.backward) += nf.flops;
    r.nodes.push_back(std::move(nf));
  }
  r.total = r.forward + r.backward;

  // Row accounting from the explainer metadata; plain graphs run `batch`
  // target rows.
  auto meta = model.metadata.find("scheme");
  auto refs = model.metadata.find("reference_count");
  if (meta != model.metadata.end() && refs != model.metadata.end()) {
    r.reference_count = std::stoll(refs->second);
    if (meta->second == "naive") {
      r.target_passes = r.reference_count;
      r.reference_passes = r.reference_count;
    } else {
      r.target_passes = 1;
    }
  } else {
    r.reference_count = batch;
    r.target_passes = batch;
  }
  r.forward_rows = r.target_passes + r.reference_passes;

  for (const auto& [name, t] : model.initializers) {
    if (name.starts_with("ref/")) r.cache_bytes += static_cast<int64_t>(t.byte_size());
  }

  // Live-range sweep over the forward section. A value is freed after its
  // last forward consumer unless later sections or the outputs still need it.
  std::map<std::string, size_t> last_use;  // position in `order`
  std::set<std::string> pinned;
  for (const auto& o : model.outputs) pinned.insert(o.name);
  for (size_t pos = 0; pos < order.size(); ++pos) {
    const Node& n = model.nodes[order[pos]];
    for (const auto& v : n.inputs) {
      if (is_forward(n)) {
        last_use[v] = pos;
      } else {
        pinned.insert(v);
      }
    }
  }
  int64_t live = 0;
  for (const auto& in : model.inputs) live += bytes_of(shapes.at(in.name));
  r.peak_forward_bytes = live;
  std::set<std::string> freed;
  for (size_t pos = 0; pos < order.size(); ++pos) {
    const Node& n = model.nodes[order[pos]];
    if (!is_forward(n)) continue;
    for (const auto& v : n.outputs) live += bytes_of(shapes.at(v));
    r.peak_forward_bytes = std::max(r.peak_forward_bytes, live);
    for (const auto& v : n.inputs) {
      if (v.empty() || model.initializers.count(v) || model.find_input(v) || pinned.count(v) ||
          freed.count(v) || last_use.at(v) != pos) {
        continue;
      }
      live -= bytes_of(shapes.at(v));
      freed.insert(v);
    }
  }
  return r;
}

double memory_proxy_bound(const FlopReport& optimized, const FlopReport& naive) {
  if (naive.reference_count <= 0) throw ValidationError("memory bound needs a reference count");
  return static_cast<double>(naive.peak_forward_bytes) /
             static_cast<double>(2 * naive.reference_count) +
         static_cast<double>(optimized.cache_bytes);
}

std::string format_flop_report(const FlopReport& r, bool per_node) {
  std::ostringstream os;
  os << "B=" << r.reference_count << " total=" << r.total << " forward=" << r.forward
     << " backward=" << r.backward << " forward_rows=" << r.forward_rows << " (target "
     << r.target_passes << ", reference " << r.reference_passes << ")"
     << " peak_forward_bytes=" << r.peak_forward_bytes << " cache_bytes=" << r.cache_bytes << "\n";
  if (per_node) {
    for (const auto& n : r.nodes) {
      os << "  " << std::left << std::setw(40) << n.name << std::setw(20) << n.op_type
         << (n.forward ? "fwd " : "bwd ") << n.flops << "\n";
    }
  }
  return os.str();
}

std::string flop_report_json(const FlopReport& r) {
  nlohmann::json j;
  j["reference_count"] = r.reference_count;
  j["total"] = r.total;
  j["forward"] = r.forward;
  j["backward"] = r.backward;
  j["forward_rows"] = r.forward_rows;
  j["target_passes"] = r.target_passes;
  j["reference_passes"] = r.reference_passes;
  j["peak_forward_bytes"] = r.peak_forward_bytes;
  j["cache_bytes"] = r.cache_bytes;
  j["nodes"] = nlohmann::json::array();
  for (const auto& n : r.nodes) {
    j["nodes"].push_back(
        {{"name", n.name}, {"op_type", n.op_type}, {"forward", n.forward}, {"flops", n.flops}});
  }
  return j.dump(2);
}

}  // namespace shapgraph
