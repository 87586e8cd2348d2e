// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 iff all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "shapgraph/bench.hpp"
#include "shapgraph/corpus.hpp"
#include "shapgraph/explainer.hpp"
#include "shapgraph/flops.hpp"
#include "shapgraph/oracle.hpp"
#include "support/harness.hpp"

namespace sg = shapgraph;
using sg::GraphBuilder;
using sg::GraphModel;
using sg::Scheme;
using sg::Tensor;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::vector<double> column(const GraphModel& m, const Tensor& x, int64_t index = 0) {
  const Tensor y = sg::execute(m, {{m.inputs[0].name, x}}).outputs.at(m.outputs[0].name);
  const int64_t per_row = y.size() / y.shape()[0];
  std::vector<double> v;
  for (int64_t b = 0; b < y.shape()[0]; ++b) v.push_back(y.at(b * per_row + index));
  return v;
}

double delta_mean(const GraphModel& m, const Tensor& x, const Tensor& refs) {
  const double yx = column(m, x)[0];
  double mean = 0;
  const auto yr = column(m, refs);
  for (double v : yr) mean += yx - v;
  return mean / static_cast<double>(yr.size());
}

double phi_sum(const Tensor& phi) {
  double s = 0;
  for (int64_t i = 0; i < phi.size(); ++i) s += phi.at(i);
  return s;
}

// 1. Summation-to-delta over the corpus.
Outcome completeness() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0;
  int checked = 0;
  for (const auto& e : sg::build_corpus(sg::kCorpusSeed, 5, 20)) {
    const sg::Explainer ex(sg::compile(e.model, e.references));
    for (const Tensor& x : e.samples) {
      const double want = delta_mean(e.model, x, e.references);
      const double err =
          std::abs(phi_sum(ex.explain(x).phi) - want) / std::max(1.0, std::abs(want));
      worst = std::max(worst, err);
      ++checked;
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream os;
  os << checked << " explanations, worst scaled residual " << worst << ", " << secs << " s";
  return {worst <= 1e-6 && secs < 120.0, os.str()};
}

// 2. Optimized vs naive closeness, float64 and float32.
Outcome equivalence() {
  double f64 = 1.0, f32 = 1.0;
  for (const auto& e : sg::build_corpus(sg::kCorpusSeed, 5, 20)) {
    for (sg::DType dt : {sg::DType::kFloat64, sg::DType::kFloat32}) {
      const GraphModel m = sg::cast_model(e.model, dt);
      const sg::Explainer opt(sg::compile(m, e.references.cast(dt), Scheme::kOptimized));
      const sg::Explainer naive(sg::compile(m, e.references.cast(dt), Scheme::kNaive));
      for (const Tensor& x : e.samples) {
        const auto rep = sg::compare_attributions(opt.explain(x.cast(dt)).phi,
                                                  naive.explain(x.cast(dt)).phi, 1e-8, 1e-5);
        double& f = dt == sg::DType::kFloat64 ? f64 : f32;
        f = std::min(f, rep.fraction);
      }
    }
  }
  std::ostringstream os;
  os << "min pass fraction float64 " << f64 << ", float32 " << f32;
  return {f64 == 1.0 && f32 >= 0.99, os.str()};
}

// 3. Explainer vs oracle on the corpus and every micro-net.
Outcome oracle_agreement() {
  double worst = 0;
  int cases = 0;
  auto check = [&](const GraphModel& m, const Tensor& refs, const Tensor& x) {
    const auto rep = sg::compare_attributions(sg::explain(sg::compile(m, refs), x).phi,
                                              sg::deeplift_oracle(m, x, refs), 0, 0);
    worst = std::max(worst, rep.max_abs_diff);
    ++cases;
  };
  for (const auto& e : sg::build_corpus(sg::kCorpusSeed, 5, 5)) {
    for (const Tensor& x : e.samples) check(e.model, e.references, x);
  }
  std::set<std::string> rules;
  for (const auto& net : sg::micro_nets()) {
    for (uint64_t s = 0; s < 3; ++s) {
      check(net.model, sg::random_references(net.model, 5, 10 + s),
            sg::random_input(net.model, 20 + s));
    }
    for (const auto& n : net.model.nodes) rules.insert(n.op_type);
  }
  size_t covered = 0;
  for (auto op : sg::grad_rule_ops()) covered += rules.count(std::string(op));
  std::ostringstream os;
  os << cases << " cases, " << covered << "/" << sg::grad_rule_ops().size()
     << " rule ops in micro-nets, max |diff| " << worst;
  return {worst <= 1e-10 && covered == sg::grad_rule_ops().size(), os.str()};
}

// 4. Hand-derived rule vectors.
Outcome rule_vectors() {
  using sg::testing::backprop;
  using sg::testing::rows;
  using sg::testing::tiny_model;
  double worst = 0;
  auto note = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };

  const GraphModel pool = tiny_model({1, 1, 2}, [](GraphBuilder& b) {
    return b.add("MaxPool", {"X"}, {{"kernel_shape", std::vector<int64_t>{1, 2}}});
  });
  const Tensor mp = backprop(pool, rows({1, 1, 1, 2}, {3, 1}), rows({1, 1, 1, 2}, {0, 2}),
                             rows({1, 1, 1, 1}, {1}))
                        .input_grad;
  note(mp.at(0), 1.0 / 3.0);
  note(mp.at(1), 0.0);

  const GraphModel mul = tiny_model({2}, [](GraphBuilder& b) {
    auto p = b.add_multi("Split", {"X"}, 2,
                         {{"axis", int64_t{1}}, {"split", std::vector<int64_t>{1, 1}}});
    return b.add("Mul", {p[0], p[1]});
  });
  const Tensor mg =
      backprop(mul, rows({1, 2}, {2, 3}), rows({1, 2}, {0, 1}), rows({1, 1}, {1})).input_grad;
  note(mg.at(0) * 2 + mg.at(1) * 2, 6.0);

  const GraphModel sig = tiny_model({1}, [](GraphBuilder& b) { return b.add("Sigmoid", {"X"}); });
  note(backprop(sig, rows({1, 1}, {0}), rows({1, 1}, {0}), rows({1, 1}, {1})).input_grad.at(0),
       0.25);

  const GraphModel bn = tiny_model({1, 1, 1}, [](GraphBuilder& b) {
    using sg::testing::weight;
    return b.add(
        "BatchNormalization",
        {"X", weight(b, {1}, {2}), weight(b, {1}, {0}), weight(b, {1}, {0}), weight(b, {1}, {3})},
        {{"epsilon", 1.0}});
  });
  note(backprop(bn, rows({1, 1, 1, 1}, {0.7}), rows({1, 1, 1, 1}, {0.1}), rows({1, 1, 1, 1}, {1}))
           .input_grad.at(0),
       1.0);
  std::ostringstream os;
  os << "MaxPool [" << mp.at(0) << ", " << mp.at(1) << "], Mul completeness "
     << mg.at(0) * 2 + mg.at(1) * 2 << ", max |error| " << worst;
  return {worst <= 1e-12, os.str()};
}

// 5. Linear-rule gradients vs central differences.
Outcome finite_differences() {
  const std::set<std::string> linear{"matmul",  "gemm",          "conv",
                                     "avgpool", "globalavgpool", "mul-const",
                                     "add-sub", "batchnorm",     "transpose-reshape",
                                     "flatten", "where"};
  double worst = 0;
  int n = 0;
  for (const auto& net : sg::micro_nets()) {
    if (!linear.count(net.rule)) continue;
    for (uint64_t s = 0; s < 3; ++s) {
      const Tensor x = sg::random_input(net.model, 30 + s);
      const Tensor y = sg::execute(net.model, {{"X", x}}).outputs.begin()->second;
      sg::Rng rng(40 + s);
      const Tensor g = rng.tensor(sg::DType::kFloat64, y.shape(), -1, 1);
      const Tensor got =
          sg::testing::backprop(net.model, x, sg::random_references(net.model, 1, 50 + s), g)
              .input_grad;
      worst = std::max(worst, sg::testing::max_rel_diff(
                                  got, sg::testing::weighted_sum_gradient(net.model, x, g)));
      ++n;
    }
  }
  std::ostringstream os;
  os << n << " checks over " << linear.size() << " linear rules, worst relative " << worst;
  return {worst <= 1e-6, os.str()};
}

int count_op(const GraphModel& g, const std::string& op) {
  int n = 0;
  for (const auto& node : g.nodes) n += node.op_type == op;
  return n;
}

// 6. Structural claims on the demo model, B=5.
Outcome structure() {
  const GraphModel m = sg::demo_model();
  const Tensor refs = sg::random_references(m, 5, 1);
  const auto opt = sg::compile(m, refs, Scheme::kOptimized);
  const auto naive = sg::compile(m, refs, Scheme::kNaive);
  const auto fo = sg::count_flops(opt.graph), fn = sg::count_flops(naive.graph);
  auto greater_rows = [](const GraphModel& g) {
    const auto s = sg::infer_shapes(g, 1);
    for (const auto& n : g.nodes) {
      if (n.op_type == "Greater") return s.at(n.inputs[0]).shape;
    }
    return sg::Shape{};
  };
  const sg::Shape go = greater_rows(opt.graph), gn = greater_rows(naive.graph);
  const int split_diff = count_op(naive.graph, "Split") - count_op(opt.graph, "Split");
  std::ostringstream os;
  os << "forward rows " << fo.forward_rows << " vs " << fn.forward_rows << ", Tile "
     << count_op(opt.graph, "Tile") << " vs " << count_op(naive.graph, "Tile") << ", Split diff "
     << split_diff << ", Greater on " << sg::shape_to_string(go) << " vs "
     << sg::shape_to_string(gn);
  const bool ok = fo.forward_rows == 1 && fn.forward_rows == 10 &&
                  count_op(opt.graph, "Tile") == 0 && count_op(naive.graph, "Tile") > 0 &&
                  split_diff == 2 && go == sg::Shape{5, 1} && gn == sg::Shape{10, 1};
  return {ok, os.str()};
}

// 7. FLOP reduction with a nondecreasing gap.
Outcome flops() {
  bool ok = true;
  std::ostringstream os;
  for (const auto& tag : sg::motif_tags()) {
    const GraphModel m = sg::build_motif(tag);
    int64_t last = -1;
    os << tag << " gap";
    for (int64_t b : {1, 2, 5, 16, 64}) {
      const Tensor refs = sg::random_references(m, b, 7);
      const int64_t o = sg::count_flops(sg::compile(m, refs, Scheme::kOptimized).graph).total;
      const int64_t n = sg::count_flops(sg::compile(m, refs, Scheme::kNaive).graph).total;
      ok = ok && o < n && n - o >= last;
      last = n - o;
      os << " " << last;
    }
    os << "; ";
  }
  return {ok, os.str()};
}

// 8. Mean per-image latency, B=16, N=100.
Outcome latency() {
  bool ok = true;
  std::ostringstream os;
  for (const auto& e : sg::build_corpus(sg::kCorpusSeed, 16, 100)) {
    const auto o =
        sg::bench_explainer(sg::compile(e.model, e.references, Scheme::kOptimized), e.samples);
    const auto n =
        sg::bench_explainer(sg::compile(e.model, e.references, Scheme::kNaive), e.samples);
    const double ratio = *n.mean_ms / *o.mean_ms;
    ok = ok && *o.mean_ms <= *n.mean_ms / 1.2;
    os << e.motif << " " << *o.mean_ms << " ms vs " << *n.mean_ms << " ms (x" << ratio << "); ";
  }
  return {ok, os.str()};
}

// 9. One-shot artifact round trip.
Outcome one_shot() {
  bool ok = true;
  const auto dir = std::filesystem::temp_directory_path();
  for (const auto& e : sg::build_corpus(sg::kCorpusSeed, 5, 2)) {
    for (Scheme s : {Scheme::kOptimized, Scheme::kNaive}) {
      const auto art = sg::compile(e.model, e.references, s);
      const auto path = dir / ("shapgraph_accept_" + e.motif + ".sgm");
      sg::save_artifact(path, art);
      const auto back = sg::load_artifact(path);
      std::filesystem::remove(path);
      ok = ok && back.graph.inputs.size() == 1 && back.graph.inputs[0].name == "X" &&
           sg::verify_build_digest(back);
      for (const Tensor& x : e.samples) {
        const auto a = sg::explain(art, x), b = sg::explain(back, x);
        ok = ok && a.phi == b.phi && a.prediction == b.prediction;
      }
    }
  }
  return {ok, "4 motifs x 2 schemes, save/load/explain bit-identical, single input X"};
}

// 10. Analytic forward memory estimate, demo model, B=5.
Outcome memory() {
  const GraphModel m = sg::demo_model();
  const Tensor refs = sg::random_references(m, 5, 1);
  const auto o = sg::count_flops(sg::compile(m, refs, Scheme::kOptimized).graph);
  const auto n = sg::count_flops(sg::compile(m, refs, Scheme::kNaive).graph);
  const double bound = sg::memory_proxy_bound(o, n);
  std::ostringstream os;
  os << "optimized peak " << o.peak_forward_bytes << " B, naive peak " << n.peak_forward_bytes
     << " B, cache " << o.cache_bytes << " B, bound " << bound << " B";
  return {static_cast<double>(o.peak_forward_bytes) <= bound, os.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"summation-to-delta", completeness},
      {"optimized/naive equivalence", equivalence},
      {"oracle equivalence", oracle_agreement},
      {"per-rule unit vectors", rule_vectors},
      {"finite-difference checks", finite_differences},
      {"structural optimization", structure},
      {"FLOP reduction", flops},
      {"latency direction", latency},
      {"one-shot deployment", one_shot},
      {"memory proxy", memory},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
