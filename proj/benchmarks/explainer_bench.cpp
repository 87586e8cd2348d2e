// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

// Latency of compiled explainers per scheme and reference count, plus the
// cost of compiling, FLOP counting and the interpreted oracle.

#include <benchmark/benchmark.h>

#include <string>

#include "shapgraph/corpus.hpp"
#include "shapgraph/explainer.hpp"
#include "shapgraph/flops.hpp"
#include "shapgraph/oracle.hpp"

namespace shapgraph {
namespace {

GraphModel named_model(const std::string& name) {
  return name == "demo" ? demo_model() : build_motif(name);
}

void BM_Explain(benchmark::State& state, const std::string& name, Scheme scheme) {
  const GraphModel model = named_model(name);
  const Tensor refs = random_references(model, state.range(0), kCorpusSeed + 1);
  const Tensor x = random_input(model, kCorpusSeed + 2);
  const Explainer explainer(compile(model, refs, scheme));
  for (auto _ : state) benchmark::DoNotOptimize(explainer.explain(x));
}

void BM_Compile(benchmark::State& state, const std::string& name, Scheme scheme) {
  const GraphModel model = named_model(name);
  const Tensor refs = random_references(model, state.range(0), kCorpusSeed + 1);
  for (auto _ : state) benchmark::DoNotOptimize(compile(model, refs, scheme));
}

void BM_Oracle(benchmark::State& state, const std::string& name) {
  const GraphModel model = named_model(name);
  const Tensor refs = random_references(model, state.range(0), kCorpusSeed + 1);
  const Tensor x = random_input(model, kCorpusSeed + 2);
  for (auto _ : state) benchmark::DoNotOptimize(deeplift_oracle(model, x, refs));
}

void BM_CountFlops(benchmark::State& state, const std::string& name) {
  const GraphModel model = named_model(name);
  const Tensor refs = random_references(model, state.range(0), kCorpusSeed + 1);
  const GraphModel graph = compile(model, refs, Scheme::kNaive).graph;
  for (auto _ : state) benchmark::DoNotOptimize(count_flops(graph));
}

void register_all() {
  std::vector<std::string> names = {"demo"};
  for (const auto& tag : motif_tags()) names.push_back(tag);
  for (const auto& name : names) {
    for (Scheme scheme : {Scheme::kOptimized, Scheme::kNaive}) {
      const std::string suffix = name + "/" + std::string(scheme_name(scheme));
      benchmark::RegisterBenchmark(("explain/" + suffix).c_str(), BM_Explain, name, scheme)
          ->Arg(1)
          ->Arg(5)
          ->Arg(16)
          ->Unit(benchmark::kMicrosecond);
      benchmark::RegisterBenchmark(("compile/" + suffix).c_str(), BM_Compile, name, scheme)
          ->Arg(5)
          ->Unit(benchmark::kMillisecond);
    }
    benchmark::RegisterBenchmark(("oracle/" + name).c_str(), BM_Oracle, name)
        ->Arg(5)
        ->Unit(benchmark::kMicrosecond);
    benchmark::RegisterBenchmark(("count_flops/" + name).c_str(), BM_CountFlops, name)
        ->Arg(5)
        ->Unit(benchmark::kMicrosecond);
  }
}

}  // namespace
}  // namespace shapgraph

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  shapgraph::register_all();
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
