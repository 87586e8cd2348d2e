// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

// shapgraph: compile, run, verify, bench and cost explainer graphs.
// Exit codes: 0 success, 2 compile/validation error, 3 verification failure.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "shapgraph/backward_graph.hpp"
#include "shapgraph/bench.hpp"
#include "shapgraph/corpus.hpp"
#include "shapgraph/error.hpp"
#include "shapgraph/explainer.hpp"
#include "shapgraph/flops.hpp"
#include "shapgraph/oracle.hpp"
#include "shapgraph/serialize.hpp"

namespace fs = std::filesystem;
using namespace shapgraph;

namespace {

constexpr int kOk = 0;
constexpr int kCompileError = 2;
constexpr int kVerifyFailed = 3;

Scheme scheme_flag(const std::string& s) {
  if (s == "opt") return Scheme::kOptimized;
  return parse_scheme(s);
}

Tensor first_rows(const Tensor& t, int64_t n) {
  if (n > t.shape()[0]) {
    throw ValidationError("reference file has " + std::to_string(t.shape()[0]) + " rows, need " +
                          std::to_string(n));
  }
  Shape s = t.shape();
  s[0] = n;
  const auto v = t.to_doubles();
  const auto count = static_cast<std::ptrdiff_t>(element_count(s));
  return Tensor::from_values(t.dtype(), s, std::vector<double>(v.begin(), v.begin() + count));
}

std::map<std::string, int> census(const GraphModel& g, const std::string& prefix) {
  std::map<std::string, int> c;
  for (const auto& n : g.nodes) {
    if (prefix.empty() || n.name.starts_with(prefix)) ++c[n.op_type];
  }
  return c;
}

void print_census(const ExplainerArtifact& art) {
  size_t fwd = 0, bwd = 0;
  for (const auto& n : art.graph.nodes) (n.name.starts_with("fwd/") ? fwd : bwd)++;
  int64_t cache = 0;
  for (const auto& [name, t] : art.graph.initializers) {
    if (name.starts_with("ref/")) cache += static_cast<int64_t>(t.byte_size());
  }
  std::cout << "scheme " << scheme_name(art.info.scheme) << ", B=" << art.info.reference_count
            << "\nnodes: " << art.graph.nodes.size() << " (forward " << fwd << ", backward " << bwd
            << ")\ncache bytes: " << cache << "\ncensus:";
  for (const auto& [op, n] : census(art.graph, "")) std::cout << ' ' << op << '=' << n;
  std::cout << "\n";
}

struct CompileArgs {
  std::string model, refs, out, scheme = "opt", dtype = "f64";
  int64_t output_index = 0;
  double eps_act = kDefaultEpsAct, eps_pool = kDefaultEpsPool;
  bool dump_backward = false;
};

int cmd_compile(const CompileArgs& a) {
  GraphModel model = read_model_file(a.model);
  Tensor refs = read_tensor_file(a.refs);
  const DType dt = a.dtype == "f32" ? DType::kFloat32 : DType::kFloat64;
  model = cast_model(model, dt);
  refs = refs.cast(dt);
  CompileOptions o;
  o.output_index = a.output_index;
  o.eps_act = a.eps_act;
  o.eps_pool = a.eps_pool;
  if (a.dump_backward) {
    const PreparedModel p = prepare_model(model);
    std::cout << dump_backward_graph(p.graph, p.folded);
  }
  const auto art = compile(model, refs, scheme_flag(a.scheme), o);
  save_artifact(a.out, art);
  print_census(art);
  std::cout << "wrote " << a.out << "\n";
  return kOk;
}

struct RunArgs {
  std::string explainer, input, out, pgm;
};

int cmd_run(const RunArgs& a) {
  const auto art = load_artifact(a.explainer);
  const Attribution r = explain(art, read_tensor_file(a.input));
  write_tensor_file(a.out, r.phi);
  if (!a.pgm.empty()) write_file(a.pgm, attribution_pgm(r.phi));
  std::cout << "prediction[" << art.info.output_index << "] = " << format_double(r.output_value)
            << "\ncompleteness residual = " << r.residual << "\nwrote " << a.out << "\n";
  return kOk;
}

struct VerifyArgs {
  std::string explainer, input, against = "oracle", model, refs, other;
  double atol = 1e-8, rtol = 1e-5, min_fraction = 0.99, max_residual = 1e-6;
};

int cmd_verify(const VerifyArgs& a) {
  const auto art = load_artifact(a.explainer);
  bool ok = true;
  if (!verify_build_digest(art)) {
    std::cout << "build digest mismatch: artifact was modified after compilation\n";
    ok = false;
  }
  const Tensor x = read_tensor_file(a.input);
  const Attribution r = explain(art, x);
  const double delta = r.output_value - art.info.reference_output_mean;
  const double bound = a.max_residual * std::max(1.0, std::abs(delta));
  std::cout << "completeness residual " << r.residual << " (bound " << bound << ")\n";
  ok = ok && r.residual <= bound;

  Tensor other;
  if (a.against == "oracle") {
    if (a.model.empty() || a.refs.empty()) {
      throw ValidationError("--against oracle needs --model and --refs");
    }
    OracleOptions o;
    o.output_name = art.info.explained_output;
    o.output_index = art.info.output_index;
    o.eps_act = art.info.eps_act;
    o.eps_pool = art.info.eps_pool;
    const GraphModel model = cast_model(read_model_file(a.model), DType::kFloat64);
    other = deeplift_oracle(model, x.cast(DType::kFloat64),
                            read_tensor_file(a.refs).cast(DType::kFloat64), o);
  } else if (a.against == "naive-artifact") {
    if (a.other.empty()) throw ValidationError("--against naive-artifact needs --other");
    other = explain(load_artifact(a.other), x).phi;
  } else {
    throw ValidationError("unknown --against '" + a.against + "'");
  }
  const auto rep = compare_attributions(r.phi.cast(DType::kFloat64), other.cast(DType::kFloat64),
                                        a.atol, a.rtol);
  std::cout << "closeness: " << rep.within << "/" << rep.count << " within (fraction "
            << rep.fraction << ", atol " << rep.atol << ", rtol " << rep.rtol << ")\n"
            << "max |diff| " << rep.max_abs_diff << ", worst index " << rep.worst_index << " ("
            << rep.worst_a << " vs " << rep.worst_b << ")\n";
  ok = ok && rep.fraction >= a.min_fraction;
  std::cout << (ok ? "verification passed" : "verification FAILED") << "\n";
  return ok ? kOk : kVerifyFailed;
}

struct BenchArgs {
  std::string model, refs, schemes = "both", json;
  int64_t images = 100, refs_count = 0;
  uint64_t seed = 42;
};

int cmd_bench(const BenchArgs& a) {
  const GraphModel model = read_model_file(a.model);
  Tensor refs = read_tensor_file(a.refs);
  if (a.refs_count > 0) refs = first_rows(refs, a.refs_count);
  std::vector<Tensor> images;
  for (int64_t i = 0; i < a.images; ++i) {
    images.push_back(
        random_input(model, a.seed + static_cast<uint64_t>(i)).cast(model.inputs[0].dtype));
  }
  std::vector<Scheme> schemes;
  if (a.schemes == "both") {
    schemes = {Scheme::kOptimized, Scheme::kNaive};
  } else {
    schemes = {scheme_flag(a.schemes)};
  }
  std::vector<BenchReport> reports;
  for (Scheme s : schemes) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto art = compile(model, refs, s);
    const double compile_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    BenchReport r = bench_explainer(art, images);
    r.compile_ms = compile_ms;
    std::cout << format_bench_report(r) << "\n";
    reports.push_back(std::move(r));
  }
  if (reports.size() == 2 && reports[0].mean_ms && reports[1].mean_ms) {
    std::cout << "speedup (naive / optimized mean) " << *reports[1].mean_ms / *reports[0].mean_ms
              << "\n";
  }
  if (!a.json.empty()) write_file(a.json, bench_report_json(reports));
  return kOk;
}

struct FlopsArgs {
  std::string model, refs, json;
  std::vector<int64_t> b_range{1, 2, 5, 16, 64};
  int64_t activation_cost = 4;
  uint64_t seed = 42;
  bool per_node = false;
};

int cmd_flops(const FlopsArgs& a) {
  const GraphModel model = read_model_file(a.model);
  int64_t max_b = 0;
  for (int64_t b : a.b_range) max_b = std::max(max_b, b);
  const Tensor pool =
      a.refs.empty() ? random_references(model, max_b, a.seed) : read_tensor_file(a.refs);
  FlopOptions fo;
  fo.activation_cost = a.activation_cost;
  nlohmann::json doc = nlohmann::json::array();
  std::cout
      << "B\toptimized\tnaive\tgap\tfwd_rows(opt/naive)\tpeak_fwd_bytes(opt/naive)\tcache_bytes\t"
         "mem_bound\tmem_ok\n";
  for (int64_t b : a.b_range) {
    const Tensor refs = first_rows(pool, b);
    const FlopReport o = count_flops(compile(model, refs, Scheme::kOptimized).graph, 1, fo);
    const FlopReport n = count_flops(compile(model, refs, Scheme::kNaive).graph, 1, fo);
    const double bound = memory_proxy_bound(o, n);
    std::cout << b << '\t' << o.total << '\t' << n.total << '\t' << n.total - o.total << '\t'
              << o.forward_rows << '/' << n.forward_rows << '\t' << o.peak_forward_bytes << '/'
              << n.peak_forward_bytes << '\t' << o.cache_bytes << '\t' << bound << '\t'
              << (static_cast<double>(o.peak_forward_bytes) <= bound ? "yes" : "no") << "\n";
    if (a.per_node) std::cout << format_flop_report(o, true) << format_flop_report(n, true);
    doc.push_back({{"B", b},
                   {"optimized", nlohmann::json::parse(flop_report_json(o))},
                   {"naive", nlohmann::json::parse(flop_report_json(n))},
                   {"memory_bound_bytes", bound}});
  }
  if (!a.json.empty()) write_file(a.json, doc.dump(2));
  return kOk;
}

struct CorpusArgs {
  std::string out = "corpus";
  uint64_t seed = kCorpusSeed;
  int64_t refs_count = 5;
  int64_t samples = 20;
};

int cmd_corpus(const CorpusArgs& a) {
  fs::create_directories(a.out);
  const auto corpus = build_corpus(a.seed, a.refs_count, static_cast<size_t>(a.samples));
  const fs::path dir(a.out);
  for (const auto& e : corpus) {
    write_model_file(dir / (e.motif + ".sgm"), e.model);
    write_tensor_file(dir / (e.motif + ".refs.stn"), e.references);
    write_tensor_file(dir / (e.motif + ".zero_refs.stn"), zero_references(e.model, 1));
    for (size_t i = 0; i < e.samples.size(); ++i) {
      write_tensor_file(dir / (e.motif + ".x" + std::to_string(i) + ".stn"), e.samples[i]);
    }
  }
  const GraphModel demo = demo_model(a.seed);
  write_model_file(dir / "demo.sgm", demo);
  write_tensor_file(dir / "demo.refs.stn", random_references(demo, a.refs_count, a.seed + 1));
  write_tensor_file(dir / "demo.x.stn", random_input(demo, a.seed + 2));
  const std::string cov = format_coverage(op_coverage(corpus));
  write_file(dir / "coverage.tsv", cov);
  std::cout << cov << "wrote " << corpus.size() << " corpus entries and the demo model to " << a.out
            << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shapgraph: one-shot DeepLIFT/Shapley explainer graphs"};
  app.require_subcommand(1);

  CompileArgs ca;
  auto* c = app.add_subcommand("compile", "Compile a model and references into an explainer");
  c->add_option("--model", ca.model, "Model document (.sgm)")->required();
  c->add_option("--refs", ca.refs, "Reference tensor [B, ...] (.stn)")->required();
  c->add_option("--output-index", ca.output_index, "Explained output coordinate")
      ->capture_default_str();
  c->add_option("--scheme", ca.scheme, "opt|naive")
      ->check(CLI::IsMember({"opt", "optimized", "naive"}));
  c->add_option("--eps-act", ca.eps_act, "Rescale threshold")->capture_default_str();
  c->add_option("--eps-pool", ca.eps_pool, "MaxPool threshold")->capture_default_str();
  c->add_option("--dtype", ca.dtype, "f32|f64")->check(CLI::IsMember({"f32", "f64"}));
  c->add_option("--out", ca.out, "Artifact path")->required();
  c->add_flag("--dump-backward", ca.dump_backward, "Print the backward adjacency");

  RunArgs ra;
  auto* r = app.add_subcommand("run", "Explain one input with an artifact");
  r->add_option("--explainer", ra.explainer, "Compiled artifact (.sgm)")->required();
  r->add_option("--input", ra.input, "Input tensor [1, ...]")->required();
  r->add_option("--out", ra.out, "Attribution tensor path")->required();
  r->add_option("--pgm", ra.pgm, "Optional grayscale heat map");

  VerifyArgs va;
  auto* v = app.add_subcommand("verify", "Check an artifact's attributions");
  v->add_option("--explainer", va.explainer, "Compiled artifact (.sgm)")->required();
  v->add_option("--input", va.input, "Input tensor [1, ...]")->required();
  v->add_option("--against", va.against, "oracle|naive-artifact")
      ->check(CLI::IsMember({"oracle", "naive-artifact"}));
  v->add_option("--model", va.model, "Source model (oracle)");
  v->add_option("--refs", va.refs, "References (oracle)");
  v->add_option("--other", va.other, "Second artifact (naive-artifact)");
  v->add_option("--atol", va.atol, "Absolute tolerance")->capture_default_str();
  v->add_option("--rtol", va.rtol, "Relative tolerance")->capture_default_str();
  v->add_option("--min-fraction", va.min_fraction, "Required pass fraction")->capture_default_str();
  v->add_option("--max-residual", va.max_residual, "Relative completeness tolerance")
      ->capture_default_str();

  BenchArgs ba;
  auto* b = app.add_subcommand("bench", "Per-image latency of both schemes");
  b->add_option("--model", ba.model, "Model document (.sgm)")->required();
  b->add_option("--refs", ba.refs, "Reference tensor [B, ...] (.stn)")->required();
  b->add_option("--refs-count", ba.refs_count, "Use the first B reference rows");
  b->add_option("--images", ba.images, "Images to explain per scheme")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  b->add_option("--schemes", ba.schemes, "both|opt|naive")
      ->check(CLI::IsMember({"both", "opt", "optimized", "naive"}));
  b->add_option("--seed", ba.seed, "Input RNG seed")->capture_default_str();
  b->add_option("--json", ba.json, "Machine-readable report path");

  FlopsArgs fa;
  auto* f = app.add_subcommand("flops", "Analytic FLOP and memory estimates over B");
  f->add_option("--model", fa.model, "Model document (.sgm)")->required();
  f->add_option("--refs", fa.refs, "Reference pool (random if omitted)");
  f->add_option("--b-range", fa.b_range, "Reference counts, comma separated")
      ->capture_default_str()
      ->delimiter(',');
  f->add_option("--activation-cost", fa.activation_cost, "FLOPs per activation element")
      ->capture_default_str();
  f->add_option("--seed", fa.seed, "Reference RNG seed")->capture_default_str();
  f->add_option("--json", fa.json, "Machine-readable report path");
  f->add_flag("--per-node", fa.per_node, "Print per-node costs");

  CorpusArgs co;
  auto* k = app.add_subcommand("corpus", "Write the generated corpus as fixtures");
  k->add_option("--out", co.out, "Output directory")->capture_default_str();
  k->add_option("--seed", co.seed, "Corpus seed")->capture_default_str();
  k->add_option("--refs-count", co.refs_count, "Reference rows per entry")->capture_default_str();
  k->add_option("--samples", co.samples, "Inputs per entry")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kCompileError;
  }

  try {
    if (*c) return cmd_compile(ca);
    if (*r) return cmd_run(ra);
    if (*v) return cmd_verify(va);
    if (*b) return cmd_bench(ba);
    if (*f) return cmd_flops(fa);
    if (*k) return cmd_corpus(co);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCompileError;
  }
  return kOk;
}
