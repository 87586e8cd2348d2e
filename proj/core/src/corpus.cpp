// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapgraph/corpus.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "shapgraph/error.hpp"
#include "shapgraph/graph_builder.hpp"

namespace shapgraph {

Tensor Rng::tensor(DType dtype, const Shape& shape, double lo, double hi) {
  std::vector<double> values(static_cast<size_t>(element_count(shape)));
  for (auto& v : values) v = uniform(lo, hi);
  return Tensor::from_values(dtype, shape, values);
}

namespace {

constexpr DType kF64 = DType::kFloat64;

// Small layer vocabulary on top of GraphBuilder. Weights are He-style
// uniform so activations neither explode nor vanish through ~10 layers.
class ModelMaker {
 public:
  ModelMaker(const std::string& name, Shape input, uint64_t seed) : rng_(seed), b_(model_, "") {
    model_.name = name;
    input.insert(input.begin(), kSymbolicBatch);
    model_.inputs.push_back({"X", kF64, input});
  }

  std::string weights(const Shape& shape, int64_t fan_in, const std::string& hint) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    return b_.constant(rng_.tensor(kF64, shape, -bound, bound), hint);
  }
  std::string uniform(const Shape& shape, double lo, double hi, const std::string& hint) {
    return b_.constant(rng_.tensor(kF64, shape, lo, hi), hint);
  }
  std::string constant(const Tensor& t, const std::string& hint) { return b_.constant(t, hint); }

  std::string conv(const std::string& x, int64_t cin, int64_t cout, int64_t k, int64_t stride,
                   int64_t pad, bool bias = true) {
    std::vector<std::string> ins{x, weights({cout, cin, k, k}, cin * k * k, "w")};
    if (bias) ins.push_back(uniform({cout}, -0.1, 0.1, "b"));
    return b_.add("Conv", ins,
                  {{"kernel_shape", std::vector<int64_t>{k, k}},
                   {"strides", std::vector<int64_t>{stride, stride}},
                   {"pads", std::vector<int64_t>{pad, pad, pad, pad}}});
  }
  std::string batch_norm(const std::string& x, int64_t c) {
    return b_.add("BatchNormalization",
                  {x, uniform({c}, 0.5, 1.5, "gamma"), uniform({c}, -0.2, 0.2, "beta"),
                   uniform({c}, -0.2, 0.2, "mean"), uniform({c}, 0.5, 1.5, "var")},
                  {{"epsilon", 1e-5}});
  }
  std::string pool(const std::string& op, const std::string& x, int64_t k, int64_t stride,
                   int64_t pad) {
    return b_.add(op, {x},
                  {{"kernel_shape", std::vector<int64_t>{k, k}},
                   {"strides", std::vector<int64_t>{stride, stride}},
                   {"pads", std::vector<int64_t>{pad, pad, pad, pad}}});
  }
  std::string gemm(const std::string& x, int64_t in, int64_t out) {
    return b_.add("Gemm", {x, weights({out, in}, in, "fc"), uniform({out}, -0.1, 0.1, "fcb")},
                  {{"transB", int64_t{1}}});
  }
  std::string op(const std::string& type, std::vector<std::string> ins, Attributes attrs = {}) {
    return b_.add(type, std::move(ins), std::move(attrs));
  }
  std::vector<std::string> multi(const std::string& type, std::vector<std::string> ins, size_t n,
                                 Attributes attrs = {}) {
    return b_.add_multi(type, std::move(ins), n, std::move(attrs));
  }

  GraphModel finish(const std::string& y, Shape out) {
    out.insert(out.begin(), kSymbolicBatch);
    model_.outputs.push_back({y, kF64, out});
    validate(model_);
    return model_;
  }

 private:
  GraphModel model_;
  Rng rng_;
  GraphBuilder b_;
};

GraphModel plain_deep(uint64_t seed) {
  ModelMaker m("plain-deep", {3, 16, 16}, seed);
  std::string h = "X";
  int64_t c = 3;
  for (int64_t width : {8, 12, 16}) {
    h = m.op("Relu", {m.conv(h, c, width, 3, 1, 1)});
    h = m.op("Relu", {m.conv(h, width, width, 3, 1, 1)});
    h = m.pool("MaxPool", h, 2, 2, 0);
    c = width;
  }
  h = m.op("Flatten", {h}, {{"axis", int64_t{1}}});  // 16 x 2 x 2
  h = m.op("Relu", {m.gemm(h, 64, 32)});
  h = m.gemm(h, 32, 10);
  return m.finish(m.op("Softmax", {h}, {{"axis", int64_t{-1}}}), {10});
}

std::string residual_block(ModelMaker& m, const std::string& x, int64_t cin, int64_t cout,
                           int64_t stride) {
  std::string a = m.op("Relu", {m.batch_norm(m.conv(x, cin, cout, 3, stride, 1, false), cout)});
  a = m.batch_norm(m.conv(a, cout, cout, 3, 1, 1, false), cout);
  const std::string skip = (cin == cout && stride == 1) ? x : m.conv(x, cin, cout, 1, stride, 0);
  return m.op("Relu", {m.op("Add", {a, skip})});
}

GraphModel residual_add(uint64_t seed) {
  ModelMaker m("residual-add", {3, 16, 16}, seed);
  std::string h = m.op("Relu", {m.batch_norm(m.conv("X", 3, 8, 3, 1, 1, false), 8)});
  h = m.pool("MaxPool", h, 3, 2, 1);  // overlapping windows, 8 x 8
  h = residual_block(m, h, 8, 8, 1);
  h = residual_block(m, h, 8, 16, 2);  // 4 x 4
  h = m.op("GlobalAveragePool", {h});
  h = m.op("Flatten", {h}, {{"axis", int64_t{1}}});
  return m.finish(m.gemm(h, 16, 10), {10});
}

GraphModel dense_concat(uint64_t seed) {
  ModelMaker m("dense-concat", {3, 16, 16}, seed);
  const std::string c0 = m.op("Relu", {m.conv("X", 3, 8, 3, 1, 1)});
  const std::string c1 = m.op("Relu", {m.conv(c0, 8, 4, 3, 1, 1)});
  const std::string cat1 = m.op("Concat", {c0, c1}, {{"axis", int64_t{1}}});
  const std::string c2 = m.op("Tanh", {m.conv(cat1, 12, 4, 3, 1, 1)});
  const std::string cat2 = m.op("Concat", {c0, c1, c2}, {{"axis", int64_t{1}}});
  std::string h = m.conv(cat2, 16, 8, 1, 1, 0);
  h = m.pool("AveragePool", h, 2, 2, 0);  // 8 x 8
  const std::string c3 = m.op("Relu", {m.conv(h, 8, 4, 3, 1, 1)});
  h = m.op("Concat", {h, c3}, {{"axis", int64_t{1}}});  // 12 channels
  h = m.pool("AveragePool", h, 3, 2, 1);                // 4 x 4, padded windows
  h = m.op("GlobalMaxPool", {h});
  h = m.op("Reshape", {h}, {{"shape", std::vector<int64_t>{0, -1}}});
  h = m.op("MatMul", {h, m.weights({12, 10}, 12, "fc")});
  return m.finish(m.op("Add", {h, m.uniform({10}, -0.1, 0.1, "fcb")}), {10});
}

std::string swish(ModelMaker& m, const std::string& x) {
  return m.op("Mul", {x, m.op("Sigmoid", {x})});
}

GraphModel scaled_add_mul(uint64_t seed) {
  ModelMaker m("scaled-add-mul", {3, 16, 16}, seed);
  // Input normalization: (X - mean) / std with per-channel constants.
  std::string h = m.op(
      "Sub",
      {"X", m.constant(Tensor({1, 3, 1, 1}, std::vector<double>{0.1, -0.05, 0.02}), "pixel_mean")});
  h = m.op("Div",
           {h, m.constant(Tensor({1, 3, 1, 1}, std::vector<double>{0.9, 1.1, 1.25}), "pixel_std")});
  const std::string stem = swish(m, m.conv(h, 3, 8, 3, 2, 1));  // 8 x 8 x 8

  // Inverted bottleneck with squeeze-and-excitation gate.
  std::string e = swish(m, m.conv(stem, 8, 12, 1, 1, 0));
  std::string s = m.op("GlobalAveragePool", {e});
  s = m.op("Reshape", {s}, {{"shape", std::vector<int64_t>{0, 12}}});
  s = m.op("Relu", {m.op("MatMul", {s, m.weights({12, 4}, 12, "se_reduce")})});
  s = m.op("Sigmoid", {m.op("MatMul", {s, m.weights({4, 12}, 4, "se_expand")})});
  s = m.op("Reshape", {s}, {{"shape", std::vector<int64_t>{0, 12, 1, 1}}});
  s = m.op("Tile", {s}, {{"repeats", std::vector<int64_t>{1, 1, 8, 8}}});
  e = m.op("Mul", {e, s});
  std::string p = m.conv(e, 12, 8, 1, 1, 0);
  p = m.op("Mul", {p, m.constant(Tensor::scalar(0.5), "drop_scale")});
  h = m.op("Add", {p, stem});

  // Channel split with a constant mask on one half.
  const auto halves =
      m.multi("Split", {h}, 2, {{"axis", int64_t{1}}, {"split", std::vector<int64_t>{4, 4}}});
  const std::string score = m.uniform({1, 4, 8, 8}, 0.0, 1.0, "mask_score");
  const std::string thresh =
      m.op("Constant", {}, {{"value_float", 0.25}, {"dtype", std::string("float64")}});
  const std::string keep = m.op("Greater", {score, thresh});
  const std::string zero =
      m.op("Constant", {}, {{"value_float", 0.0}, {"dtype", std::string("float64")}});
  const std::string masked = m.op("Where", {keep, halves[1], zero});
  h = m.op("Concat", {halves[0], masked}, {{"axis", int64_t{1}}});

  h = m.op("Transpose", {h}, {{"perm", std::vector<int64_t>{0, 1, 3, 2}}});
  h = m.op("ReduceMean", {h}, {{"axes", std::vector<int64_t>{2, 3}}, {"keepdims", int64_t{0}}});
  h = m.gemm(h, 8, 10);
  // Softmax spelled out as exp / sum(exp).
  const std::string ex = m.op("Exp", {h});
  const std::string den =
      m.op("ReduceSum", {ex}, {{"axes", std::vector<int64_t>{1}}, {"keepdims", int64_t{1}}});
  return m.finish(m.op("Div", {ex, den}), {10});
}

}  // namespace

GraphModel demo_model(uint64_t seed) {
  GraphModel model;
  model.name = "demo";
  model.inputs.push_back({"X", kF64, {kSymbolicBatch, 32}});
  Rng rng(seed);
  model.initializers.emplace("W", rng.tensor(kF64, {32, 1}, -0.5, 0.5));
  model.nodes.push_back({"MatMul", "matmul", {"X", "W"}, {"h"}, {}});
  model.nodes.push_back({"Sigmoid", "sigmoid", {"h"}, {"y"}, {}});
  model.outputs.push_back({"y", kF64, {kSymbolicBatch, 1}});
  validate(model);
  return model;
}

const std::vector<std::string>& motif_tags() {
  static const std::vector<std::string> kTags = {"plain-deep", "residual-add", "dense-concat",
                                                 "scaled-add-mul"};
  return kTags;
}

GraphModel build_motif(const std::string& motif, uint64_t seed) {
  if (motif == "plain-deep") return plain_deep(seed);
  if (motif == "residual-add") return residual_add(seed);
  if (motif == "dense-concat") return dense_concat(seed);
  if (motif == "scaled-add-mul") return scaled_add_mul(seed);
  throw Error("unknown motif '" + motif + "'");
}

Shape input_shape(const GraphModel& model, int64_t rows) {
  if (model.inputs.size() != 1) throw ValidationError("model must have exactly one graph input");
  Shape s = model.inputs[0].shape;
  s[0] = rows;
  return s;
}

Tensor zero_references(const GraphModel& model, int64_t count) {
  return Tensor(model.inputs.at(0).dtype, input_shape(model, count));
}

Tensor random_references(const GraphModel& model, int64_t count, uint64_t seed) {
  Rng rng(seed);
  return rng.tensor(model.inputs.at(0).dtype, input_shape(model, count), -1.0, 1.0);
}

Tensor random_input(const GraphModel& model, uint64_t seed) {
  return random_references(model, 1, seed);
}

std::vector<CorpusEntry> build_corpus(uint64_t seed, int64_t reference_count, size_t sample_count) {
  std::vector<CorpusEntry> corpus;
  uint64_t stream = seed;
  for (const auto& motif : motif_tags()) {
    CorpusEntry e;
    e.motif = motif;
    e.model = build_motif(motif, ++stream);
    e.references = random_references(e.model, reference_count, ++stream * 7919);
    for (size_t i = 0; i < sample_count; ++i) {
      e.samples.push_back(random_input(e.model, stream * 104729 + i));
    }
    corpus.push_back(std::move(e));
  }
  return corpus;
}

namespace {

GraphModel single_op(const std::string& name, Shape in_shape, Shape out_shape, Rng& rng,
                     const std::function<std::string(GraphBuilder&, Rng&)>& body) {
  GraphModel model;
  model.name = name;
  in_shape.insert(in_shape.begin(), kSymbolicBatch);
  out_shape.insert(out_shape.begin(), kSymbolicBatch);
  model.inputs.push_back({"X", kF64, in_shape});
  GraphBuilder b(model, "");
  const std::string y = body(b, rng);
  model.outputs.push_back({y, kF64, out_shape});
  validate(model);
  return model;
}

Attributes window(int64_t k, int64_t s, int64_t p) {
  return {{"kernel_shape", std::vector<int64_t>{k, k}},
          {"strides", std::vector<int64_t>{s, s}},
          {"pads", std::vector<int64_t>{p, p, p, p}}};
}

}  // namespace

std::vector<MicroNet> micro_nets(uint64_t seed) {
  Rng rng(seed);
  std::vector<MicroNet> nets;
  auto add = [&](const std::string& rule, Shape in, Shape out,
                 std::function<std::string(GraphBuilder&, Rng&)> body) {
    nets.push_back({rule, single_op("micro-" + rule, std::move(in), std::move(out), rng, body)});
  };
  auto w = [](GraphBuilder& b, Rng& r, const Shape& s) {
    return b.constant(r.tensor(kF64, s, -1.0, 1.0), "w");
  };

  add("matmul", {6}, {4},
      [&](GraphBuilder& b, Rng& r) { return b.add("MatMul", {"X", w(b, r, {6, 4})}); });
  add("gemm", {6}, {4}, [&](GraphBuilder& b, Rng& r) {
    return b.add("Gemm", {"X", w(b, r, {4, 6}), w(b, r, {4})},
                 {{"transB", int64_t{1}}, {"alpha", 0.7}, {"beta", 1.3}});
  });
  add("conv", {2, 5, 5}, {3, 3, 3}, [&](GraphBuilder& b, Rng& r) {
    Attributes a = window(3, 2, 1);
    return b.add("Conv", {"X", w(b, r, {3, 2, 3, 3}), w(b, r, {3})}, a);
  });
  for (const char* act : {"Sigmoid", "Relu", "Tanh"}) {
    add(std::string("rescale-") + act, {6}, {6},
        [act](GraphBuilder& b, Rng&) { return b.add(act, {"X"}); });
  }
  add("softmax", {5}, {5},
      [](GraphBuilder& b, Rng&) { return b.add("Softmax", {"X"}, {{"axis", int64_t{-1}}}); });
  add("maxpool", {2, 5, 5}, {2, 3, 3},
      [](GraphBuilder& b, Rng&) { return b.add("MaxPool", {"X"}, window(3, 2, 1)); });
  add("globalmaxpool", {2, 3, 3}, {2, 1, 1},
      [](GraphBuilder& b, Rng&) { return b.add("GlobalMaxPool", {"X"}); });
  add("avgpool", {2, 5, 5}, {2, 4, 4},
      [](GraphBuilder& b, Rng&) { return b.add("AveragePool", {"X"}, window(2, 1, 0)); });
  add("globalavgpool", {2, 3, 3}, {2, 1, 1},
      [](GraphBuilder& b, Rng&) { return b.add("GlobalAveragePool", {"X"}); });
  add("concat", {4}, {12}, [](GraphBuilder& b, Rng&) {
    return b.add("Concat", {"X", b.add("Relu", {"X"}), "X"}, {{"axis", int64_t{1}}});
  });
  add("mul", {4}, {4}, [](GraphBuilder& b, Rng&) { return b.add("Mul", {"X", "X"}); });
  add("mul-const", {4}, {4},
      [&](GraphBuilder& b, Rng& r) { return b.add("Mul", {"X", w(b, r, {4})}); });
  add("add-sub", {4}, {4}, [&](GraphBuilder& b, Rng& r) {
    return b.add("Sub", {w(b, r, {1}), b.add("Add", {"X", w(b, r, {4})})});
  });
  add("batchnorm", {3, 4, 4}, {3, 4, 4}, [&](GraphBuilder& b, Rng& r) {
    const std::string var = b.constant(r.tensor(kF64, {3}, 0.5, 2.0), "var");
    return b.add("BatchNormalization", {"X", w(b, r, {3}), w(b, r, {3}), w(b, r, {3}), var},
                 {{"epsilon", 1e-3}});
  });
  add("transpose-reshape", {2, 3, 4}, {12, 2}, [](GraphBuilder& b, Rng&) {
    const std::string t = b.add("Transpose", {"X"}, {{"perm", std::vector<int64_t>{0, 2, 3, 1}}});
    return b.add("Reshape", {t}, {{"shape", std::vector<int64_t>{0, 12, 2}}});
  });
  add("flatten", {2, 3}, {6},
      [](GraphBuilder& b, Rng&) { return b.add("Flatten", {"X"}, {{"axis", int64_t{1}}}); });
  add("rescale-Exp", {5}, {5}, [](GraphBuilder& b, Rng&) { return b.add("Exp", {"X"}); });
  add("div-const", {4}, {4}, [&](GraphBuilder& b, Rng& r) {
    // One constant operand on each side.
    const std::string d = b.add("Div", {"X", b.constant(r.tensor(kF64, {4}, 1.0, 2.0), "d")});
    const std::string den = b.add("Add", {b.add("Exp", {d}), b.constant(Tensor::scalar(1.0))});
    return b.add("Div", {w(b, r, {4}), den});
  });
  add("div", {4}, {4}, [&](GraphBuilder& b, Rng& r) {
    const std::string den =
        b.add("Add", {b.add("Sigmoid", {"X"}), b.constant(Tensor::scalar(0.5))});
    return b.add("Div", {b.add("Add", {"X", w(b, r, {4})}), den});
  });
  add("where", {6}, {6}, [&](GraphBuilder& b, Rng& r) {
    std::vector<double> mask(6);
    for (auto& v : mask) v = r.uniform(0.0, 1.0) > 0.5 ? 1.0 : 0.0;
    const std::string c = b.constant(Tensor::from_values(kF64, {6}, mask), "mask");
    return b.add("Where", {c, "X", b.add("Mul", {"X", w(b, r, {6})})});
  });
  add("split", {6}, {2}, [](GraphBuilder& b, Rng&) {
    const auto parts = b.add_multi(
        "Split", {"X"}, 3, {{"axis", int64_t{1}}, {"split", std::vector<int64_t>{1, 3, 2}}});
    return b.add("Sub", {parts[2], b.add("Tanh", {parts[0]})});
  });
  add("tile-reduce", {2, 3}, {1, 1}, [](GraphBuilder& b, Rng&) {
    const std::string t = b.add("Tile", {"X"}, {{"repeats", std::vector<int64_t>{1, 2, 2}}});
    const std::string s = b.add("ReduceSum", {b.add("Relu", {t})},
                                {{"axes", std::vector<int64_t>{1}}, {"keepdims", int64_t{1}}});
    return b.add("ReduceMean", {s}, {{"axes", std::vector<int64_t>{2}}, {"keepdims", int64_t{1}}});
  });
  return nets;
}

CoverageMatrix op_coverage(const std::vector<CorpusEntry>& corpus) {
  CoverageMatrix cov;
  for (auto op : supported_ops()) cov[std::string(op)];
  for (const auto& e : corpus) {
    for (const auto& n : e.model.nodes) cov[n.op_type].insert(e.motif);
  }
  return cov;
}

std::string format_coverage(const CoverageMatrix& coverage) {
  std::ostringstream os;
  os << "op";
  for (const auto& m : motif_tags()) os << "\t" << m;
  os << "\n";
  for (const auto& [op, motifs] : coverage) {
    os << op;
    for (const auto& m : motif_tags()) os << "\t" << (motifs.count(m) ? "x" : "-");
    os << "\n";
  }
  return os.str();
}

}  // namespace shapgraph
