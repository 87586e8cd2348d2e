// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapgraph/grad_rules.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "shapgraph/error.hpp"
#include "shapgraph/op_attrs.hpp"

namespace shapgraph {

namespace {

constexpr std::string_view kRuleOps[] = {
    "MatMul",    "Gemm",      "Conv",      "Relu",          "Sigmoid",     "Tanh",
    "Exp",       "Softmax",   "MaxPool",   "GlobalMaxPool", "AveragePool", "GlobalAveragePool",
    "Add",       "Sub",       "Mul",       "Div",           "Where",       "BatchNormalization",
    "Concat",    "Split",     "Transpose", "Reshape",       "Flatten",     "Tile",
    "ReduceSum", "ReduceMean"};

using Grads = std::vector<std::optional<std::string>>;  // per input slot

// Emission helpers scoped to one rule invocation.
class Emitter {
 public:
  Emitter(const Node& node, RuleEnv& env) : node_(node), env_(env), b_(env.builder) {}

  [[noreturn]] void unsupported(const std::string& why) const {
    throw UnsupportedOp("node '" + node_.name + "' (" + node_.op_type + "): " + why);
  }

  const Node& node() const { return node_; }
  int64_t g_rows() const { return env_.acts.grad_rows(); }
  const Shape& shape(const std::string& v) const { return env_.shapes.at(v).shape; }
  const Shape& out_shape() const { return shape(node_.outputs[0]); }
  size_t out_rank() const { return out_shape().size(); }
  bool is_const(const std::string& v) const { return env_.source.initializers.count(v) != 0; }
  bool is_diff(const std::string& v) const { return env_.differentiable.count(v) != 0; }
  double eps_act() const { return env_.eps_act; }
  double eps_pool() const { return env_.eps_pool; }

  // Non-differentiable operands must be compile-time constants; a value
  // computed at runtime would need its own reference counterpart.
  const Tensor& weight(const std::string& v) const {
    const Tensor* t = env_.source.find_initializer(v);
    if (!t) unsupported("operand '" + v + "' must be a constant");
    return *t;
  }

  std::string T(const std::string& v) { return env_.acts.target(v); }
  std::string R(const std::string& v) { return env_.acts.reference(v); }
  std::string E(const std::string& v, size_t rank) { return env_.acts.expand(v, rank); }

  std::string scalar(double value) { return tensor(Tensor::scalar(value), "scalar"); }
  std::string tensor(const Tensor& t, const std::string& hint) {
    return b_.constant(t.dtype() == env_.dtype ? t : t.cast(env_.dtype), hint);
  }
  std::string tensor(const Shape& s, const std::vector<double>& v, const std::string& hint) {
    return tensor(Tensor::from_values(env_.dtype, s, v), hint);
  }
  std::string zeros(const Shape& s) { return b_.constant(Tensor(env_.dtype, s), "zeros"); }

  std::string op(const std::string& type, std::vector<std::string> in, Attributes a = {}) {
    return b_.add(type, std::move(in), std::move(a));
  }
  std::string add(const std::string& a, const std::string& b) { return op("Add", {a, b}); }
  std::string sub(const std::string& a, const std::string& b) { return op("Sub", {a, b}); }
  std::string mul(const std::string& a, const std::string& b) { return op("Mul", {a, b}); }
  std::string div(const std::string& a, const std::string& b) { return op("Div", {a, b}); }
  std::string greater(const std::string& a, const std::string& b) { return op("Greater", {a, b}); }
  std::string where(const std::string& c, const std::string& a, const std::string& b) {
    return op("Where", {c, a, b});
  }
  std::string reshape(const std::string& a, std::vector<int64_t> s) {
    return op("Reshape", {a}, {{"shape", std::move(s)}});
  }
  std::string transpose(const std::string& a, std::vector<int64_t> perm) {
    return op("Transpose", {a}, {{"perm", std::move(perm)}});
  }
  std::string reduce_sum(const std::string& a, std::vector<int64_t> axes, bool keep) {
    return op("ReduceSum", {a}, {{"axes", std::move(axes)}, {"keepdims", int64_t{keep ? 1 : 0}}});
  }
  std::string concat(std::vector<std::string> in, int64_t axis) {
    return op("Concat", std::move(in), {{"axis", axis}});
  }
  std::vector<std::string> split(const std::string& a, int64_t axis, std::vector<int64_t> sizes) {
    const size_t n = sizes.size();
    return b_.add_multi("Split", {a}, n, {{"axis", axis}, {"split", std::move(sizes)}});
  }

  // Sums `grad` (shaped like the node output) down to operand `v` over the
  // axes broadcasting stretched.
  std::string reduce_to(const std::string& grad, const std::string& v) {
    const Shape& out = out_shape();
    const Shape& in = shape(v);
    if (in.size() != out.size()) unsupported("differentiable operand '" + v + "' changes rank");
    std::vector<int64_t> axes;
    for (size_t d = 1; d < in.size(); ++d) {
      if (in[d] == 1 && out[d] != 1) axes.push_back(static_cast<int64_t>(d));
    }
    return axes.empty() ? grad : reduce_sum(grad, axes, true);
  }

  // g times the rescale multiplier: dy/dx where dx^2 > eps^2, else the local
  // derivative `deriv` (one row). The division is guarded so the unselected
  // branch stays finite.
  std::string rescale(const std::string& tx, const std::string& rx, const std::string& ty,
                      const std::string& ry, const std::string& deriv, const std::string& g,
                      size_t rank) {
    const std::string dx = E(sub(tx, rx), rank);
    const std::string dy = E(sub(ty, ry), rank);
    const std::string cond = greater(mul(dx, dx), scalar(eps_act() * eps_act()));
    const std::string safe = where(cond, dx, scalar(1.0));
    return mul(g, where(cond, div(dy, safe), deriv));
  }

  // Gradient of a strided, padded correlation with filter `w` (O, I/group,
  // kh, kw) with respect to its input `in` (N, I, H, W): a stride-1
  // correlation of the zero-dilated gradient with the flipped, transposed
  // filter, padded asymmetrically so the rows no window covers get zeros.
  std::string conv_input_grad(const std::string& g, const Tensor& w, const WindowGeometry& geo,
                              const Shape& in, int64_t group) {
    const Shape& ws = w.shape();
    const int64_t O = ws[0], Ig = ws[1], kh = ws[2], kw = ws[3];
    const int64_t Og = O / group;
    const auto src = w.to_doubles();
    std::vector<double> dst(src.size());
    for (int64_t gi = 0; gi < group; ++gi) {
      for (int64_t i = 0; i < Ig; ++i) {
        for (int64_t o = 0; o < Og; ++o) {
          for (int64_t a = 0; a < kh; ++a) {
            for (int64_t c = 0; c < kw; ++c) {
              const int64_t s = (((gi * Og + o) * Ig + i) * kh + (kh - 1 - a)) * kw + (kw - 1 - c);
              const int64_t d = (((gi * Ig + i) * Og + o) * kh + a) * kw + c;
              dst[d] = src[s];
            }
          }
        }
      }
    }
    const std::string wt = tensor({in[1], Og, kh, kw}, dst, "wflip");

    const int64_t eff_h = geo.effective_kernel_h(), eff_w = geo.effective_kernel_w();
    const int64_t rem_h =
        geo.in_h + geo.pads[0] + geo.pads[2] - eff_h - (geo.out_h - 1) * geo.stride_h;
    const int64_t rem_w =
        geo.in_w + geo.pads[1] + geo.pads[3] - eff_w - (geo.out_w - 1) * geo.stride_w;
    const int64_t begin_h = eff_h - 1 - geo.pads[0], begin_w = eff_w - 1 - geo.pads[1];
    int64_t end_h = eff_h - 1 - geo.pads[2] + rem_h, end_w = eff_w - 1 - geo.pads[3] + rem_w;
    if (begin_h < 0 || begin_w < 0 || end_h < 0 || end_w < 0) {
      unsupported("padding wider than the effective kernel");
    }

    // Zero interleaving. Each step appends s-1 trailing zeros, which either
    // replace part of the end pad or get cropped.
    const int64_t G = g_rows();
    std::string cur = g;
    int64_t h = geo.out_h, wd = geo.out_w;
    if (geo.stride_w > 1) {
      const int64_t s = geo.stride_w;
      cur = reshape(cur, {0, O, h, wd, 1});
      cur = concat({cur, zeros({G, O, h, wd, s - 1})}, 4);
      cur = reshape(cur, {0, O, h, wd * s});
      wd *= s;
      if (end_w >= s - 1) {
        end_w -= s - 1;
      } else {
        cur = split(cur, 3, {wd - (s - 1), s - 1})[0];
        wd -= s - 1;
      }
    }
    if (geo.stride_h > 1) {
      const int64_t s = geo.stride_h;
      cur = reshape(cur, {0, O, h, 1, wd});
      cur = concat({cur, zeros({G, O, h, s - 1, wd})}, 3);
      cur = reshape(cur, {0, O, h * s, wd});
      h *= s;
      if (end_h >= s - 1) {
        end_h -= s - 1;
      } else {
        cur = split(cur, 2, {h - (s - 1), s - 1})[0];
        h -= s - 1;
      }
    }
    Attributes attrs{{"pads", std::vector<int64_t>{begin_h, begin_w, end_h, end_w}}};
    if (geo.dilation_h != 1 || geo.dilation_w != 1) {
      attrs["dilations"] = std::vector<int64_t>{geo.dilation_h, geo.dilation_w};
    }
    if (group != 1) attrs["group"] = group;
    return op("Conv", {cur, wt}, std::move(attrs));
  }

 private:
  const Node& node_;
  RuleEnv& env_;
  GraphBuilder& b_;
};

// ---- rules ---------------------------------------------------------------

Grads rule_rescale(Emitter& e, const std::string& g) {
  const Node& n = e.node();
  const std::string& x = n.inputs[0];
  const std::string& y = n.outputs[0];
  const std::string tx = e.T(x), ty = e.T(y);
  std::string deriv;
  if (n.op_type == "Relu") {
    deriv = e.greater(tx, e.scalar(0.0));
  } else if (n.op_type == "Sigmoid") {
    deriv = e.mul(ty, e.sub(e.scalar(1.0), ty));
  } else if (n.op_type == "Tanh") {
    deriv = e.sub(e.scalar(1.0), e.mul(ty, ty));
  } else {  // Exp
    deriv = ty;
  }
  return {e.rescale(tx, e.R(x), ty, e.R(y), deriv, g, e.out_rank())};
}

// Softmax as Exp, a keepdims ReduceSum, and a two-operand Div; no max shift.
Grads rule_softmax(Emitter& e, const std::string& g) {
  const Node& n = e.node();
  const size_t rank = e.out_rank();
  const int64_t axis = normalize_axis(n.attr_int("axis", -1), rank, n);
  if (axis == 0) e.unsupported("softmax over the batch axis");
  const std::string& x = n.inputs[0];
  const std::string tx = e.T(x), rx = e.R(x);
  const std::string te = e.op("Exp", {tx}), re = e.op("Exp", {rx});
  const std::string ts = e.reduce_sum(te, {axis}, true), rs = e.reduce_sum(re, {axis}, true);
  // d(e/s): m_e = (1/s_x + 1/s_r)/2, m_s = -(e_x + e_r)/(2 s_x s_r).
  const std::string half = e.scalar(0.5);
  const std::string one = e.scalar(1.0);
  const std::string m_e = e.mul(half, e.add(e.div(one, ts), e.div(one, rs)));
  const std::string m_s = e.div(e.mul(e.scalar(-0.5), e.add(te, re)), e.mul(ts, rs));
  const std::string g_e = e.mul(g, e.E(m_e, rank));
  const std::string g_s = e.reduce_sum(e.mul(g, e.E(m_s, rank)), {axis}, true);
  const std::string g_exp = e.add(g_e, g_s);
  return {e.rescale(tx, rx, te, re, te, g_exp, rank)};
}

Grads rule_add_sub(Emitter& e, const std::string& g, const std::vector<bool>& live) {
  const Node& n = e.node();
  Grads out(2);
  if (live[0]) out[0] = e.reduce_to(g, n.inputs[0]);
  if (live[1]) {
    std::string gb = g;
    if (n.op_type == "Sub") gb = e.mul(g, e.scalar(-1.0));
    out[1] = e.reduce_to(gb, n.inputs[1]);
  }
  return out;
}

Grads rule_mul(Emitter& e, const std::string& g, const std::vector<bool>& live) {
  const Node& n = e.node();
  const std::string &a = n.inputs[0], &b = n.inputs[1];
  Grads out(2);
  const size_t rank = e.out_rank();
  if (live[0] && live[1]) {
    // Symmetric split of the two-player product.
    const std::string half = e.scalar(0.5);
    const std::string m_a = e.mul(half, e.add(e.T(b), e.R(b)));
    const std::string m_b = e.mul(half, e.add(e.T(a), e.R(a)));
    out[0] = e.reduce_to(e.mul(g, e.E(m_a, rank)), a);
    out[1] = e.reduce_to(e.mul(g, e.E(m_b, rank)), b);
    return out;
  }
  const size_t d = live[0] ? 0 : 1;
  const std::string& other = n.inputs[1 - d];
  e.weight(other);
  out[d] = e.reduce_to(e.mul(g, other), n.inputs[d]);
  return out;
}

Grads rule_div(Emitter& e, const std::string& g, const std::vector<bool>& live) {
  const Node& n = e.node();
  const std::string &a = n.inputs[0], &b = n.inputs[1];
  const size_t rank = e.out_rank();
  Grads out(2);
  if (live[0] && !live[1]) {
    e.weight(b);
    out[0] = e.reduce_to(e.div(g, b), a);
    return out;
  }
  const std::string tb = e.T(b), rb = e.R(b);
  const std::string prod = e.mul(tb, rb);
  if (!live[0]) {
    // a / b_x - a / b_r = -a / (b_x b_r) * (b_x - b_r)
    e.weight(a);
    const std::string m_b = e.div(e.mul(e.scalar(-1.0), a), prod);
    out[1] = e.reduce_to(e.mul(g, e.E(m_b, rank)), b);
    return out;
  }
  const std::string one = e.scalar(1.0);
  const std::string m_a = e.mul(e.scalar(0.5), e.add(e.div(one, tb), e.div(one, rb)));
  const std::string m_b = e.div(e.mul(e.scalar(-0.5), e.add(e.T(a), e.R(a))), prod);
  out[0] = e.reduce_to(e.mul(g, e.E(m_a, rank)), a);
  out[1] = e.reduce_to(e.mul(g, e.E(m_b, rank)), b);
  return out;
}

Grads rule_where(Emitter& e, const std::string& g, const std::vector<bool>& live) {
  const Node& n = e.node();
  e.weight(n.inputs[0]);
  const std::string zero = e.scalar(0.0);
  Grads out(3);
  if (live[1]) out[1] = e.reduce_to(e.where(n.inputs[0], g, zero), n.inputs[1]);
  if (live[2]) out[2] = e.reduce_to(e.where(n.inputs[0], zero, g), n.inputs[2]);
  return out;
}

Tensor transpose_last2(const Tensor& t) {
  Shape s = t.shape();
  const size_t r = s.size();
  const int64_t m = s[r - 2], k = s[r - 1];
  std::swap(s[r - 2], s[r - 1]);
  const auto src = t.to_doubles();
  std::vector<double> dst(src.size());
  const int64_t plane = m * k;
  for (int64_t p = 0; p < t.size() / plane; ++p) {
    for (int64_t i = 0; i < m; ++i) {
      for (int64_t j = 0; j < k; ++j) dst[p * plane + j * m + i] = src[p * plane + i * k + j];
    }
  }
  return Tensor::from_values(t.dtype(), s, dst);
}

Grads rule_matmul(Emitter& e, const std::string& g, const std::vector<bool>& live) {
  const Node& n = e.node();
  if (live[0] && live[1]) e.unsupported("both operands depend on the input");
  Grads out(2);
  if (live[0]) {
    const std::string bt = e.tensor(transpose_last2(e.weight(n.inputs[1])), "wT");
    out[0] = e.reduce_to(e.op("MatMul", {g, bt}), n.inputs[0]);
  } else {
    const Tensor& a = e.weight(n.inputs[0]);
    if (a.rank() != 2) e.unsupported("constant left operand must be a matrix");
    const std::string at = e.tensor(transpose_last2(a), "wT");
    out[1] = e.reduce_to(e.op("MatMul", {at, g}), n.inputs[1]);
  }
  return out;
}

Grads rule_gemm(Emitter& e, const std::string& g, const std::vector<bool>& live) {
  const Node& n = e.node();
  if (live[1] || !live[0]) e.unsupported("only the A operand may depend on the input");
  if (n.attr_int("transA", 0) != 0) e.unsupported("transA on a differentiable operand");
  e.weight(n.inputs[1]);
  const int64_t tb = n.attr_int("transB", 0) != 0 ? 0 : 1;
  Attributes attrs{{"transB", tb}};
  const double alpha = n.attr_float("alpha", 1.0);
  if (alpha != 1.0) attrs["alpha"] = alpha;
  return {e.op("Gemm", {g, n.inputs[1]}, std::move(attrs)), std::nullopt};
}

Grads rule_conv(Emitter& e, const std::string& g, const std::vector<bool>& live) {
  const Node& n = e.node();
  if (live[1]) e.unsupported("filter depends on the input");
  if (n.attr_int("group", 1) != 1) e.unsupported("grouped convolution");
  const Tensor& w = e.weight(n.inputs[1]);
  const Shape& in = e.shape(n.inputs[0]);
  const auto geo = window_geometry(n, in, {w.shape()[2], w.shape()[3]});
  return {e.conv_input_grad(g, w, geo, in, 1), std::nullopt};
}

Grads rule_batchnorm(Emitter& e, const std::string& g) {
  const Node& n = e.node();
  const auto scale = e.weight(n.inputs[1]).to_doubles();
  const auto var = e.weight(n.inputs[4]).to_doubles();
  const double eps = n.attr_float("epsilon", 1e-5);
  std::vector<double> f(scale.size());
  for (size_t c = 0; c < f.size(); ++c) f[c] = scale[c] / std::sqrt(var[c] + eps);
  Shape s(e.out_rank() - 1, 1);
  s[0] = static_cast<int64_t>(f.size());
  return {e.mul(g, e.tensor(s, f, "bnscale"))};
}

Grads rule_avgpool(Emitter& e, const std::string& g) {
  const Node& n = e.node();
  const Shape& in = e.shape(n.inputs[0]);
  const auto geo = window_geometry(n, in);
  const bool include_pad = n.attr_int("count_include_pad", 0) != 0;
  std::vector<double> inv(geo.out_h * geo.out_w);
  for (int64_t y = 0; y < geo.out_h; ++y) {
    for (int64_t x = 0; x < geo.out_w; ++x) {
      int64_t count = 0;
      for (int64_t a = 0; a < geo.kernel_h; ++a) {
        for (int64_t b = 0; b < geo.kernel_w; ++b) {
          const int64_t iy = y * geo.stride_h - geo.pads[0] + a;
          const int64_t ix = x * geo.stride_w - geo.pads[1] + b;
          if (iy >= 0 && iy < geo.in_h && ix >= 0 && ix < geo.in_w) ++count;
        }
      }
      inv[y * geo.out_w + x] = 1.0 / static_cast<double>(include_pad ? geo.window_size() : count);
    }
  }
  const std::string scaled = e.mul(g, e.tensor({1, 1, geo.out_h, geo.out_w}, inv, "poolinv"));
  const int64_t C = in[1];
  Tensor ones = Tensor::filled(DType::kFloat64, {C, 1, geo.kernel_h, geo.kernel_w}, 1.0);
  return {e.conv_input_grad(scaled, ones, geo, in, C)};
}

Grads rule_global_avgpool(Emitter& e, const std::string& g) {
  const Shape& in = e.shape(e.node().inputs[0]);
  Shape s(in.size(), 1);
  int64_t area = 1;
  for (size_t d = 2; d < in.size(); ++d) {
    s[d] = in[d];
    area *= in[d];
  }
  const std::vector<double> v(static_cast<size_t>(area), 1.0 / static_cast<double>(area));
  return {e.mul(g, e.tensor(s, v, "poolinv"))};
}

// Max pooling: the output delta of every window goes to the argmax of the
// input side (when the input max wins) and of the reference side (when the
// reference max wins), ties to the lowest window index; positions then
// divide by their own delta.
Grads rule_maxpool(Emitter& e, const std::string& g) {
  const Node& n = e.node();
  const bool global = n.op_type == "GlobalMaxPool";
  const std::string& x = n.inputs[0];
  const std::string& y = n.outputs[0];
  const Shape& in = e.shape(x);
  if (in.size() != 4) e.unsupported("only 2-D pooling is supported");
  const int64_t C = in[1], H = in[2], W = in[3];
  WindowGeometry geo;
  if (global) {
    geo.kernel_h = H;
    geo.kernel_w = W;
    geo.in_h = H;
    geo.in_w = W;
    geo.out_h = geo.out_w = 1;
  } else {
    geo = window_geometry(n, in);
  }
  const int64_t OH = geo.out_h, OW = geo.out_w, P = geo.window_size();

  // Window extraction as a depthwise one-hot correlation, channels c-major.
  Tensor ext(DType::kFloat64, {C * P, 1, geo.kernel_h, geo.kernel_w});
  if (!global) {
    auto d = ext.mutable_data<double>();
    for (int64_t c = 0; c < C; ++c) {
      for (int64_t p = 0; p < P; ++p) d[(c * P + p) * P + p] = 1.0;
    }
  }
  Attributes ext_attrs{{"group", C},
                       {"strides", std::vector<int64_t>{geo.stride_h, geo.stride_w}},
                       {"pads", std::vector<int64_t>(geo.pads.begin(), geo.pads.end())}};
  std::string ext_name;
  std::string valid;
  if (!global) {
    ext_name = e.tensor(ext, "poolext");
    std::vector<double> mask(OH * OW * P);
    bool any_pad = false;
    for (int64_t oy = 0; oy < OH; ++oy) {
      for (int64_t ox = 0; ox < OW; ++ox) {
        for (int64_t a = 0; a < geo.kernel_h; ++a) {
          for (int64_t b = 0; b < geo.kernel_w; ++b) {
            const int64_t iy = oy * geo.stride_h - geo.pads[0] + a;
            const int64_t ix = ox * geo.stride_w - geo.pads[1] + b;
            const bool ok = iy >= 0 && iy < H && ix >= 0 && ix < W;
            mask[(oy * OW + ox) * P + a * geo.kernel_w + b] = ok ? 1.0 : 0.0;
            any_pad = any_pad || !ok;
          }
        }
      }
    }
    if (any_pad) valid = e.tensor({1, 1, OH, OW, P}, mask, "poolvalid");
  }
  // Strictly upper-triangular: earlier[p] = sum of hits before p.
  std::vector<double> tri(P * P, 0.0);
  for (int64_t q = 0; q < P; ++q) {
    for (int64_t p = q + 1; p < P; ++p) tri[q * P + p] = 1.0;
  }
  const std::string tri_name = e.tensor({P, P}, tri, "tri");
  const std::string one = e.scalar(1.0), half = e.scalar(0.5);

  auto patches = [&](const std::string& v) {
    if (global) return e.reshape(v, {0, C, 1, 1, P});
    const std::string p = e.op("Conv", {v, ext_name}, ext_attrs);
    return e.transpose(e.reshape(p, {0, C, P, OH, OW}), {0, 1, 3, 4, 2});
  };
  auto first_argmax = [&](const std::string& xv, const std::string& yv) {
    const std::string y5 = e.reshape(yv, {0, C, OH, OW, 1});
    std::string eq = e.sub(one, e.greater(y5, patches(xv)));
    if (!valid.empty()) eq = e.mul(eq, valid);
    const std::string earlier = e.op("MatMul", {eq, tri_name});
    return e.mul(eq, e.greater(half, earlier));
  };

  const std::string tx = e.T(x), rx = e.R(x), ty = e.T(y), ry = e.R(y);
  const std::string fx = first_argmax(tx, ty);
  const std::string fr = e.E(first_argmax(rx, ry), 5);
  const std::string top = e.where(e.greater(ty, ry), ty, ry);
  const std::string mx = e.mul(e.E(e.sub(top, ry), 4), g);
  const std::string mr = e.mul(e.E(e.sub(ty, top), 4), g);
  const std::string routed = e.add(e.mul(fx, e.reshape(mx, {0, C, OH, OW, 1})),
                                   e.mul(fr, e.reshape(mr, {0, C, OH, OW, 1})));
  std::string scattered;
  if (global) {
    scattered = e.reshape(routed, {0, C, H, W});
  } else {
    const std::string back = e.reshape(e.transpose(routed, {0, 1, 4, 2, 3}), {0, C * P, OH, OW});
    scattered = e.conv_input_grad(back, ext, geo, in, C);
  }
  const std::string dx = e.E(e.sub(tx, rx), 4);
  const std::string cond = e.greater(e.mul(dx, dx), e.scalar(e.eps_pool() * e.eps_pool()));
  const std::string safe = e.where(cond, dx, one);
  return {e.where(cond, e.div(scattered, safe), e.scalar(0.0))};
}

Grads rule_concat(Emitter& e, const std::string& g, const std::vector<bool>& live) {
  const Node& n = e.node();
  const int64_t axis = normalize_axis(n.attr_int("axis", 0), e.out_rank(), n);
  if (axis == 0) e.unsupported("concatenation along the batch axis");
  std::vector<int64_t> sizes;
  for (const auto& in : n.inputs) sizes.push_back(e.shape(in)[axis]);
  const auto pieces = e.split(g, axis, sizes);
  Grads out(n.inputs.size());
  for (size_t i = 0; i < out.size(); ++i) {
    if (live[i]) out[i] = pieces[i];
  }
  return out;
}

Grads rule_split(Emitter& e, const std::vector<std::optional<std::string>>& grad_in) {
  const Node& n = e.node();
  const int64_t axis = normalize_axis(n.attr_int("axis", 0), e.shape(n.inputs[0]).size(), n);
  if (axis == 0) e.unsupported("split along the batch axis");
  std::vector<std::string> parts;
  for (size_t i = 0; i < n.outputs.size(); ++i) {
    if (grad_in[i]) {
      parts.push_back(*grad_in[i]);
    } else {
      Shape s = e.shape(n.outputs[i]);
      s[0] = e.g_rows();
      parts.push_back(e.zeros(s));
    }
  }
  return {parts.size() == 1 ? parts[0] : e.concat(parts, axis)};
}

Grads rule_transpose(Emitter& e, const std::string& g) {
  const Node& n = e.node();
  const auto perm = transpose_perm(n, e.out_rank());
  if (perm[0] != 0) e.unsupported("transpose moves the batch axis");
  std::vector<int64_t> inv(perm.size());
  for (size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = static_cast<int64_t>(i);
  return {e.transpose(g, inv)};
}

Grads rule_reshape(Emitter& e, const std::string& g) {
  const Shape& in = e.shape(e.node().inputs[0]);
  std::vector<int64_t> target(in.begin(), in.end());
  target[0] = 0;
  return {e.reshape(g, target)};
}

Grads rule_tile(Emitter& e, const std::string& g) {
  const Node& n = e.node();
  const auto reps = n.attr_ints("repeats");
  if (reps[0] != 1) e.unsupported("tiling along the batch axis");
  const Shape& in = e.shape(n.inputs[0]);
  if (std::all_of(reps.begin(), reps.end(), [](int64_t r) { return r == 1; })) return {g};
  // Output index along d is t * n_d + i: split every axis into (t, i) and
  // sum the t axes.
  std::vector<int64_t> split_shape{0};
  std::vector<int64_t> axes;
  for (size_t d = 1; d < in.size(); ++d) {
    axes.push_back(static_cast<int64_t>(split_shape.size()));
    split_shape.push_back(reps[d]);
    split_shape.push_back(in[d]);
  }
  return {e.reduce_sum(e.reshape(g, split_shape), axes, false)};
}

Grads rule_reduce(Emitter& e, const std::string& g) {
  const Node& n = e.node();
  const Shape& in = e.shape(n.inputs[0]);
  const auto axes = reduce_axes(n, in.size());
  if (!axes.empty() && axes[0] == 0) e.unsupported("reduction over the batch axis");
  std::string gk = g;
  if (n.attr_int("keepdims", 1) == 0) {
    std::vector<int64_t> kept(in.begin(), in.end());
    kept[0] = 0;
    for (int64_t a : axes) kept[a] = 1;
    gk = e.reshape(g, kept);
  }
  double scale = 1.0;
  if (n.op_type == "ReduceMean") {
    int64_t count = 1;
    for (int64_t a : axes) count *= in[a];
    scale = 1.0 / static_cast<double>(count);
  }
  Shape s = in;
  s[0] = 1;
  return {e.mul(gk, e.tensor(s, std::vector<double>(element_count(s), scale), "spread"))};
}

}  // namespace

bool has_grad_rule(std::string_view op_type) {
  return std::find(std::begin(kRuleOps), std::end(kRuleOps), op_type) != std::end(kRuleOps);
}

std::vector<std::string_view> grad_rule_ops() { return {std::begin(kRuleOps), std::end(kRuleOps)}; }

RuleOutput f_grad(const Node& node, const std::vector<std::optional<std::string>>& grad_in,
                  const std::map<std::string, bool>& pass_grads, RuleEnv& env) {
  if (!has_grad_rule(node.op_type)) {
    throw UnsupportedOp("node '" + node.name + "': no multiplier rule for operator '" +
                        node.op_type + "'");
  }
  if (grad_in.size() != node.outputs.size()) {
    throw Error("node '" + node.name + "': expected one gradient slot per output");
  }
  const size_t first_new = env.builder.model().nodes.size();
  Emitter e(node, env);

  std::vector<bool> live(node.inputs.size(), false);
  bool any_live = false;
  for (size_t s = 0; s < node.inputs.size(); ++s) {
    auto it = pass_grads.find(node.inputs[s]);
    live[s] = it != pass_grads.end() && it->second && env.differentiable.count(node.inputs[s]);
    any_live = any_live || live[s];
  }

  RuleOutput out;
  const bool have_grad = std::any_of(grad_in.begin(), grad_in.end(), [](auto& g) { return g; });
  if (!any_live || !have_grad) return out;

  const std::string& op = node.op_type;
  const std::string g = grad_in[0].value_or("");
  Grads grads;
  if (op == "Split") {
    grads = rule_split(e, grad_in);
  } else if (op == "Relu" || op == "Sigmoid" || op == "Tanh" || op == "Exp") {
    grads = rule_rescale(e, g);
  } else if (op == "Softmax") {
    grads = rule_softmax(e, g);
  } else if (op == "Add" || op == "Sub") {
    grads = rule_add_sub(e, g, live);
  } else if (op == "Mul") {
    grads = rule_mul(e, g, live);
  } else if (op == "Div") {
    grads = rule_div(e, g, live);
  } else if (op == "Where") {
    grads = rule_where(e, g, live);
  } else if (op == "MatMul") {
    grads = rule_matmul(e, g, live);
  } else if (op == "Gemm") {
    grads = rule_gemm(e, g, live);
  } else if (op == "Conv") {
    grads = rule_conv(e, g, live);
  } else if (op == "BatchNormalization") {
    grads = rule_batchnorm(e, g);
  } else if (op == "AveragePool") {
    grads = rule_avgpool(e, g);
  } else if (op == "GlobalAveragePool") {
    grads = rule_global_avgpool(e, g);
  } else if (op == "MaxPool" || op == "GlobalMaxPool") {
    grads = rule_maxpool(e, g);
  } else if (op == "Concat") {
    grads = rule_concat(e, g, live);
  } else if (op == "Transpose") {
    grads = rule_transpose(e, g);
  } else if (op == "Reshape" || op == "Flatten") {
    grads = rule_reshape(e, g);
  } else if (op == "Tile") {
    grads = rule_tile(e, g);
  } else {  // ReduceSum, ReduceMean
    grads = rule_reduce(e, g);
  }
  grads.resize(node.inputs.size());

  for (size_t s = 0; s < node.inputs.size(); ++s) {
    if (!live[s]) continue;
    if (!grads[s]) throw Error("node '" + node.name + "': rule produced no gradient");
    const std::string& name = node.inputs[s];
    auto it = out.grad_out.find(name);
    if (it == out.grad_out.end()) {
      out.grad_out[name] = *grads[s];
    } else {
      it->second = e.add(it->second, *grads[s]);
    }
  }
  const auto& nodes = env.builder.model().nodes;
  out.new_nodes.assign(nodes.begin() + static_cast<std::ptrdiff_t>(first_new), nodes.end());
  return out;
}

}  // namespace shapgraph
