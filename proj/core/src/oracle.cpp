// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapgraph/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "shapgraph/error.hpp"
#include "shapgraph/executor.hpp"

namespace shapgraph {

namespace {

struct Arr {
  Shape shape;
  std::vector<double> v;
};

Arr arr_of(const Tensor& t) { return {t.shape(), t.to_doubles()}; }

std::vector<int64_t> unravel(int64_t flat, const Shape& s) {
  std::vector<int64_t> idx(s.size());
  for (size_t d = s.size(); d-- > 0;) {
    idx[d] = flat % s[d];
    flat /= s[d];
  }
  return idx;
}

int64_t ravel(const std::vector<int64_t>& idx, const Shape& s) {
  int64_t flat = 0;
  for (size_t d = 0; d < s.size(); ++d) flat = flat * s[d] + idx[d];
  return flat;
}

// Flat index into `in` of the element broadcast to output index `oi`.
int64_t broadcast_source(const std::vector<int64_t>& oi, const Shape& in) {
  const size_t off = oi.size() - in.size();
  int64_t flat = 0;
  for (size_t d = 0; d < in.size(); ++d) {
    flat = flat * in[d] + (in[d] == 1 ? 0 : oi[off + d]);
  }
  return flat;
}

int64_t norm_axis(int64_t axis, size_t rank) {
  return axis < 0 ? axis + static_cast<int64_t>(rank) : axis;
}

class Oracle {
 public:
  Oracle(const GraphModel& model, const OracleOptions& o) : m_(model), o_(o) {
    if (m_.inputs.size() != 1) throw ValidationError("oracle needs a single-input model");
    input_ = m_.inputs[0].name;
    output_ = o.output_name.empty() ? m_.outputs.at(0).name : o.output_name;
    order_ = topological_order(m_);
    // Which values vary with the input; comparisons are piecewise constant.
    dep_.insert(input_);
    for (size_t i : order_) {
      const Node& n = m_.nodes[i];
      if (n.op_type == "Greater") continue;
      bool any = false;
      for (const auto& in : n.inputs) any = any || dep_.count(in);
      if (any) dep_.insert(n.outputs.begin(), n.outputs.end());
    }
  }

  Arr multipliers(const Tensor& x, const Tensor& r) {
    tx_ = trace(x);
    tr_ = trace(r);
    grads_.clear();
    const Arr& y = tx_.at(output_);
    if (o_.output_index < 0 || o_.output_index >= static_cast<int64_t>(y.v.size())) {
      throw ValidationError("output index out of range");
    }
    Arr seed{y.shape, std::vector<double>(y.v.size(), 0.0)};
    seed.v[o_.output_index] = 1.0;
    grads_[output_] = seed;

    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
      const Node& n = m_.nodes[*it];
      bool has = false;
      for (const auto& out : n.outputs) has = has || grads_.count(out);
      if (has) backward(n);
    }
    auto it = grads_.find(input_);
    if (it == grads_.end())
      return {tx_.at(input_).shape, std::vector<double>(tx_.at(input_).v.size(), 0.0)};
    return it->second;
  }

 private:
  std::map<std::string, Arr> trace(const Tensor& row) {
    ExecutionResult res = execute(m_, {{input_, row}}, true);
    std::map<std::string, Arr> t;
    for (const auto& [k, v] : *res.trace) t[k] = arr_of(v);
    t[input_] = arr_of(row);
    for (const auto& [k, v] : m_.initializers) t[k] = arr_of(v);
    return t;
  }

  [[noreturn]] void unsupported(const Node& n, const std::string& why) const {
    throw UnsupportedOp("oracle: node '" + n.name + "' (" + n.op_type + "): " + why);
  }

  bool dep(const std::string& v) const { return dep_.count(v) != 0; }

  // Accumulates into the gradient of `v` (creating zeros first).
  std::vector<double>& slot(const std::string& v) {
    auto it = grads_.find(v);
    if (it == grads_.end()) {
      const Arr& a = tx_.at(v);
      it = grads_.emplace(v, Arr{a.shape, std::vector<double>(a.v.size(), 0.0)}).first;
    }
    return it->second.v;
  }

  std::vector<double> out_grad(const Node& n, size_t i) const {
    auto it = grads_.find(n.outputs[i]);
    if (it != grads_.end()) return it->second.v;
    return std::vector<double>(tx_.at(n.outputs[i]).v.size(), 0.0);
  }

  double rescale(double xx, double xr, double yx, double yr, double deriv) const {
    const double dx = xx - xr;
    if (dx * dx > o_.eps_act * o_.eps_act) return (yx - yr) / dx;
    return deriv;
  }

  void backward(const Node& n) {
    const std::string& op = n.op_type;
    if (op == "Greater" || op == "Constant") return;
    for (size_t s = 0; s < n.inputs.size(); ++s) {
      const bool carries = !(op == "Where" && s == 0) &&
                           !((op == "Conv" || op == "Gemm") && s == 2) &&
                           !(op == "BatchNormalization" && s > 0);
      if (!carries && dep(n.inputs[s])) unsupported(n, "a parameter operand varies with the input");
    }
    const auto g = out_grad(n, 0);
    const Shape& os = tx_.at(n.outputs[0]).shape;

    if (op == "Relu" || op == "Sigmoid" || op == "Tanh" || op == "Exp") {
      const auto& xx = tx_.at(n.inputs[0]).v;
      const auto& xr = tr_.at(n.inputs[0]).v;
      const auto& yx = tx_.at(n.outputs[0]).v;
      const auto& yr = tr_.at(n.outputs[0]).v;
      auto& gx = slot(n.inputs[0]);
      for (size_t i = 0; i < g.size(); ++i) {
        double d;
        if (op == "Relu") {
          d = xx[i] > 0 ? 1.0 : 0.0;
        } else if (op == "Sigmoid") {
          d = yx[i] * (1.0 - yx[i]);
        } else if (op == "Tanh") {
          d = 1.0 - yx[i] * yx[i];
        } else {
          d = yx[i];
        }
        gx[i] += g[i] * rescale(xx[i], xr[i], yx[i], yr[i], d);
      }
      return;
    }
    if (op == "Softmax") {
      const auto& xx = tx_.at(n.inputs[0]).v;
      const auto& xr = tr_.at(n.inputs[0]).v;
      const int64_t axis = norm_axis(n.attr_int("axis", -1), os.size());
      int64_t len = os[axis], inner = 1, outer = 1;
      for (size_t d = axis + 1; d < os.size(); ++d) inner *= os[d];
      for (int64_t d = 0; d < axis; ++d) outer *= os[d];
      auto& gx = slot(n.inputs[0]);
      for (int64_t a = 0; a < outer; ++a) {
        for (int64_t b = 0; b < inner; ++b) {
          auto at = [&](int64_t k) { return (a * len + k) * inner + b; };
          double sx = 0, sr = 0;
          std::vector<double> ex(len), er(len);
          for (int64_t k = 0; k < len; ++k) {
            ex[k] = std::exp(xx[at(k)]);
            er[k] = std::exp(xr[at(k)]);
          }
          for (int64_t k = 0; k < len; ++k) sx += ex[k];
          for (int64_t k = 0; k < len; ++k) sr += er[k];
          // Gradient reaching the sum, then each exponential.
          double gs = 0;
          for (int64_t k = 0; k < len; ++k) gs += g[at(k)] * (-(ex[k] + er[k]) / (2 * sx * sr));
          for (int64_t k = 0; k < len; ++k) {
            const double ge = g[at(k)] * 0.5 * (1 / sx + 1 / sr) + gs;
            gx[at(k)] += ge * rescale(xx[at(k)], xr[at(k)], ex[k], er[k], ex[k]);
          }
        }
      }
      return;
    }
    if (op == "Add" || op == "Sub" || op == "Mul" || op == "Div") {
      binary(n, g, os);
      return;
    }
    if (op == "Where") {
      const Arr& c = tx_.at(n.inputs[0]);
      for (size_t s = 1; s < 3; ++s) {
        if (!dep(n.inputs[s])) continue;
        const Shape& is = tx_.at(n.inputs[s]).shape;
        auto& gi = slot(n.inputs[s]);
        for (int64_t o = 0; o < static_cast<int64_t>(g.size()); ++o) {
          const auto oi = unravel(o, os);
          const bool take = c.v[broadcast_source(oi, c.shape)] != 0.0;
          if (take == (s == 1)) gi[broadcast_source(oi, is)] += g[o];
        }
      }
      return;
    }
    if (op == "MatMul") {
      matmul(n, g, os);
      return;
    }
    if (op == "Gemm") {
      gemm(n, g);
      return;
    }
    if (op == "Conv") {
      conv(n, g, os);
      return;
    }
    if (op == "MaxPool" || op == "GlobalMaxPool") {
      maxpool(n, g, os);
      return;
    }
    if (op == "AveragePool" || op == "GlobalAveragePool") {
      avgpool(n, g, os);
      return;
    }
    if (op == "BatchNormalization") {
      const auto& sc = tx_.at(n.inputs[1]).v;
      const auto& var = tx_.at(n.inputs[4]).v;
      const double eps = n.attr_float("epsilon", 1e-5);
      int64_t inner = 1;
      for (size_t d = 2; d < os.size(); ++d) inner *= os[d];
      const int64_t C = os[1];
      auto& gx = slot(n.inputs[0]);
      for (size_t i = 0; i < g.size(); ++i) {
        const int64_t c = (static_cast<int64_t>(i) / inner) % C;
        gx[i] += g[i] * sc[c] / std::sqrt(var[c] + eps);
      }
      return;
    }
    if (op == "Reshape" || op == "Flatten") {
      auto& gx = slot(n.inputs[0]);
      for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      return;
    }
    if (op == "Transpose") {
      const Shape& is = tx_.at(n.inputs[0]).shape;
      std::vector<int64_t> perm = n.attr_ints("perm");
      if (perm.empty()) {
        for (size_t d = is.size(); d-- > 0;) perm.push_back(static_cast<int64_t>(d));
      }
      auto& gx = slot(n.inputs[0]);
      for (int64_t o = 0; o < static_cast<int64_t>(g.size()); ++o) {
        const auto oi = unravel(o, os);
        std::vector<int64_t> ii(is.size());
        for (size_t d = 0; d < perm.size(); ++d) ii[perm[d]] = oi[d];
        gx[ravel(ii, is)] += g[o];
      }
      return;
    }
    if (op == "Concat") {
      const int64_t axis = norm_axis(n.attr_int("axis", 0), os.size());
      int64_t offset = 0;
      for (const auto& in : n.inputs) {
        const Shape& is = tx_.at(in).shape;
        if (dep(in)) {
          auto& gi = slot(in);
          for (int64_t i = 0; i < static_cast<int64_t>(gi.size()); ++i) {
            auto ii = unravel(i, is);
            ii[axis] += offset;
            gi[i] += g[ravel(ii, os)];
          }
        }
        offset += is[axis];
      }
      return;
    }
    if (op == "Split") {
      const Shape& is = tx_.at(n.inputs[0]).shape;
      const int64_t axis = norm_axis(n.attr_int("axis", 0), is.size());
      auto& gx = slot(n.inputs[0]);
      int64_t offset = 0;
      for (size_t k = 0; k < n.outputs.size(); ++k) {
        const Shape& ps = tx_.at(n.outputs[k]).shape;
        const auto gk = out_grad(n, k);
        for (int64_t i = 0; i < static_cast<int64_t>(gk.size()); ++i) {
          auto pi = unravel(i, ps);
          pi[axis] += offset;
          gx[ravel(pi, is)] += gk[i];
        }
        offset += ps[axis];
      }
      return;
    }
    if (op == "Tile") {
      const Shape& is = tx_.at(n.inputs[0]).shape;
      auto& gx = slot(n.inputs[0]);
      for (int64_t o = 0; o < static_cast<int64_t>(g.size()); ++o) {
        auto oi = unravel(o, os);
        for (size_t d = 0; d < oi.size(); ++d) oi[d] %= is[d];
        gx[ravel(oi, is)] += g[o];
      }
      return;
    }
    if (op == "ReduceSum" || op == "ReduceMean") {
      const Shape& is = tx_.at(n.inputs[0]).shape;
      std::vector<int64_t> axes = n.attr_ints("axes");
      for (auto& a : axes) a = norm_axis(a, is.size());
      if (axes.empty()) {
        for (size_t d = 0; d < is.size(); ++d) axes.push_back(static_cast<int64_t>(d));
      }
      const bool keep = n.attr_int("keepdims", 1) != 0;
      int64_t count = 1;
      for (int64_t a : axes) count *= is[a];
      const double scale = op == "ReduceMean" ? 1.0 / static_cast<double>(count) : 1.0;
      auto& gx = slot(n.inputs[0]);
      for (int64_t i = 0; i < static_cast<int64_t>(gx.size()); ++i) {
        const auto ii = unravel(i, is);
        std::vector<int64_t> oi;
        for (size_t d = 0; d < is.size(); ++d) {
          const bool reduced = std::count(axes.begin(), axes.end(), static_cast<int64_t>(d)) > 0;
          if (!reduced) {
            oi.push_back(ii[d]);
          } else if (keep) {
            oi.push_back(0);
          }
        }
        gx[i] += g[ravel(oi, os)] * scale;
      }
      return;
    }
    unsupported(n, "no reference rule");
  }

  void binary(const Node& n, const std::vector<double>& g, const Shape& os) {
    const std::string& op = n.op_type;
    const std::string &a = n.inputs[0], &b = n.inputs[1];
    const Arr &ax = tx_.at(a), &ar = tr_.at(a), &bx = tx_.at(b), &br = tr_.at(b);
    const bool da = dep(a), db = dep(b);
    std::vector<double>* ga = da ? &slot(a) : nullptr;
    std::vector<double>* gb = db ? &slot(b) : nullptr;
    for (int64_t o = 0; o < static_cast<int64_t>(g.size()); ++o) {
      const auto oi = unravel(o, os);
      const int64_t ia = broadcast_source(oi, ax.shape), ib = broadcast_source(oi, bx.shape);
      double ma = 0, mb = 0;
      if (op == "Add") {
        ma = mb = 1;
      } else if (op == "Sub") {
        ma = 1;
        mb = -1;
      } else if (op == "Mul") {
        if (da && db) {
          ma = 0.5 * (bx.v[ib] + br.v[ib]);
          mb = 0.5 * (ax.v[ia] + ar.v[ia]);
        } else {
          ma = bx.v[ib];
          mb = ax.v[ia];
        }
      } else {  // Div
        if (da && db) {
          ma = 0.5 * (1 / bx.v[ib] + 1 / br.v[ib]);
          mb = -(ax.v[ia] + ar.v[ia]) / (2 * bx.v[ib] * br.v[ib]);
        } else if (da) {
          ma = 1 / bx.v[ib];
        } else {
          mb = -ax.v[ia] / (bx.v[ib] * br.v[ib]);
        }
      }
      if (ga) (*ga)[ia] += g[o] * ma;
      if (gb) (*gb)[ib] += g[o] * mb;
    }
  }

  void matmul(const Node& n, const std::vector<double>& g, const Shape& os) {
    const Arr &A = tx_.at(n.inputs[0]), &B = tx_.at(n.inputs[1]);
    const bool da = dep(n.inputs[0]), db = dep(n.inputs[1]);
    if (da && db) unsupported(n, "both operands vary");
    const int64_t M = A.shape[A.shape.size() - 2], K = A.shape.back(), N = B.shape.back();
    const Shape obatch(os.begin(), os.end() - 2);
    const Shape abatch(A.shape.begin(), A.shape.end() - 2),
        bbatch(B.shape.begin(), B.shape.end() - 2);
    std::vector<double>* ga = da ? &slot(n.inputs[0]) : nullptr;
    std::vector<double>* gb = db ? &slot(n.inputs[1]) : nullptr;
    for (int64_t bt = 0; bt < element_count(obatch); ++bt) {
      const auto bi = unravel(bt, obatch);
      const int64_t pa = abatch.empty() ? 0 : broadcast_source(bi, abatch);
      const int64_t pb = bbatch.empty() ? 0 : broadcast_source(bi, bbatch);
      for (int64_t i = 0; i < M; ++i) {
        for (int64_t j = 0; j < N; ++j) {
          const double gij = g[(bt * M + i) * N + j];
          for (int64_t k = 0; k < K; ++k) {
            if (ga) (*ga)[(pa * M + i) * K + k] += gij * B.v[(pb * K + k) * N + j];
            if (gb) (*gb)[(pb * K + k) * N + j] += gij * A.v[(pa * M + i) * K + k];
          }
        }
      }
    }
  }

  void gemm(const Node& n, const std::vector<double>& g) {
    if (dep(n.inputs[1])) unsupported(n, "B varies");
    const Arr &A = tx_.at(n.inputs[0]), &B = tx_.at(n.inputs[1]);
    const bool ta = n.attr_int("transA", 0) != 0, tb = n.attr_int("transB", 0) != 0;
    const double alpha = n.attr_float("alpha", 1.0);
    const int64_t M = ta ? A.shape[1] : A.shape[0], K = ta ? A.shape[0] : A.shape[1];
    const int64_t N = tb ? B.shape[0] : B.shape[1];
    auto& ga = slot(n.inputs[0]);
    for (int64_t i = 0; i < M; ++i) {
      for (int64_t k = 0; k < K; ++k) {
        double acc = 0;
        for (int64_t j = 0; j < N; ++j) {
          const double b = tb ? B.v[j * K + k] : B.v[k * N + j];
          acc += g[i * N + j] * b;
        }
        ga[ta ? k * M + i : i * K + k] += alpha * acc;
      }
    }
  }

  struct Win {
    int64_t kh, kw, sh, sw, dh, dw, pt, pl;
  };

  Win window(const Node& n, int64_t kh, int64_t kw) const {
    const auto s = n.attr_ints("strides", {1, 1});
    const auto d = n.attr_ints("dilations", {1, 1});
    const auto p = n.attr_ints("pads", {0, 0, 0, 0});
    return {kh, kw, s[0], s[1], d[0], d[1], p[0], p[1]};
  }

  void conv(const Node& n, const std::vector<double>& g, const Shape& os) {
    const Arr& X = tx_.at(n.inputs[0]);
    const Arr& W = tx_.at(n.inputs[1]);
    const int64_t C = X.shape[1], H = X.shape[2], Wd = X.shape[3];
    const int64_t O = W.shape[0], Cg = W.shape[1];
    const int64_t group = n.attr_int("group", 1), Og = O / group;
    const Win w = window(n, W.shape[2], W.shape[3]);
    const int64_t OH = os[2], OW = os[3];
    auto& gx = slot(n.inputs[0]);
    for (int64_t o = 0; o < O; ++o) {
      const int64_t grp = o / Og;
      for (int64_t oy = 0; oy < OH; ++oy) {
        for (int64_t ox = 0; ox < OW; ++ox) {
          const double go = g[(o * OH + oy) * OW + ox];
          for (int64_t c = 0; c < Cg; ++c) {
            const int64_t ci = grp * Cg + c;
            for (int64_t a = 0; a < w.kh; ++a) {
              const int64_t iy = oy * w.sh - w.pt + a * w.dh;
              if (iy < 0 || iy >= H) continue;
              for (int64_t b = 0; b < w.kw; ++b) {
                const int64_t ix = ox * w.sw - w.pl + b * w.dw;
                if (ix < 0 || ix >= Wd) continue;
                gx[(ci * H + iy) * Wd + ix] += go * W.v[((o * Cg + c) * w.kh + a) * w.kw + b];
              }
            }
          }
        }
      }
    }
    (void)C;
  }

  void maxpool(const Node& n, const std::vector<double>& g, const Shape& os) {
    const Arr& X = tx_.at(n.inputs[0]);
    const Arr& Rf = tr_.at(n.inputs[0]);
    const int64_t C = X.shape[1], H = X.shape[2], Wd = X.shape[3];
    const bool global = n.op_type == "GlobalMaxPool";
    const Win w = global
                      ? Win{H, Wd, 1, 1, 1, 1, 0, 0}
                      : window(n, n.attr_ints("kernel_shape")[0], n.attr_ints("kernel_shape")[1]);
    const int64_t OH = os[2], OW = os[3];
    std::vector<double> S(X.v.size(), 0.0);
    for (int64_t c = 0; c < C; ++c) {
      for (int64_t oy = 0; oy < OH; ++oy) {
        for (int64_t ox = 0; ox < OW; ++ox) {
          int64_t ax = -1, ar = -1;
          for (int64_t a = 0; a < w.kh; ++a) {
            const int64_t iy = oy * w.sh - w.pt + a;
            if (iy < 0 || iy >= H) continue;
            for (int64_t b = 0; b < w.kw; ++b) {
              const int64_t ix = ox * w.sw - w.pl + b;
              if (ix < 0 || ix >= Wd) continue;
              const int64_t at = (c * H + iy) * Wd + ix;
              if (ax < 0 || X.v[at] > X.v[ax]) ax = at;
              if (ar < 0 || Rf.v[at] > Rf.v[ar]) ar = at;
            }
          }
          const double yx = X.v[ax], yr = Rf.v[ar];
          const double top = std::max(yx, yr);
          const double go = g[(c * OH + oy) * OW + ox];
          S[ax] += (top - yr) * go;
          S[ar] += (yx - top) * go;
        }
      }
    }
    auto& gx = slot(n.inputs[0]);
    for (size_t i = 0; i < S.size(); ++i) {
      const double dx = X.v[i] - Rf.v[i];
      if (dx * dx > o_.eps_pool * o_.eps_pool) gx[i] += S[i] / dx;
    }
  }

  void avgpool(const Node& n, const std::vector<double>& g, const Shape& os) {
    const Arr& X = tx_.at(n.inputs[0]);
    const int64_t C = X.shape[1], H = X.shape[2], Wd = X.shape[3];
    const bool global = n.op_type == "GlobalAveragePool";
    const Win w = global
                      ? Win{H, Wd, 1, 1, 1, 1, 0, 0}
                      : window(n, n.attr_ints("kernel_shape")[0], n.attr_ints("kernel_shape")[1]);
    const bool include_pad = !global && n.attr_int("count_include_pad", 0) != 0;
    const int64_t OH = os[2], OW = os[3];
    auto& gx = slot(n.inputs[0]);
    for (int64_t c = 0; c < C; ++c) {
      for (int64_t oy = 0; oy < OH; ++oy) {
        for (int64_t ox = 0; ox < OW; ++ox) {
          std::vector<int64_t> cover;
          for (int64_t a = 0; a < w.kh; ++a) {
            for (int64_t b = 0; b < w.kw; ++b) {
              const int64_t iy = oy * w.sh - w.pt + a, ix = ox * w.sw - w.pl + b;
              if (iy >= 0 && iy < H && ix >= 0 && ix < Wd) cover.push_back((c * H + iy) * Wd + ix);
            }
          }
          const double count =
              include_pad ? static_cast<double>(w.kh * w.kw) : static_cast<double>(cover.size());
          const double go = g[(c * OH + oy) * OW + ox];
          for (int64_t at : cover) gx[at] += go / count;
        }
      }
    }
  }

  const GraphModel& m_;
  OracleOptions o_;
  std::string input_, output_;
  std::vector<size_t> order_;
  std::set<std::string> dep_;
  std::map<std::string, Arr> tx_, tr_, grads_;
};

Tensor row_of(const Tensor& t, int64_t b) {
  Shape s = t.shape();
  const int64_t per = t.size() / s[0];
  s[0] = 1;
  const auto all = t.to_doubles();
  return Tensor::from_values(
      t.dtype(), s, std::span<const double>(all.data() + b * per, static_cast<size_t>(per)));
}

}  // namespace

Tensor deeplift_multipliers(const GraphModel& model, const Tensor& x, const Tensor& r,
                            const OracleOptions& options) {
  Oracle oracle(model, options);
  Arr m = oracle.multipliers(x, r);
  return Tensor::from_values(DType::kFloat64, m.shape, m.v);
}

Tensor deeplift_oracle(const GraphModel& model, const Tensor& x, const Tensor& references,
                       const OracleOptions& options) {
  if (x.shape().empty() || x.shape()[0] != 1) throw ShapeError("oracle explains one row");
  Oracle oracle(model, options);
  const int64_t B = references.shape().at(0);
  const auto xv = x.to_doubles();
  std::vector<double> phi(xv.size(), 0.0);
  for (int64_t b = 0; b < B; ++b) {
    const Tensor r = row_of(references, b);
    const Arr m = oracle.multipliers(x, r);
    const auto rv = r.to_doubles();
    for (size_t i = 0; i < phi.size(); ++i) phi[i] += m.v[i] * (xv[i] - rv[i]);
  }
  for (auto& p : phi) p /= static_cast<double>(B);
  return Tensor::from_values(DType::kFloat64, x.shape(), phi);
}

Tensor finite_diff(const GraphModel& model, const Tensor& x, int64_t output_index, double h,
                   const std::string& output_name) {
  const Session session(model);
  const std::string& in = model.inputs.at(0).name;
  const std::string out = output_name.empty() ? model.outputs.at(0).name : output_name;
  const auto base = x.to_doubles();
  std::vector<double> grad(base.size());
  auto eval = [&](std::vector<double> v) {
    const Tensor t = Tensor::from_values(x.dtype(), x.shape(), v);
    return session.run({{in, t}}).outputs.at(out).at(output_index);
  };
  for (size_t i = 0; i < base.size(); ++i) {
    auto up = base, down = base;
    up[i] += h;
    down[i] -= h;
    grad[i] = (eval(up) - eval(down)) / (2 * h);
  }
  return Tensor::from_values(DType::kFloat64, x.shape(), grad);
}

ClosenessReport compare_attributions(const Tensor& a, const Tensor& b, double atol, double rtol) {
  if (a.size() != b.size()) {
    throw ShapeError("cannot compare " + shape_to_string(a.shape()) + " with " +
                     shape_to_string(b.shape()));
  }
  ClosenessReport r;
  r.count = a.size();
  r.atol = atol;
  r.rtol = rtol;
  r.worst_excess = -std::numeric_limits<double>::infinity();
  for (int64_t i = 0; i < a.size(); ++i) {
    const double x = a.at(i), y = b.at(i);
    const double diff = std::abs(x - y);
    const double excess = diff - (atol + rtol * std::abs(y));
    if (excess < 0) ++r.within;
    r.max_abs_diff = std::max(r.max_abs_diff, diff);
    if (excess > r.worst_excess || std::isnan(diff)) {
      r.worst_excess = excess;
      r.worst_index = i;
      r.worst_a = x;
      r.worst_b = y;
    }
  }
  r.fraction = r.count ? static_cast<double>(r.within) / static_cast<double>(r.count) : 1.0;
  if (r.count == 0) r.worst_excess = 0;
  return r;
}

}  // namespace shapgraph
