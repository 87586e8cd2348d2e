// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapgraph/executor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "shapgraph/error.hpp"
#include "shapgraph/op_attrs.hpp"
#include "shapgraph/shape_inference.hpp"

namespace shapgraph {

namespace {

// Strides of `in` aligned to an output of rank `rank`; broadcast axes get 0.
std::vector<int64_t> broadcast_strides(const Shape& in, size_t rank) {
  std::vector<int64_t> out(rank, 0);
  const auto st = strides_of(in);
  const size_t offset = rank - in.size();
  for (size_t i = 0; i < in.size(); ++i) out[offset + i] = in[i] == 1 ? 0 : st[i];
  return out;
}

// Walks every index of `shape` in row-major order, tracking one flat offset
// per operand.
class StridedWalk {
 public:
  StridedWalk(const Shape& shape, std::vector<std::vector<int64_t>> strides)
      : shape_(shape),
        strides_(std::move(strides)),
        index_(shape.size(), 0),
        offsets_(strides_.size(), 0) {}

  int64_t offset(size_t operand) const { return offsets_[operand]; }

  void next() {
    for (size_t d = shape_.size(); d-- > 0;) {
      if (++index_[d] < shape_[d]) {
        for (size_t k = 0; k < offsets_.size(); ++k) offsets_[k] += strides_[k][d];
        return;
      }
      for (size_t k = 0; k < offsets_.size(); ++k) offsets_[k] -= strides_[k][d] * (shape_[d] - 1);
      index_[d] = 0;
    }
  }

 private:
  Shape shape_;
  std::vector<std::vector<int64_t>> strides_;
  std::vector<int64_t> index_;
  std::vector<int64_t> offsets_;
};

template <typename T, typename Fn>
Tensor map_unary(const Tensor& x, Fn fn) {
  Tensor out(x.dtype(), x.shape());
  auto in = x.data<T>();
  auto o = out.mutable_data<T>();
  for (size_t i = 0; i < in.size(); ++i) o[i] = fn(in[i]);
  return out;
}

template <typename T, typename Fn>
Tensor map_nary(const std::vector<const Tensor*>& ins, Fn fn) {
  std::vector<Shape> shapes;
  for (const Tensor* t : ins) shapes.push_back(t->shape());
  const Shape shape = broadcast_shapes(shapes);
  Tensor out(ins[0]->dtype(), shape);
  auto o = out.mutable_data<T>();
  std::vector<std::span<const T>> data;
  std::vector<std::vector<int64_t>> strides;
  for (const Tensor* t : ins) {
    data.push_back(t->data<T>());
    strides.push_back(broadcast_strides(t->shape(), shape.size()));
  }
  StridedWalk walk(shape, std::move(strides));
  T args[3];
  for (size_t i = 0; i < o.size(); ++i) {
    for (size_t k = 0; k < data.size(); ++k) args[k] = data[k][walk.offset(k)];
    o[i] = fn(args);
    walk.next();
  }
  return out;
}

template <typename T>
Tensor matmul(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const int64_t m = sa[sa.size() - 2], k = sa.back(), n = sb.back();
  Shape batch =
      broadcast_shapes({Shape(sa.begin(), sa.end() - 2), Shape(sb.begin(), sb.end() - 2)});
  Shape out_shape = batch;
  out_shape.push_back(m);
  out_shape.push_back(n);
  Tensor out(a.dtype(), out_shape);
  auto o = out.mutable_data<T>();
  auto da = a.data<T>();
  auto db = b.data<T>();
  // Batch offsets in units of whole matrices.
  auto bs_a = broadcast_strides(Shape(sa.begin(), sa.end() - 2), batch.size());
  auto bs_b = broadcast_strides(Shape(sb.begin(), sb.end() - 2), batch.size());
  StridedWalk walk(batch, {bs_a, bs_b});
  const int64_t batches = element_count(batch);
  for (int64_t bi = 0; bi < batches; ++bi) {
    const T* pa = da.data() + walk.offset(0) * m * k;
    const T* pb = db.data() + walk.offset(1) * k * n;
    T* po = o.data() + bi * m * n;
    for (int64_t i = 0; i < m; ++i) {
      for (int64_t p = 0; p < k; ++p) {
        const T av = pa[i * k + p];
        for (int64_t j = 0; j < n; ++j) po[i * n + j] += av * pb[p * n + j];
      }
    }
    walk.next();
  }
  return out;
}

template <typename T>
Tensor gemm(const Node& node, const std::vector<const Tensor*>& in) {
  const Tensor& a = *in[0];
  const Tensor& b = *in[1];
  const bool ta = node.attr_int("transA", 0) != 0;
  const bool tb = node.attr_int("transB", 0) != 0;
  const T alpha = static_cast<T>(node.attr_float("alpha", 1.0));
  const T beta = static_cast<T>(node.attr_float("beta", 1.0));
  const int64_t m = ta ? a.shape()[1] : a.shape()[0];
  const int64_t k = ta ? a.shape()[0] : a.shape()[1];
  const int64_t n = tb ? b.shape()[0] : b.shape()[1];
  auto da = a.data<T>();
  auto db = b.data<T>();
  Tensor out(a.dtype(), {m, n});
  auto o = out.mutable_data<T>();
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t p = 0; p < k; ++p) {
      const T av = ta ? da[p * m + i] : da[i * k + p];
      for (int64_t j = 0; j < n; ++j) o[i * n + j] += av * (tb ? db[j * k + p] : db[p * n + j]);
    }
  }
  if (alpha != T(1)) {
    for (auto& v : o) v *= alpha;
  }
  if (in.size() > 2) {
    const Tensor& c = *in[2];
    auto dc = c.data<T>();
    StridedWalk walk({m, n}, {broadcast_strides(c.shape(), 2)});
    for (auto& v : o) {
      v += beta * dc[walk.offset(0)];
      walk.next();
    }
  }
  return out;
}

template <typename T>
Tensor conv(const Node& node, const std::vector<const Tensor*>& in) {
  const Tensor& x = *in[0];
  const Tensor& w = *in[1];
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  const auto g = window_geometry(node, xs, {ws[2], ws[3]});
  const int64_t groups = node.attr_int("group", 1);
  const int64_t n_batch = xs[0], c_in = xs[1], h = xs[2], wd = xs[3];
  const int64_t c_out = ws[0], c_per = ws[1];
  const int64_t out_per = c_out / groups;
  const int64_t oh = g.out_h, ow = g.out_w;
  Tensor out(x.dtype(), {n_batch, c_out, oh, ow});
  auto o = out.mutable_data<T>();
  auto dx = x.data<T>();
  auto dw = w.data<T>();
  for (int64_t n = 0; n < n_batch; ++n) {
    for (int64_t co = 0; co < c_out; ++co) {
      T* plane = o.data() + (n * c_out + co) * oh * ow;
      const int64_t grp = co / out_per;
      for (int64_t cl = 0; cl < c_per; ++cl) {
        const int64_t ci = grp * c_per + cl;
        const T* xin = dx.data() + (n * c_in + ci) * h * wd;
        for (int64_t kh = 0; kh < g.kernel_h; ++kh) {
          for (int64_t kw = 0; kw < g.kernel_w; ++kw) {
            const T wv = dw[((co * c_per + cl) * g.kernel_h + kh) * g.kernel_w + kw];
            for (int64_t y = 0; y < oh; ++y) {
              const int64_t iy = y * g.stride_h - g.pads[0] + kh * g.dilation_h;
              if (iy < 0 || iy >= h) continue;
              for (int64_t xo = 0; xo < ow; ++xo) {
                const int64_t ix = xo * g.stride_w - g.pads[1] + kw * g.dilation_w;
                if (ix < 0 || ix >= wd) continue;
                plane[y * ow + xo] += wv * xin[iy * wd + ix];
              }
            }
          }
        }
      }
      if (in.size() > 2) {
        const T bv = in[2]->data<T>()[co];
        for (int64_t i = 0; i < oh * ow; ++i) plane[i] += bv;
      }
    }
  }
  (void)c_in;
  return out;
}

template <typename T>
Tensor pool(const Node& node, const Tensor& x, bool is_max) {
  const auto g = window_geometry(node, x.shape());
  const Shape& xs = x.shape();
  const int64_t planes = xs[0] * xs[1], h = xs[2], wd = xs[3];
  const bool include_pad = node.attr_int("count_include_pad", 0) != 0;
  Tensor out(x.dtype(), {xs[0], xs[1], g.out_h, g.out_w});
  auto o = out.mutable_data<T>();
  auto dx = x.data<T>();
  for (int64_t p = 0; p < planes; ++p) {
    const T* xin = dx.data() + p * h * wd;
    T* plane = o.data() + p * g.out_h * g.out_w;
    for (int64_t y = 0; y < g.out_h; ++y) {
      for (int64_t xo = 0; xo < g.out_w; ++xo) {
        T acc = is_max ? -std::numeric_limits<T>::infinity() : T(0);
        int64_t count = 0;
        for (int64_t kh = 0; kh < g.kernel_h; ++kh) {
          const int64_t iy = y * g.stride_h - g.pads[0] + kh;
          for (int64_t kw = 0; kw < g.kernel_w; ++kw) {
            const int64_t ix = xo * g.stride_w - g.pads[1] + kw;
            if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
            const T v = xin[iy * wd + ix];
            if (is_max) {
              if (v > acc) acc = v;
            } else {
              acc += v;
            }
            ++count;
          }
        }
        if (!is_max) acc /= static_cast<T>(include_pad ? g.window_size() : count);
        plane[y * g.out_w + xo] = acc;
      }
    }
  }
  return out;
}

template <typename T>
Tensor global_pool(const Tensor& x, bool is_max) {
  const Shape& xs = x.shape();
  Shape os(xs.size(), 1);
  os[0] = xs[0];
  os[1] = xs[1];
  const int64_t planes = xs[0] * xs[1];
  const int64_t area = planes == 0 ? 0 : x.size() / planes;
  Tensor out(x.dtype(), os);
  auto o = out.mutable_data<T>();
  auto dx = x.data<T>();
  for (int64_t p = 0; p < planes; ++p) {
    T acc = is_max ? -std::numeric_limits<T>::infinity() : T(0);
    for (int64_t i = 0; i < area; ++i) {
      const T v = dx[p * area + i];
      if (is_max) {
        if (v > acc) acc = v;
      } else {
        acc += v;
      }
    }
    o[p] = is_max ? acc : acc / static_cast<T>(area);
  }
  return out;
}

template <typename T>
Tensor batch_norm(const Node& node, const std::vector<const Tensor*>& in) {
  const Tensor& x = *in[0];
  const T eps = static_cast<T>(node.attr_float("epsilon", 1e-5));
  auto scale = in[1]->data<T>();
  auto bias = in[2]->data<T>();
  auto mean = in[3]->data<T>();
  auto var = in[4]->data<T>();
  const Shape& xs = x.shape();
  const int64_t channels = xs[1];
  int64_t inner = 1;
  for (size_t d = 2; d < xs.size(); ++d) inner *= xs[d];
  Tensor out(x.dtype(), xs);
  auto o = out.mutable_data<T>();
  auto dx = x.data<T>();
  for (int64_t n = 0; n < xs[0]; ++n) {
    for (int64_t c = 0; c < channels; ++c) {
      const T factor = scale[c] / std::sqrt(var[c] + eps);
      const int64_t base = (n * channels + c) * inner;
      for (int64_t i = 0; i < inner; ++i) o[base + i] = (dx[base + i] - mean[c]) * factor + bias[c];
    }
  }
  return out;
}

template <typename T>
Tensor softmax(const Node& node, const Tensor& x) {
  const Shape& xs = x.shape();
  const int64_t axis = normalize_axis(node.attr_int("axis", -1), xs.size(), node);
  int64_t outer = 1, inner = 1;
  for (int64_t d = 0; d < axis; ++d) outer *= xs[d];
  for (size_t d = axis + 1; d < xs.size(); ++d) inner *= xs[d];
  const int64_t len = xs[axis];
  Tensor out(x.dtype(), xs);
  auto o = out.mutable_data<T>();
  auto dx = x.data<T>();
  for (int64_t a = 0; a < outer; ++a) {
    for (int64_t b = 0; b < inner; ++b) {
      const int64_t base = a * len * inner + b;
      T mx = -std::numeric_limits<T>::infinity();
      for (int64_t i = 0; i < len; ++i) mx = std::max(mx, dx[base + i * inner]);
      T sum = 0;
      for (int64_t i = 0; i < len; ++i) {
        const T e = std::exp(dx[base + i * inner] - mx);
        o[base + i * inner] = e;
        sum += e;
      }
      for (int64_t i = 0; i < len; ++i) o[base + i * inner] /= sum;
    }
  }
  return out;
}

template <typename T>
Tensor transpose(const Node& node, const Tensor& x) {
  const Shape& xs = x.shape();
  const auto perm = transpose_perm(node, xs.size());
  Shape os;
  std::vector<int64_t> in_strides;
  const auto st = strides_of(xs);
  for (int64_t p : perm) {
    os.push_back(xs[p]);
    in_strides.push_back(st[p]);
  }
  Tensor out(x.dtype(), os);
  auto o = out.mutable_data<T>();
  auto dx = x.data<T>();
  StridedWalk walk(os, {in_strides});
  for (auto& v : o) {
    v = dx[walk.offset(0)];
    walk.next();
  }
  return out;
}

template <typename T>
Tensor reduce(const Node& node, const Tensor& x, bool mean) {
  const Shape& xs = x.shape();
  const auto axes = reduce_axes(node, xs.size());
  const bool keep = node.attr_int("keepdims", 1) != 0;
  Shape kept = xs;  // keepdims form
  for (int64_t a : axes) kept[a] = 1;
  Tensor out(x.dtype(), kept);
  auto o = out.mutable_data<T>();
  auto dx = x.data<T>();
  // Visiting inputs in row-major order accumulates each output over
  // ascending reduced index.
  StridedWalk walk(xs, {broadcast_strides(kept, xs.size())});
  for (size_t i = 0; i < dx.size(); ++i) {
    o[walk.offset(0)] += dx[i];
    walk.next();
  }
  if (mean) {
    int64_t count = 1;
    for (int64_t a : axes) count *= xs[a];
    for (auto& v : o) v /= static_cast<T>(count);
  }
  if (!keep) {
    Shape squeezed;
    for (size_t d = 0; d < xs.size(); ++d) {
      if (!std::binary_search(axes.begin(), axes.end(), static_cast<int64_t>(d))) {
        squeezed.push_back(xs[d]);
      }
    }
    return out.reshaped(squeezed);
  }
  return out;
}

template <typename T>
Tensor tile(const Node& node, const Tensor& x) {
  const auto reps = node.attr_ints("repeats");
  const Shape& xs = x.shape();
  Shape os = xs;
  for (size_t d = 0; d < os.size(); ++d) os[d] *= reps[d];
  Tensor out(x.dtype(), os);
  auto o = out.mutable_data<T>();
  auto dx = x.data<T>();
  const auto st = strides_of(xs);
  std::vector<int64_t> idx(os.size(), 0);
  for (auto& v : o) {
    int64_t off = 0;
    for (size_t d = 0; d < os.size(); ++d) off += (idx[d] % xs[d]) * st[d];
    v = dx[off];
    for (size_t d = os.size(); d-- > 0;) {
      if (++idx[d] < os[d]) break;
      idx[d] = 0;
    }
  }
  return out;
}

template <typename T>
Tensor concat(const Node& node, const std::vector<const Tensor*>& in) {
  const Shape& s0 = in[0]->shape();
  const int64_t axis = normalize_axis(node.attr_int("axis", 0), s0.size(), node);
  Shape os = s0;
  os[axis] = 0;
  for (const Tensor* t : in) os[axis] += t->shape()[axis];
  int64_t outer = 1, inner = 1;
  for (int64_t d = 0; d < axis; ++d) outer *= os[d];
  for (size_t d = axis + 1; d < os.size(); ++d) inner *= os[d];
  Tensor out(in[0]->dtype(), os);
  auto o = out.mutable_data<T>();
  int64_t pos = 0;
  for (int64_t a = 0; a < outer; ++a) {
    for (const Tensor* t : in) {
      const int64_t chunk = t->shape()[axis] * inner;
      auto src = t->data<T>().subspan(a * chunk, chunk);
      std::copy(src.begin(), src.end(), o.begin() + pos);
      pos += chunk;
    }
  }
  return out;
}

template <typename T>
std::vector<Tensor> split(const Node& node, const Tensor& x) {
  const Shape& xs = x.shape();
  const int64_t axis = normalize_axis(node.attr_int("axis", 0), xs.size(), node);
  const auto sizes = split_sizes(node, xs);
  int64_t outer = 1, inner = 1;
  for (int64_t d = 0; d < axis; ++d) outer *= xs[d];
  for (size_t d = axis + 1; d < xs.size(); ++d) inner *= xs[d];
  auto dx = x.data<T>();
  std::vector<Tensor> outs;
  int64_t start = 0;
  for (int64_t s : sizes) {
    Shape ps = xs;
    ps[axis] = s;
    Tensor piece(x.dtype(), ps);
    auto o = piece.mutable_data<T>();
    for (int64_t a = 0; a < outer; ++a) {
      auto src = dx.subspan((a * xs[axis] + start) * inner, s * inner);
      std::copy(src.begin(), src.end(), o.begin() + a * s * inner);
    }
    outs.push_back(std::move(piece));
    start += s;
  }
  return outs;
}

template <typename T>
std::vector<Tensor> dispatch(const Node& node, const std::vector<const Tensor*>& in) {
  const std::string& op = node.op_type;
  auto binary = [&](auto fn) {
    return map_nary<T>({in[0], in[1]}, [fn](const T* a) { return fn(a[0], a[1]); });
  };
  if (op == "Add") return {binary([](T a, T b) { return a + b; })};
  if (op == "Sub") return {binary([](T a, T b) { return a - b; })};
  if (op == "Mul") return {binary([](T a, T b) { return a * b; })};
  if (op == "Div") return {binary([](T a, T b) { return a / b; })};
  if (op == "Greater") return {binary([](T a, T b) { return a > b ? T(1) : T(0); })};
  if (op == "Where") {
    return {
        map_nary<T>({in[0], in[1], in[2]}, [](const T* a) { return a[0] != T(0) ? a[1] : a[2]; })};
  }
  if (op == "Relu") return {map_unary<T>(*in[0], [](T v) { return v > T(0) ? v : T(0); })};
  if (op == "Sigmoid") {
    return {map_unary<T>(*in[0], [](T v) { return T(1) / (T(1) + std::exp(-v)); })};
  }
  if (op == "Tanh") return {map_unary<T>(*in[0], [](T v) { return std::tanh(v); })};
  if (op == "Exp") return {map_unary<T>(*in[0], [](T v) { return std::exp(v); })};
  if (op == "MatMul") return {matmul<T>(*in[0], *in[1])};
  if (op == "Gemm") return {gemm<T>(node, in)};
  if (op == "Conv") return {conv<T>(node, in)};
  if (op == "MaxPool") return {pool<T>(node, *in[0], true)};
  if (op == "AveragePool") return {pool<T>(node, *in[0], false)};
  if (op == "GlobalMaxPool") return {global_pool<T>(*in[0], true)};
  if (op == "GlobalAveragePool") return {global_pool<T>(*in[0], false)};
  if (op == "BatchNormalization") return {batch_norm<T>(node, in)};
  if (op == "Softmax") return {softmax<T>(node, *in[0])};
  if (op == "Transpose") return {transpose<T>(node, *in[0])};
  if (op == "Reshape") return {in[0]->reshaped(resolve_reshape(node, in[0]->shape()))};
  if (op == "Flatten") {
    const Shape& xs = in[0]->shape();
    const int64_t rank = xs.size();
    int64_t axis = node.attr_int("axis", 1);
    if (axis < 0) axis += rank;
    int64_t outer = 1;
    for (int64_t d = 0; d < axis; ++d) outer *= xs[d];
    return {in[0]->reshaped({outer, outer == 0 ? 0 : in[0]->size() / outer})};
  }
  if (op == "ReduceSum") return {reduce<T>(node, *in[0], false)};
  if (op == "ReduceMean") return {reduce<T>(node, *in[0], true)};
  if (op == "Tile") return {tile<T>(node, *in[0])};
  if (op == "Concat") return {concat<T>(node, in)};
  if (op == "Split") return split<T>(node, *in[0]);
  throw UnsupportedOp("node '" + node.name + "': no kernel for op_type '" + op + "'");
}

bool has_nan(const Tensor& t) {
  return dispatch_dtype(t.dtype(), [&](auto zero) {
    using T = decltype(zero);
    for (T v : t.data<T>()) {
      if (std::isnan(v)) return true;
    }
    return false;
  });
}

}  // namespace

std::vector<Tensor> eval_node(const Node& node, std::span<const Tensor* const> inputs) {
  if (!find_schema(node.op_type)) {
    throw UnsupportedOp("node '" + node.name + "': unsupported op_type '" + node.op_type + "'");
  }
  if (node.op_type == "Constant") {
    const DType dtype = parse_dtype(node.attr_string("dtype", "float64"));
    if (node.has_attr("value_float"))
      return {Tensor::scalar(node.attr_float("value_float", 0), dtype)};
    const auto vals = node.attr_floats("value_floats");
    return {Tensor::from_values(dtype, {static_cast<int64_t>(vals.size())}, vals)};
  }
  // Shape inference doubles as operand validation for every kernel.
  std::vector<ValueInfo> infos;
  for (const Tensor* t : inputs) infos.push_back({t->dtype(), t->shape()});
  const auto expected = infer_node(node, infos);

  std::vector<const Tensor*> in(inputs.begin(), inputs.end());
  auto outs = dispatch_dtype(inputs[0]->dtype(),
                             [&](auto zero) { return dispatch<decltype(zero)>(node, in); });
  for (size_t i = 0; i < outs.size(); ++i) {
    if (outs[i].shape() != expected[i].shape) {
      throw ShapeError("node '" + node.name + "': kernel produced " +
                       shape_to_string(outs[i].shape()) + ", expected " +
                       shape_to_string(expected[i].shape));
    }
    if (has_nan(outs[i]) && std::all_of(in.begin(), in.end(), [](const Tensor* t) {
          return !has_nan(*t) && t->all_finite();
        })) {
      throw NumericError("node '" + node.name + "' (" + node.op_type +
                         ") produced NaN from finite inputs");
    }
  }
  return outs;
}

std::vector<Tensor> eval_node(const Node& node, const std::vector<Tensor>& inputs) {
  std::vector<const Tensor*> ptrs;
  for (const auto& t : inputs) ptrs.push_back(&t);
  return eval_node(node, std::span<const Tensor* const>(ptrs));
}

Session::Session(GraphModel model) : model_(std::make_shared<const GraphModel>(std::move(model))) {
  validate(*model_);
  order_ = topological_order(*model_);
  std::unordered_map<std::string, size_t> last_use;
  for (size_t step = 0; step < order_.size(); ++step) {
    for (const auto& name : model_->nodes[order_[step]].inputs) last_use[name] = step;
  }
  for (const auto& spec : model_->outputs) last_use.erase(spec.name);
  release_.resize(order_.size());
  for (const auto& [name, step] : last_use) {
    if (model_->initializers.count(name)) continue;
    release_[step].push_back(name);
  }
  for (auto& names : release_) std::sort(names.begin(), names.end());
}

ExecutionResult Session::run(const FeedMap& feed, bool capture) const {
  const GraphModel& m = *model_;
  std::unordered_map<std::string, Tensor> values;
  for (const auto& spec : m.inputs) {
    auto it = feed.find(spec.name);
    if (it == feed.end()) throw ShapeError("feed is missing input '" + spec.name + "'");
    const Tensor& t = it->second;
    bool ok = t.dtype() == spec.dtype && t.shape().size() == spec.shape.size();
    for (size_t d = 0; ok && d < spec.shape.size(); ++d) {
      ok = spec.shape[d] == kSymbolicBatch || spec.shape[d] == t.shape()[d];
    }
    if (!ok) {
      throw ShapeError("input '" + spec.name + "' expects " + std::string(dtype_name(spec.dtype)) +
                       " " + shape_to_string(spec.shape) + ", got " +
                       std::string(dtype_name(t.dtype())) + " " + shape_to_string(t.shape()));
    }
    values.emplace(spec.name, t);
  }
  auto lookup = [&](const std::string& name) -> const Tensor* {
    if (auto it = values.find(name); it != values.end()) return &it->second;
    if (const Tensor* t = m.find_initializer(name)) return t;
    throw ShapeError("value '" + name + "' is not available");
  };

  ExecutionResult result;
  if (capture) result.trace.emplace();
  std::vector<const Tensor*> ins;
  for (size_t step = 0; step < order_.size(); ++step) {
    const Node& node = m.nodes[order_[step]];
    ins.clear();
    for (const auto& name : node.inputs) ins.push_back(lookup(name));
    auto outs = eval_node(node, std::span<const Tensor* const>(ins));
    for (size_t i = 0; i < outs.size(); ++i) {
      if (capture) result.trace->emplace(node.outputs[i], outs[i]);
      values.insert_or_assign(node.outputs[i], std::move(outs[i]));
    }
    for (const auto& name : release_[step]) values.erase(name);
  }
  for (const auto& spec : m.outputs) result.outputs.emplace(spec.name, *lookup(spec.name));
  return result;
}

ExecutionResult execute(const GraphModel& model, const FeedMap& feed, bool capture) {
  return Session(model).run(feed, capture);
}

}  // namespace shapgraph
