#include "diswm/diffcore/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "diswm/diffcore/errors.hpp"

namespace diswm {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;
using Storage = std::shared_ptr<const std::vector<double>>;

Tensor make_result(Shape shape, std::vector<double> value, std::initializer_list<Tensor> inputs, Vjp vjp) {
  Tape* tape = common_tape(std::span<const Tensor>(inputs.begin(), inputs.size()));
  if (!tape) return Tensor(std::move(shape), std::move(value));
  return tape->record(std::move(shape), std::move(value), inputs, std::move(vjp));
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// Element index mapping from a broadcast output back to one operand.
struct Operand {
  enum class Mode { same, tiled, general } mode = Mode::same;
  std::size_t n = 0;
  std::vector<std::size_t> index;

  std::size_t operator()(std::size_t i) const {
    switch (mode) {
      case Mode::same:
        return i;
      case Mode::tiled:
        return i % n;
      default:
        return index[i];
    }
  }
};

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t k = 0; k < rank; ++k) {
    const std::size_t da = k < rank - a.size() ? 1 : a[k - (rank - a.size())];
    const std::size_t db = k < rank - b.size() ? 1 : b[k - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
    out[k] = std::max(da, db);
  }
  return out;
}

Operand plan_operand(const Shape& in, const Shape& out) {
  Operand op;
  op.n = shape_numel(in);
  const std::size_t total = shape_numel(out);
  if (op.n == total) {
    op.mode = Operand::Mode::same;
    return op;
  }
  // Leading-ones-stripped input equal to the trailing part of out: plain tiling.
  std::size_t lead = 0;
  while (lead < in.size() && in[lead] == 1) ++lead;
  const std::size_t tail = in.size() - lead;
  if (tail <= out.size() && std::equal(in.begin() + static_cast<std::ptrdiff_t>(lead), in.end(),
                                       out.end() - static_cast<std::ptrdiff_t>(tail))) {
    op.mode = Operand::Mode::tiled;
    return op;
  }
  op.mode = Operand::Mode::general;
  const std::size_t rank = out.size();
  std::vector<std::size_t> stride(rank, 0);
  std::size_t s = 1;
  for (std::size_t k = rank; k-- > 0;) {
    const std::ptrdiff_t ik = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(rank - in.size());
    if (ik < 0) continue;
    const std::size_t d = in[static_cast<std::size_t>(ik)];
    stride[k] = d == 1 ? 0 : s;
    s *= d;
  }
  op.index.resize(total);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t flat = 0;
  for (std::size_t i = 0; i < total; ++i) {
    op.index[i] = flat;
    for (std::size_t k = rank; k-- > 0;) {
      ++idx[k];
      flat += stride[k];
      if (idx[k] < out[k]) break;
      flat -= stride[k] * idx[k];
      idx[k] = 0;
    }
  }
  return op;
}

// Calls fn(i, ia, ib) for every output element, with fast loops for the
// common same-shape and row-tiled layouts.
template <typename Fn>
void for_each_pair(const Operand& pa, const Operand& pb, std::size_t n, Fn&& fn) {
  using M = Operand::Mode;
  if (pa.mode == M::same && pb.mode == M::same) {
    for (std::size_t i = 0; i < n; ++i) fn(i, i, i);
  } else if (pa.mode == M::same && pb.mode == M::tiled) {
    for (std::size_t base = 0; base < n; base += pb.n) {
      for (std::size_t j = 0; j < pb.n; ++j) fn(base + j, base + j, j);
    }
  } else if (pa.mode == M::tiled && pb.mode == M::same) {
    for (std::size_t base = 0; base < n; base += pa.n) {
      for (std::size_t j = 0; j < pa.n; ++j) fn(base + j, j, base + j);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) fn(i, pa(i), pb(i));
  }
}

}  // namespace

Tensor elementwise(BinaryOp op, const Tensor& a, const Tensor& b) {
  Shape out_shape = a.shape() == b.shape() ? a.shape() : broadcast_shape(a.shape(), b.shape());
  auto pa = std::make_shared<Operand>(plan_operand(a.shape(), out_shape));
  auto pb = std::make_shared<Operand>(plan_operand(b.shape(), out_shape));
  const std::size_t n = shape_numel(out_shape);
  const double* av = a.data().data();
  const double* bv = b.data().data();
  std::vector<double> out(n);
  double* o = out.data();
  switch (op) {
    case BinaryOp::add:
      for_each_pair(*pa, *pb, n, [&](std::size_t i, std::size_t ia, std::size_t ib) { o[i] = av[ia] + bv[ib]; });
      break;
    case BinaryOp::sub:
      for_each_pair(*pa, *pb, n, [&](std::size_t i, std::size_t ia, std::size_t ib) { o[i] = av[ia] - bv[ib]; });
      break;
    case BinaryOp::mul:
      for_each_pair(*pa, *pb, n, [&](std::size_t i, std::size_t ia, std::size_t ib) { o[i] = av[ia] * bv[ib]; });
      break;
    case BinaryOp::div: {
      bool zero = false;
      for_each_pair(*pa, *pb, n, [&](std::size_t i, std::size_t ia, std::size_t ib) {
        zero |= bv[ib] == 0.0;
        o[i] = av[ia] / bv[ib];
      });
      if (zero) throw DomainError("division by zero");
      break;
    }
  }
  if (!common_tape(std::span<const Tensor>(std::initializer_list<Tensor>{a, b}.begin(), 2))) {
    return Tensor(std::move(out_shape), std::move(out));
  }
  Storage sa = a.storage();
  Storage sb = b.storage();
  return make_result(std::move(out_shape), std::move(out), {a, b},
                     [op, pa, pb, sa, sb, n](std::span<const double> g, std::span<std::vector<double>* const> in) {
                       double* ga = in[0] ? in[0]->data() : nullptr;
                       double* gb = in[1] ? in[1]->data() : nullptr;
                       const double* av = sa->data();
                       const double* bv = sb->data();
                       const double* gv = g.data();
                       auto each = [&](auto&& fn) { for_each_pair(*pa, *pb, n, fn); };
                       switch (op) {
                         case BinaryOp::add:
                           if (ga) each([&](std::size_t i, std::size_t ia, std::size_t) { ga[ia] += gv[i]; });
                           if (gb) each([&](std::size_t i, std::size_t, std::size_t ib) { gb[ib] += gv[i]; });
                           break;
                         case BinaryOp::sub:
                           if (ga) each([&](std::size_t i, std::size_t ia, std::size_t) { ga[ia] += gv[i]; });
                           if (gb) each([&](std::size_t i, std::size_t, std::size_t ib) { gb[ib] -= gv[i]; });
                           break;
                         case BinaryOp::mul:
                           if (ga) each([&](std::size_t i, std::size_t ia, std::size_t ib) { ga[ia] += gv[i] * bv[ib]; });
                           if (gb) each([&](std::size_t i, std::size_t ia, std::size_t ib) { gb[ib] += gv[i] * av[ia]; });
                           break;
                         case BinaryOp::div:
                           if (ga) each([&](std::size_t i, std::size_t ia, std::size_t ib) { ga[ia] += gv[i] / bv[ib]; });
                           if (gb) {
                             each([&](std::size_t i, std::size_t ia, std::size_t ib) {
                               gb[ib] -= gv[i] * av[ia] / (bv[ib] * bv[ib]);
                             });
                           }
                           break;
                       }
                     });
}

namespace {

template <typename F>
void map_into(const double* x, double* y, std::size_t n, F f) {
  for (std::size_t i = 0; i < n; ++i) y[i] = f(x[i]);
}

// gx += g * d(x, y)
template <typename D>
void accumulate(double* gx, const double* g, const double* x, const double* y, std::size_t n, D d) {
  for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * d(x[i], y[i]);
}

}  // namespace

Tensor elementwise(UnaryOp op, const Tensor& a) {
  const std::size_t n = a.numel();
  const double* x = a.data().data();
  std::vector<double> out(n);
  double* y = out.data();
  switch (op) {
    case UnaryOp::exp: map_into(x, y, n, [](double v) { return std::exp(v); }); break;
    case UnaryOp::log:
      for (std::size_t i = 0; i < n; ++i) {
        if (x[i] <= 0.0) throw DomainError("log of non-positive value " + std::to_string(x[i]));
        y[i] = std::log(x[i]);
      }
      break;
    case UnaryOp::tanh: map_into(x, y, n, [](double v) { return std::tanh(v); }); break;
    case UnaryOp::sigmoid: map_into(x, y, n, stable_sigmoid); break;
    case UnaryOp::softplus: map_into(x, y, n, stable_softplus); break;
    case UnaryOp::elu: map_into(x, y, n, [](double v) { return v > 0 ? v : std::expm1(v); }); break;
    case UnaryOp::square: map_into(x, y, n, [](double v) { return v * v; }); break;
    case UnaryOp::neg: map_into(x, y, n, [](double v) { return -v; }); break;
  }
  Tape* tape = a.tape();
  if (!tape) return Tensor(a.shape(), std::move(out));
  Storage sx = a.storage();
  Storage sy = std::make_shared<const std::vector<double>>(std::move(out));
  Vjp vjp = [op, sx, sy](std::span<const double> g, std::span<std::vector<double>* const> in) {
    double* gx = in[0]->data();
    const double* x = sx->data();
    const double* y = sy->data();
    const double* gv = g.data();
    const std::size_t n = g.size();
    switch (op) {
      case UnaryOp::exp: accumulate(gx, gv, x, y, n, [](double, double yy) { return yy; }); break;
      case UnaryOp::log: accumulate(gx, gv, x, y, n, [](double xx, double) { return 1.0 / xx; }); break;
      case UnaryOp::tanh: accumulate(gx, gv, x, y, n, [](double, double yy) { return 1.0 - yy * yy; }); break;
      case UnaryOp::sigmoid: accumulate(gx, gv, x, y, n, [](double, double yy) { return yy * (1.0 - yy); }); break;
      case UnaryOp::softplus:
        accumulate(gx, gv, x, y, n, [](double xx, double) { return stable_sigmoid(xx); });
        break;
      case UnaryOp::elu:
        accumulate(gx, gv, x, y, n, [](double xx, double yy) { return xx > 0 ? 1.0 : yy + 1.0; });
        break;
      case UnaryOp::square: accumulate(gx, gv, x, y, n, [](double xx, double) { return 2.0 * xx; }); break;
      case UnaryOp::neg: accumulate(gx, gv, x, y, n, [](double, double) { return -1.0; }); break;
    }
  };
  const Tensor inputs[] = {a};
  return tape->record(a.shape(), sy, inputs, std::move(vjp));
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::mul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::div, a, b); }
Tensor exp(const Tensor& a) { return elementwise(UnaryOp::exp, a); }
Tensor log(const Tensor& a) { return elementwise(UnaryOp::log, a); }
Tensor tanh(const Tensor& a) { return elementwise(UnaryOp::tanh, a); }
Tensor sigmoid(const Tensor& a) { return elementwise(UnaryOp::sigmoid, a); }
Tensor softplus(const Tensor& a) { return elementwise(UnaryOp::softplus, a); }
Tensor elu(const Tensor& a) { return elementwise(UnaryOp::elu, a); }
Tensor square(const Tensor& a) { return elementwise(UnaryOp::square, a); }
Tensor neg(const Tensor& a) { return elementwise(UnaryOp::neg, a); }

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> y(a.data().begin(), a.data().end());
  for (double& v : y) v *= factor;
  return make_result(a.shape(), std::move(y), {a},
                     [factor](std::span<const double> g, std::span<std::vector<double>* const> in) {
                       auto& gx = *in[0];
                       for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
                     });
}

Tensor shift(const Tensor& a, double offset) {
  std::vector<double> y(a.data().begin(), a.data().end());
  for (double& v : y) v += offset;
  return make_result(a.shape(), std::move(y), {a},
                     [](std::span<const double> g, std::span<std::vector<double>* const> in) {
                       auto& gx = *in[0];
                       for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                     });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul shape mismatch: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const auto m = static_cast<Eigen::Index>(a.dim(0));
  const auto k = static_cast<Eigen::Index>(a.dim(1));
  const auto n = static_cast<Eigen::Index>(b.dim(1));
  std::vector<double> out(static_cast<std::size_t>(m * n));
  MutMap(out.data(), m, n).noalias() = ConstMap(a.data().data(), m, k) * ConstMap(b.data().data(), k, n);
  Storage sa = a.storage();
  Storage sb = b.storage();
  return make_result({a.dim(0), b.dim(1)}, std::move(out), {a, b},
                     [sa, sb, m, k, n](std::span<const double> g, std::span<std::vector<double>* const> in) {
                       ConstMap gm(g.data(), m, n);
                       if (in[0]) MutMap(in[0]->data(), m, k).noalias() += gm * ConstMap(sb->data(), k, n).transpose();
                       if (in[1]) MutMap(in[1]->data(), k, n).noalias() += ConstMap(sa->data(), m, k).transpose() * gm;
                     });
}

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b, std::optional<UnaryOp> act) {
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0) || b.shape() != Shape{w.dim(1)}) {
    throw ShapeError("dense shape mismatch: " + shape_str(x.shape()) + " x " + shape_str(w.shape()) + " + " +
                     shape_str(b.shape()));
  }
  if (act && *act != UnaryOp::elu && *act != UnaryOp::tanh) throw ContractError("dense supports elu and tanh only");
  const auto m = static_cast<Eigen::Index>(x.dim(0));
  const auto k = static_cast<Eigen::Index>(x.dim(1));
  const auto n = static_cast<Eigen::Index>(w.dim(1));
  const std::size_t rows = x.dim(0), cols = w.dim(1);
  std::vector<double> out(rows * cols);
  MutMap(out.data(), m, n).noalias() = ConstMap(x.data().data(), m, k) * ConstMap(w.data().data(), k, n);
  const double* bv = b.data().data();
  double* o = out.data();
  for (std::size_t r = 0; r < rows; ++r, o += cols) {
    for (std::size_t j = 0; j < cols; ++j) o[j] += bv[j];
  }
  const std::size_t total = rows * cols;
  if (act == UnaryOp::elu) {
    map_into(out.data(), out.data(), total, [](double v) { return v > 0 ? v : std::expm1(v); });
  } else if (act == UnaryOp::tanh) {
    map_into(out.data(), out.data(), total, [](double v) { return std::tanh(v); });
  }
  const Tensor inputs[] = {x, w, b};
  Tape* tape = common_tape(inputs);
  if (!tape) return Tensor({rows, cols}, std::move(out));
  Storage sx = x.storage();
  Storage sw = w.storage();
  Storage sy = std::make_shared<const std::vector<double>>(std::move(out));
  Vjp vjp = [act, sx, sw, sy, m, k, n](std::span<const double> g, std::span<std::vector<double>* const> in) {
    const std::size_t total = g.size();
    const std::size_t cols = static_cast<std::size_t>(n);
    std::vector<double> pre_grad;
    const double* gp = g.data();
    if (act) {
      pre_grad.resize(total);
      const double* y = sy->data();
      if (*act == UnaryOp::elu) {
        // y > 0 exactly when the pre-activation is positive
        for (std::size_t i = 0; i < total; ++i) pre_grad[i] = g[i] * (y[i] > 0 ? 1.0 : y[i] + 1.0);
      } else {
        for (std::size_t i = 0; i < total; ++i) pre_grad[i] = g[i] * (1.0 - y[i] * y[i]);
      }
      gp = pre_grad.data();
    }
    ConstMap gm(gp, m, n);
    if (in[0]) MutMap(in[0]->data(), m, k).noalias() += gm * ConstMap(sw->data(), k, n).transpose();
    if (in[1]) MutMap(in[1]->data(), k, n).noalias() += ConstMap(sx->data(), m, k).transpose() * gm;
    if (in[2]) {
      double* gb = in[2]->data();
      for (std::size_t i = 0; i < total; i += cols) {
        for (std::size_t j = 0; j < cols; ++j) gb[j] += gp[i + j];
      }
    }
  };
  return tape->record({rows, cols}, sy, inputs, std::move(vjp));
}

Tensor reduce(ReduceOp op, const Tensor& a, std::span<const std::size_t> axes, bool keepdims) {
  const Shape& in = a.shape();
  std::vector<bool> reduced(in.size(), false);
  for (std::size_t ax : axes) {
    if (ax >= in.size()) throw ShapeError("reduce axis " + std::to_string(ax) + " invalid for " + shape_str(in));
    reduced[ax] = true;
  }
  Shape out_shape;
  std::size_t count = 1;
  for (std::size_t k = 0; k < in.size(); ++k) {
    if (reduced[k]) {
      count *= in[k];
      if (keepdims) out_shape.push_back(1);
    } else {
      out_shape.push_back(in[k]);
    }
  }
  if (out_shape.empty()) out_shape.push_back(1);
  const std::size_t out_n = shape_numel(out_shape);

  // Output stride per input axis (0 on reduced axes).
  std::vector<std::size_t> ostride(in.size(), 0);
  std::size_t s = 1;
  for (std::size_t k = in.size(); k-- > 0;) {
    if (reduced[k]) continue;
    ostride[k] = s;
    s *= in[k];
  }
  auto map = std::make_shared<std::vector<std::size_t>>(a.numel());
  {
    std::vector<std::size_t> idx(in.size(), 0);
    std::size_t flat = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
      (*map)[i] = flat;
      for (std::size_t k = in.size(); k-- > 0;) {
        ++idx[k];
        flat += ostride[k];
        if (idx[k] < in[k]) break;
        flat -= ostride[k] * idx[k];
        idx[k] = 0;
      }
    }
  }
  const double factor = op == ReduceOp::mean ? 1.0 / static_cast<double>(count) : 1.0;
  std::vector<double> out(out_n, 0.0);
  const auto x = a.data();
  for (std::size_t i = 0; i < x.size(); ++i) out[(*map)[i]] += x[i];
  if (factor != 1.0) {
    for (double& v : out) v *= factor;
  }
  return make_result(std::move(out_shape), std::move(out), {a},
                     [map, factor](std::span<const double> g, std::span<std::vector<double>* const> in) {
                       auto& gx = *in[0];
                       for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[(*map)[i]] * factor;
                     });
}

Tensor sum(const Tensor& a, std::initializer_list<std::size_t> axes, bool keepdims) {
  return reduce(ReduceOp::sum, a, std::span<const std::size_t>(axes.begin(), axes.size()), keepdims);
}

Tensor mean(const Tensor& a, std::initializer_list<std::size_t> axes, bool keepdims) {
  return reduce(ReduceOp::mean, a, std::span<const std::size_t>(axes.begin(), axes.size()), keepdims);
}

namespace {

Tensor reduce_all(const Tensor& a, double factor) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return make_result({1}, {total * factor}, {a},
                     [factor](std::span<const double> g, std::span<std::vector<double>* const> in) {
                       for (double& v : *in[0]) v += g[0] * factor;
                     });
}

}  // namespace

Tensor sum_all(const Tensor& a) { return reduce_all(a, 1.0); }
Tensor mean_all(const Tensor& a) { return reduce_all(a, 1.0 / static_cast<double>(a.numel())); }

Tensor stop_gradient(const Tensor& a) {
  if (!a.on_tape()) return a;
  std::vector<double> copy(a.data().begin(), a.data().end());
  return Tensor(a.shape(), std::move(copy));
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("cannot reshape " + shape_str(a.shape()) + " to " + shape_str(shape));
  }
  std::vector<double> copy(a.data().begin(), a.data().end());
  return make_result(std::move(shape), std::move(copy), {a},
                     [](std::span<const double> g, std::span<std::vector<double>* const> in) {
                       auto& gx = *in[0];
                       for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                     });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw ShapeError("concat axis out of range for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != first.size()) throw ShapeError("concat rank mismatch");
    for (std::size_t k = 0; k < first.size(); ++k) {
      if (k != axis && p.shape()[k] != first[k]) {
        throw ShapeError("concat shape mismatch: " + shape_str(first) + " vs " + shape_str(p.shape()));
      }
    }
    out_shape[axis] += p.shape()[axis];
  }
  std::size_t outer = 1;
  for (std::size_t k = 0; k < axis; ++k) outer *= first[k];
  auto inner = std::make_shared<std::vector<std::size_t>>();
  std::size_t inner_total = 0;
  for (const Tensor& p : parts) {
    inner->push_back(p.numel() / outer);
    inner_total += inner->back();
  }
  std::vector<double> out(outer * inner_total);
  {
    std::size_t offset = 0;
    for (std::size_t j = 0; j < parts.size(); ++j) {
      const auto src = parts[j].data();
      const std::size_t w = (*inner)[j];
      for (std::size_t o = 0; o < outer; ++o) {
        std::copy_n(src.data() + o * w, w, out.data() + o * inner_total + offset);
      }
      offset += w;
    }
  }
  Tape* tape = common_tape(parts);
  if (!tape) return Tensor(std::move(out_shape), std::move(out));
  return tape->record(std::move(out_shape), std::move(out), parts,
                      [inner, outer, inner_total](std::span<const double> g, std::span<std::vector<double>* const> in) {
                        std::size_t offset = 0;
                        for (std::size_t j = 0; j < in.size(); ++j) {
                          const std::size_t w = (*inner)[j];
                          if (in[j]) {
                            auto& gx = *in[j];
                            for (std::size_t o = 0; o < outer; ++o) {
                              const double* src = g.data() + o * inner_total + offset;
                              double* dst = gx.data() + o * w;
                              for (std::size_t i = 0; i < w; ++i) dst[i] += src[i];
                            }
                          }
                          offset += w;
                        }
                      });
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& in = a.shape();
  if (axis >= in.size() || length == 0 || start + length > in[axis]) {
    throw ShapeError("slice [" + std::to_string(start) + ", +" + std::to_string(length) + ") on axis " +
                     std::to_string(axis) + " invalid for " + shape_str(in));
  }
  std::size_t outer = 1;
  for (std::size_t k = 0; k < axis; ++k) outer *= in[k];
  std::size_t inner = 1;
  for (std::size_t k = axis + 1; k < in.size(); ++k) inner *= in[k];
  const std::size_t row = in[axis] * inner;
  const std::size_t w = length * inner;
  const std::size_t off = start * inner;
  Shape out_shape = in;
  out_shape[axis] = length;
  std::vector<double> out(outer * w);
  const auto src = a.data();
  for (std::size_t o = 0; o < outer; ++o) std::copy_n(src.data() + o * row + off, w, out.data() + o * w);
  return make_result(std::move(out_shape), std::move(out), {a},
                     [outer, row, w, off](std::span<const double> g, std::span<std::vector<double>* const> in) {
                       auto& gx = *in[0];
                       for (std::size_t o = 0; o < outer; ++o) {
                         for (std::size_t i = 0; i < w; ++i) gx[o * row + off + i] += g[o * w + i];
                       }
                     });
}

}  // namespace diswm
