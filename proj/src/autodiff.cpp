#include "trinlu/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "trinlu/error.hpp"

namespace trinlu {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap view(const Tensor& t, std::size_t rows, std::size_t cols, std::size_t offset = 0) {
  return ConstMap(t.raw() + offset, static_cast<Eigen::Index>(rows),
                  static_cast<Eigen::Index>(cols));
}

MutMap view(Tensor& t, std::size_t rows, std::size_t cols, std::size_t offset = 0) {
  return MutMap(t.raw() + offset, static_cast<Eigen::Index>(rows),
                static_cast<Eigen::Index>(cols));
}

[[noreturn]] void shape_mismatch(std::string_view op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                   shape_string(b));
}

Graph& same_graph(Var a, Var b) {
  if (!a.valid() || !b.valid() || &a.graph() != &b.graph())
    throw ShapeError("operands belong to different graphs");
  return a.graph();
}

}  // namespace

// --- ParameterStore --------------------------------------------------------

Parameter& ParameterStore::add(std::string name, Shape shape) {
  if (index_.contains(name)) throw ConfigError("duplicate parameter name " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = Tensor(shape);
  index_.emplace(std::move(name), params_.size());
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParameterStore::find(std::string_view name) {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : params_[it->second].get();
}

const Parameter* ParameterStore::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : params_[it->second].get();
}

Parameter& ParameterStore::get(std::string_view name) {
  if (auto* p = find(name)) return *p;
  throw ConfigError("unknown parameter " + std::string(name));
}

const Parameter& ParameterStore::get(std::string_view name) const {
  if (const auto* p = find(name)) return *p;
  throw ConfigError("unknown parameter " + std::string(name));
}

std::size_t ParameterStore::num_elements() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p->value.size();
  return total;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) {
    if (!p->grad.empty()) p->grad.fill(0.0);
    p->touched = false;
  }
}

// --- Graph -----------------------------------------------------------------

Graph::Node& Graph::node(Var v) {
  if (&v.graph() != this || v.id() >= nodes_.size())
    throw ShapeError("variable does not belong to this graph");
  return nodes_[v.id()];
}

const Graph::Node& Graph::node(Var v) const {
  if (&v.graph() != this || v.id() >= nodes_.size())
    throw ShapeError("variable does not belong to this graph");
  return nodes_[v.id()];
}

Var Graph::constant(Tensor value) {
  Node& n = nodes_.emplace_back();
  n.op = "constant";
  n.value = std::move(value);
  n.leaf = true;
  return Var(this, nodes_.size() - 1);
}

Var Graph::leaf(Tensor value) {
  Node& n = nodes_.emplace_back();
  n.op = "leaf";
  n.value = std::move(value);
  n.leaf = true;
  n.requires_grad = true;
  return Var(this, nodes_.size() - 1);
}

Var Graph::param(Parameter& parameter) {
  Node& n = nodes_.emplace_back();
  n.op = "param";
  n.external = &parameter.value;
  n.parameter = &parameter;
  n.leaf = true;
  n.requires_grad = true;
  return Var(this, nodes_.size() - 1);
}

const Tensor& Graph::value(Var v) const {
  const Node& n = node(v);
  return n.external ? *n.external : n.value;
}

const Tensor& Graph::grad(Var v) const {
  const Node& n = node(v);
  return n.parameter ? n.parameter->grad : n.grad;
}

bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }

std::string_view Graph::op(Var v) const { return node(v).op; }

std::vector<std::size_t> Graph::parents(Var v) const { return node(v).parents; }

Var Graph::record(std::string_view op, Tensor value, std::span<const Var> parents,
                  BackwardFn backward) {
  Node n;
  n.op = std::string(op);
  n.value = std::move(value);
  for (Var p : parents) {
    if (&p.graph() != this) throw ShapeError(std::string(op) + ": operand from another graph");
    n.parents.push_back(p.id());
    n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Tensor* Graph::grad_sink(Var v) {
  Node& n = node(v);
  if (!n.requires_grad) return nullptr;
  if (n.parameter) {
    Parameter& p = *n.parameter;
    if (p.grad.empty() || p.grad.shape() != p.value.shape()) p.grad = Tensor(p.value.shape());
    p.touched = true;
    return &p.grad;
  }
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return &n.grad;
}

Var Graph::at(std::size_t id) {
  if (id >= nodes_.size()) throw ShapeError("node " + std::to_string(id) + " out of range");
  return Var(this, id);
}

void Graph::backward(Var loss) {
  if (value(loss).size() != 1)
    throw ShapeError("backward requires a scalar root, got " + shape_string(value(loss).shape()));
  for (Node& n : nodes_)
    if (!n.leaf) n.grad = Tensor();
  Tensor* root = grad_sink(loss);
  if (!root) return;
  (*root)[0] += 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.leaf || n.grad.empty() || !n.backward) continue;
    n.backward(*this, n.value, n.grad);
  }
}

// --- Operations ------------------------------------------------------------

Var matmul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (bv.rank() != 2 || av.cols() != bv.dim(0)) shape_mismatch("matmul", av.shape(), bv.shape());
  const std::size_t m = av.rows(), k = av.cols(), p = bv.dim(1);
  Shape out_shape = av.shape();
  out_shape.back() = p;
  Tensor out(out_shape);
  view(out, m, p).noalias() = view(av, m, k) * view(bv, k, p);
  return g.record("matmul", std::move(out), {a, b},
                  [a, b, m, k, p](Graph& g, const Tensor&, const Tensor& dc) {
                    if (Tensor* da = g.grad_sink(a))
                      view(*da, m, k).noalias() += view(dc, m, p) * view(b.value(), k, p).transpose();
                    if (Tensor* db = g.grad_sink(b))
                      view(*db, k, p).noalias() += view(a.value(), m, k).transpose() * view(dc, m, p);
                  });
}

Var bmm(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(1))
    shape_mismatch("bmm", av.shape(), bv.shape());
  const std::size_t batch = av.dim(0), m = av.dim(1), k = av.dim(2), p = bv.dim(2);
  Tensor out({batch, m, p});
  for (std::size_t i = 0; i < batch; ++i)
    view(out, m, p, i * m * p).noalias() = view(av, m, k, i * m * k) * view(bv, k, p, i * k * p);
  return g.record("bmm", std::move(out), {a, b},
                  [a, b, batch, m, k, p](Graph& g, const Tensor&, const Tensor& dc) {
                    Tensor* da = g.grad_sink(a);
                    Tensor* db = g.grad_sink(b);
                    for (std::size_t i = 0; i < batch; ++i) {
                      auto dci = view(dc, m, p, i * m * p);
                      if (da)
                        view(*da, m, k, i * m * k).noalias() +=
                            dci * view(b.value(), k, p, i * k * p).transpose();
                      if (db)
                        view(*db, k, p, i * k * p).noalias() +=
                            view(a.value(), m, k, i * m * k).transpose() * dci;
                    }
                  });
}

Var transpose(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() < 2) throw ShapeError("transpose needs rank >= 2, got " + shape_string(xv.shape()));
  const std::size_t r = xv.dim(xv.rank() - 2), c = xv.cols();
  const std::size_t batch = xv.size() / (r * c);
  Shape out_shape = xv.shape();
  std::swap(out_shape[out_shape.size() - 2], out_shape.back());
  Tensor out(out_shape);
  for (std::size_t i = 0; i < batch; ++i)
    view(out, c, r, i * r * c) = view(xv, r, c, i * r * c).transpose();
  return x.graph().record("transpose", std::move(out), {x},
                          [x, batch, r, c](Graph& g, const Tensor&, const Tensor& dy) {
                            if (Tensor* dx = g.grad_sink(x))
                              for (std::size_t i = 0; i < batch; ++i)
                                view(*dx, r, c, i * r * c) += view(dy, c, r, i * r * c).transpose();
                          });
}

Var add(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() == bv.shape()) {
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return g.record("add", std::move(out), {a, b}, [a, b](Graph& g, const Tensor&, const Tensor& dy) {
      for (Var v : {a, b})
        if (Tensor* d = g.grad_sink(v))
          for (std::size_t i = 0; i < d->size(); ++i) (*d)[i] += dy[i];
    });
  }
  if (bv.rank() != 1 || bv.size() != av.cols()) shape_mismatch("add", av.shape(), bv.shape());
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor out = av;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) += bv[c];
  return g.record("add_bias", std::move(out), {a, b}, [a, b, rows, cols](Graph& g, const Tensor&, const Tensor& dy) {
    if (Tensor* da = g.grad_sink(a))
      for (std::size_t i = 0; i < da->size(); ++i) (*da)[i] += dy[i];
    if (Tensor* db = g.grad_sink(b))
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) (*db)[c] += dy.at(r, c);
  });
}

Var mul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) shape_mismatch("mul", av.shape(), bv.shape());
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return g.record("mul", std::move(out), {a, b}, [a, b](Graph& g, const Tensor&, const Tensor& dy) {
    if (Tensor* da = g.grad_sink(a))
      for (std::size_t i = 0; i < da->size(); ++i) (*da)[i] += dy[i] * b.value()[i];
    if (Tensor* db = g.grad_sink(b))
      for (std::size_t i = 0; i < db->size(); ++i) (*db)[i] += dy[i] * a.value()[i];
  });
}

Var scale(Var x, double factor) {
  Tensor out = x.value();
  for (double& v : out.data()) v *= factor;
  return x.graph().record("scale", std::move(out), {x}, [x, factor](Graph& g, const Tensor&, const Tensor& dy) {
    if (Tensor* dx = g.grad_sink(x))
      for (std::size_t i = 0; i < dx->size(); ++i) (*dx)[i] += factor * dy[i];
  });
}

Var elementwise(Activation kind, Var x) {
  Tensor out = x.value();
  if (kind == Activation::tanh) {
    for (double& v : out.data()) v = std::tanh(v);
    return x.graph().record("tanh", std::move(out), {x},
                            [x](Graph& g, const Tensor& yv, const Tensor& dy) {
                              if (Tensor* dx = g.grad_sink(x))
                                for (std::size_t i = 0; i < dx->size(); ++i)
                                  (*dx)[i] += dy[i] * (1.0 - yv[i] * yv[i]);
                            });
  }
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return x.graph().record("relu", std::move(out), {x}, [x](Graph& g, const Tensor&, const Tensor& dy) {
    if (Tensor* dx = g.grad_sink(x)) {
      const Tensor& xv = x.value();
      for (std::size_t i = 0; i < dx->size(); ++i)
        if (xv[i] > 0.0) (*dx)[i] += dy[i];
    }
  });
}

Var tanh(Var x) { return elementwise(Activation::tanh, x); }
Var relu(Var x) { return elementwise(Activation::relu, x); }

Var softmax(Var x) {
  const Tensor& xv = x.value();
  if (!xv.all_finite()) throw NumericalError("softmax: non-finite input");
  const std::size_t rows = xv.rows(), cols = xv.cols();
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) peak = std::max(peak, xv.at(r, c));
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += out.at(r, c) = std::exp(xv.at(r, c) - peak);
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) /= total;
  }
  return x.graph().record("softmax", std::move(out), {x},
                           [x, rows, cols](Graph& g, const Tensor& yv, const Tensor& dy) {
                             Tensor* dx = g.grad_sink(x);
                             if (!dx) return;
                             for (std::size_t r = 0; r < rows; ++r) {
                               double dot = 0.0;
                               for (std::size_t c = 0; c < cols; ++c) dot += dy.at(r, c) * yv.at(r, c);
                               for (std::size_t c = 0; c < cols; ++c)
                                 dx->at(r, c) += yv.at(r, c) * (dy.at(r, c) - dot);
                             }
                           });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  Graph& g = parts.front().graph();
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat axis out of range for " + shape_string(first));
  const std::size_t outer = shape_size(Shape(first.begin(), first.begin() + axis));
  const std::size_t inner =
      axis + 1 == first.size() ? 1 : shape_size(Shape(first.begin() + axis + 1, first.end()));
  std::vector<std::size_t> widths;  // elements per outer index, per part
  std::size_t total_axis = 0;
  for (Var p : parts) {
    same_graph(parts.front(), p);
    const Shape& s = p.shape();
    if (s.size() != first.size()) shape_mismatch("concat", first, s);
    for (std::size_t i = 0; i < s.size(); ++i)
      if (i != axis && s[i] != first[i]) shape_mismatch("concat", first, s);
    total_axis += s[axis];
    widths.push_back(s[axis] * inner);
  }
  Shape out_shape = first;
  out_shape[axis] = total_axis;
  Tensor out(out_shape);
  const std::size_t row = total_axis * inner;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Tensor& pv = parts[i].value();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(pv.raw() + o * widths[i], widths[i], out.raw() + o * row + offset);
    offset += widths[i];
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return g.record("concat", std::move(out), parts,
                  [saved, widths, outer, row](Graph& g, const Tensor&, const Tensor& dy) {
                    std::size_t offset = 0;
                    for (std::size_t i = 0; i < saved.size(); ++i) {
                      if (Tensor* d = g.grad_sink(saved[i]))
                        for (std::size_t o = 0; o < outer; ++o)
                          for (std::size_t j = 0; j < widths[i]; ++j)
                            (*d)[o * widths[i] + j] += dy[o * row + offset + j];
                      offset += widths[i];
                    }
                  });
}

Var concat(std::initializer_list<Var> parts, std::size_t axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return x.graph().record("reshape", std::move(out), {x}, [x](Graph& g, const Tensor&, const Tensor& dy) {
    if (Tensor* dx = g.grad_sink(x))
      for (std::size_t i = 0; i < dx->size(); ++i) (*dx)[i] += dy[i];
  });
}

Var flatten(Var x) {
  const Shape& s = x.shape();
  if (s.size() < 2) throw ShapeError("flatten needs rank >= 2, got " + shape_string(s));
  Shape out(s.begin(), s.end() - 2);
  if (out.empty()) out.push_back(1);
  out.push_back(s[s.size() - 2] * s.back());
  return reshape(x, std::move(out));
}

Var slice_last(Var x, std::size_t start, std::size_t length) {
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  if (length == 0 || start + length > cols)
    throw ShapeError("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") outside last axis of " + shape_string(xv.shape()));
  Shape out_shape = xv.shape();
  out_shape.back() = length;
  Tensor out(out_shape);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(xv.raw() + r * cols + start, length, out.raw() + r * length);
  return x.graph().record("slice_last", std::move(out), {x},
                          [x, rows, cols, start, length](Graph& g, const Tensor&, const Tensor& dy) {
                            if (Tensor* dx = g.grad_sink(x))
                              for (std::size_t r = 0; r < rows; ++r)
                                for (std::size_t c = 0; c < length; ++c)
                                  (*dx)[r * cols + start + c] += dy[r * length + c];
                          });
}

Var repeat_positions(Var x, std::size_t n) {
  const Tensor& xv = x.value();
  if (xv.rank() > 2 || n == 0)
    throw ShapeError("repeat_positions expects [B, c] or [c], got " + shape_string(xv.shape()));
  const std::size_t rows = xv.rows(), cols = xv.cols();
  Shape out_shape = xv.rank() == 2 ? Shape{rows, n, cols} : Shape{n, cols};
  Tensor out(out_shape);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t t = 0; t < n; ++t)
      std::copy_n(xv.raw() + r * cols, cols, out.raw() + (r * n + t) * cols);
  return x.graph().record("repeat_positions", std::move(out), {x},
                          [x, rows, cols, n](Graph& g, const Tensor&, const Tensor& dy) {
                            if (Tensor* dx = g.grad_sink(x))
                              for (std::size_t r = 0; r < rows; ++r)
                                for (std::size_t t = 0; t < n; ++t)
                                  for (std::size_t c = 0; c < cols; ++c)
                                    (*dx)[r * cols + c] += dy[(r * n + t) * cols + c];
                          });
}

Var layer_norm(Var x, Var gain, Var shift, double eps) {
  Graph& g = same_graph(x, gain);
  same_graph(x, shift);
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  if (cols < 2) throw ShapeError("layer_norm needs a last axis of at least 2");
  if (gain.value().shape() != Shape{cols} || shift.value().shape() != Shape{cols})
    shape_mismatch("layer_norm", xv.shape(), gain.value().shape());
  Tensor normalized(xv.shape());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mean += xv.at(r, c);
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (xv.at(r, c) - mean) * (xv.at(r, c) - mean);
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) normalized.at(r, c) = (xv.at(r, c) - mean) * inv_std[r];
  }
  Tensor out(xv.shape());
  const Tensor& gv = gain.value();
  const Tensor& sv = shift.value();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) = normalized.at(r, c) * gv[c] + sv[c];
  return g.record(
      "layer_norm", std::move(out), {x, gain, shift},
      [x, gain, shift, rows, cols, xhat = std::move(normalized),
       inv_std = std::move(inv_std)](Graph& g, const Tensor&, const Tensor& dy) {
        if (Tensor* dgain = g.grad_sink(gain))
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) (*dgain)[c] += dy.at(r, c) * xhat.at(r, c);
        if (Tensor* dshift = g.grad_sink(shift))
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) (*dshift)[c] += dy.at(r, c);
        Tensor* dx = g.grad_sink(x);
        if (!dx) return;
        const Tensor& gv = gain.value();
        const double inv_n = 1.0 / static_cast<double>(cols);
        for (std::size_t r = 0; r < rows; ++r) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t c = 0; c < cols; ++c) {
            const double d = dy.at(r, c) * gv[c];
            mean_d += d;
            mean_dx += d * xhat.at(r, c);
          }
          mean_d *= inv_n;
          mean_dx *= inv_n;
          for (std::size_t c = 0; c < cols; ++c) {
            const double d = dy.at(r, c) * gv[c];
            dx->at(r, c) += inv_std[r] * (d - mean_d - xhat.at(r, c) * mean_dx);
          }
        }
      });
}

Var gather_rows(Var table, std::span<const std::size_t> ids) {
  const Tensor& tv = table.value();
  if (tv.rank() != 2) throw ShapeError("gather_rows expects a 2-D table");
  if (ids.empty()) throw ShapeError("gather_rows with no ids");
  const std::size_t vocab = tv.dim(0), d = tv.dim(1);
  Tensor out({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= vocab)
      throw DataError("token id " + std::to_string(ids[i]) + " out of range for vocabulary of " +
                      std::to_string(vocab));
    std::copy_n(tv.raw() + ids[i] * d, d, out.raw() + i * d);
  }
  std::vector<std::size_t> saved(ids.begin(), ids.end());
  return table.graph().record("gather_rows", std::move(out), {table},
                              [table, saved = std::move(saved), d](Graph& g, const Tensor&, const Tensor& dy) {
                                if (Tensor* dt = g.grad_sink(table))
                                  for (std::size_t i = 0; i < saved.size(); ++i)
                                    for (std::size_t c = 0; c < d; ++c)
                                      (*dt)[saved[i] * d + c] += dy[i * d + c];
                              });
}

Var cross_entropy(Var probs, std::span<const int> targets, std::span<const double> weights) {
  const Tensor& pv = probs.value();
  const std::size_t rows = pv.rows(), cols = pv.cols();
  if (targets.size() != rows || weights.size() != rows)
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets and " +
                     std::to_string(weights.size()) + " weights for " + std::to_string(rows) +
                     " distributions");
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] < 0) continue;
    if (static_cast<std::size_t>(targets[r]) >= cols)
      throw DataError("cross_entropy: target " + std::to_string(targets[r]) +
                      " out of range for " + std::to_string(cols) + " classes");
    loss -= weights[r] * std::log(std::max(pv.at(r, targets[r]), kProbabilityFloor));
  }
  std::vector<int> t(targets.begin(), targets.end());
  std::vector<double> w(weights.begin(), weights.end());
  return probs.graph().record(
      "cross_entropy", Tensor::scalar(loss), {probs},
      [probs, t = std::move(t), w = std::move(w), cols](Graph& g, const Tensor&, const Tensor& dy) {
        Tensor* dp = g.grad_sink(probs);
        if (!dp) return;
        const Tensor& pv = probs.value();
        for (std::size_t r = 0; r < t.size(); ++r) {
          if (t[r] < 0) continue;
          const double p = pv[r * cols + t[r]];
          if (p > kProbabilityFloor) (*dp)[r * cols + t[r]] -= dy[0] * w[r] / p;
        }
      });
}

Var cross_entropy(Var probs, int target) {
  const std::size_t rows = probs.value().rows();
  std::vector<int> targets(rows, target);
  std::vector<double> weights(rows, 1.0);
  return cross_entropy(probs, targets, weights);
}

Var sum(Var x) {
  return x.graph().record("sum", Tensor::scalar(x.value().sum()), {x},
                          [x](Graph& g, const Tensor&, const Tensor& dy) {
                            if (Tensor* dx = g.grad_sink(x))
                              for (double& v : dx->data()) v += dy[0];
                          });
}

Var dropout(Var x, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw ConfigError("dropout rate must be below 1");
  std::bernoulli_distribution keep(1.0 - rate);
  Tensor mask(x.value().shape());
  for (double& m : mask.data()) m = keep(rng) ? 1.0 / (1.0 - rate) : 0.0;
  return mul(x, x.graph().constant(std::move(mask)));
}

}  // namespace trinlu
