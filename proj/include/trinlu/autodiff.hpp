#pragma once

// Reverse-mode automatic differentiation over dense Tensors.
//
// A Graph is a dynamic tape: every operation appends a node holding its
// forward value and a closure that pushes the incoming gradient to the
// node's parents. backward() walks the tape in reverse append order, so each
// node is visited exactly once and fan-out contributions are summed.
// Parameters live outside the graph; their gradients accumulate into
// Parameter::grad across backward calls until zero_grad().

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "trinlu/tensor.hpp"

namespace trinlu {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  // Set when a backward pass reached this parameter since the last zero_grad().
  bool touched = false;
};

/// Named parameters in declaration order. Addresses are stable for the
/// lifetime of the store, including across moves of the store itself.
class ParameterStore {
 public:
  Parameter& add(std::string name, Shape shape);

  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;

  std::size_t count() const noexcept { return params_.size(); }
  std::size_t num_elements() const;

  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  void zero_grad();

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return graph_ != nullptr; }
  Graph& graph() const { return *graph_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

class Graph {
 public:
  // Receives the node's forward value and its accumulated gradient.
  using BackwardFn =
      std::function<void(Graph&, const Tensor& value, const Tensor& grad_out)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  /// Differentiable input owned by the graph; its gradient accumulates
  /// across backward calls.
  Var leaf(Tensor value);
  /// References the parameter's value without copying it.
  Var param(Parameter& parameter);

  const Tensor& value(Var v) const;
  /// Gradient reached by backward; empty if none reached v.
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const;
  std::string_view op(Var v) const;
  std::vector<std::size_t> parents(Var v) const;

  void backward(Var loss);
  std::size_t size() const noexcept { return nodes_.size(); }
  /// Handle to the node appended id-th.
  Var at(std::size_t id);

  // Interface for operation implementations.
  Var record(std::string_view op, Tensor value, std::span<const Var> parents,
             BackwardFn backward);
  Var record(std::string_view op, Tensor value, std::initializer_list<Var> parents,
             BackwardFn backward) {
    return record(op, std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                  std::move(backward));
  }
  /// Zero-initialised gradient buffer of v, or nullptr when v needs none.
  Tensor* grad_sink(Var v);

 private:
  struct Node {
    std::string op;
    Tensor value;
    const Tensor* external = nullptr;
    Parameter* parameter = nullptr;
    Tensor grad;
    bool requires_grad = false;
    bool leaf = false;
    std::vector<std::size_t> parents;
    BackwardFn backward;
  };

  Node& node(Var v);
  const Node& node(Var v) const;

  std::deque<Node> nodes_;
};

inline const Tensor& Var::value() const { return graph_->value(*this); }

// ---------------------------------------------------------------------------
// Operations. All inputs must belong to the same graph. The only broadcast
// supported is a bias row (rank-1, length = last axis) in add().

enum class Activation { relu, tanh };

Var matmul(Var a, Var b);     // [..., k] x [k, p] -> [..., p]
Var bmm(Var a, Var b);        // [B, m, k] x [B, k, p] -> [B, m, p]
Var transpose(Var x);         // swaps the last two axes
Var add(Var a, Var b);
Var mul(Var a, Var b);        // elementwise, equal shapes
Var scale(Var x, double factor);
Var elementwise(Activation kind, Var x);
Var tanh(Var x);
Var relu(Var x);
Var softmax(Var x);           // over the last axis
Var concat(std::span<const Var> parts, std::size_t axis);
Var concat(std::initializer_list<Var> parts, std::size_t axis);
Var reshape(Var x, Shape shape);
/// Row-major merge of the last two axes: [..., n, d] -> [..., n*d]. A 2-D
/// input becomes 1 x (n*d).
Var flatten(Var x);
Var slice_last(Var x, std::size_t start, std::size_t length);
/// Copies each row once per position: [B, c] -> [B, n, c] (and [c] -> [n, c]).
Var repeat_positions(Var x, std::size_t n);
Var layer_norm(Var x, Var gain, Var shift, double eps);
Var gather_rows(Var table, std::span<const std::size_t> ids);
/// sum_r weight_r * -log(max(p[r, target_r], 1e-12)); rows with a negative
/// target are skipped.
Var cross_entropy(Var probs, std::span<const int> targets, std::span<const double> weights);
Var cross_entropy(Var probs, int target);
Var sum(Var x);
/// Inverted dropout with a fresh mask drawn from rng.
Var dropout(Var x, double rate, std::mt19937_64& rng);

inline constexpr double kProbabilityFloor = 1e-12;

}  // namespace trinlu
