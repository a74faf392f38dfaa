// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cmgan/tensor.hpp"

namespace cmgan {

using NodeId = uint32_t;

// A named trainable (or frozen) tensor together with its accumulated gradient.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  void zero_grad() { grad = Tensor<T>(value.shape()); }
};

template <typename T>
class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Graph<T>* g, NodeId id) : graph_(g), id_(id) {}

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  NodeId id() const { return id_; }
  Graph<T>& graph() const { return *graph_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  Graph<T>* graph_ = nullptr;
  NodeId id_ = 0;
};

template <typename T>
using GradientMap = std::unordered_map<NodeId, Tensor<T>>;

// Linear tape of operations. Nodes are appended in evaluation order, so the
// insertion order is a topological order and backward is a single reverse
// sweep. A Graph must stay on the thread that built it.
template <typename T>
class Graph {
 public:
  // Receives the node's output and its gradient, and pushes contributions to
  // the inputs through Graph::grad_of.
  using BackwardFn =
      std::function<void(Graph&, const Tensor<T>& out, const Tensor<T>& grad_out)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<T> constant(Tensor<T> value);
  Var<T> leaf(Tensor<T> value, bool requires_grad = true);
  // Leaf whose gradient is added to `p.grad` by backward().
  Var<T> param(Parameter<T>& p);
  // Leaf holding a copy of `p.value` that never receives a gradient.
  Var<T> frozen(const Parameter<T>& p) { return constant(p.value); }

  // Records an op output. `backward` is dropped when no input needs a
  // gradient. A non-finite output raises DomainError naming `op`.
  Var<T> record(const char* op, Tensor<T> value, std::initializer_list<Var<T>> inputs,
                BackwardFn backward);

  // Gradient accumulator for `id`, allocated on first use, or nullptr when the
  // node does not require a gradient.
  Tensor<T>* grad_of(NodeId id);
  Tensor<T>* grad_of(const Var<T>& v) { return grad_of(v.id()); }

  // Reverse sweep from a (1,1,1,1) loss. Returns the gradient of every
  // requires_grad leaf and accumulates into bound parameters.
  GradientMap<T> backward(const Var<T>& loss);

  const Tensor<T>& value(NodeId id) const { return nodes_[id].value; }
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    BackwardFn backward;
    Tensor<T> grad;
    Parameter<T>* param = nullptr;
    bool requires_grad = false;
    bool is_leaf = false;
  };
  std::deque<Node> nodes_;
  bool consumed_ = false;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return graph_->value(id_);
}
template <typename T>
bool Var<T>::requires_grad() const {
  return graph_->requires_grad(id_);
}

}  // namespace cmgan
