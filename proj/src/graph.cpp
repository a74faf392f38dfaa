// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cmgan/graph.hpp"

#include "cmgan/error.hpp"

namespace cmgan {

template <typename T>
Var<T> Graph<T>::constant(Tensor<T> value) {
  return leaf(std::move(value), false);
}

template <typename T>
Var<T> Graph<T>::leaf(Tensor<T> value, bool requires_grad) {
  if (!value.all_finite()) throw DomainError("non-finite value entering the graph");
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  node.is_leaf = true;
  nodes_.push_back(std::move(node));
  return Var<T>(this, static_cast<NodeId>(nodes_.size() - 1));
}

template <typename T>
Var<T> Graph<T>::param(Parameter<T>& p) {
  Var<T> v = leaf(p.value, true);
  nodes_[v.id()].param = &p;
  return v;
}

template <typename T>
Var<T> Graph<T>::record(const char* op, Tensor<T> value, std::initializer_list<Var<T>> inputs,
                        BackwardFn backward) {
  bool needs_grad = false;
  for (const Var<T>& in : inputs) {
    if (&in.graph() != this) throw UsageError(std::string(op) + ": operands from different graphs");
    needs_grad = needs_grad || nodes_[in.id()].requires_grad;
  }
  if (!value.all_finite())
    throw DomainError(std::string(op) + " produced a non-finite value (shape " +
                      value.shape().str() + ")");
  Node node;
  node.value = std::move(value);
  node.requires_grad = needs_grad;
  if (needs_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var<T>(this, static_cast<NodeId>(nodes_.size() - 1));
}

template <typename T>
Tensor<T>* Graph<T>::grad_of(NodeId id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (n.grad.empty() && n.value.size() > 0) n.grad = Tensor<T>(n.value.shape());
  return &n.grad;
}

template <typename T>
GradientMap<T> Graph<T>::backward(const Var<T>& loss) {
  if (&loss.graph() != this) throw UsageError("backward: loss belongs to another graph");
  if (loss.shape() != Shape{1, 1, 1, 1})
    throw UsageError("backward requires a (1, 1, 1, 1) loss, got " + loss.shape().str());
  if (consumed_) throw UsageError("backward called twice on the same graph");
  consumed_ = true;

  GradientMap<T> result;
  if (Tensor<T>* g = grad_of(loss.id())) {
    (*g)[0] = T(1);
    for (int64_t i = loss.id(); i >= 0; --i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (!n.requires_grad || n.grad.empty()) continue;
      if (n.backward) {
        n.backward(*this, n.value, n.grad);
        n.backward = nullptr;
      }
      if (!n.is_leaf) n.grad = Tensor<T>();
    }
  }
  for (size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    if (!n.is_leaf || !n.requires_grad) continue;
    Tensor<T> g = n.grad.empty() ? Tensor<T>(n.value.shape()) : std::move(n.grad);
    if (n.param) {
      if (n.param->grad.shape() != g.shape()) n.param->zero_grad();
      auto dst = n.param->grad.data();
      auto src = g.data();
      for (size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
    result.emplace(static_cast<NodeId>(i), std::move(g));
  }
  return result;
}

template class Graph<float>;
template class Graph<double>;

}  // namespace cmgan
