#include "exvqa/graph.hpp"

#include <string>

namespace exvqa {

std::string shape_str(const Shape& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

template <class T>
const typename Graph<T>::Node& Graph<T>::node(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
    throw ContractError("variable does not belong to this graph");
  return nodes_[static_cast<std::size_t>(v.id)];
}

template <class T>
Var Graph<T>::param(Tensor& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{it->second};
  std::vector<T> values(p.data().begin(), p.data().end());
  if (perturb_ && perturb_->target == &p) values.at(perturb_->index) += static_cast<T>(perturb_->delta);
  Node n;
  n.value = Value::from(p.dims(), std::move(values));
  n.param = &p;
  nodes_.push_back(std::move(n));
  auto id = static_cast<std::int32_t>(nodes_.size() - 1);
  param_nodes_.emplace(&p, id);
  return Var{id};
}

template <class T>
Var Graph<T>::constant(Value v) {
  Node n;
  n.value = std::move(v);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

template <class T>
Var Graph<T>::record(Value v, std::vector<Var> inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(v);
  const auto self = static_cast<std::int32_t>(nodes_.size());
  for (Var in : inputs) {
    if (in.id < 0 || in.id >= self) throw ContractError("op input is not on the tape");
    n.inputs.push_back(in.id);
  }
  if (record_backward_) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{self};
}

template <class T>
std::vector<T> Graph<T>::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.empty()) return std::vector<T>(n.value.size(), T(0));
  return n.grad;
}

template <class T>
std::span<T> Graph<T>::grad_buffer(std::int32_t id) {
  Node& n = nodes_.at(static_cast<std::size_t>(id));
  if (n.grad.empty()) n.grad.assign(n.value.size(), T(0));
  return n.grad;
}

template <class T>
void Graph<T>::backward(Var loss) {
  const Node& root = node(loss);
  if (root.value.size() != 1)
    throw ContractError("backward needs a scalar loss, got " + shape_str(root.value.dims()));
  if (!record_backward_) throw ContractError("backward on a graph built without backward recording");
  for (Node& n : nodes_) n.grad.clear();
  grad_buffer(loss.id)[0] = T(1);
  for (std::int32_t i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
  }
  for (Node& n : nodes_) {
    if (!n.param) continue;
    Tensor& p = *n.param;
    if (!p.has_grad()) p.zero_grad();
    if (n.grad.empty()) continue;
    auto g = p.grad();
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += static_cast<float>(n.grad[j]);
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace exvqa
