#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "exvqa/tensor.hpp"

namespace exvqa {

/// Handle to a node recorded on a Graph.
struct Var {
  std::int32_t id = -1;
  bool valid() const noexcept { return id >= 0; }
};

/// Reverse-mode computation tape.
///
/// Nodes are appended in evaluation order, so every input of node i was
/// recorded before i and a reverse sweep is a valid topological replay.
/// Parameters enter as leaves that point back at the owning float Tensor; after
/// backward() their gradients are accumulated into Tensor::grad.
///
/// T is float for training and inference, double for the gradient checker.
template <class T>
class Graph {
 public:
  using Value = BasicTensor<T>;
  using BackwardFn = std::function<void(Graph&, std::int32_t self)>;

  struct Node {
    Value value;
    std::vector<T> grad;  // empty until something flows into it
    std::vector<std::int32_t> inputs;
    BackwardFn backward;
    Tensor* param = nullptr;
  };

  /// With record_backward off no backward closures (and none of their saved
  /// activations) are kept; used for generation and evaluation.
  explicit Graph(bool record_backward = true) : record_backward_(record_backward) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf for a trainable tensor. Repeated calls with the same tensor return
  /// the same node.
  Var param(Tensor& p);
  /// Leaf that never receives a gradient.
  Var constant(Value v);
  /// Appends an op result. Inputs must already be on this graph.
  Var record(Value v, std::vector<Var> inputs, BackwardFn fn);

  const Value& value(Var v) const { return node(v).value; }
  const Shape& dims(Var v) const { return node(v).value.dims(); }
  /// Gradient of the last backward() w.r.t. v; zeros when no path existed.
  std::vector<T> grad(Var v) const;

  /// Gradient accumulator of node id, allocated on first use.
  std::span<T> grad_buffer(std::int32_t id);
  const Node& node_at(std::int32_t id) const { return nodes_.at(static_cast<std::size_t>(id)); }

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. Node gradients
  /// are reset first, so repeated calls are reproducible. Parameter leaves
  /// add their gradient into the owning Tensor (allocating zeros when needed).
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  bool records_backward() const noexcept { return record_backward_; }

  /// Shifts one element of a parameter leaf when it is created (finite
  /// difference probing).
  void set_perturbation(const Tensor* target, std::size_t index, double delta) {
    perturb_ = Perturbation{target, index, delta};
  }

 private:
  struct Perturbation {
    const Tensor* target;
    std::size_t index;
    double delta;
  };

  const Node& node(Var v) const;

  bool record_backward_;
  std::vector<Node> nodes_;
  std::unordered_map<const Tensor*, std::int32_t> param_nodes_;
  std::optional<Perturbation> perturb_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace exvqa
