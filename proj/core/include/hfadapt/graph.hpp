#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hfadapt/params.hpp"
#include "hfadapt/tensor.hpp"

namespace hfadapt {

class Graph;

/// Handle to a value recorded on a Graph. Cheap to copy; only valid while
/// its graph is alive.
class Var {
 public:
  Var() = default;

  Graph& graph() const { return *graph_; }
  std::uint32_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Graph;
  Var(Graph* graph, std::uint32_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so walking the
/// tape backwards is a valid topological order for gradient propagation.
///
/// Parameters are bound per (model, name): binding the same entry twice
/// returns the same leaf, so gradients from every use accumulate. Leaves of
/// frozen models and non-trainable buffers never require gradients.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor& out_grad)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  // Leaf that receives a gradient (inputs under gradient checks).
  Var variable(Tensor value);
  Var parameter(const ModelParameters& model, std::string_view name);

  const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }
  // Gradient of the last backward() target w.r.t. `v`; nullptr if none flowed.
  const Tensor* grad(Var v) const;

  // Propagates d(loss)/d(node) through the tape. `loss` must hold exactly
  // one value. May be called once per graph.
  void backward(Var loss);

  // One gradient per trainable entry of `model` (zeros for entries that did
  // not influence the loss). Empty for frozen models.
  GradientMap gradients(const ModelParameters& model) const;

  std::size_t size() const noexcept { return nodes_.size(); }

  // Op authoring. `fn` runs during backward() only if the output requires a
  // gradient, which is the case iff any input does.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  // Adds `g` into the gradient of `target` (no-op if it needs none).
  void accumulate(Var target, const Tensor& g);
  // Mutable zero-initialised gradient storage for in-place accumulation.
  Tensor& grad_buffer(Var target);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };

  Var push(Tensor value, bool requires_grad, BackwardFn fn);

  std::vector<Node> nodes_;
  std::map<std::pair<const ModelParameters*, std::string>, std::uint32_t> bindings_;
  bool backward_done_ = false;
};

// backward(loss) followed by gradients(model).
GradientMap backward(Var loss, const ModelParameters& model);

}  // namespace hfadapt
