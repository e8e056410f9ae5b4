#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dpn/sphere.hpp"
#include "dpn/tensor.hpp"

namespace dpn::nn {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
};

/// Ordered, named parameter collection. Element addresses stay valid as long
/// as no parameter is added, so build the set before recording graphs on it.
class ParameterSet {
 public:
  Parameter& add(std::string name, Tensor value);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();

 private:
  std::vector<Parameter> params_;
};

class Graph;

/// Handle to a node of a Graph.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  const Tensor& value() const;
  const std::vector<std::size_t>& shape() const { return value().shape; }
};

/// Receives the output gradient and the input gradient slots (null for inputs
/// that do not require a gradient) and accumulates into the slots.
using BackwardFn = std::function<void(const Tensor& out_grad, std::vector<Tensor*>& in_grads)>;

/// Tape of dense-tensor operations recorded in execution order. Backward walks
/// the tape in reverse and accumulates into the bound parameters' grad slots.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  /// Trainable leaf: gradients land in `p.grad` after backward().
  Var param(Parameter& p);
  /// Read-only leaf over a parameter that is never differentiated.
  Var frozen(const Parameter& p);

  /// Appends an op node. Faults with kNonFinite (naming the node) if the
  /// value holds NaN or Inf.
  Var record(const char* kind, Tensor value, std::vector<Var> inputs, BackwardFn backward);

  /// Throws kInvalidLoss unless `loss` holds a single element.
  void backward(Var loss);

  const Tensor& value(int id) const;
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  const std::string& kind(int id) const { return nodes_[id].kind; }

 private:
  struct Node {
    std::string kind;
    Tensor own;
    const Tensor* view = nullptr;
    std::vector<int> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };
  std::deque<Node> nodes_;  // deque: op closures hold references to earlier values
};

// Ops. Shapes are checked eagerly and mismatches throw kShapeMismatch.
Var matmul(Var a, Var b);                    // [m,k]·[k,n]
Var add(Var a, Var b);                       // same shape
Var sub(Var a, Var b);                       // same shape
Var add_bias(Var x, Var bias);               // [m,n] + [n] per row, or [n] + [n]
Var concat(Var a, Var b);                    // along the last axis
Var relu(Var x);
Var reshape(Var x, std::vector<std::size_t> shape);
Var flatten(Var x);
Var elementwise_max3(Var a, Var b, Var c);
Var l2_norm(Var x);                          // over all elements, → [1]
Var row_norms(Var x);                        // [m,n] → [m]
Var scale(Var x, double factor);
Var add_scalar(Var x, double offset);
Var sum(Var x);
Var mean(Var x);
/// Raw 4-vector → unit quaternion flipped onto the w ≥ 0 hemisphere.
Var quat_canonical(Var raw);
/// Unit quaternion [4] → row-major rotation [3,3].
Var quat_to_rot(Var q);
/// Rows of points [N,3] → rows of R^T (p - t) / ‖s‖.
Var canonical_transform(Var points, Var R, Var t, Var s);
/// Spectral convolution: x [cells, cin], taps [cin, cout, B] → [cells, cout].
Var zonal_conv(Var x, Var taps, std::shared_ptr<const SphericalBasis> basis);
/// 2×2 quadrature-weighted pooling on `grid`: [W·H, c] → [W·H/4, c].
Var avg_pool(Var x, const SphericalGrid& grid);

}  // namespace dpn::nn
