#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "valence/tensor.hpp"

namespace valence::ad {

using NodeId = std::int32_t;

/// Handle to a node on a Tape. Only meaningful together with the tape that
/// produced it.
struct Var {
  NodeId id = -1;
  bool valid() const { return id >= 0; }
};

/// Named parameter tensors. Lives outside any tape so values persist across
/// training steps; a tape binds to entries by name at graph-building time.
class ParamStore {
 public:
  Tensor& create(const std::string& name, Tensor init);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::size_t size() const { return params_.size(); }
  std::size_t total_values() const;

  /// Sorted by name; iteration order is the canonical parameter order.
  const std::map<std::string, Tensor>& entries() const { return params_; }
  std::map<std::string, Tensor>& entries() { return params_; }

 private:
  std::map<std::string, Tensor> params_;
};

using GradMap = std::map<std::string, Tensor>;

enum class OpKind : std::uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kMatmul,
  kTanh,
  kSigmoid,
  kRelu,
  kExp,
  kLog,
  kAffine,   // a*x + b elementwise
  kSoftmax,  // over last axis
  kConcat,   // last axis, rank-1 inputs
  kSlice,    // last axis
  kSum,      // full reduction to scalar
  kMean,     // full reduction to scalar
  kMaskMul,  // elementwise product with a constant tensor (dropout masks)
  kReshape,
  kStackRows,  // rank-1 inputs become the rows of a matrix
};

/// Append-only record of a forward computation. Every operation appends one
/// node whose parents precede it, so reverse iteration is a valid
/// reverse-topological order for backpropagation.
class Tape {
 public:
  Var constant(Tensor v);
  /// Binds a parameter by name: copies its current value in as a gradient
  /// leaf. Binding the same name twice returns the same node.
  Var param(ParamStore& store, const std::string& name);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var affine(Var x, double a, double b);
  Var neg(Var x) { return affine(x, -1.0, 0.0); }
  Var scale(Var x, double a) { return affine(x, a, 0.0); }

  /// (m x k)·(k x n) -> (m x n), or (m x k)·(k) -> (m).
  Var matmul(Var a, Var b);

  Var tanh(Var x);
  Var sigmoid(Var x);
  Var relu(Var x);
  Var exp(Var x);
  Var log(Var x);
  Var softmax(Var x);
  Var concat(std::span<const Var> parts);
  Var slice(Var x, std::size_t offset, std::size_t len);
  Var sum(Var x);
  Var mean(Var x);
  Var mask_mul(Var x, Tensor mask);
  Var reshape(Var x, std::vector<std::size_t> shape);
  Var stack_rows(std::span<const Var> rows);

  const Tensor& value(Var v) const;
  /// Gradient of the last backward()'s loss with respect to node v. Empty
  /// tensor if no gradient flowed to v.
  const Tensor& grad(Var v) const;

  /// Reverse-mode sweep from a scalar loss node. May be called once per tape.
  void backward(Var loss);

  /// Gradients of all bound parameters (zeros for parameters the loss does
  /// not depend on). Valid after backward().
  GradMap grads() const;

  double scalar_value(Var v) const { return value(v).values[0]; }
  std::size_t size() const { return nodes_.size(); }
  const std::map<std::string, NodeId>& registry() const { return registry_; }

 private:
  struct Node {
    OpKind op = OpKind::kLeaf;
    NodeId p0 = -1, p1 = -1;
    std::vector<NodeId> extra;  // concat parents
    Tensor value;
    Tensor grad;  // allocated during backward, only where gradient flows
    bool needs_grad = false;
    double a = 0.0, b = 0.0;        // affine coefficients
    std::size_t off = 0, len = 0;   // slice bounds
    Tensor aux;                     // constant mask for kMaskMul
  };

  Node& node(Var v);
  const Node& node(Var v) const;
  Var push(Node n);
  Var unary(OpKind op, Var x);
  Var binary(OpKind op, Var a, Var b);
  Tensor& ensure_grad(NodeId id);

  std::vector<Node> nodes_;
  std::map<std::string, NodeId> registry_;
  const ParamStore* bound_store_ = nullptr;
  bool backward_done_ = false;
};

}  // namespace valence::ad
