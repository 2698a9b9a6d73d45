#include "valence/tape.hpp"

#include <cmath>

#include "valence/errors.hpp"

namespace valence::ad {

namespace {

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() +
                   " vs " + b.shape_str());
}

}  // namespace

Tensor& ParamStore::create(const std::string& name, Tensor init) {
  auto [it, inserted] = params_.emplace(name, std::move(init));
  if (!inserted) {
    throw ContractError("param store: duplicate parameter '" + name + "'");
  }
  return it->second;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) {
    throw ContractError("param store: unknown parameter '" + name + "'");
  }
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) {
    throw ContractError("param store: unknown parameter '" + name + "'");
  }
  return it->second;
}

bool ParamStore::contains(const std::string& name) const {
  return params_.count(name) != 0;
}

std::size_t ParamStore::total_values() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

Tape::Node& Tape::node(Var v) {
  if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw ContractError("tape: invalid node handle");
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw ContractError("tape: invalid node handle");
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<NodeId>(nodes_.size() - 1)};
}

Var Tape::constant(Tensor v) {
  Node n;
  n.op = OpKind::kLeaf;
  n.value = std::move(v);
  return push(std::move(n));
}

Var Tape::param(ParamStore& store, const std::string& name) {
  if (auto it = registry_.find(name); it != registry_.end()) {
    if (bound_store_ != &store) {
      throw ContractError("tape: parameter '" + name +
                          "' bound from a different store");
    }
    return Var{it->second};
  }
  Node n;
  n.op = OpKind::kLeaf;
  n.value = store.get(name);
  n.needs_grad = true;
  Var v = push(std::move(n));
  registry_.emplace(name, v.id);
  bound_store_ = &store;
  return v;
}

Var Tape::binary(OpKind op, Var a, Var b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  const char* name = op == OpKind::kAdd   ? "add"
                     : op == OpKind::kSub ? "sub"
                     : op == OpKind::kMul ? "multiply"
                                          : "divide";
  if (!na.value.same_shape(nb.value)) shape_fail(name, na.value, nb.value);
  Node n;
  n.op = op;
  n.p0 = a.id;
  n.p1 = b.id;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.value = Tensor::zeros(na.value.shape);
  const std::size_t count = n.value.numel();
  const double* x = na.value.values.data();
  const double* y = nb.value.values.data();
  double* out = n.value.values.data();
  switch (op) {
    case OpKind::kAdd:
      for (std::size_t i = 0; i < count; ++i) out[i] = x[i] + y[i];
      break;
    case OpKind::kSub:
      for (std::size_t i = 0; i < count; ++i) out[i] = x[i] - y[i];
      break;
    case OpKind::kMul:
      for (std::size_t i = 0; i < count; ++i) out[i] = x[i] * y[i];
      break;
    case OpKind::kDiv:
      for (std::size_t i = 0; i < count; ++i) out[i] = x[i] / y[i];
      break;
    default:
      throw ContractError("tape: bad binary op");
  }
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) { return binary(OpKind::kAdd, a, b); }
Var Tape::sub(Var a, Var b) { return binary(OpKind::kSub, a, b); }
Var Tape::mul(Var a, Var b) { return binary(OpKind::kMul, a, b); }
Var Tape::div(Var a, Var b) { return binary(OpKind::kDiv, a, b); }

Var Tape::affine(Var x, double a, double b) {
  const Node& nx = node(x);
  Node n;
  n.op = OpKind::kAffine;
  n.p0 = x.id;
  n.a = a;
  n.b = b;
  n.needs_grad = nx.needs_grad;
  n.value = Tensor::zeros(nx.value.shape);
  for (std::size_t i = 0; i < n.value.numel(); ++i) {
    n.value.values[i] = a * nx.value.values[i] + b;
  }
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  const Tensor& A = na.value;
  const Tensor& B = nb.value;
  if (A.rank() != 2 || (B.rank() != 1 && B.rank() != 2)) {
    throw ShapeError("matmul: expects (m x k)·(k x n) or (m x k)·(k), got " +
                     A.shape_str() + " and " + B.shape_str());
  }
  const std::size_t m = A.shape[0];
  const std::size_t k = A.shape[1];
  if (B.shape[0] != k) shape_fail("matmul", A, B);

  Node n;
  n.op = OpKind::kMatmul;
  n.p0 = a.id;
  n.p1 = b.id;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  if (B.rank() == 1) {
    n.value = Tensor::zeros({m});
    const double* pa = A.values.data();
    const double* pb = B.values.data();
    for (std::size_t i = 0; i < m; ++i) {
      const double* row = pa + i * k;
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) acc += row[j] * pb[j];
      n.value.values[i] = acc;
    }
  } else {
    const std::size_t cols = B.shape[1];
    n.value = Tensor::zeros({m, cols});
    const double* pa = A.values.data();
    const double* pb = B.values.data();
    double* out = n.value.values.data();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double av = pa[i * k + kk];
        if (av == 0.0) continue;
        const double* brow = pb + kk * cols;
        double* orow = out + i * cols;
        for (std::size_t j = 0; j < cols; ++j) orow[j] += av * brow[j];
      }
    }
  }
  return push(std::move(n));
}

Var Tape::unary(OpKind op, Var x) {
  const Node& nx = node(x);
  Node n;
  n.op = op;
  n.p0 = x.id;
  n.needs_grad = nx.needs_grad;
  n.value = Tensor::zeros(nx.value.shape);
  const std::size_t count = n.value.numel();
  const double* in = nx.value.values.data();
  double* out = n.value.values.data();
  switch (op) {
    case OpKind::kTanh:
      for (std::size_t i = 0; i < count; ++i) out[i] = std::tanh(in[i]);
      break;
    case OpKind::kSigmoid:
      for (std::size_t i = 0; i < count; ++i)
        out[i] = 1.0 / (1.0 + std::exp(-in[i]));
      break;
    case OpKind::kRelu:
      for (std::size_t i = 0; i < count; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
      break;
    case OpKind::kExp:
      for (std::size_t i = 0; i < count; ++i) out[i] = std::exp(in[i]);
      break;
    case OpKind::kLog:
      for (std::size_t i = 0; i < count; ++i) out[i] = std::log(in[i]);
      break;
    default:
      throw ContractError("tape: bad unary op");
  }
  return push(std::move(n));
}

Var Tape::tanh(Var x) { return unary(OpKind::kTanh, x); }
Var Tape::sigmoid(Var x) { return unary(OpKind::kSigmoid, x); }
Var Tape::relu(Var x) { return unary(OpKind::kRelu, x); }
Var Tape::exp(Var x) { return unary(OpKind::kExp, x); }
Var Tape::log(Var x) { return unary(OpKind::kLog, x); }

Var Tape::softmax(Var x) {
  const Node& nx = node(x);
  const Tensor& v = nx.value;
  Node n;
  n.op = OpKind::kSoftmax;
  n.p0 = x.id;
  n.needs_grad = nx.needs_grad;
  n.value = Tensor::zeros(v.shape);
  const std::size_t cols = v.cols();
  const std::size_t rows = v.numel() / cols;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = v.values.data() + r * cols;
    double* out = n.value.values.data() + r * cols;
    double mx = in[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, in[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      out[j] = std::exp(in[j] - mx);
      denom += out[j];
    }
    for (std::size_t j = 0; j < cols; ++j) out[j] /= denom;
  }
  return push(std::move(n));
}

Var Tape::concat(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  std::size_t total = 0;
  bool needs = false;
  for (Var p : parts) {
    const Node& np = node(p);
    if (np.value.rank() != 1) {
      throw ShapeError("concat: rank-1 inputs required, got " +
                       np.value.shape_str());
    }
    total += np.value.numel();
    needs = needs || np.needs_grad;
  }
  Node n;
  n.op = OpKind::kConcat;
  n.needs_grad = needs;
  n.value = Tensor::zeros({total});
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& v = node(p).value;
    for (std::size_t i = 0; i < v.numel(); ++i) {
      n.value.values[off + i] = v.values[i];
    }
    off += v.numel();
    n.extra.push_back(p.id);
  }
  return push(std::move(n));
}

Var Tape::slice(Var x, std::size_t offset, std::size_t len) {
  const Node& nx = node(x);
  const Tensor& v = nx.value;
  const std::size_t cols = v.cols();
  if (len == 0 || offset + len > cols) {
    throw ShapeError("slice: range [" + std::to_string(offset) + ", " +
                     std::to_string(offset + len) + ") out of bounds for " +
                     v.shape_str());
  }
  Node n;
  n.op = OpKind::kSlice;
  n.p0 = x.id;
  n.off = offset;
  n.len = len;
  n.needs_grad = nx.needs_grad;
  const std::size_t rows = v.numel() / cols;
  if (v.rank() == 1) {
    n.value = Tensor::zeros({len});
  } else {
    n.value = Tensor::zeros({rows, len});
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < len; ++j) {
      n.value.values[r * len + j] = v.values[r * cols + offset + j];
    }
  }
  return push(std::move(n));
}

Var Tape::sum(Var x) {
  const Node& nx = node(x);
  Node n;
  n.op = OpKind::kSum;
  n.p0 = x.id;
  n.needs_grad = nx.needs_grad;
  double acc = 0.0;
  for (double v : nx.value.values) acc += v;
  n.value = Tensor::scalar(acc);
  return push(std::move(n));
}

Var Tape::mean(Var x) {
  const Node& nx = node(x);
  Node n;
  n.op = OpKind::kMean;
  n.p0 = x.id;
  n.needs_grad = nx.needs_grad;
  double acc = 0.0;
  for (double v : nx.value.values) acc += v;
  n.value = Tensor::scalar(acc / static_cast<double>(nx.value.numel()));
  return push(std::move(n));
}

Var Tape::mask_mul(Var x, Tensor mask) {
  const Node& nx = node(x);
  if (!nx.value.same_shape(mask)) shape_fail("mask multiply", nx.value, mask);
  Node n;
  n.op = OpKind::kMaskMul;
  n.p0 = x.id;
  n.needs_grad = nx.needs_grad;
  n.value = Tensor::zeros(nx.value.shape);
  for (std::size_t i = 0; i < mask.numel(); ++i) {
    n.value.values[i] = nx.value.values[i] * mask.values[i];
  }
  n.aux = std::move(mask);
  return push(std::move(n));
}

Var Tape::reshape(Var x, std::vector<std::size_t> shape) {
  const Node& nx = node(x);
  if (shape_numel(shape) != nx.value.numel()) {
    throw ShapeError("reshape: " + nx.value.shape_str() + " has " +
                     std::to_string(nx.value.numel()) + " values, target " +
                     "shape needs " + std::to_string(shape_numel(shape)));
  }
  Node n;
  n.op = OpKind::kReshape;
  n.p0 = x.id;
  n.needs_grad = nx.needs_grad;
  n.value = Tensor(std::move(shape), nx.value.values);
  return push(std::move(n));
}

Var Tape::stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw ContractError("stack_rows: no inputs");
  const std::size_t cols = node(rows[0]).value.numel();
  bool needs = false;
  for (Var r : rows) {
    const Node& nr = node(r);
    if (nr.value.rank() != 1 || nr.value.numel() != cols) {
      throw ShapeError("stack_rows: rank-1 inputs of equal length required");
    }
    needs = needs || nr.needs_grad;
  }
  Node n;
  n.op = OpKind::kStackRows;
  n.needs_grad = needs;
  n.value = Tensor::zeros({rows.size(), cols});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Tensor& v = node(rows[r]).value;
    for (std::size_t j = 0; j < cols; ++j) {
      n.value.values[r * cols + j] = v.values[j];
    }
    n.extra.push_back(rows[r].id);
  }
  return push(std::move(n));
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

const Tensor& Tape::grad(Var v) const { return node(v).grad; }

Tensor& Tape::ensure_grad(NodeId id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (backward_done_) {
    throw ContractError("tape: backward may run only once per tape");
  }
  const Node& ln = node(loss);
  if (!ln.value.is_scalar()) {
    throw ContractError("backward: loss must be scalar, got shape " +
                        ln.value.shape_str());
  }
  backward_done_ = true;
  ensure_grad(loss.id).values[0] = 1.0;

  for (NodeId id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad || n.grad.empty()) continue;
    const double* g = n.grad.values.data();
    const std::size_t count = n.grad.numel();
    auto parent_needs = [&](NodeId p) {
      return p >= 0 && nodes_[static_cast<std::size_t>(p)].needs_grad;
    };
    switch (n.op) {
      case OpKind::kLeaf:
        break;
      case OpKind::kAdd: {
        if (parent_needs(n.p0)) {
          double* d = ensure_grad(n.p0).values.data();
          for (std::size_t i = 0; i < count; ++i) d[i] += g[i];
        }
        if (parent_needs(n.p1)) {
          double* d = ensure_grad(n.p1).values.data();
          for (std::size_t i = 0; i < count; ++i) d[i] += g[i];
        }
        break;
      }
      case OpKind::kSub: {
        if (parent_needs(n.p0)) {
          double* d = ensure_grad(n.p0).values.data();
          for (std::size_t i = 0; i < count; ++i) d[i] += g[i];
        }
        if (parent_needs(n.p1)) {
          double* d = ensure_grad(n.p1).values.data();
          for (std::size_t i = 0; i < count; ++i) d[i] -= g[i];
        }
        break;
      }
      case OpKind::kMul: {
        const Tensor& av = nodes_[static_cast<std::size_t>(n.p0)].value;
        const Tensor& bv = nodes_[static_cast<std::size_t>(n.p1)].value;
        if (parent_needs(n.p0)) {
          double* d = ensure_grad(n.p0).values.data();
          for (std::size_t i = 0; i < count; ++i) d[i] += g[i] * bv.values[i];
        }
        if (parent_needs(n.p1)) {
          double* d = ensure_grad(n.p1).values.data();
          for (std::size_t i = 0; i < count; ++i) d[i] += g[i] * av.values[i];
        }
        break;
      }
      case OpKind::kDiv: {
        const Tensor& av = nodes_[static_cast<std::size_t>(n.p0)].value;
        const Tensor& bv = nodes_[static_cast<std::size_t>(n.p1)].value;
        if (parent_needs(n.p0)) {
          double* d = ensure_grad(n.p0).values.data();
          for (std::size_t i = 0; i < count; ++i) d[i] += g[i] / bv.values[i];
        }
        if (parent_needs(n.p1)) {
          double* d = ensure_grad(n.p1).values.data();
          for (std::size_t i = 0; i < count; ++i) {
            d[i] -= g[i] * av.values[i] / (bv.values[i] * bv.values[i]);
          }
        }
        break;
      }
      case OpKind::kMatmul: {
        const Tensor& A = nodes_[static_cast<std::size_t>(n.p0)].value;
        const Tensor& B = nodes_[static_cast<std::size_t>(n.p1)].value;
        const std::size_t m = A.shape[0];
        const std::size_t k = A.shape[1];
        if (B.rank() == 1) {
          if (parent_needs(n.p0)) {
            double* dA = ensure_grad(n.p0).values.data();
            for (std::size_t i = 0; i < m; ++i) {
              const double gi = g[i];
              if (gi == 0.0) continue;
              double* row = dA + i * k;
              for (std::size_t j = 0; j < k; ++j) row[j] += gi * B.values[j];
            }
          }
          if (parent_needs(n.p1)) {
            double* dB = ensure_grad(n.p1).values.data();
            for (std::size_t i = 0; i < m; ++i) {
              const double gi = g[i];
              if (gi == 0.0) continue;
              const double* row = A.values.data() + i * k;
              for (std::size_t j = 0; j < k; ++j) dB[j] += gi * row[j];
            }
          }
        } else {
          const std::size_t cols = B.shape[1];
          if (parent_needs(n.p0)) {
            double* dA = ensure_grad(n.p0).values.data();
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t kk = 0; kk < k; ++kk) {
                const double* brow = B.values.data() + kk * cols;
                const double* grow = g + i * cols;
                double acc = 0.0;
                for (std::size_t j = 0; j < cols; ++j) acc += grow[j] * brow[j];
                dA[i * k + kk] += acc;
              }
            }
          }
          if (parent_needs(n.p1)) {
            double* dB = ensure_grad(n.p1).values.data();
            for (std::size_t i = 0; i < m; ++i) {
              const double* arow = A.values.data() + i * k;
              const double* grow = g + i * cols;
              for (std::size_t kk = 0; kk < k; ++kk) {
                const double av = arow[kk];
                if (av == 0.0) continue;
                double* brow = dB + kk * cols;
                for (std::size_t j = 0; j < cols; ++j) brow[j] += av * grow[j];
              }
            }
          }
        }
        break;
      }
      case OpKind::kTanh: {
        if (parent_needs(n.p0)) {
          double* d = ensure_grad(n.p0).values.data();
          const double* y = n.value.values.data();
          for (std::size_t i = 0; i < count; ++i) {
            d[i] += g[i] * (1.0 - y[i] * y[i]);
          }
        }
        break;
      }
      case OpKind::kSigmoid: {
        if (parent_needs(n.p0)) {
          double* d = ensure_grad(n.p0).values.data();
          const double* y = n.value.values.data();
          for (std::size_t i = 0; i < count; ++i) {
            d[i] += g[i] * y[i] * (1.0 - y[i]);
          }
        }
        break;
      }
      case OpKind::kRelu: {
        if (parent_needs(n.p0)) {
          const Tensor& x = nodes_[static_cast<std::size_t>(n.p0)].value;
          double* d = ensure_grad(n.p0).values.data();
          for (std::size_t i = 0; i < count; ++i) {
            if (x.values[i] > 0.0) d[i] += g[i];
          }
        }
        break;
      }
      case OpKind::kExp: {
        if (parent_needs(n.p0)) {
          double* d = ensure_grad(n.p0).values.data();
          const double* y = n.value.values.data();
          for (std::size_t i = 0; i < count; ++i) d[i] += g[i] * y[i];
        }
        break;
      }
      case OpKind::kLog: {
        if (parent_needs(n.p0)) {
          const Tensor& x = nodes_[static_cast<std::size_t>(n.p0)].value;
          double* d = ensure_grad(n.p0).values.data();
          for (std::size_t i = 0; i < count; ++i) d[i] += g[i] / x.values[i];
        }
        break;
      }
      case OpKind::kAffine: {
        if (parent_needs(n.p0)) {
          double* d = ensure_grad(n.p0).values.data();
          for (std::size_t i = 0; i < count; ++i) d[i] += g[i] * n.a;
        }
        break;
      }
      case OpKind::kSoftmax: {
        if (parent_needs(n.p0)) {
          double* d = ensure_grad(n.p0).values.data();
          const double* y = n.value.values.data();
          const std::size_t cols = n.value.cols();
          const std::size_t rows = count / cols;
          for (std::size_t r = 0; r < rows; ++r) {
            const double* yr = y + r * cols;
            const double* gr = g + r * cols;
            double dot = 0.0;
            for (std::size_t j = 0; j < cols; ++j) dot += gr[j] * yr[j];
            double* dr = d + r * cols;
            for (std::size_t j = 0; j < cols; ++j) {
              dr[j] += yr[j] * (gr[j] - dot);
            }
          }
        }
        break;
      }
      case OpKind::kConcat: {
        std::size_t off = 0;
        for (NodeId p : n.extra) {
          const std::size_t len =
              nodes_[static_cast<std::size_t>(p)].value.numel();
          if (parent_needs(p)) {
            double* d = ensure_grad(p).values.data();
            for (std::size_t i = 0; i < len; ++i) d[i] += g[off + i];
          }
          off += len;
        }
        break;
      }
      case OpKind::kSlice: {
        if (parent_needs(n.p0)) {
          Tensor& pd = ensure_grad(n.p0);
          const std::size_t cols = pd.cols();
          const std::size_t rows = pd.numel() / cols;
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < n.len; ++j) {
              pd.values[r * cols + n.off + j] += g[r * n.len + j];
            }
          }
        }
        break;
      }
      case OpKind::kSum: {
        if (parent_needs(n.p0)) {
          double* d = ensure_grad(n.p0).values.data();
          const std::size_t pn =
              nodes_[static_cast<std::size_t>(n.p0)].value.numel();
          for (std::size_t i = 0; i < pn; ++i) d[i] += g[0];
        }
        break;
      }
      case OpKind::kMean: {
        if (parent_needs(n.p0)) {
          double* d = ensure_grad(n.p0).values.data();
          const std::size_t pn =
              nodes_[static_cast<std::size_t>(n.p0)].value.numel();
          const double gi = g[0] / static_cast<double>(pn);
          for (std::size_t i = 0; i < pn; ++i) d[i] += gi;
        }
        break;
      }
      case OpKind::kMaskMul: {
        if (parent_needs(n.p0)) {
          double* d = ensure_grad(n.p0).values.data();
          for (std::size_t i = 0; i < count; ++i) {
            d[i] += g[i] * n.aux.values[i];
          }
        }
        break;
      }
      case OpKind::kReshape: {
        if (parent_needs(n.p0)) {
          double* d = ensure_grad(n.p0).values.data();
          for (std::size_t i = 0; i < count; ++i) d[i] += g[i];
        }
        break;
      }
      case OpKind::kStackRows: {
        const std::size_t cols = n.value.shape[1];
        for (std::size_t r = 0; r < n.extra.size(); ++r) {
          const NodeId p = n.extra[r];
          if (!parent_needs(p)) continue;
          double* d = ensure_grad(p).values.data();
          for (std::size_t j = 0; j < cols; ++j) d[j] += g[r * cols + j];
        }
        break;
      }
    }
  }
}

GradMap Tape::grads() const {
  GradMap out;
  for (const auto& [name, id] : registry_) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty()) {
      out.emplace(name, Tensor::zeros(n.value.shape));
    } else {
      out.emplace(name, n.grad);
    }
  }
  return out;
}

}  // namespace valence::ad
