#pragma once

// Minimal define-by-run reverse-mode differentiation over dense 2-D arrays.
//
// A Value is a shared handle to a node holding row-major data and a gradient
// buffer of the same shape. Leaves (parameters, constants) are created
// directly; every other Value is produced by an operation recorded on a
// Graph, which keeps nodes in creation order so that backward() can walk
// them in reverse. Shapes are explicit: there is no broadcasting.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rrgru/error.hpp"

namespace rrgru {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  bool is_vector() const { return cols == 1; }
  bool is_scalar() const { return rows == 1 && cols == 1; }
  friend bool operator==(const Shape&, const Shape&) = default;

  std::string str() const { return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]"; }
};

struct Node;
using NodePtr = std::shared_ptr<Node>;
using BackwardFn = std::function<void(Node&)>;

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  // Recipe: empty op/backward for leaves.
  std::string op;
  std::vector<NodePtr> inputs;
  BackwardFn backward;

  bool is_leaf() const { return !backward; }
};

class Value {
 public:
  Value() = default;
  explicit Value(NodePtr node) : node_(std::move(node)) {}

  static Value leaf(Shape shape, std::vector<double> data) {
    if (data.size() != shape.size())
      throw ShapeError("leaf data has " + std::to_string(data.size()) + " entries, shape " +
                       shape.str() + " needs " + std::to_string(shape.size()));
    auto n = std::make_shared<Node>();
    n->shape = shape;
    n->data = std::move(data);
    n->grad.assign(shape.size(), 0.0);
    return Value(std::move(n));
  }
  static Value zeros(Shape shape) { return leaf(shape, std::vector<double>(shape.size(), 0.0)); }
  static Value column(std::vector<double> data) {
    const std::size_t n = data.size();
    return leaf({n, 1}, std::move(data));
  }
  static Value scalar(double x) { return leaf({1, 1}, {x}); }
  static Value matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> data) {
    return leaf({rows, cols}, std::vector<double>(data));
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rows() const { return node_->shape.rows; }
  std::size_t cols() const { return node_->shape.cols; }
  std::size_t size() const { return node_->data.size(); }
  bool is_leaf() const { return node_->is_leaf(); }
  const std::string& op() const { return node_->op; }

  std::span<double> data() { return node_->data; }
  std::span<const double> data() const { return node_->data; }
  std::span<double> grad() { return node_->grad; }
  std::span<const double> grad() const { return node_->grad; }

  double& at(std::size_t r, std::size_t c) { return node_->data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return node_->data[r * cols() + c]; }
  double item() const {
    if (!shape().is_scalar()) throw ShapeError("item() on non-scalar " + shape().str());
    return node_->data[0];
  }

  void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

  // Deep copy of data into a fresh leaf.
  Value clone() const { return leaf(shape(), node_->data); }

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

// Parameter handle paired with its stable name.
struct NamedParam {
  std::string name;
  Value value;
};

class Graph {
 public:
  // Records a non-leaf node. The backward function reads node.grad and
  // accumulates into node.inputs[i]->grad.
  Value record(Shape shape, std::vector<double> data, std::vector<Value> inputs, std::string op,
               BackwardFn backward) {
    auto n = std::make_shared<Node>();
    n->shape = shape;
    n->data = std::move(data);
    n->grad.assign(shape.size(), 0.0);
    n->op = std::move(op);
    n->inputs.reserve(inputs.size());
    for (auto& v : inputs) n->inputs.push_back(v.node());
    n->backward = std::move(backward);
    nodes_.push_back(n);
    return Value(std::move(n));
  }

  // Seeds loss.grad = 1 and propagates to every reachable leaf. Interior
  // gradients are reset first, so repeated calls add exactly one more
  // contribution to the leaves.
  void backward(const Value& loss) {
    if (!loss.defined() || !loss.shape().is_scalar())
      throw ContractError("backward() needs a scalar loss, got " +
                          (loss.defined() ? loss.shape().str() : std::string("undefined")));
    for (auto& n : nodes_) std::fill(n->grad.begin(), n->grad.end(), 0.0);
    if (loss.is_leaf()) {
      loss.node()->grad[0] += 1.0;
      return;
    }
    loss.node()->grad[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Node& n = **it;
      n.backward(n);
    }
  }

  std::size_t size() const { return nodes_.size(); }
  const std::vector<NodePtr>& nodes() const { return nodes_; }

 private:
  std::vector<NodePtr> nodes_;
};

namespace detail {

inline void require_same(const Value& a, const Value& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                     b.shape().str());
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

}  // namespace detail

// ---------------------------------------------------------------- products

inline Value matmul(Graph& g, const Value& a, const Value& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions differ, " + a.shape().str() + " x " +
                     b.shape().str());
  const std::size_t m = a.rows(), n = a.cols(), p = b.cols();
  std::vector<double> out(m * p, 0.0);
  const auto A = a.data();
  const auto B = b.data();
  if (p == 1) {
    for (std::size_t i = 0; i < m; ++i) {
      const double* row = A.data() + i * n;
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += row[k] * B[k];
      out[i] = s;
    }
    return g.record({m, 1}, std::move(out), {a, b}, "matmul", [m, n](Node& o) {
      Node& na = *o.inputs[0];
      Node& nb = *o.inputs[1];
      for (std::size_t i = 0; i < m; ++i) {
        const double go = o.grad[i];
        if (go == 0.0) continue;
        double* ga = na.grad.data() + i * n;
        const double* row = na.data.data() + i * n;
        for (std::size_t k = 0; k < n; ++k) {
          ga[k] += go * nb.data[k];
          nb.grad[k] += row[k] * go;
        }
      }
    });
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = A[i * n + k];
      for (std::size_t j = 0; j < p; ++j) out[i * p + j] += aik * B[k * p + j];
    }
  return g.record({m, p}, std::move(out), {a, b}, "matmul", [m, n, p](Node& o) {
    Node& na = *o.inputs[0];
    Node& nb = *o.inputs[1];
    // dA += dO * B^T ; dB += A^T * dO
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < p; ++j) {
        const double go = o.grad[i * p + j];
        if (go == 0.0) continue;
        for (std::size_t k = 0; k < n; ++k) {
          na.grad[i * n + k] += go * nb.data[k * p + j];
          nb.grad[k * p + j] += na.data[i * n + k] * go;
        }
      }
  });
}

inline Value transpose(Graph& g, const Value& a) {
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(r * c);
  const auto A = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = A[i * c + j];
  return g.record({c, r}, std::move(out), {a}, "transpose", [r, c](Node& o) {
    Node& na = *o.inputs[0];
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) na.grad[i * c + j] += o.grad[j * r + i];
  });
}

// ------------------------------------------------------------- elementwise

enum class Elementwise { add, sub, mul, sigmoid, tanh, one_minus };

inline Value add(Graph& g, const Value& a, const Value& b) {
  detail::require_same(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return g.record(a.shape(), std::move(out), {a, b}, "add", [](Node& o) {
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      o.inputs[0]->grad[i] += o.grad[i];
      o.inputs[1]->grad[i] += o.grad[i];
    }
  });
}

inline Value sub(Graph& g, const Value& a, const Value& b) {
  detail::require_same(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return g.record(a.shape(), std::move(out), {a, b}, "sub", [](Node& o) {
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      o.inputs[0]->grad[i] += o.grad[i];
      o.inputs[1]->grad[i] -= o.grad[i];
    }
  });
}

inline Value mul(Graph& g, const Value& a, const Value& b) {
  detail::require_same(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return g.record(a.shape(), std::move(out), {a, b}, "mul", [](Node& o) {
    Node& na = *o.inputs[0];
    Node& nb = *o.inputs[1];
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      na.grad[i] += o.grad[i] * nb.data[i];
      nb.grad[i] += o.grad[i] * na.data[i];
    }
  });
}

inline Value sigmoid(Graph& g, const Value& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::sigmoid(a.data()[i]);
  return g.record(a.shape(), std::move(out), {a}, "sigmoid", [](Node& o) {
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      const double s = o.data[i];
      o.inputs[0]->grad[i] += o.grad[i] * s * (1.0 - s);
    }
  });
}

inline Value tanh(Graph& g, const Value& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.data()[i]);
  return g.record(a.shape(), std::move(out), {a}, "tanh", [](Node& o) {
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      const double t = o.data[i];
      o.inputs[0]->grad[i] += o.grad[i] * (1.0 - t * t);
    }
  });
}

inline Value one_minus(Graph& g, const Value& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 - a.data()[i];
  return g.record(a.shape(), std::move(out), {a}, "one_minus", [](Node& o) {
    for (std::size_t i = 0; i < o.grad.size(); ++i) o.inputs[0]->grad[i] -= o.grad[i];
  });
}

inline Value elementwise(Graph& g, Elementwise kind, std::span<const Value> operands) {
  const bool binary =
      kind == Elementwise::add || kind == Elementwise::sub || kind == Elementwise::mul;
  const std::size_t want = binary ? 2 : 1;
  if (operands.size() != want)
    throw ContractError("elementwise: expected " + std::to_string(want) + " operand(s), got " +
                        std::to_string(operands.size()));
  switch (kind) {
    case Elementwise::add: return add(g, operands[0], operands[1]);
    case Elementwise::sub: return sub(g, operands[0], operands[1]);
    case Elementwise::mul: return mul(g, operands[0], operands[1]);
    case Elementwise::sigmoid: return sigmoid(g, operands[0]);
    case Elementwise::tanh: return tanh(g, operands[0]);
    case Elementwise::one_minus: return one_minus(g, operands[0]);
  }
  throw ContractError("elementwise: unknown kind");
}

// a * x + b with constants a, b.
inline Value affine(Graph& g, const Value& x, double scale, double shift) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * x.data()[i] + shift;
  return g.record(x.shape(), std::move(out), {x}, "affine", [scale](Node& o) {
    for (std::size_t i = 0; i < o.grad.size(); ++i) o.inputs[0]->grad[i] += scale * o.grad[i];
  });
}

inline Value softplus(Graph& g, const Value& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::softplus(x.data()[i]);
  return g.record(x.shape(), std::move(out), {x}, "softplus", [](Node& o) {
    Node& nx = *o.inputs[0];
    for (std::size_t i = 0; i < o.grad.size(); ++i)
      nx.grad[i] += o.grad[i] * detail::sigmoid(nx.data[i]);
  });
}

// ------------------------------------------------------------- reductions

inline Value sum(Graph& g, const Value& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return g.record({1, 1}, {s}, {x}, "sum", [](Node& o) {
    for (double& gx : o.inputs[0]->grad) gx += o.grad[0];
  });
}

inline Value sum_squares(Graph& g, const Value& x) {
  double s = 0.0;
  for (double v : x.data()) s += v * v;
  return g.record({1, 1}, {s}, {x}, "sum_squares", [](Node& o) {
    Node& nx = *o.inputs[0];
    for (std::size_t i = 0; i < nx.grad.size(); ++i) nx.grad[i] += 2.0 * nx.data[i] * o.grad[0];
  });
}

// Sum of any number of scalars.
inline Value add_scalars(Graph& g, std::span<const Value> xs) {
  if (xs.empty()) throw ContractError("add_scalars: no operands");
  double s = 0.0;
  for (const auto& x : xs) {
    if (!x.shape().is_scalar()) throw ShapeError("add_scalars: operand " + x.shape().str());
    s += x.data()[0];
  }
  return g.record({1, 1}, {s}, std::vector<Value>(xs.begin(), xs.end()), "add_scalars",
                  [](Node& o) {
                    for (auto& in : o.inputs) in->grad[0] += o.grad[0];
                  });
}

// Entry `index` of a flat array, as a scalar.
inline Value pick(Graph& g, const Value& x, std::size_t index) {
  if (index >= x.size())
    throw ShapeError("pick: index " + std::to_string(index) + " outside " + x.shape().str());
  return g.record({1, 1}, {x.data()[index]}, {x}, "pick",
                  [index](Node& o) { o.inputs[0]->grad[index] += o.grad[0]; });
}

// ------------------------------------------------------------ restructuring

// Column j of a matrix as a column vector (embedding lookup W_e w_t).
inline Value column(Graph& g, const Value& m, std::size_t j) {
  if (j >= m.cols())
    throw ShapeError("column: index " + std::to_string(j) + " outside " + m.shape().str());
  const std::size_t r = m.rows(), c = m.cols();
  std::vector<double> out(r);
  for (std::size_t i = 0; i < r; ++i) out[i] = m.data()[i * c + j];
  return g.record({r, 1}, std::move(out), {m}, "column", [r, c, j](Node& o) {
    Node& nm = *o.inputs[0];
    for (std::size_t i = 0; i < r; ++i) nm.grad[i * c + j] += o.grad[i];
  });
}

// Column vectors side by side: T vectors of length d -> d x T matrix.
inline Value hstack(Graph& g, std::span<const Value> cols) {
  if (cols.empty()) throw ContractError("hstack: no columns");
  const std::size_t d = cols[0].rows(), t = cols.size();
  for (const auto& c : cols)
    if (c.shape() != Shape{d, 1})
      throw ShapeError("hstack: expected column " + Shape{d, 1}.str() + ", got " +
                       c.shape().str());
  std::vector<double> out(d * t);
  for (std::size_t j = 0; j < t; ++j)
    for (std::size_t i = 0; i < d; ++i) out[i * t + j] = cols[j].data()[i];
  return g.record({d, t}, std::move(out), std::vector<Value>(cols.begin(), cols.end()), "hstack",
                  [d, t](Node& o) {
                    for (std::size_t j = 0; j < t; ++j)
                      for (std::size_t i = 0; i < d; ++i)
                        o.inputs[j]->grad[i] += o.grad[i * t + j];
                  });
}

// Concatenation of column vectors in argument order.
inline Value concat(Graph& g, std::span<const Value> parts) {
  if (parts.empty()) throw ContractError("concat: no parts");
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (!p.shape().is_vector()) throw ShapeError("concat: part is not a vector, " + p.shape().str());
    total += p.size();
  }
  std::vector<double> out;
  out.reserve(total);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return g.record({total, 1}, std::move(out), std::vector<Value>(parts.begin(), parts.end()),
                  "concat", [](Node& o) {
                    std::size_t off = 0;
                    for (auto& in : o.inputs) {
                      for (std::size_t i = 0; i < in->grad.size(); ++i) in->grad[i] += o.grad[off + i];
                      off += in->grad.size();
                    }
                  });
}

inline Value concat(Graph& g, std::initializer_list<Value> parts) {
  return concat(g, std::span<const Value>(parts.begin(), parts.size()));
}

// Softmax over a 1 x T row, stabilised by subtracting the max.
inline Value softmax_rowvec(Graph& g, const Value& x) {
  if (x.rows() != 1 || x.cols() == 0)
    throw ShapeError("softmax_rowvec: expected a non-empty row vector, got " + x.shape().str());
  const auto in = x.data();
  const double mx = *std::max_element(in.begin(), in.end());
  std::vector<double> out(in.size());
  double z = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) z += (out[i] = std::exp(in[i] - mx));
  for (double& v : out) v /= z;
  return g.record(x.shape(), std::move(out), {x}, "softmax", [](Node& o) {
    // dx_i = y_i (dy_i - sum_j y_j dy_j)
    double dot = 0.0;
    for (std::size_t i = 0; i < o.data.size(); ++i) dot += o.data[i] * o.grad[i];
    for (std::size_t i = 0; i < o.data.size(); ++i)
      o.inputs[0]->grad[i] += o.data[i] * (o.grad[i] - dot);
  });
}

// ------------------------------------------------------------ grad checking

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;

  bool passed() const {
    return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
  }
  double max_rel_error() const {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, e.max_rel_error);
    return m;
  }
  std::vector<std::string> failures() const {
    std::vector<std::string> out;
    for (const auto& e : entries)
      if (!e.passed) out.push_back(e.name);
    return out;
  }
};

// Relative error with a floor on the denominator: central differences carry
// roughly |loss| * 1e-16 / eps of absolute rounding noise, so entries whose
// gradient is below the floor are effectively judged on absolute error.
inline double relative_error(double analytic, double numeric, double floor = 1e-5) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

// Compares backward() against central differences for every entry of every
// listed parameter. `build` must be deterministic and return a scalar loss.
inline GradCheckReport grad_check(const std::function<Value(Graph&)>& build,
                                  std::span<NamedParam> params, double eps, double tol) {
  if (!(eps > 0.0)) throw ContractError("grad_check: eps must be positive");
  GradCheckReport report;
  report.tolerance = tol;
  if (params.empty()) return report;

  for (auto& p : params) p.value.zero_grad();
  {
    Graph g;
    Value loss = build(g);
    if (!std::isfinite(loss.item())) throw NumericError("grad_check: non-finite loss");
    g.backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  for (auto& p : params) {
    analytic.emplace_back(p.value.grad().begin(), p.value.grad().end());
    p.value.zero_grad();
  }

  auto eval = [&]() {
    Graph g;
    return build(g).item();
  };

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    GradCheckEntry entry{p.name};
    auto data = p.value.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + eps;
      const double up = eval();
      data[i] = orig - eps;
      const double down = eval();
      data[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[pi][i];
      if (!std::isfinite(up) || !std::isfinite(down) || !std::isfinite(a))
        throw NumericError("grad_check: non-finite value for parameter '" + p.name + "' entry " +
                           std::to_string(i));
      const double err = relative_error(a, numeric);
      if (err > entry.max_rel_error) {
        entry.max_rel_error = err;
        entry.worst_index = i;
      }
    }
    entry.passed = entry.max_rel_error < tol;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace rrgru
