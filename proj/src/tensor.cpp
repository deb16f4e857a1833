#include "xview/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "xview/error.hpp"

namespace xview {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

namespace {

void require(bool ok, const char* what, const std::string& detail) {
  if (!ok) throw ShapeError(std::string(what) + ": " + detail);
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2)
    throw ShapeError(std::string(op) + ": expected rank-2 tensor, got " + shape_str(t.shape()));
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)),
      values_(std::make_shared<const std::vector<double>>(std::move(values))) {
  if (shape_numel(shape_) != values_->size())
    throw ShapeError("tensor: shape " + shape_str(shape_) + " does not hold " +
                     std::to_string(values_->size()) + " values");
}

Tensor Tensor::zeros(Shape shape) {
  std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(Shape shape, double value) {
  std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) throw ShapeError("at(r,c): tensor is not rank-2: " + shape_str(shape_));
  return (*values_)[row * shape_[1] + col];
}

double Tensor::value() const {
  if (size() != 1)
    throw ContractError("value(): tensor is not scalar, shape " + shape_str(shape_));
  return (*values_)[0];
}

// ---- graph ------------------------------------------------------------------

int Graph::push_node(std::size_t size) {
  nodes_.push_back(Node{size, {}, {}});
  return static_cast<int>(nodes_.size()) - 1;
}

void Graph::set_backprop(int id, std::function<void(Graph&, const std::vector<double>&)> fn) {
  nodes_[static_cast<std::size_t>(id)].backprop = std::move(fn);
}

Tensor Graph::make(Shape shape, std::vector<double> values,
                   std::function<void(Graph&, const std::vector<double>&)> backprop) {
  auto holder = std::make_shared<const std::vector<double>>(std::move(values));
  int id = push_node(holder->size());
  if (backprop) set_backprop(id, std::move(backprop));
  return Tensor(std::move(shape), std::move(holder), id);
}

Tensor Graph::leaf(Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != values.size())
    throw ShapeError("leaf: shape " + shape_str(shape) + " does not hold " +
                     std::to_string(values.size()) + " values");
  return make(std::move(shape), std::move(values), {});
}

Tensor Graph::leaf_keyed(const void* key, const Shape& shape, const std::vector<double>& values) {
  auto it = keyed_.find(key);
  if (it != keyed_.end()) {
    const Node& node = nodes_[static_cast<std::size_t>(it->second)];
    if (node.size != values.size())
      throw ShapeError("leaf_keyed: key re-entered with different size");
    return Tensor(shape, std::make_shared<const std::vector<double>>(values), it->second);
  }
  Tensor t = leaf(shape, values);
  keyed_[key] = t.node();
  return t;
}

// ---- binary / unary ops -----------------------------------------------------

Tensor Graph::matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  require(a.dim(1) == b.dim(0), "matmul: inner dimensions disagree",
          shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  vals::matmul(a.values().data(), b.values().data(), out.data(), m, k, n);

  int pa = a.node(), pb = b.node();
  auto av = a.values_, bv = b.values_;
  return make({m, n}, std::move(out), [=](Graph& g, const std::vector<double>& go) {
    if (pa >= 0) {
      std::vector<double>& ga = g.grad_buf(pa);
      // dA += dOut * B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double gij = go[i * n + j];
          if (gij == 0.0) continue;
          for (std::size_t kk = 0; kk < k; ++kk) ga[i * k + kk] += gij * (*bv)[kk * n + j];
        }
    }
    if (pb >= 0) {
      std::vector<double>& gb = g.grad_buf(pb);
      // dB += A^T * dOut
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t kk = 0; kk < k; ++kk) {
          const double aik = (*av)[i * k + kk];
          if (aik == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) gb[kk * n + j] += aik * go[i * n + j];
        }
    }
  });
}

Tensor Graph::add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string("add: operand shapes differ, ") + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  const std::size_t n = a.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.values()[i] + b.values()[i];
  int pa = a.node(), pb = b.node();
  return make(a.shape(), std::move(out), [pa, pb, n](Graph& g, const std::vector<double>& go) {
    if (pa >= 0) {
      auto& ga = g.grad_buf(pa);
      for (std::size_t i = 0; i < n; ++i) ga[i] += go[i];
    }
    if (pb >= 0) {
      auto& gb = g.grad_buf(pb);
      for (std::size_t i = 0; i < n; ++i) gb[i] += go[i];
    }
  });
}

Tensor Graph::sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string("sub: operand shapes differ, ") + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  const std::size_t n = a.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.values()[i] - b.values()[i];
  int pa = a.node(), pb = b.node();
  return make(a.shape(), std::move(out), [pa, pb, n](Graph& g, const std::vector<double>& go) {
    if (pa >= 0) {
      auto& ga = g.grad_buf(pa);
      for (std::size_t i = 0; i < n; ++i) ga[i] += go[i];
    }
    if (pb >= 0) {
      auto& gb = g.grad_buf(pb);
      for (std::size_t i = 0; i < n; ++i) gb[i] -= go[i];
    }
  });
}

Tensor Graph::mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string("mul: operand shapes differ, ") + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  const std::size_t n = a.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.values()[i] * b.values()[i];
  int pa = a.node(), pb = b.node();
  auto av = a.values_, bv = b.values_;
  return make(a.shape(), std::move(out), [=](Graph& g, const std::vector<double>& go) {
    if (pa >= 0) {
      auto& ga = g.grad_buf(pa);
      for (std::size_t i = 0; i < n; ++i) ga[i] += go[i] * (*bv)[i];
    }
    if (pb >= 0) {
      auto& gb = g.grad_buf(pb);
      for (std::size_t i = 0; i < n; ++i) gb[i] += go[i] * (*av)[i];
    }
  });
}

Tensor Graph::add_rowwise(const Tensor& m, const Tensor& row) {
  require_rank2(m, "add_rowwise");
  const std::size_t r = m.dim(0), c = m.dim(1);
  if (row.size() != c)
    throw ShapeError("add_rowwise: row " + shape_str(row.shape()) + " does not match matrix " +
                     shape_str(m.shape()));
  std::vector<double> out(m.values());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += row.values()[j];
  int pm = m.node(), pr = row.node();
  return make(m.shape(), std::move(out), [=](Graph& g, const std::vector<double>& go) {
    if (pm >= 0) {
      auto& gm = g.grad_buf(pm);
      for (std::size_t i = 0; i < r * c; ++i) gm[i] += go[i];
    }
    if (pr >= 0) {
      auto& gr = g.grad_buf(pr);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gr[j] += go[i * c + j];
    }
  });
}

Tensor Graph::unary_pointwise(const Tensor& t, const char*,
                              const std::function<double(double)>& f,
                              const std::function<double(double, double)>& dfdx) {
  const std::size_t n = t.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(t.values()[i]);
  int p = t.node();
  auto xv = t.values_;
  auto yv = std::make_shared<const std::vector<double>>(out);
  return make(t.shape(), std::move(out), [=](Graph& g, const std::vector<double>& go) {
    if (p < 0) return;
    auto& gp = g.grad_buf(p);
    for (std::size_t i = 0; i < n; ++i) gp[i] += go[i] * dfdx((*xv)[i], (*yv)[i]);
  });
}

Tensor Graph::relu(const Tensor& t) {
  return unary_pointwise(
      t, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor Graph::tanh(const Tensor& t) {
  return unary_pointwise(
      t, "tanh", [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor Graph::sigmoid(const Tensor& t) {
  return unary_pointwise(
      t, "sigmoid",
      [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor Graph::exp(const Tensor& t) {
  return unary_pointwise(
      t, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor Graph::log(const Tensor& t) {
  for (double v : t.values())
    if (!(v > 0.0)) throw ValueError("log: input " + std::to_string(v) + " outside domain (0, inf)");
  return unary_pointwise(
      t, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor Graph::square(const Tensor& t) {
  return unary_pointwise(
      t, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor Graph::clamp(const Tensor& t, double lo, double hi) {
  if (!(lo < hi)) throw ValueError("clamp: lo must be < hi");
  return unary_pointwise(
      t, "clamp", [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor Graph::scale(const Tensor& t, double c) {
  const std::size_t n = t.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = t.values()[i] * c;
  int p = t.node();
  return make(t.shape(), std::move(out), [p, c, n](Graph& g, const std::vector<double>& go) {
    if (p < 0) return;
    auto& gp = g.grad_buf(p);
    for (std::size_t i = 0; i < n; ++i) gp[i] += go[i] * c;
  });
}

Tensor Graph::add_const(const Tensor& t, double c) {
  const std::size_t n = t.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = t.values()[i] + c;
  int p = t.node();
  return make(t.shape(), std::move(out), [p, n](Graph& g, const std::vector<double>& go) {
    if (p < 0) return;
    auto& gp = g.grad_buf(p);
    for (std::size_t i = 0; i < n; ++i) gp[i] += go[i];
  });
}

Tensor Graph::sum(const Tensor& t) {
  double acc = 0.0;
  for (double v : t.values()) acc += v;
  int p = t.node();
  const std::size_t n = t.size();
  return make({1}, {acc}, [p, n](Graph& g, const std::vector<double>& go) {
    if (p < 0) return;
    auto& gp = g.grad_buf(p);
    for (std::size_t i = 0; i < n; ++i) gp[i] += go[0];
  });
}

Tensor Graph::mean_all(const Tensor& t) { return scale(sum(t), 1.0 / static_cast<double>(t.size())); }

Tensor Graph::log_softmax(const Tensor& t) {
  std::size_t rows_n, cols_n;
  if (t.rank() == 2) {
    rows_n = t.dim(0);
    cols_n = t.dim(1);
  } else if (t.rank() == 1) {
    rows_n = 1;
    cols_n = t.dim(0);
  } else {
    throw ShapeError("log_softmax: expected rank-1 or rank-2, got " + shape_str(t.shape()));
  }
  if (cols_n == 0) throw ShapeError("log_softmax: empty last dimension");
  std::vector<double> out = vals::log_softmax_rows(t.values(), rows_n, cols_n);
  int p = t.node();
  auto yv = std::make_shared<const std::vector<double>>(out);
  return make(t.shape(), std::move(out),
              [p, rows_n, cols_n, yv](Graph& g, const std::vector<double>& go) {
                if (p < 0) return;
                auto& gp = g.grad_buf(p);
                for (std::size_t r = 0; r < rows_n; ++r) {
                  double gsum = 0.0;
                  for (std::size_t c = 0; c < cols_n; ++c) gsum += go[r * cols_n + c];
                  for (std::size_t c = 0; c < cols_n; ++c) {
                    const std::size_t i = r * cols_n + c;
                    gp[i] += go[i] - std::exp((*yv)[i]) * gsum;
                  }
                }
              });
}

Tensor Graph::rows(const Tensor& t, std::size_t start, std::size_t count) {
  require_rank2(t, "rows");
  const std::size_t r = t.dim(0), c = t.dim(1);
  if (start + count > r)
    throw ShapeError("rows: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                     ") out of bounds for " + shape_str(t.shape()));
  std::vector<double> out(t.values().begin() + static_cast<std::ptrdiff_t>(start * c),
                          t.values().begin() + static_cast<std::ptrdiff_t>((start + count) * c));
  int p = t.node();
  return make({count, c}, std::move(out),
              [p, start, count, c](Graph& g, const std::vector<double>& go) {
                if (p < 0) return;
                auto& gp = g.grad_buf(p);
                for (std::size_t i = 0; i < count * c; ++i) gp[start * c + i] += go[i];
              });
}

Tensor Graph::slice_cols(const Tensor& t, std::size_t start, std::size_t count) {
  require_rank2(t, "slice_cols");
  const std::size_t r = t.dim(0), c = t.dim(1);
  if (start + count > c)
    throw ShapeError("slice_cols: [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of bounds for " +
                     shape_str(t.shape()));
  std::vector<double> out(r * count);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = t.values()[i * c + start + j];
  int p = t.node();
  return make({r, count}, std::move(out),
              [p, r, c, start, count](Graph& g, const std::vector<double>& go) {
                if (p < 0) return;
                auto& gp = g.grad_buf(p);
                for (std::size_t i = 0; i < r; ++i)
                  for (std::size_t j = 0; j < count; ++j)
                    gp[i * c + start + j] += go[i * count + j];
              });
}

Tensor Graph::concat_cols(const Tensor& a, const Tensor& b) {
  require_rank2(a, "concat_cols");
  require_rank2(b, "concat_cols");
  if (a.dim(0) != b.dim(0))
    throw ShapeError("concat_cols: row counts differ, " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  const std::size_t r = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  std::vector<double> out(r * (ca + cb));
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < ca; ++j) out[i * (ca + cb) + j] = a.values()[i * ca + j];
    for (std::size_t j = 0; j < cb; ++j) out[i * (ca + cb) + ca + j] = b.values()[i * cb + j];
  }
  int pa = a.node(), pb = b.node();
  return make({r, ca + cb}, std::move(out),
              [pa, pb, r, ca, cb](Graph& g, const std::vector<double>& go) {
                const std::size_t c = ca + cb;
                if (pa >= 0) {
                  auto& ga = g.grad_buf(pa);
                  for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < ca; ++j) ga[i * ca + j] += go[i * c + j];
                }
                if (pb >= 0) {
                  auto& gb = g.grad_buf(pb);
                  for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < cb; ++j) gb[i * cb + j] += go[i * c + ca + j];
                }
              });
}

Tensor Graph::concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  require_rank2(parts[0], "concat_rows");
  const std::size_t c = parts[0].dim(1);
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    require_rank2(p, "concat_rows");
    if (p.dim(1) != c)
      throw ShapeError("concat_rows: column counts differ, " + shape_str(parts[0].shape()) +
                       " vs " + shape_str(p.shape()));
    total += p.dim(0);
  }
  std::vector<double> out;
  out.reserve(total * c);
  struct Piece {
    int node;
    std::size_t offset;  // flat offset into output
    std::size_t count;   // flat element count
  };
  std::vector<Piece> pieces;
  pieces.reserve(parts.size());
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    out.insert(out.end(), p.values().begin(), p.values().end());
    pieces.push_back({p.node(), off, p.size()});
    off += p.size();
  }
  return make({total, c}, std::move(out),
              [pieces = std::move(pieces)](Graph& g, const std::vector<double>& go) {
                for (const auto& pc : pieces) {
                  if (pc.node < 0) continue;
                  auto& gp = g.grad_buf(pc.node);
                  for (std::size_t i = 0; i < pc.count; ++i) gp[i] += go[pc.offset + i];
                }
              });
}

Tensor Graph::dropout(const Tensor& t, double rate, Rng rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw ValueError("dropout: rate " + std::to_string(rate) + " outside [0, 1)");
  if (!training || rate == 0.0) {
    // Evaluation mode is an exact identity (inverted dropout).
    if (!t.in_graph()) return t;
    const std::size_t n = t.size();
    int p = t.node();
    return make(t.shape(), t.values(), [p, n](Graph& g, const std::vector<double>& go) {
      if (p < 0) return;
      auto& gp = g.grad_buf(p);
      for (std::size_t i = 0; i < n; ++i) gp[i] += go[i];
    });
  }
  const std::size_t n = t.size();
  const double keep = 1.0 - rate;
  auto mask = std::make_shared<std::vector<double>>(n);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    (*mask)[i] = rng.uniform() < rate ? 0.0 : 1.0 / keep;
    out[i] = t.values()[i] * (*mask)[i];
  }
  int p = t.node();
  return make(t.shape(), std::move(out), [p, n, mask](Graph& g, const std::vector<double>& go) {
    if (p < 0) return;
    auto& gp = g.grad_buf(p);
    for (std::size_t i = 0; i < n; ++i) gp[i] += go[i] * (*mask)[i];
  });
}

Tensor Graph::custom(Shape out_shape, std::vector<double> out_values, std::vector<Tensor> inputs,
                     CustomBackward backward) {
  if (shape_numel(out_shape) != out_values.size())
    throw ShapeError("custom: shape " + shape_str(out_shape) + " does not hold " +
                     std::to_string(out_values.size()) + " values");
  std::vector<int> parents;
  parents.reserve(inputs.size());
  for (const Tensor& in : inputs) parents.push_back(in.node());
  return make(std::move(out_shape), std::move(out_values),
              [parents = std::move(parents), backward = std::move(backward)](
                  Graph& g, const std::vector<double>& go) {
                std::vector<std::vector<double>*> sinks(parents.size(), nullptr);
                for (std::size_t i = 0; i < parents.size(); ++i)
                  if (parents[i] >= 0) sinks[i] = &g.grad_buf(parents[i]);
                backward(go, sinks);
              });
}

void Graph::backward(const Tensor& loss) {
  if (loss.size() != 1)
    throw ContractError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  for (Node& node : nodes_) node.grad.assign(node.size, 0.0);
  if (!loss.in_graph()) return;  // constant loss: every gradient is zero
  const int start = loss.node();
  nodes_[static_cast<std::size_t>(start)].grad[0] = 1.0;
  for (int id = start; id >= 0; --id) {
    Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.backprop) node.backprop(*this, node.grad);
  }
}

const std::vector<double>& Graph::grad(const Tensor& t) const {
  if (!t.in_graph()) throw ContractError("grad: tensor is not recorded on a graph");
  return nodes_[static_cast<std::size_t>(t.node())].grad;
}

const std::vector<double>* Graph::grad_for_key(const void* key) const {
  auto it = keyed_.find(key);
  if (it == keyed_.end()) return nullptr;
  return &nodes_[static_cast<std::size_t>(it->second)].grad;
}

// ---- value-level helpers ------------------------------------------------------

namespace vals {

double logsumexp2(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double logsumexp3(double a, double b, double c) { return logsumexp2(logsumexp2(a, b), c); }

void matmul(const double* a, const double* b, double* out, std::size_t m, std::size_t k,
            std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out + i * n;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = a[i * k + kk];
      if (aik == 0.0) continue;
      const double* brow = b + kk * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aik * brow[j];
    }
  }
}

std::vector<double> log_softmax_rows(const std::vector<double>& x, std::size_t rows,
                                     std::size_t cols) {
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * cols;
    double* o = out.data() + r * cols;
    double mx = in[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, in[c]);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += std::exp(in[c] - mx);
    const double lz = mx + std::log(z);
    for (std::size_t c = 0; c < cols; ++c) o[c] = in[c] - lz;
  }
  return out;
}

}  // namespace vals

}  // namespace xview
