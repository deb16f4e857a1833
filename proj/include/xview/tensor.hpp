// Dense 64-bit tensors with reverse-mode automatic differentiation.
//
// A Graph is a per-step tape: operations append nodes in topological order,
// backward() sweeps the tape once in reverse and accumulates adjoints. The
// tape is meant to be built, differentiated and discarded once per training
// step. Tensors are immutable values; copies share storage.

#ifndef XVIEW_TENSOR_HPP
#define XVIEW_TENSOR_HPP

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "xview/rng.hpp"

namespace xview {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

class Graph;

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);  // constant, not in any graph

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t size() const { return values_ ? values_->size() : 0; }

  const std::vector<double>& values() const { return *values_; }
  double at(std::size_t flat) const { return (*values_)[flat]; }
  double at(std::size_t row, std::size_t col) const;
  double value() const;  // scalar accessor; throws ContractError otherwise

  bool in_graph() const { return node_ >= 0; }
  int node() const { return node_; }

 private:
  friend class Graph;
  Tensor(Shape shape, std::shared_ptr<const std::vector<double>> values, int node)
      : shape_(std::move(shape)), values_(std::move(values)), node_(node) {}

  Shape shape_;
  std::shared_ptr<const std::vector<double>> values_;
  int node_ = -1;
};

// A recorded computation tape. Not copyable: node ids are only meaningful
// against the graph that issued them.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // ---- leaves -------------------------------------------------------------

  // Fresh differentiable leaf holding a copy of `values`.
  Tensor leaf(Shape shape, std::vector<double> values);

  // Leaf deduplicated by caller-supplied identity: repeated calls with the
  // same key return the same node, so gradients of shared parameters
  // accumulate in one place.
  Tensor leaf_keyed(const void* key, const Shape& shape, const std::vector<double>& values);

  bool has_key(const void* key) const { return keyed_.count(key) != 0; }

  // ---- ops ----------------------------------------------------------------

  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  // m: {r, c}; row: {c} or {1, c}, added to every row of m.
  Tensor add_rowwise(const Tensor& m, const Tensor& row);

  Tensor relu(const Tensor& t);
  Tensor tanh(const Tensor& t);
  Tensor sigmoid(const Tensor& t);
  Tensor exp(const Tensor& t);
  Tensor log(const Tensor& t);
  Tensor square(const Tensor& t);
  Tensor clamp(const Tensor& t, double lo, double hi);

  Tensor scale(const Tensor& t, double c);
  Tensor add_const(const Tensor& t, double c);
  Tensor neg(const Tensor& t) { return scale(t, -1.0); }

  Tensor sum(const Tensor& t);       // -> scalar {1}
  Tensor mean_all(const Tensor& t);  // -> scalar {1}

  // Row-normalized log softmax over the last dimension of a rank-2 tensor
  // (rank-1 treated as a single row). Shift-invariant by construction.
  Tensor log_softmax(const Tensor& t);

  // Contiguous row / column slices and concatenations (rank-2).
  Tensor rows(const Tensor& t, std::size_t start, std::size_t count);
  Tensor slice_cols(const Tensor& t, std::size_t start, std::size_t count);
  Tensor concat_cols(const Tensor& a, const Tensor& b);
  Tensor concat_rows(std::span<const Tensor> parts);

  // Inverted dropout: zero with probability `rate`, scale survivors by
  // 1/(1-rate) in training mode; identity in evaluation mode.
  Tensor dropout(const Tensor& t, double rate, Rng rng, bool training);

  // Escape hatch for fused operations with hand-written adjoints (CTC).
  // `backward` receives this node's accumulated output gradient plus one
  // writable gradient buffer per differentiable input (nullptr for inputs
  // that are graph constants).
  using CustomBackward =
      std::function<void(const std::vector<double>& out_grad,
                         const std::vector<std::vector<double>*>& input_grads)>;
  Tensor custom(Shape out_shape, std::vector<double> out_values, std::vector<Tensor> inputs,
                CustomBackward backward);

  // ---- differentiation ----------------------------------------------------

  // Reverse sweep from a scalar loss. Gradients of all reachable nodes are
  // (re)computed; previous gradients on this graph are discarded.
  void backward(const Tensor& loss);

  // Gradient buffer of a tensor recorded on this graph (valid after
  // backward). Constants have no gradient.
  const std::vector<double>& grad(const Tensor& t) const;

  // Gradient of a keyed leaf, or nullptr when the key never entered this
  // graph (caller treats that as a zero gradient).
  const std::vector<double>* grad_for_key(const void* key) const;

  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    std::size_t size = 0;
    std::vector<double> grad;  // sized lazily by backward()
    // Pulls this node's accumulated gradient into its parents. Empty for
    // leaves and constants.
    std::function<void(Graph&, const std::vector<double>&)> backprop;
  };

  int push_node(std::size_t size);
  void set_backprop(int id, std::function<void(Graph&, const std::vector<double>&)> fn);
  std::vector<double>& grad_buf(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }

  Tensor make(Shape shape, std::vector<double> values,
              std::function<void(Graph&, const std::vector<double>&)> backprop);
  Tensor unary_pointwise(const Tensor& t, const char* name,
                         const std::function<double(double)>& f,
                         const std::function<double(double, double)>& dfdx_from_x_and_y);

  std::vector<Node> nodes_;
  std::unordered_map<const void*, int> keyed_;
};

// Value-level helpers shared by graph ops and plain (non-recorded) forward
// passes.
namespace vals {

double logsumexp2(double a, double b);
double logsumexp3(double a, double b, double c);
void matmul(const double* a, const double* b, double* out, std::size_t m, std::size_t k,
            std::size_t n);
std::vector<double> log_softmax_rows(const std::vector<double>& x, std::size_t rows,
                                     std::size_t cols);

}  // namespace vals

}  // namespace xview

#endif  // XVIEW_TENSOR_HPP
