#pragma once

// Minimal dense tensor with reverse-mode differentiation.
//
// A Tensor is a cheap handle to a shared node. Operations on tensors that
// require gradients record their inputs and a backward closure in the result
// node; calling backward() on a scalar result walks that graph in reverse
// topological order. Leaves (tensors built from data, not by an operation)
// accumulate gradients across backward() calls until zero_grad() is called.
// Interior gradients are recomputed from zero on every backward() call.
//
// The graph stays alive as long as some handle to its root does. Call
// release_graph() on a loss to drop the recorded edges explicitly before
// building the next one from the same leaves.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "l2r/random.hpp"

namespace l2r::tensor {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

class Tensor {
 public:
  struct Node;

  /// Scalar zero without gradient.
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor randn(Shape shape, CounterRng& rng, double stddev = 1.0,
                      bool requires_grad = false);

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Writable view of a leaf's values. Throws ContractError on an interior node.
  std::span<double> mutable_data();
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  /// Leaves only.
  void set_requires_grad(bool flag);
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  /// Reverse pass from a scalar. Throws ContractError for non-scalar results or
  /// results that do not depend on any tensor requiring a gradient.
  void backward() const;

  /// New leaf holding a copy of the values.
  Tensor detach() const;

  /// Drops every recorded edge reachable from this tensor.
  void release_graph();

  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

struct Tensor::Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  /// Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward_fn;
};

// Elementwise, equal shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sigmoid(const Tensor& x);
/// Identity forward; multiplies the incoming gradient by `factor` on the way back.
Tensor scale_gradient(const Tensor& x, double factor);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double c, const Tensor& x) { return scale(x, c); }

// Reductions. The axis overloads remove the reduced axis.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor sum(const Tensor& x, std::size_t axis);
Tensor mean(const Tensor& x, std::size_t axis);

/// [m x k] x [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// Max-subtracted softmax along one axis.
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor log_softmax(const Tensor& x, std::size_t axis);

/// Zero mean, unit (biased) variance per slice along `axis`; no affine part.
Tensor layer_norm(const Tensor& x, std::size_t axis, double eps = 1e-5);

Tensor transpose_last2(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

/// Right-aligned broadcast: each input dim must equal the target dim or be 1.
Tensor broadcast_to(const Tensor& x, const Shape& shape);

Tensor concat(std::span<const Tensor> xs, std::size_t axis);
inline Tensor concat(std::initializer_list<Tensor> xs, std::size_t axis) {
  return concat(std::span<const Tensor>(xs.begin(), xs.size()), axis);
}
/// Concatenates along a new leading axis; all inputs must share one shape.
Tensor stack(std::span<const Tensor> xs);

Tensor index_select(const Tensor& x, std::size_t axis, std::span<const std::size_t> indices);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);

/// Main diagonal of a square matrix.
Tensor diagonal(const Tensor& x);

/// x / (||x|| + eps) along the last axis.
Tensor l2_normalize(const Tensor& x, double eps = 1e-12);

/// Cosine similarity of two equal-length tensors treated as flat vectors,
/// a.b / ((|a| + eps)(|b| + eps)). A zero vector scores 0 against everything.
Tensor cosine_similarity(const Tensor& a, const Tensor& b, double eps = 1e-12);
double cosine_sim(std::span<const double> a, std::span<const double> b, double eps = 1e-12);
double cosine_sim(const Tensor& a, const Tensor& b, double eps = 1e-12);

// Gradient verification ------------------------------------------------------

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_leaf = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares reverse-mode gradients of `loss()` with respect to `leaves` against
/// central differences. `loss` must rebuild its graph from the leaves on every
/// call; the leaves' values are perturbed in place and restored.
/// Error per coordinate: |analytic - numeric| / (|analytic| + |numeric| + eps).
GradCheckResult check_gradients(const std::function<Tensor()>& loss, std::span<Tensor> leaves,
                                double h = 1e-5, double eps = 1e-6);

/// Single-input form: max relative error of d f(x) / dx.
double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                         double h = 1e-5, double eps = 1e-6);

}  // namespace l2r::tensor
