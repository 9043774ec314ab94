#include "l2r/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "l2r/error.hpp"

namespace l2r::tensor {

namespace {

using NodePtr = std::shared_ptr<Tensor::Node>;

std::vector<double>& ensure_grad(Tensor::Node& n) {
  if (n.grad.size() != n.data.size()) n.grad.assign(n.data.size(), 0.0);
  return n.grad;
}

// Builds a result node. Edges are recorded only when some input needs a gradient.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<NodePtr> parents,
                   std::function<void(Tensor::Node&)> backward_fn) {
  auto node = std::make_shared<Tensor::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  const bool needs =
      std::any_of(parents.begin(), parents.end(), [](const NodePtr& p) { return p->requires_grad; });
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

void require_axis(const Tensor& x, std::size_t axis, const char* op) {
  if (axis >= x.rank()) {
    throw RankError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                    to_string(x.shape()));
  }
}

// (outer, dim, inner) decomposition of a shape around one axis.
struct AxisSplit {
  std::size_t outer = 1, dim = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.dim = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  NodePtr px = x.node();
  return make_result(x.shape(), std::move(out), {px}, [px, deriv](Tensor::Node& self) {
    auto& g = ensure_grad(*px);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv(px->data[i], self.data[i]);
  });
}

}  // namespace

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

// Tensor ---------------------------------------------------------------------

Tensor::Tensor() : Tensor(Shape{}, {0.0}) {}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : node_(std::make_shared<Node>()) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + to_string(shape));
  }
  if (tensor::numel(shape) != data.size()) {
    throw DimensionError("tensor of shape " + to_string(shape) + " needs " +
                         std::to_string(tensor::numel(shape)) + " values, got " +
                         std::to_string(data.size()));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = tensor::numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor(Shape{}, {value}, requires_grad); }

Tensor Tensor::randn(Shape shape, CounterRng& rng, double stddev, bool requires_grad) {
  std::vector<double> v(tensor::numel(shape));
  for (auto& e : v) e = stddev * rng.normal();
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::size(std::size_t axis) const {
  if (axis >= rank()) throw RankError("axis " + std::to_string(axis) + " out of range for " + to_string(shape()));
  return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->data.size(); }

std::span<const double> Tensor::data() const { return node_->data; }

std::span<double> Tensor::mutable_data() {
  if (!is_leaf()) throw ContractError("mutable_data() is only available on leaf tensors");
  return node_->data;
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() needs a single-element tensor, shape " + to_string(shape()));
  return node_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  if (index.size() != rank()) throw RankError("index rank does not match tensor rank");
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= node_->shape[axis]) throw DimensionError("index out of range");
    flat = flat * node_->shape[axis] + i;
    ++axis;
  }
  return node_->data[flat];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  if (!is_leaf()) throw ContractError("set_requires_grad() is only available on leaf tensors");
  node_->requires_grad = flag;
}

bool Tensor::is_leaf() const { return !node_->backward_fn; }

bool Tensor::has_grad() const { return node_->grad.size() == node_->data.size(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw ContractError("tensor has no gradient");
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

void Tensor::backward() const {
  if (numel() != 1) throw ContractError("backward() needs a scalar loss, got shape " + to_string(shape()));
  if (!requires_grad()) throw ContractError("backward() on a loss with no gradient-carrying inputs");

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (n->backward_fn) n->grad.assign(n->data.size(), 0.0);
  }
  ensure_grad(*node_)[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->data); }

void Tensor::release_graph() {
  std::vector<NodePtr> pending{node_};
  while (!pending.empty()) {
    NodePtr n = std::move(pending.back());
    pending.pop_back();
    for (auto& p : n->parents) pending.push_back(std::move(p));
    n->parents.clear();
    n->backward_fn = nullptr;
  }
}

// Elementwise ------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  NodePtr pa = a.node(), pb = b.node();
  return make_result(a.shape(), std::move(out), {pa, pb}, [pa, pb](Tensor::Node& self) {
    if (pa->requires_grad) {
      auto& g = ensure_grad(*pa);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      auto& g = ensure_grad(*pb);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  NodePtr pa = a.node(), pb = b.node();
  return make_result(a.shape(), std::move(out), {pa, pb}, [pa, pb](Tensor::Node& self) {
    if (pa->requires_grad) {
      auto& g = ensure_grad(*pa);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      auto& g = ensure_grad(*pb);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  NodePtr pa = a.node(), pb = b.node();
  return make_result(a.shape(), std::move(out), {pa, pb}, [pa, pb](Tensor::Node& self) {
    if (pa->requires_grad) {
      auto& g = ensure_grad(*pa);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb->data[i];
    }
    if (pb->requires_grad) {
      auto& g = ensure_grad(*pb);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa->data[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(x, [factor](double v) { return v * factor; },
               [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary(x, [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor exp(const Tensor& x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor scale_gradient(const Tensor& x, double factor) {
  return unary(x, [](double v) { return v; }, [factor](double, double) { return factor; });
}

// Reductions -------------------------------------------------------------------

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  NodePtr px = x.node();
  return make_result(Shape{}, {s}, {px}, [px](Tensor::Node& self) {
    auto& g = ensure_grad(*px);
    for (auto& e : g) e += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor sum(const Tensor& x, std::size_t axis) {
  require_axis(x, axis, "sum");
  const auto sp = split_axis(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<double> out(sp.outer * sp.inner, 0.0);
  const auto in = x.data();
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t d = 0; d < sp.dim; ++d)
      for (std::size_t i = 0; i < sp.inner; ++i) out[o * sp.inner + i] += in[(o * sp.dim + d) * sp.inner + i];
  NodePtr px = x.node();
  return make_result(std::move(out_shape), std::move(out), {px}, [px, sp](Tensor::Node& self) {
    auto& g = ensure_grad(*px);
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t d = 0; d < sp.dim; ++d)
        for (std::size_t i = 0; i < sp.inner; ++i) g[(o * sp.dim + d) * sp.inner + i] += self.grad[o * sp.inner + i];
  });
}

Tensor mean(const Tensor& x, std::size_t axis) {
  require_axis(x, axis, "mean");
  return scale(sum(x, axis), 1.0 / static_cast<double>(x.shape()[axis]));
}

// Linear algebra ---------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul: incompatible shapes " + to_string(a.shape()) + " and " +
                         to_string(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(m * n, 0.0);
  const auto A = a.data();
  const auto B = b.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += av * B[p * n + j];
    }
  NodePtr pa = a.node(), pb = b.node();
  return make_result(Shape{m, n}, std::move(out), {pa, pb}, [pa, pb, m, k, n](Tensor::Node& self) {
    const auto& G = self.grad;
    if (pa->requires_grad) {
      auto& ga = ensure_grad(*pa);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += G[i * n + j] * pb->data[p * n + j];
          ga[i * k + p] += s;
        }
    }
    if (pb->requires_grad) {
      auto& gb = ensure_grad(*pb);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = pa->data[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * G[i * n + j];
        }
    }
  });
}

// Normalizations -----------------------------------------------------------------

Tensor softmax(const Tensor& x, std::size_t axis) {
  require_axis(x, axis, "softmax");
  const auto sp = split_axis(x.shape(), axis);
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t i = 0; i < sp.inner; ++i) {
      auto idx = [&](std::size_t d) { return (o * sp.dim + d) * sp.inner + i; };
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t d = 0; d < sp.dim; ++d) mx = std::max(mx, in[idx(d)]);
      double z = 0.0;
      for (std::size_t d = 0; d < sp.dim; ++d) z += (out[idx(d)] = std::exp(in[idx(d)] - mx));
      for (std::size_t d = 0; d < sp.dim; ++d) out[idx(d)] /= z;
    }
  NodePtr px = x.node();
  return make_result(x.shape(), std::move(out), {px}, [px, sp](Tensor::Node& self) {
    auto& g = ensure_grad(*px);
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t i = 0; i < sp.inner; ++i) {
        auto idx = [&](std::size_t d) { return (o * sp.dim + d) * sp.inner + i; };
        double dot = 0.0;
        for (std::size_t d = 0; d < sp.dim; ++d) dot += self.grad[idx(d)] * self.data[idx(d)];
        for (std::size_t d = 0; d < sp.dim; ++d) g[idx(d)] += self.data[idx(d)] * (self.grad[idx(d)] - dot);
      }
  });
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  require_axis(x, axis, "log_softmax");
  const auto sp = split_axis(x.shape(), axis);
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t i = 0; i < sp.inner; ++i) {
      auto idx = [&](std::size_t d) { return (o * sp.dim + d) * sp.inner + i; };
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t d = 0; d < sp.dim; ++d) mx = std::max(mx, in[idx(d)]);
      double z = 0.0;
      for (std::size_t d = 0; d < sp.dim; ++d) z += std::exp(in[idx(d)] - mx);
      const double lse = mx + std::log(z);
      for (std::size_t d = 0; d < sp.dim; ++d) out[idx(d)] = in[idx(d)] - lse;
    }
  NodePtr px = x.node();
  return make_result(x.shape(), std::move(out), {px}, [px, sp](Tensor::Node& self) {
    auto& g = ensure_grad(*px);
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t i = 0; i < sp.inner; ++i) {
        auto idx = [&](std::size_t d) { return (o * sp.dim + d) * sp.inner + i; };
        double gs = 0.0;
        for (std::size_t d = 0; d < sp.dim; ++d) gs += self.grad[idx(d)];
        for (std::size_t d = 0; d < sp.dim; ++d)
          g[idx(d)] += self.grad[idx(d)] - std::exp(self.data[idx(d)]) * gs;
      }
  });
}

Tensor layer_norm(const Tensor& x, std::size_t axis, double eps) {
  require_axis(x, axis, "layer_norm");
  const auto sp = split_axis(x.shape(), axis);
  const auto in = x.data();
  std::vector<double> out(in.size());
  std::vector<double> inv_std(sp.outer * sp.inner);
  const double n = static_cast<double>(sp.dim);
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t i = 0; i < sp.inner; ++i) {
      auto idx = [&](std::size_t d) { return (o * sp.dim + d) * sp.inner + i; };
      double mu = 0.0;
      for (std::size_t d = 0; d < sp.dim; ++d) mu += in[idx(d)];
      mu /= n;
      double var = 0.0;
      for (std::size_t d = 0; d < sp.dim; ++d) var += (in[idx(d)] - mu) * (in[idx(d)] - mu);
      var /= n;
      const double r = 1.0 / std::sqrt(var + eps);
      inv_std[o * sp.inner + i] = r;
      for (std::size_t d = 0; d < sp.dim; ++d) out[idx(d)] = (in[idx(d)] - mu) * r;
    }
  NodePtr px = x.node();
  return make_result(x.shape(), std::move(out), {px}, [px, sp, n, inv_std = std::move(inv_std)](Tensor::Node& self) {
    auto& g = ensure_grad(*px);
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t i = 0; i < sp.inner; ++i) {
        auto idx = [&](std::size_t d) { return (o * sp.dim + d) * sp.inner + i; };
        double mg = 0.0, mgy = 0.0;
        for (std::size_t d = 0; d < sp.dim; ++d) {
          mg += self.grad[idx(d)];
          mgy += self.grad[idx(d)] * self.data[idx(d)];
        }
        mg /= n;
        mgy /= n;
        const double r = inv_std[o * sp.inner + i];
        for (std::size_t d = 0; d < sp.dim; ++d)
          g[idx(d)] += r * (self.grad[idx(d)] - mg - self.data[idx(d)] * mgy);
      }
  });
}

Tensor l2_normalize(const Tensor& x, double eps) {
  if (x.rank() == 0) throw RankError("l2_normalize needs rank >= 1");
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.numel() / d;
  const auto in = x.data();
  std::vector<double> out(in.size());
  std::vector<double> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += in[r * d + c] * in[r * d + c];
    norms[r] = std::sqrt(s);
    const double den = norms[r] + eps;
    for (std::size_t c = 0; c < d; ++c) out[r * d + c] = in[r * d + c] / den;
  }
  NodePtr px = x.node();
  return make_result(x.shape(), std::move(out), {px}, [px, d, rows, eps, norms = std::move(norms)](Tensor::Node& self) {
    auto& g = ensure_grad(*px);
    for (std::size_t r = 0; r < rows; ++r) {
      const double nrm = norms[r];
      const double den = nrm + eps;
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += self.grad[r * d + c] * px->data[r * d + c];
      // d(norm)/dx is undefined at 0; take the zero subgradient.
      const double k = nrm > 0.0 ? dot / (den * den * nrm) : 0.0;
      for (std::size_t c = 0; c < d; ++c) g[r * d + c] += self.grad[r * d + c] / den - px->data[r * d + c] * k;
    }
  });
}

Tensor cosine_similarity(const Tensor& a, const Tensor& b, double eps) {
  if (a.numel() != b.numel()) {
    throw DimensionError("cosine_similarity: length mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
  const Shape flat{a.numel()};
  return sum(mul(l2_normalize(reshape(a, flat), eps), l2_normalize(reshape(b, flat), eps)));
}

double cosine_sim(std::span<const double> a, std::span<const double> b, double eps) {
  if (a.size() != b.size()) {
    throw DimensionError("cosine_sim: length mismatch " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / ((std::sqrt(na) + eps) * (std::sqrt(nb) + eps));
}

double cosine_sim(const Tensor& a, const Tensor& b, double eps) { return cosine_sim(a.data(), b.data(), eps); }

// Shape manipulation ---------------------------------------------------------------

Tensor transpose_last2(const Tensor& x) {
  if (x.rank() < 2) throw RankError("transpose_last2 needs rank >= 2, got shape " + to_string(x.shape()));
  Shape s = x.shape();
  const std::size_t rows = s[s.size() - 2], cols = s.back();
  const std::size_t batch = x.numel() / (rows * cols);
  std::swap(s[s.size() - 2], s[s.size() - 1]);
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) out[b * rows * cols + c * rows + r] = in[b * rows * cols + r * cols + c];
  NodePtr px = x.node();
  return make_result(std::move(s), std::move(out), {px}, [px, batch, rows, cols](Tensor::Node& self) {
    auto& g = ensure_grad(*px);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
          g[b * rows * cols + r * cols + c] += self.grad[b * rows * cols + c * rows + r];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  NodePtr px = x.node();
  return make_result(std::move(shape), std::move(out), {px}, [px](Tensor::Node& self) {
    auto& g = ensure_grad(*px);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor broadcast_to(const Tensor& x, const Shape& shape) {
  const Shape& in = x.shape();
  if (in.size() > shape.size()) {
    throw DimensionError("broadcast_to: cannot broadcast " + to_string(in) + " to " + to_string(shape));
  }
  const std::size_t lead = shape.size() - in.size();
  // Input stride per output axis; 0 on broadcast axes.
  std::vector<std::size_t> stride(shape.size(), 0);
  std::size_t acc = 1;
  for (std::size_t k = in.size(); k-- > 0;) {
    const std::size_t ax = k + lead;
    if (in[k] == shape[ax]) {
      stride[ax] = acc;
    } else if (in[k] != 1) {
      throw DimensionError("broadcast_to: cannot broadcast " + to_string(in) + " to " + to_string(shape));
    }
    acc *= in[k];
  }
  const std::size_t n = numel(shape);
  std::vector<std::size_t> src(n);
  std::vector<std::size_t> counter(shape.size(), 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t s = 0;
    for (std::size_t ax = 0; ax < shape.size(); ++ax) s += counter[ax] * stride[ax];
    src[flat] = s;
    for (std::size_t ax = shape.size(); ax-- > 0;) {
      if (++counter[ax] < shape[ax]) break;
      counter[ax] = 0;
    }
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x.data()[src[i]];
  NodePtr px = x.node();
  return make_result(shape, std::move(out), {px}, [px, src = std::move(src)](Tensor::Node& self) {
    auto& g = ensure_grad(*px);
    for (std::size_t i = 0; i < src.size(); ++i) g[src[i]] += self.grad[i];
  });
}

Tensor concat(std::span<const Tensor> xs, std::size_t axis) {
  if (xs.empty()) throw ContractError("concat of an empty list");
  const Shape& first = xs[0].shape();
  require_axis(xs[0], axis, "concat");
  std::size_t total = 0;
  for (const auto& t : xs) {
    const Shape& s = t.shape();
    bool ok = s.size() == first.size();
    for (std::size_t a = 0; ok && a < s.size(); ++a) ok = (a == axis) || s[a] == first[a];
    if (!ok) {
      throw DimensionError("concat: off-axis mismatch " + to_string(first) + " vs " + to_string(s));
    }
    total += s[axis];
  }
  Shape out_shape = first;
  out_shape[axis] = total;
  const auto sp = split_axis(out_shape, axis);
  std::vector<double> out(numel(out_shape));
  std::vector<NodePtr> parents;
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& t : xs) {
    const std::size_t d = t.shape()[axis];
    const auto in = t.data();
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t k = 0; k < d; ++k)
        for (std::size_t i = 0; i < sp.inner; ++i)
          out[(o * total + off + k) * sp.inner + i] = in[(o * d + k) * sp.inner + i];
    parents.push_back(t.node());
    offsets.push_back(off);
    off += d;
  }
  auto ps = parents;
  return make_result(std::move(out_shape), std::move(out), std::move(parents),
                     [ps = std::move(ps), offsets = std::move(offsets), sp, total, axis](Tensor::Node& self) {
                       for (std::size_t t = 0; t < ps.size(); ++t) {
                         if (!ps[t]->requires_grad) continue;
                         auto& g = ensure_grad(*ps[t]);
                         const std::size_t d = ps[t]->shape[axis];
                         for (std::size_t o = 0; o < sp.outer; ++o)
                           for (std::size_t k = 0; k < d; ++k)
                             for (std::size_t i = 0; i < sp.inner; ++i)
                               g[(o * d + k) * sp.inner + i] += self.grad[(o * total + offsets[t] + k) * sp.inner + i];
                       }
                     });
}

Tensor stack(std::span<const Tensor> xs) {
  if (xs.empty()) throw ContractError("stack of an empty list");
  std::vector<Tensor> expanded;
  expanded.reserve(xs.size());
  for (const auto& t : xs) {
    if (t.shape() != xs[0].shape()) {
      throw DimensionError("stack: shape mismatch " + to_string(xs[0].shape()) + " vs " + to_string(t.shape()));
    }
    Shape s = t.shape();
    s.insert(s.begin(), 1);
    expanded.push_back(reshape(t, std::move(s)));
  }
  return concat(expanded, 0);
}

Tensor index_select(const Tensor& x, std::size_t axis, std::span<const std::size_t> indices) {
  require_axis(x, axis, "index_select");
  if (indices.empty()) throw ContractError("index_select with no indices");
  const auto sp = split_axis(x.shape(), axis);
  for (auto k : indices) {
    if (k >= sp.dim) {
      throw DimensionError("index_select: index " + std::to_string(k) + " out of range for axis of size " +
                           std::to_string(sp.dim));
    }
  }
  Shape out_shape = x.shape();
  out_shape[axis] = indices.size();
  const std::size_t m = indices.size();
  std::vector<double> out(sp.outer * m * sp.inner);
  const auto in = x.data();
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t k = 0; k < m; ++k)
      for (std::size_t i = 0; i < sp.inner; ++i)
        out[(o * m + k) * sp.inner + i] = in[(o * sp.dim + indices[k]) * sp.inner + i];
  NodePtr px = x.node();
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return make_result(std::move(out_shape), std::move(out), {px}, [px, sp, idx = std::move(idx)](Tensor::Node& self) {
    auto& g = ensure_grad(*px);
    const std::size_t m = idx.size();
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t k = 0; k < m; ++k)
        for (std::size_t i = 0; i < sp.inner; ++i)
          g[(o * sp.dim + idx[k]) * sp.inner + i] += self.grad[(o * m + k) * sp.inner + i];
  });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  require_axis(x, axis, "slice");
  if (length == 0 || start + length > x.shape()[axis]) {
    throw DimensionError("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") out of range for shape " + to_string(x.shape()));
  }
  std::vector<std::size_t> idx(length);
  std::iota(idx.begin(), idx.end(), start);
  return index_select(x, axis, idx);
}

Tensor diagonal(const Tensor& x) {
  if (x.rank() != 2 || x.shape()[0] != x.shape()[1]) {
    throw DimensionError("diagonal needs a square matrix, got " + to_string(x.shape()));
  }
  const std::size_t n = x.shape()[0];
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x.data()[i * n + i];
  NodePtr px = x.node();
  return make_result(Shape{n}, std::move(out), {px}, [px, n](Tensor::Node& self) {
    auto& g = ensure_grad(*px);
    for (std::size_t i = 0; i < n; ++i) g[i * n + i] += self.grad[i];
  });
}

// Gradient verification -------------------------------------------------------------

GradCheckResult check_gradients(const std::function<Tensor()>& loss, std::span<Tensor> leaves, double h,
                                double eps) {
  for (auto& leaf : leaves) {
    if (!leaf.is_leaf()) throw ContractError("check_gradients: inputs must be leaf tensors");
    leaf.set_requires_grad(true);
    leaf.zero_grad();
  }
  {
    Tensor l = loss();
    l.backward();
    l.release_graph();
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(leaves.size());
  for (auto& leaf : leaves) analytic.emplace_back(leaf.grad().begin(), leaf.grad().end());

  GradCheckResult result;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto values = leaves[li].mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double fp = loss().item();
      values[i] = saved - h;
      const double fm = loss().item();
      values[i] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[li][i];
      const double err = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + eps);
      if (!(err <= result.max_relative_error)) {
        result = {err, li, i, a, numeric};
      }
    }
  }
  for (auto& leaf : leaves) leaf.zero_grad();
  return result;
}

double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h, double eps) {
  Tensor leaf = x.detach();
  Tensor leaves[] = {leaf};
  return check_gradients([&] { return f(leaves[0]); }, leaves, h, eps).max_relative_error;
}

}  // namespace l2r::tensor
