#include "l2r/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "l2r/error.hpp"

namespace l2r::spatial {

namespace {

struct Candidate {
  double d2;
  std::size_t index;
  bool operator<(const Candidate& o) const { return d2 < o.d2 || (d2 == o.d2 && index < o.index); }
};

}  // namespace

KdTree::KdTree(std::vector<Vec3> points, std::size_t leaf_size)
    : points_(std::move(points)), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
  for (std::size_t i = 0; i < points_.size(); ++i) {
    for (double c : points_[i]) {
      if (!std::isfinite(c)) throw DomainError("non-finite coordinate at point " + std::to_string(i));
    }
  }
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
    build(0, points_.size());
  }
}

KdTree KdTree::from_points(std::span<const Point> points, std::size_t leaf_size) {
  std::vector<Vec3> xyz;
  xyz.reserve(points.size());
  for (const auto& p : points) xyz.push_back(position(p));
  return KdTree(std::move(xyz), leaf_size);
}

std::size_t KdTree::build(std::size_t begin, std::size_t end) {
  const std::size_t id = nodes_.size();
  nodes_.push_back({begin, end, 0, 0, -1, 0.0});
  if (end - begin <= leaf_size_) return id;

  Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity()};
  Vec3 hi{-lo[0], -lo[1], -lo[2]};
  for (std::size_t i = begin; i < end; ++i) {
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], points_[order_[i]][a]);
      hi[a] = std::max(hi[a], points_[order_[i]][a]);
    }
  }
  int axis = 0;
  for (int a = 1; a < 3; ++a) {
    if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
  }
  if (hi[axis] == lo[axis]) return id;  // all coincident: keep as one leaf

  const std::size_t mid = begin + (end - begin) / 2;
  auto less = [&](std::size_t a, std::size_t b) {
    const double ca = points_[a][axis], cb = points_[b][axis];
    return ca < cb || (ca == cb && a < b);
  };
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end), less);
  const double split = points_[order_[mid]][axis];
  const std::size_t left = build(begin, mid);
  const std::size_t right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  return id;
}

// Depth-first traversal, near side first. `visit(index, d2)` is called for
// every point in an opened leaf; `bound()` returns the current pruning radius
// squared. Left children hold coordinates <= split, right children >= split.
template <typename Visit>
void KdTree::search(const Vec3& query, Visit&& visit) const {
  if (nodes_.empty()) return;
  struct Frame {
    std::size_t node;
    double min_d2;
  };
  std::vector<Frame> stack{{0, 0.0}};
  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    if (f.min_d2 > visit.bound()) continue;
    const Node& n = nodes_[f.node];
    if (n.axis < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const std::size_t idx = order_[i];
        visit(idx, squared_distance(query, points_[idx]));
      }
      continue;
    }
    const double diff = query[static_cast<std::size_t>(n.axis)] - n.split;
    const std::size_t near = diff < 0.0 ? n.left : n.right;
    const std::size_t far = diff < 0.0 ? n.right : n.left;
    stack.push_back({far, std::max(f.min_d2, diff * diff)});
    stack.push_back({near, f.min_d2});
  }
}

namespace {

// Bounded max-heap of the k best (d2, index) pairs.
struct KnnVisitor {
  std::size_t k;
  std::optional<std::size_t> skip_index;
  bool skip_coincident;
  std::priority_queue<Candidate> heap;

  double bound() const {
    return heap.size() < k ? std::numeric_limits<double>::infinity() : heap.top().d2;
  }
  void operator()(std::size_t idx, double d2) {
    if (skip_index && *skip_index == idx) return;
    if (skip_coincident && d2 == 0.0) return;
    const Candidate c{d2, idx};
    if (heap.size() < k) {
      heap.push(c);
    } else if (c < heap.top()) {
      heap.pop();
      heap.push(c);
    }
  }
  std::vector<Neighbor> take() {
    std::vector<Neighbor> out(heap.size());
    for (std::size_t i = out.size(); i-- > 0;) {
      out[i] = {heap.top().index, std::sqrt(heap.top().d2)};
      heap.pop();
    }
    return out;
  }
};

}  // namespace

std::vector<Neighbor> KdTree::k_nearest(const Vec3& query, std::size_t k, bool exclude_self) const {
  if (k == 0) throw ContractError("k_nearest needs k >= 1");
  KnnVisitor v{k, std::nullopt, exclude_self, {}};
  search(query, v);
  return v.take();
}

std::vector<Neighbor> KdTree::k_nearest_of(std::size_t index, std::size_t k) const {
  if (k == 0) throw ContractError("k_nearest_of needs k >= 1");
  if (index >= points_.size()) throw DimensionError("point index out of range");
  KnnVisitor v{k, index, false, {}};
  search(points_[index], v);
  return v.take();
}

std::optional<Neighbor> KdTree::nearest(const Vec3& query) const {
  if (empty()) return std::nullopt;
  return k_nearest(query, 1).front();
}

std::vector<std::size_t> KdTree::within_radius(const Vec3& query, double radius) const {
  struct RadiusVisitor {
    double limit;
    double radius;
    std::vector<std::size_t> hits;
    double bound() const { return limit; }
    void operator()(std::size_t idx, double d2) {
      if (d2 <= limit && std::sqrt(d2) < radius) hits.push_back(idx);
    }
  };
  if (!(radius > 0.0)) return {};
  // Slightly widened squared bound; the exact test is on the rooted distance.
  RadiusVisitor v{radius * radius * (1.0 + 1e-12), radius, {}};
  search(query, v);
  std::sort(v.hits.begin(), v.hits.end());
  return std::move(v.hits);
}

std::vector<std::size_t> thin_redundant(std::span<const Vec3> points, double d_threshold) {
  if (!(d_threshold >= 0.0)) throw DomainError("d_threshold must be >= 0");
  std::vector<std::size_t> kept;
  if (d_threshold == 0.0) {
    kept.resize(points.size());
    std::iota(kept.begin(), kept.end(), 0);
    return kept;
  }
  const KdTree tree(std::vector<Vec3>(points.begin(), points.end()));
  std::vector<char> is_kept(points.size(), 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    bool clash = false;
    for (std::size_t j : tree.within_radius(points[i], d_threshold)) {
      if (j < i && is_kept[j]) {
        clash = true;
        break;
      }
    }
    if (!clash) {
      is_kept[i] = 1;
      kept.push_back(i);
    }
  }
  return kept;
}

std::vector<std::size_t> thin_redundant(std::span<const Point> points, double d_threshold) {
  std::vector<Vec3> xyz;
  xyz.reserve(points.size());
  for (const auto& p : points) xyz.push_back(position(p));
  return thin_redundant(xyz, d_threshold);
}

}  // namespace l2r::spatial
