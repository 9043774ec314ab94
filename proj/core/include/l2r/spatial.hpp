#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "l2r/pointcloud.hpp"

namespace l2r::spatial {

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;  ///< Euclidean, meters

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Squared Euclidean distance; the one formula every query and oracle uses.
inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

/// Immutable balanced 3-D tree. Queries return point indices into the input
/// order; equal distances are ordered by lower index.
class KdTree {
 public:
  KdTree() = default;
  /// Throws DomainError on a non-finite coordinate.
  explicit KdTree(std::vector<Vec3> points, std::size_t leaf_size = 8);
  static KdTree from_points(std::span<const Point> points, std::size_t leaf_size = 8);

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Vec3& point(std::size_t index) const { return points_[index]; }

  /// Up to k neighbors sorted by (distance, index). With exclude_self, points
  /// coincident with the query (distance 0) are skipped.
  std::vector<Neighbor> k_nearest(const Vec3& query, std::size_t k, bool exclude_self = false) const;

  /// Up to k neighbors of the indexed member, never returning the member itself.
  std::vector<Neighbor> k_nearest_of(std::size_t index, std::size_t k) const;

  std::optional<Neighbor> nearest(const Vec3& query) const;

  /// Indices of points strictly closer than `radius`, ascending.
  std::vector<std::size_t> within_radius(const Vec3& query, double radius) const;

 private:
  struct Node {
    std::size_t begin = 0, end = 0;  // range in order_
    std::size_t left = 0, right = 0;  // child node ids; 0 means leaf
    int axis = -1;
    double split = 0.0;
  };

  std::size_t build(std::size_t begin, std::size_t end);
  template <typename Visit>
  void search(const Vec3& query, Visit&& visit) const;

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_ = 8;
};

/// Greedy redundancy removal in ascending index order: a point is kept iff it
/// lies at least `d_threshold` from every point kept before it. Returns kept
/// indices in ascending order.
std::vector<std::size_t> thin_redundant(std::span<const Vec3> points, double d_threshold);
std::vector<std::size_t> thin_redundant(std::span<const Point> points, double d_threshold);

}  // namespace l2r::spatial
