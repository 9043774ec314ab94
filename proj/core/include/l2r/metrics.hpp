#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "l2r/pointcloud.hpp"

namespace l2r::metrics {

/// Symmetric Chamfer distance with squared nearest-neighbor distances:
/// mean_p min_q |p-q|^2 + mean_q min_p |p-q|^2, in meters^2.
/// Throws DomainError when either set is empty.
double chamfer(std::span<const Vec3> p, std::span<const Vec3> q);
double chamfer(std::span<const Point> p, std::span<const Point> q);

/// One directional term, mean over `from` of the squared distance to `to`.
double directed_chamfer(std::span<const Vec3> from, std::span<const Vec3> to);

struct FrameChamfer {
  std::string frame_id;
  double value = 0.0;
};

struct ChamferReport {
  std::vector<FrameChamfer> per_frame;
  double mean = 0.0;
  std::size_t count = 0;
  int dimensions = 3;  ///< 2 when every input point has z == 0
};

/// Pairs frames by id. Throws ContractError naming every unmatched id.
ChamferReport mean_chamfer(std::span<const PointCloudFrame> a, std::span<const PointCloudFrame> b);

std::string to_json(const ChamferReport& report);

}  // namespace l2r::metrics
