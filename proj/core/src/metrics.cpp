#include "l2r/metrics.hpp"

#include <map>

#include "json.hpp"
#include "l2r/error.hpp"
#include "l2r/spatial.hpp"

namespace l2r::metrics {

namespace {

std::vector<Vec3> positions(std::span<const Point> pts) {
  std::vector<Vec3> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(position(p));
  return out;
}

bool planar(std::span<const Point> pts) {
  for (const auto& p : pts) {
    if (p.z != 0.0) return false;
  }
  return true;
}

}  // namespace

double directed_chamfer(std::span<const Vec3> from, std::span<const Vec3> to) {
  if (from.empty() || to.empty()) throw DomainError("Chamfer distance is undefined for an empty set");
  const spatial::KdTree tree(std::vector<Vec3>(to.begin(), to.end()));
  double total = 0.0;
  for (const auto& p : from) {
    const auto nb = tree.nearest(p);
    total += spatial::squared_distance(p, tree.point(nb->index));
  }
  return total / static_cast<double>(from.size());
}

double chamfer(std::span<const Vec3> p, std::span<const Vec3> q) {
  if (p.empty() || q.empty()) throw DomainError("Chamfer distance is undefined for an empty set");
  return directed_chamfer(p, q) + directed_chamfer(q, p);
}

double chamfer(std::span<const Point> p, std::span<const Point> q) {
  const auto pp = positions(p);
  const auto qq = positions(q);
  return chamfer(pp, qq);
}

ChamferReport mean_chamfer(std::span<const PointCloudFrame> a, std::span<const PointCloudFrame> b) {
  std::map<std::string, const PointCloudFrame*> by_id;
  for (const auto& f : b) by_id[f.frame_id()] = &f;
  std::vector<std::string> orphans;
  std::map<std::string, bool> matched;
  for (const auto& f : a) {
    if (by_id.count(f.frame_id())) {
      matched[f.frame_id()] = true;
    } else {
      orphans.push_back(f.frame_id());
    }
  }
  for (const auto& f : b) {
    if (!matched.count(f.frame_id())) orphans.push_back(f.frame_id());
  }
  if (!orphans.empty()) {
    std::string msg = "unmatched frame ids:";
    for (const auto& id : orphans) msg += " " + id;
    throw ContractError(msg);
  }

  ChamferReport rep;
  bool all_planar = true;
  double total = 0.0;
  for (const auto& f : a) {
    const auto& g = *by_id.at(f.frame_id());
    const double v = chamfer(f.points(), g.points());
    rep.per_frame.push_back({f.frame_id(), v});
    total += v;
    all_planar = all_planar && planar(f.points()) && planar(g.points());
  }
  rep.count = rep.per_frame.size();
  rep.mean = rep.count ? total / static_cast<double>(rep.count) : 0.0;
  rep.dimensions = all_planar ? 2 : 3;
  return rep;
}

std::string to_json(const ChamferReport& report) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : report.per_frame) frames.push_back({{"frame_id", f.frame_id}, {"value", f.value}});
  const nlohmann::json j = {
      {"per_frame", frames}, {"mean", report.mean}, {"count", report.count}, {"dimensions", report.dimensions}};
  return j.dump(2);
}

}  // namespace l2r::metrics
