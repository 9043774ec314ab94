#include "l2r/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "l2r/error.hpp"
#include "l2r/spatial.hpp"

namespace l2r::sampling {

namespace {

std::vector<double> normalized(std::vector<double> raw) {
  double total = 0.0;
  for (double v : raw) total += v;
  if (!(total > 0.0) || !std::isfinite(total)) {
    std::fill(raw.begin(), raw.end(), raw.empty() ? 0.0 : 1.0 / static_cast<double>(raw.size()));
    return raw;
  }
  for (auto& v : raw) v /= total;
  return raw;
}

double sum_error(std::span<const double> w) {
  if (w.empty()) return 0.0;
  double s = 0.0;
  for (double v : w) s += v;
  return std::abs(s - 1.0);
}

double origin_distance(const Point& p) { return std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z); }

// Top-`count` of the pool by Efraimidis-Spirakis key; ties go to the lower index.
std::vector<std::size_t> weighted_draw(std::span<const std::size_t> pool, std::span<const double> weights,
                                       std::size_t count, CounterRng& rng) {
  struct Keyed {
    double key;
    std::size_t index;
  };
  std::vector<Keyed> keyed;
  keyed.reserve(pool.size());
  for (std::size_t idx : pool) {
    const double u = rng.uniform_open();
    const double w = weights[idx];
    keyed.push_back({w > 0.0 ? std::log(u) / w : -std::numeric_limits<double>::infinity(), idx});
  }
  count = std::min(count, keyed.size());
  auto better = [](const Keyed& a, const Keyed& b) { return a.key > b.key || (a.key == b.key && a.index < b.index); };
  std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(count), keyed.end(), better);
  std::vector<std::size_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = keyed[i].index;
  return out;
}

}  // namespace

void SamplingConfig::validate() const {
  for (double a : {alpha_int, alpha_dist, alpha_spa}) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("sampling alphas must be finite and >= 0");
  }
  if (alpha_int + alpha_dist + alpha_spa <= 0.0) throw ConfigError("at least one sampling alpha must be > 0");
  if (!(center_radius > 0.0)) throw ConfigError("center_radius must be > 0");
  if (!(d_threshold >= 0.0)) throw ConfigError("d_threshold must be >= 0");
  if (neighbor_count == 0) throw ConfigError("neighbor_count must be >= 1");
  if (!(dist_epsilon > 0.0)) throw ConfigError("dist_epsilon must be > 0");
}

IntensityWeights intensity_weights(std::span<const Point> points) {
  IntensityWeights out;
  out.weights.reserve(points.size());
  double total = 0.0;
  for (const auto& p : points) {
    out.weights.push_back(std::sqrt(p.intensity));
    total += out.weights.back();
  }
  if (!points.empty() && !(total > 0.0)) out.uniform_fallback = true;
  out.weights = normalized(std::move(out.weights));
  return out;
}

std::vector<double> sparsity_weights(std::span<const Point> points, std::size_t j_max) {
  if (j_max == 0) throw ContractError("sparsity_weights needs j_max >= 1");
  if (points.size() <= 1) return std::vector<double>(points.size(), 1.0);
  const auto tree = spatial::KdTree::from_points(points);
  std::vector<double> raw(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    double s = 0.0;
    for (const auto& nb : tree.k_nearest_of(i, j_max)) s += nb.distance * nb.distance;
    raw[i] = s;
  }
  return normalized(std::move(raw));
}

std::vector<double> distance_weights(std::span<const Point> points, double dist_epsilon) {
  std::vector<double> raw;
  raw.reserve(points.size());
  for (const auto& p : points) raw.push_back(1.0 / (p.x * p.x + p.y * p.y + p.z * p.z + dist_epsilon));
  return normalized(std::move(raw));
}

std::vector<double> combine_weights(std::span<const double> w_int, std::span<const double> w_dist,
                                    std::span<const double> w_spa, const SamplingConfig& config) {
  if (w_int.size() != w_dist.size() || w_int.size() != w_spa.size()) {
    throw DimensionError("combine_weights: weight families have lengths " + std::to_string(w_int.size()) + ", " +
                         std::to_string(w_dist.size()) + ", " + std::to_string(w_spa.size()));
  }
  const double a_int = config.alpha_int, a_dist = config.alpha_dist, a_spa = config.alpha_spa;
  const int active = (a_int > 0.0) + (a_dist > 0.0) + (a_spa > 0.0);
  if (active == 0) throw ConfigError("at least one sampling alpha must be > 0");
  if (active == 1) {
    const auto only = a_int > 0.0 ? w_int : (a_dist > 0.0 ? w_dist : w_spa);
    return {only.begin(), only.end()};
  }
  std::vector<double> out(w_int.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a_int * w_int[i] + a_dist * w_dist[i] + a_spa * w_spa[i];
  return normalized(std::move(out));
}

TwoStageSelection two_stage_sample(std::span<const Point> points, std::span<const double> weights, std::size_t n,
                                   double center_radius, CounterRng& rng) {
  if (n < 2) throw ContractError("two_stage_sample needs N >= 2");
  if (weights.size() != points.size()) {
    throw DimensionError("two_stage_sample: " + std::to_string(points.size()) + " points but " +
                         std::to_string(weights.size()) + " weights");
  }
  const std::size_t want1 = n / 2;
  TwoStageSelection sel;

  std::vector<std::size_t> outside;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (origin_distance(points[i]) > center_radius) outside.push_back(i);
  }
  auto stage1 = weighted_draw(outside, weights, want1, rng);
  sel.fallback_stage1 = stage1.size() < want1;
  sel.n1 = stage1.size();

  std::vector<char> taken(points.size(), 0);
  for (auto i : stage1) taken[i] = 1;
  std::vector<std::size_t> rest;
  rest.reserve(points.size() - stage1.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!taken[i]) rest.push_back(i);
  }
  auto stage2 = weighted_draw(rest, weights, n - sel.n1, rng);
  sel.n2 = stage2.size();
  sel.fallback_total = points.size() < n;

  sel.indices = std::move(stage1);
  sel.indices.insert(sel.indices.end(), stage2.begin(), stage2.end());
  return sel;
}

FlowEstimate nn_flow_estimate(const PointCloudFrame& current, const PointCloudFrame& next, double dt) {
  if (!(dt > 0.0)) throw ContractError("flow estimation needs dt > 0");
  FlowEstimate out;
  out.velocities.assign(current.size(), Velocity{0.0, 0.0, 0.0});
  if (next.empty()) {
    out.fallback = true;
    return out;
  }
  const auto tree = spatial::KdTree::from_points(next.points());
  for (std::size_t i = 0; i < current.size(); ++i) {
    const auto& p = current.points()[i];
    const auto nb = tree.nearest(position(p));
    const auto& q = tree.point(nb->index);
    out.velocities[i] = {(q[0] - p.x) / dt, (q[1] - p.y) / dt, (q[2] - p.z) / dt};
  }
  return out;
}

FlowEstimate NearestNeighborFlow::estimate(const PointCloudFrame& current, const PointCloudFrame& next,
                                           double dt) const {
  return nn_flow_estimate(current, next, dt);
}

std::vector<Point> map_to_plane(std::span<const Point> points) {
  std::vector<Point> out(points.begin(), points.end());
  for (auto& p : out) p.z = 0.0;
  return out;
}

std::string to_json(const FrameReport& r) {
  const nlohmann::json j = {
      {"frame_id", r.frame_id},
      {"n_input", r.n_input},
      {"n_after_thin", r.n_after_thin},
      {"N", r.n_target},
      {"N1", r.n1},
      {"N2", r.n2},
      {"fallback_stage1", r.fallback_stage1},
      {"fallback_total", r.fallback_total},
      {"velocity_fallback", r.velocity_fallback},
      {"intensity_fallback", r.intensity_fallback},
      {"seed", r.seed},
      {"stream", r.stream},
      {"weight_sum_error", r.weight_sum_error},
      {"n_output", r.n_output},
  };
  return j.dump();
}

PointCloudFrame process_frame(const PointCloudFrame& frame, const PointCloudFrame* next, const gmm::Gmm1D& counts,
                              const SamplingConfig& config, const FlowEstimator& flow, std::uint64_t frame_index,
                              FrameReport* report) {
  config.validate();
  FrameReport rep;
  rep.frame_id = frame.frame_id();
  rep.n_input = frame.size();
  rep.seed = config.seed;
  rep.stream = frame_index;
  CounterRng rng(config.seed, frame_index);

  // Count model first so the draw sequence does not depend on the frame's content.
  const auto n_target = gmm::sample_count(counts, rng);
  rep.n_target = n_target;

  const auto kept = spatial::thin_redundant(frame.points(), config.d_threshold);
  std::vector<Point> thinned;
  thinned.reserve(kept.size());
  for (auto i : kept) thinned.push_back(frame.points()[i]);
  rep.n_after_thin = thinned.size();

  std::vector<Point> selected;
  if (!thinned.empty()) {
    const auto w_int = intensity_weights(thinned);
    const auto w_dist = distance_weights(thinned, config.dist_epsilon);
    const auto w_spa = sparsity_weights(thinned, config.neighbor_count);
    const auto w = combine_weights(w_int.weights, w_dist, w_spa, config);
    rep.intensity_fallback = w_int.uniform_fallback;
    rep.weight_sum_error =
        std::max({sum_error(w_int.weights), sum_error(w_dist), sum_error(w_spa), sum_error(w)});

    const auto sel = two_stage_sample(thinned, w, static_cast<std::size_t>(n_target), config.center_radius, rng);
    rep.n1 = sel.n1;
    rep.n2 = sel.n2;
    rep.fallback_stage1 = sel.fallback_stage1;
    rep.fallback_total = sel.fallback_total;
    selected.reserve(sel.indices.size());
    for (auto i : sel.indices) selected.push_back(thinned[i]);
  } else {
    rep.fallback_stage1 = true;
    rep.fallback_total = true;
  }

  // Velocity on the selected points only.
  const PointCloudFrame picked(frame.frame_id(), frame.timestamp(), selected, false);
  FlowEstimate fe;
  if (next != nullptr && !picked.empty()) {
    const double dt = next->timestamp() - frame.timestamp();
    if (!(dt > 0.0)) {
      throw ContractError("frame " + frame.frame_id() + ": successor timestamp must be later");
    }
    fe = flow.estimate(picked, *next, dt);
    if (fe.velocities.size() != picked.size()) {
      throw DimensionError("frame " + frame.frame_id() + ": flow estimator " + flow.name() + " returned " +
                           std::to_string(fe.velocities.size()) + " velocities for " +
                           std::to_string(picked.size()) + " points");
    }
    rep.velocity_fallback = fe.fallback;
  } else {
    fe.velocities.assign(picked.size(), Velocity{0.0, 0.0, 0.0});
    rep.velocity_fallback = true;
  }
  for (std::size_t i = 0; i < selected.size(); ++i) {
    const auto& v = fe.velocities[i];
    if (!std::isfinite(v[0]) || !std::isfinite(v[1]) || !std::isfinite(v[2])) {
      throw DomainError("frame " + frame.frame_id() + ": non-finite velocity from " + flow.name());
    }
    selected[i].vx = v[0];
    selected[i].vy = v[1];
  }

  auto planar = map_to_plane(selected);
  rep.n_output = planar.size();
  if (report) *report = rep;
  return PointCloudFrame(frame.frame_id(), frame.timestamp(), std::move(planar), true);
}

PipelineResult l2r_pipeline(std::span<const PointCloudFrame> lidar, const gmm::Gmm1D& counts,
                            const SamplingConfig& config, const FlowEstimator& flow) {
  config.validate();
  for (std::size_t i = 1; i < lidar.size(); ++i) {
    if (!(lidar[i].timestamp() > lidar[i - 1].timestamp())) {
      throw ContractError("frame " + lidar[i].frame_id() + ": timestamps must strictly increase");
    }
  }
  PipelineResult out;
  out.frames.reserve(lidar.size());
  out.reports.reserve(lidar.size());
  for (std::size_t i = 0; i < lidar.size(); ++i) {
    FrameReport rep;
    const PointCloudFrame* next = i + 1 < lidar.size() ? &lidar[i + 1] : nullptr;
    out.frames.push_back(process_frame(lidar[i], next, counts, config, flow, i, &rep));
    out.reports.push_back(std::move(rep));
  }
  return out;
}

}  // namespace l2r::sampling
