#pragma once

// LiDAR-to-radar sampling: redundancy thinning, weighted two-stage sampling,
// velocity augmentation and radar-plane mapping, driven by a count model.

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "l2r/gmm.hpp"
#include "l2r/pointcloud.hpp"
#include "l2r/random.hpp"

namespace l2r::sampling {

struct SamplingConfig {
  double alpha_int = 4.0;
  double alpha_dist = 4.0;
  double alpha_spa = 2.0;
  double center_radius = 15.0;   ///< meters
  double d_threshold = 0.3;      ///< meters
  std::size_t neighbor_count = 8;
  double dist_epsilon = 1e-6;    ///< meters^2
  std::uint64_t seed = 0;

  /// Throws ConfigError on negative alphas, all-zero alphas, a non-positive
  /// radius, a negative threshold or a zero neighbor count.
  void validate() const;
};

struct IntensityWeights {
  std::vector<double> weights;
  bool uniform_fallback = false;  ///< every intensity was zero
};

/// sqrt(I_i) / sum_j sqrt(I_j); uniform when all intensities are zero.
IntensityWeights intensity_weights(std::span<const Point> points);

/// Sum of squared distances to the j_max nearest neighbors, normalized.
/// A single point gets weight 1; all-coincident clouds get uniform weights.
std::vector<double> sparsity_weights(std::span<const Point> points, std::size_t j_max);

/// 1 / (|p|^2 + dist_epsilon), normalized. Distances are to the sensor origin.
std::vector<double> distance_weights(std::span<const Point> points, double dist_epsilon);

/// alpha-weighted sum of the three normalized families, renormalized.
std::vector<double> combine_weights(std::span<const double> w_int, std::span<const double> w_dist,
                                    std::span<const double> w_spa, const SamplingConfig& config);

struct TwoStageSelection {
  std::vector<std::size_t> indices;  ///< stage-1 picks first, then stage-2 picks
  std::size_t n1 = 0;                ///< drawn outside center_radius
  std::size_t n2 = 0;                ///< drawn from the remaining points
  bool fallback_stage1 = false;      ///< fewer than floor(N/2) points outside the radius
  bool fallback_total = false;       ///< fewer than N points overall
};

/// Draws floor(N/2) points without replacement from those farther than
/// center_radius from the origin, then the rest from all remaining points.
/// Each draw is weighted by `weights` restricted to the candidate pool
/// (Efraimidis-Spirakis keys log(u)/w, largest keys win).
TwoStageSelection two_stage_sample(std::span<const Point> points, std::span<const double> weights,
                                   std::size_t n, double center_radius, CounterRng& rng);

using Velocity = std::array<double, 3>;

struct FlowEstimate {
  std::vector<Velocity> velocities;  ///< one per point of the current frame
  bool fallback = false;             ///< estimator could not use the successor
};

/// Seam for scene-flow models that assign per-point velocities.
class FlowEstimator {
 public:
  virtual ~FlowEstimator() = default;
  virtual FlowEstimate estimate(const PointCloudFrame& current, const PointCloudFrame& next,
                                double dt) const = 0;
  virtual std::string name() const = 0;
};

/// Velocity of p is (nearest neighbor of p in `next` - p) / dt.
class NearestNeighborFlow final : public FlowEstimator {
 public:
  FlowEstimate estimate(const PointCloudFrame& current, const PointCloudFrame& next, double dt) const override;
  std::string name() const override { return "nearest-neighbor"; }
};

FlowEstimate nn_flow_estimate(const PointCloudFrame& current, const PointCloudFrame& next, double dt);

/// Drops altitude: z = 0, x/y/intensity/vx/vy unchanged.
std::vector<Point> map_to_plane(std::span<const Point> points);

struct FrameReport {
  std::string frame_id;
  std::size_t n_input = 0;
  std::size_t n_after_thin = 0;
  std::int64_t n_target = 0;  ///< N drawn from the count model
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  bool fallback_stage1 = false;
  bool fallback_total = false;
  bool velocity_fallback = false;  ///< last frame or empty successor: zero velocity
  bool intensity_fallback = false;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;        ///< frame index the random stream is derived from
  double weight_sum_error = 0.0;   ///< max |sum - 1| over the four weight vectors
  std::size_t n_output = 0;
};

/// JSON object with the keys frame_id, n_input, n_after_thin, N, N1, N2,
/// fallback_stage1, seed, plus the extra diagnostic fields above.
std::string to_json(const FrameReport& report);

struct PipelineResult {
  std::vector<PointCloudFrame> frames;
  std::vector<FrameReport> reports;
};

/// One frame through thinning, sampling, velocity augmentation and plane
/// mapping. `next` may be null (no successor: zero velocity, flagged).
PointCloudFrame process_frame(const PointCloudFrame& frame, const PointCloudFrame* next, const gmm::Gmm1D& counts,
                              const SamplingConfig& config, const FlowEstimator& flow, std::uint64_t frame_index,
                              FrameReport* report = nullptr);

/// Converts a LiDAR sequence (strictly increasing timestamps) into pseudo-radar
/// frames. Frame i draws from the random stream (config.seed, i), so output does
/// not depend on processing order.
PipelineResult l2r_pipeline(std::span<const PointCloudFrame> lidar, const gmm::Gmm1D& counts,
                            const SamplingConfig& config, const FlowEstimator& flow);

}  // namespace l2r::sampling
