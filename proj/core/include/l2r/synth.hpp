#pragma once

// Deterministic synthetic corpora: paired LiDAR-like and radar-like frame
// sequences with known object motion, and feature batches with planted column
// correspondence.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "l2r/contrastive.hpp"
#include "l2r/pointcloud.hpp"

namespace l2r::synth {

struct SceneSpec {
  std::uint64_t seed = 0;
  std::size_t n_frames = 50;
  std::size_t n_objects = 8;
  double object_length = 4.5;    ///< meters
  double object_width = 1.8;     ///< meters
  double object_height = 1.6;    ///< meters
  double ego_radius = 60.0;      ///< meters
  double lidar_density = 0.5;    ///< ground points per m^2 of the ego disk
  double radar_density = 0.01;   ///< radar points per m^2 of the ego disk
  double max_speed = 10.0;       ///< m/s
  double noise = 0.03;           ///< meters, LiDAR range noise
  double radar_noise = 0.2;      ///< meters
  double dt = 0.1;               ///< seconds between frames
  double sensor_height = 1.8;    ///< meters above the ground plane

  /// Throws ConfigError on non-positive densities, radar density not below the
  /// LiDAR density, or non-positive extents, radius or dt.
  void validate() const;
};

/// Box moving at constant velocity in the ground plane; center at time t is
/// (x0 + vx t, y0 + vy t).
struct ObjectTrack {
  std::size_t id = 0;
  double x0 = 0.0, y0 = 0.0;
  double heading = 0.0;  ///< radians
  double vx = 0.0, vy = 0.0;
  double length = 0.0, width = 0.0, height = 0.0;
};

struct SyntheticCorpus {
  SceneSpec spec;
  std::vector<ObjectTrack> objects;
  std::vector<PointCloudFrame> lidar;
  std::vector<PointCloudFrame> radar;  ///< ground truth: z == 0, true velocities
};

/// Frame i is named "frame_%04d" with timestamp i * dt in both sequences.
SyntheticCorpus gen_scene(const SceneSpec& spec);

std::vector<std::int64_t> radar_counts(const SyntheticCorpus& corpus);

struct FeatureBatchSpec {
  std::uint64_t seed = 0;
  std::size_t batch = 4;
  std::size_t channels = 8;
  std::size_t height = 8;
  std::size_t width = 8;
  double noise = 0.05;
  int offset_range = 1;  ///< planted offsets are drawn from [-range, range]
};

struct FeatureBatch {
  FeatureBatchSpec spec;
  std::vector<contrastive::Scene> scenes;
  /// Per scene: radar column j corresponds to image column j + offset.
  std::vector<int> offsets;
};

/// Each scene draws an independent latent C x H x W map. Every map is the latent
/// plus N(0, noise^2) noise; the radar maps are circularly shifted so that
/// radar column j holds latent column (j + offset) mod W.
FeatureBatch gen_feature_batch(const FeatureBatchSpec& spec);

/// Batch written into corpus manifests for toy pretraining. Its noise is large
/// enough that the untrained loss is far from its minimum.
FeatureBatchSpec pretrain_batch_spec(std::uint64_t seed);

/// Columns whose planted partner lies inside the map (no wrap-around).
std::vector<std::size_t> in_bound_columns(std::size_t width, int offset);

// Corpus directory layout:
//   manifest.json        spec, frame list, object tracks, feature batch spec
//   lidar/<id>.l2rpcf    native binary LiDAR frames
//   radar/<id>.csv       ground-truth radar frames
//   radar_counts.txt     one radar point count per line
struct CorpusOnDisk {
  std::uint64_t seed = 0;
  std::vector<PointCloudFrame> lidar;
  std::vector<PointCloudFrame> radar;
  std::optional<FeatureBatchSpec> features;
};

void write_corpus(const SyntheticCorpus& corpus, const FeatureBatchSpec& features, const std::filesystem::path& dir);
std::string manifest_json(const SyntheticCorpus& corpus, const FeatureBatchSpec& features);

/// Reads a corpus written by write_corpus. Throws IoError or SchemaError.
CorpusOnDisk read_corpus(const std::filesystem::path& dir);

}  // namespace l2r::synth
