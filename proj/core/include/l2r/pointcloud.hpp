#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace l2r {

/// One point of a LiDAR or radar cloud. LiDAR points carry zero velocity;
/// radar points produced by plane mapping carry z == 0.
struct Point {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity = 0.0;  ///< unitless reflectance, >= 0
  double vx = 0.0;         ///< m/s
  double vy = 0.0;         ///< m/s

  friend bool operator==(const Point&, const Point&) = default;
};

using Vec3 = std::array<double, 3>;

inline Vec3 position(const Point& p) { return {p.x, p.y, p.z}; }

/// Timestamped, immutable point cloud. Pipeline stages return new frames.
class PointCloudFrame {
 public:
  PointCloudFrame() = default;
  PointCloudFrame(std::string frame_id, double timestamp, std::vector<Point> points,
                  bool has_velocity = false);

  const std::string& frame_id() const { return frame_id_; }
  double timestamp() const { return timestamp_; }
  std::span<const Point> points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  /// True when the velocity columns carry information (radar or augmented frames).
  bool has_velocity() const { return has_velocity_; }

  PointCloudFrame with_identity(std::string frame_id, double timestamp) const;

  friend bool operator==(const PointCloudFrame&, const PointCloudFrame&) = default;

 private:
  std::string frame_id_;
  double timestamp_ = 0.0;
  std::vector<Point> points_;
  bool has_velocity_ = false;
};

// CSV: header `x,y,z,intensity` or `x,y,z,intensity,vx,vy`, '.' decimal separator.
// Values are written in shortest round-trip form, so a write/read cycle is exact.
PointCloudFrame read_frame_csv(const std::filesystem::path& path);
PointCloudFrame parse_frame_csv(const std::string& text, std::string frame_id = {});
void write_frame_csv(const PointCloudFrame& frame, const std::filesystem::path& path);
std::string format_frame_csv(const PointCloudFrame& frame);

// nuScenes-style LiDAR binary: packed little-endian float32 x5 (x, y, z, intensity, ring).
// The ring index is discarded.
PointCloudFrame read_frame_nuscenes_bin(const std::filesystem::path& path);
PointCloudFrame decode_frame_nuscenes_bin(std::span<const std::uint8_t> bytes, std::string frame_id = {});
std::vector<std::uint8_t> encode_frame_nuscenes_bin(const PointCloudFrame& frame);

// Native binary: magic "L2RPCF01", u64 point count, then float64 x6 per point
// (x, y, z, intensity, vx, vy), all little-endian.
inline constexpr std::array<char, 8> kNativeMagic = {'L', '2', 'R', 'P', 'C', 'F', '0', '1'};
PointCloudFrame read_frame_native(const std::filesystem::path& path);
PointCloudFrame decode_frame_native(std::span<const std::uint8_t> bytes, std::string frame_id = {});
std::vector<std::uint8_t> encode_frame_native(const PointCloudFrame& frame);
void write_frame_native(const PointCloudFrame& frame, const std::filesystem::path& path);

/// Dispatches on extension: .csv, .l2rpcf (native) or .bin (nuScenes-style).
/// The frame id is the file stem.
PointCloudFrame read_frame(const std::filesystem::path& path);
void write_frame(const PointCloudFrame& frame, const std::filesystem::path& path);
bool is_frame_file(const std::filesystem::path& path);

struct FrameStats {
  std::size_t count = 0;
  std::optional<Vec3> centroid;
  std::optional<double> mean_distance_to_origin;
  std::optional<std::array<double, 2>> intensity_range;  ///< {min, max}
};

FrameStats frame_stats(const PointCloudFrame& frame);

}  // namespace l2r
