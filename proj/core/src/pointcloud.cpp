#include "l2r/pointcloud.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "l2r/error.hpp"
#include "l2r/io.hpp"

namespace l2r {

PointCloudFrame::PointCloudFrame(std::string frame_id, double timestamp, std::vector<Point> points,
                                 bool has_velocity)
    : frame_id_(std::move(frame_id)),
      timestamp_(timestamp),
      points_(std::move(points)),
      has_velocity_(has_velocity) {}

PointCloudFrame PointCloudFrame::with_identity(std::string frame_id, double timestamp) const {
  return PointCloudFrame(std::move(frame_id), timestamp, points_, has_velocity_);
}

namespace {

// Little-endian codec ----------------------------------------------------------

template <typename U>
U byteswap(U v) {
  U out = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out = static_cast<U>((out << 8) | (v & 0xff));
    v = static_cast<U>(v >> 8);
  }
  return out;
}

template <typename T, typename U>
T load_le(const std::uint8_t* p) {
  U raw;
  std::memcpy(&raw, p, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) raw = byteswap(raw);
  return std::bit_cast<T>(raw);
}

template <typename T, typename U>
void store_le(std::vector<std::uint8_t>& out, T value) {
  U raw = std::bit_cast<U>(value);
  if constexpr (std::endian::native == std::endian::big) raw = byteswap(raw);
  const auto off = out.size();
  out.resize(off + sizeof(U));
  std::memcpy(out.data() + off, &raw, sizeof(U));
}

// CSV helpers ------------------------------------------------------------------

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_field(std::string_view field, std::size_t line, std::string_view column) {
  double v = 0.0;
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError("invalid number '" + std::string(field) + "' in column " + std::string(column), line);
  }
  if (!std::isfinite(v)) {
    throw ParseError("non-finite value in column " + std::string(column), line);
  }
  return v;
}

void validate_point(const Point& p, std::size_t index) {
  const bool finite = std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z) &&
                      std::isfinite(p.intensity) && std::isfinite(p.vx) && std::isfinite(p.vy);
  if (!finite) throw FormatError("non-finite value in record " + std::to_string(index));
  if (p.intensity < 0.0) throw FormatError("negative intensity in record " + std::to_string(index));
}

}  // namespace

// CSV --------------------------------------------------------------------------

PointCloudFrame parse_frame_csv(const std::string& text, std::string frame_id) {
  static constexpr std::string_view kBase[] = {"x", "y", "z", "intensity"};
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  bool header_seen = false;
  bool with_velocity = false;
  std::vector<Point> points;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line_no == 1 && line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.remove_prefix(3);
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (!header_seen) {
      for (std::size_t i = 0; i < 4; ++i) {
        if (i >= fields.size() || fields[i] != kBase[i]) {
          throw SchemaError("CSV header must start with x,y,z,intensity; missing column '" +
                            std::string(kBase[i]) + "'");
        }
      }
      if (fields.size() == 6 && fields[4] == "vx" && fields[5] == "vy") {
        with_velocity = true;
      } else if (fields.size() != 4) {
        throw SchemaError("CSV header must be x,y,z,intensity or x,y,z,intensity,vx,vy");
      }
      header_seen = true;
      continue;
    }
    const std::size_t expected = with_velocity ? 6 : 4;
    if (fields.size() != expected) {
      throw ParseError("expected " + std::to_string(expected) + " fields, got " + std::to_string(fields.size()),
                       line_no);
    }
    Point p;
    p.x = parse_field(fields[0], line_no, "x");
    p.y = parse_field(fields[1], line_no, "y");
    p.z = parse_field(fields[2], line_no, "z");
    p.intensity = parse_field(fields[3], line_no, "intensity");
    if (p.intensity < 0.0) throw ParseError("negative intensity", line_no);
    if (with_velocity) {
      p.vx = parse_field(fields[4], line_no, "vx");
      p.vy = parse_field(fields[5], line_no, "vy");
    }
    points.push_back(p);
  }
  if (!header_seen) throw SchemaError("CSV frame has no header");
  return PointCloudFrame(std::move(frame_id), 0.0, std::move(points), with_velocity);
}

PointCloudFrame read_frame_csv(const std::filesystem::path& path) {
  return parse_frame_csv(io::read_text(path), path.stem().string());
}

std::string format_frame_csv(const PointCloudFrame& frame) {
  std::string out = frame.has_velocity() ? "x,y,z,intensity,vx,vy\n" : "x,y,z,intensity\n";
  for (const auto& p : frame.points()) {
    out += io::format_double(p.x);
    out += ',';
    out += io::format_double(p.y);
    out += ',';
    out += io::format_double(p.z);
    out += ',';
    out += io::format_double(p.intensity);
    if (frame.has_velocity()) {
      out += ',';
      out += io::format_double(p.vx);
      out += ',';
      out += io::format_double(p.vy);
    }
    out += '\n';
  }
  return out;
}

void write_frame_csv(const PointCloudFrame& frame, const std::filesystem::path& path) {
  io::write_text_atomic(path, format_frame_csv(frame));
}

// nuScenes-style binary ------------------------------------------------------------

PointCloudFrame decode_frame_nuscenes_bin(std::span<const std::uint8_t> bytes, std::string frame_id) {
  constexpr std::size_t kRecord = 20;
  if (bytes.size() % kRecord != 0) {
    throw FormatError("nuScenes binary length " + std::to_string(bytes.size()) + " is not a multiple of 20");
  }
  std::vector<Point> points(bytes.size() / kRecord);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::uint8_t* rec = bytes.data() + i * kRecord;
    Point& p = points[i];
    p.x = load_le<float, std::uint32_t>(rec);
    p.y = load_le<float, std::uint32_t>(rec + 4);
    p.z = load_le<float, std::uint32_t>(rec + 8);
    p.intensity = load_le<float, std::uint32_t>(rec + 12);
    validate_point(p, i);
  }
  return PointCloudFrame(std::move(frame_id), 0.0, std::move(points), false);
}

PointCloudFrame read_frame_nuscenes_bin(const std::filesystem::path& path) {
  return decode_frame_nuscenes_bin(io::read_bytes(path), path.stem().string());
}

std::vector<std::uint8_t> encode_frame_nuscenes_bin(const PointCloudFrame& frame) {
  std::vector<std::uint8_t> out;
  out.reserve(frame.size() * 20);
  for (const auto& p : frame.points()) {
    store_le<float, std::uint32_t>(out, static_cast<float>(p.x));
    store_le<float, std::uint32_t>(out, static_cast<float>(p.y));
    store_le<float, std::uint32_t>(out, static_cast<float>(p.z));
    store_le<float, std::uint32_t>(out, static_cast<float>(p.intensity));
    store_le<float, std::uint32_t>(out, 0.0f);
  }
  return out;
}

// Native binary --------------------------------------------------------------------

PointCloudFrame decode_frame_native(std::span<const std::uint8_t> bytes, std::string frame_id) {
  constexpr std::size_t kHeader = 16;
  constexpr std::size_t kRecord = 48;
  if (bytes.size() < kHeader || std::memcmp(bytes.data(), kNativeMagic.data(), kNativeMagic.size()) != 0) {
    throw FormatError("missing L2RPCF01 magic");
  }
  const auto count = load_le<std::uint64_t, std::uint64_t>(bytes.data() + 8);
  if (count > (bytes.size() - kHeader) / kRecord || kHeader + count * kRecord != bytes.size()) {
    throw FormatError("native frame declares " + std::to_string(count) + " points but holds " +
                      std::to_string(bytes.size()) + " bytes");
  }
  std::vector<Point> points(count);
  bool moving = false;
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint8_t* rec = bytes.data() + kHeader + i * kRecord;
    Point& p = points[i];
    p.x = load_le<double, std::uint64_t>(rec);
    p.y = load_le<double, std::uint64_t>(rec + 8);
    p.z = load_le<double, std::uint64_t>(rec + 16);
    p.intensity = load_le<double, std::uint64_t>(rec + 24);
    p.vx = load_le<double, std::uint64_t>(rec + 32);
    p.vy = load_le<double, std::uint64_t>(rec + 40);
    validate_point(p, i);
    moving = moving || p.vx != 0.0 || p.vy != 0.0;
  }
  return PointCloudFrame(std::move(frame_id), 0.0, std::move(points), moving);
}

PointCloudFrame read_frame_native(const std::filesystem::path& path) {
  return decode_frame_native(io::read_bytes(path), path.stem().string());
}

std::vector<std::uint8_t> encode_frame_native(const PointCloudFrame& frame) {
  std::vector<std::uint8_t> out(kNativeMagic.begin(), kNativeMagic.end());
  out.reserve(16 + frame.size() * 48);
  store_le<std::uint64_t, std::uint64_t>(out, frame.size());
  for (const auto& p : frame.points()) {
    for (double v : {p.x, p.y, p.z, p.intensity, p.vx, p.vy}) store_le<double, std::uint64_t>(out, v);
  }
  return out;
}

void write_frame_native(const PointCloudFrame& frame, const std::filesystem::path& path) {
  io::write_bytes_atomic(path, encode_frame_native(frame));
}

// Dispatch ---------------------------------------------------------------------

bool is_frame_file(const std::filesystem::path& path) {
  const auto ext = path.extension();
  return ext == ".csv" || ext == ".l2rpcf" || ext == ".bin";
}

PointCloudFrame read_frame(const std::filesystem::path& path) {
  const auto ext = path.extension();
  if (ext == ".csv") return read_frame_csv(path);
  if (ext == ".l2rpcf") return read_frame_native(path);
  if (ext == ".bin") return read_frame_nuscenes_bin(path);
  throw FormatError("unknown frame file extension: " + path.string());
}

void write_frame(const PointCloudFrame& frame, const std::filesystem::path& path) {
  const auto ext = path.extension();
  if (ext == ".csv") return write_frame_csv(frame, path);
  if (ext == ".l2rpcf") return write_frame_native(frame, path);
  if (ext == ".bin") return io::write_bytes_atomic(path, encode_frame_nuscenes_bin(frame));
  throw FormatError("unknown frame file extension: " + path.string());
}

FrameStats frame_stats(const PointCloudFrame& frame) {
  FrameStats s;
  s.count = frame.size();
  if (frame.empty()) return s;
  Vec3 c{0.0, 0.0, 0.0};
  double dist = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& p : frame.points()) {
    c[0] += p.x;
    c[1] += p.y;
    c[2] += p.z;
    dist += std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
    lo = std::min(lo, p.intensity);
    hi = std::max(hi, p.intensity);
  }
  const double n = static_cast<double>(frame.size());
  s.centroid = Vec3{c[0] / n, c[1] / n, c[2] / n};
  s.mean_distance_to_origin = dist / n;
  s.intensity_range = std::array<double, 2>{lo, hi};
  return s;
}

}  // namespace l2r
