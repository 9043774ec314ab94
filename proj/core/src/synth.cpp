#include "l2r/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "json.hpp"
#include "l2r/error.hpp"
#include "l2r/io.hpp"

namespace l2r::synth {

namespace {

using nlohmann::json;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string frame_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04zu", i);
  return buf;
}

struct Pose {
  double cx, cy, c, s;
};

Pose pose_at(const ObjectTrack& o, double t) {
  return {o.x0 + o.vx * t, o.y0 + o.vy * t, std::cos(o.heading), std::sin(o.heading)};
}

Vec3 to_world(const Pose& p, double lx, double ly, double z) {
  return {p.cx + p.c * lx - p.s * ly, p.cy + p.s * lx + p.c * ly, z};
}

// A point on the sides or roof of the box, chosen with probability
// proportional to face area.
Vec3 box_surface_point(const ObjectTrack& o, const Pose& pose, double ground, CounterRng& rng) {
  const double a_long = o.length * o.height, a_short = o.width * o.height, a_top = o.length * o.width;
  const double u = rng.uniform() * (2 * a_long + 2 * a_short + a_top);
  const double hl = o.length / 2, hw = o.width / 2;
  const double z = ground + rng.uniform() * o.height;
  if (u < 2 * a_long) return to_world(pose, rng.uniform(-hl, hl), u < a_long ? hw : -hw, z);
  if (u < 2 * a_long + 2 * a_short) {
    return to_world(pose, u < 2 * a_long + a_short ? hl : -hl, rng.uniform(-hw, hw), z);
  }
  return to_world(pose, rng.uniform(-hl, hl), rng.uniform(-hw, hw), ground + o.height);
}

Vec3 footprint_point(const ObjectTrack& o, const Pose& pose, CounterRng& rng) {
  const double hl = o.length / 2, hw = o.width / 2;
  const double u = rng.uniform() * 2 * (o.length + o.width);
  if (u < o.length) return to_world(pose, rng.uniform(-hl, hl), hw, 0.0);
  if (u < 2 * o.length) return to_world(pose, rng.uniform(-hl, hl), -hw, 0.0);
  if (u < 2 * o.length + o.width) return to_world(pose, hl, rng.uniform(-hw, hw), 0.0);
  return to_world(pose, -hl, rng.uniform(-hw, hw), 0.0);
}

PointCloudFrame lidar_frame(const SceneSpec& spec, const std::vector<ObjectTrack>& objects, std::size_t i) {
  CounterRng rng = CounterRng(spec.seed, 1).split(i);
  const double t = static_cast<double>(i) * spec.dt;
  const double ground = -spec.sensor_height;
  const auto n_ground = static_cast<std::size_t>(
      std::llround(spec.lidar_density * std::numbers::pi * spec.ego_radius * spec.ego_radius));
  std::vector<Point> pts;
  pts.reserve(n_ground + objects.size() * 200);
  // Range uniform in [2, R]: area density falls off as 1/r.
  for (std::size_t k = 0; k < n_ground; ++k) {
    const double r = rng.uniform(2.0, spec.ego_radius);
    const double th = rng.uniform() * kTwoPi;
    Point p;
    p.x = r * std::cos(th) + spec.noise * rng.normal();
    p.y = r * std::sin(th) + spec.noise * rng.normal();
    p.z = ground + spec.noise * rng.normal();
    p.intensity = rng.uniform(0.0, 8.0);
    pts.push_back(p);
  }
  for (const auto& o : objects) {
    const Pose pose = pose_at(o, t);
    const double d2 = std::max(1.0, pose.cx * pose.cx + pose.cy * pose.cy);
    const auto n = static_cast<std::size_t>(std::clamp(std::llround(2e4 / d2), 10LL, 600LL));
    for (std::size_t k = 0; k < n; ++k) {
      const Vec3 q = box_surface_point(o, pose, ground, rng);
      Point p;
      p.x = q[0] + spec.noise * rng.normal();
      p.y = q[1] + spec.noise * rng.normal();
      p.z = q[2] + spec.noise * rng.normal();
      p.intensity = rng.uniform(20.0, 80.0);
      pts.push_back(p);
    }
  }
  return PointCloudFrame(frame_name(i), t, std::move(pts), false);
}

PointCloudFrame radar_frame(const SceneSpec& spec, const std::vector<ObjectTrack>& objects, std::size_t i) {
  CounterRng rng = CounterRng(spec.seed, 2).split(i);
  const double t = static_cast<double>(i) * spec.dt;
  const double base = spec.radar_density * std::numbers::pi * spec.ego_radius * spec.ego_radius;
  // Two count regimes, so the per-frame count distribution is multimodal.
  const double factor = rng.uniform() < 0.8 ? rng.normal(1.0, 0.15) : rng.normal(2.0, 0.3);
  const auto n = static_cast<std::size_t>(std::max(4LL, std::llround(base * factor)));
  const std::size_t n_obj = objects.empty() ? 0 : (3 * n) / 10;
  std::vector<Point> pts;
  pts.reserve(n);
  for (std::size_t k = 0; k < n_obj; ++k) {
    const auto& o = objects[rng.below(objects.size())];
    const Vec3 q = footprint_point(o, pose_at(o, t), rng);
    Point p;
    p.x = q[0] + spec.radar_noise * rng.normal();
    p.y = q[1] + spec.radar_noise * rng.normal();
    p.intensity = rng.uniform(10.0, 40.0);
    p.vx = o.vx;
    p.vy = o.vy;
    pts.push_back(p);
  }
  // Background returns are uniform over the disk area.
  for (std::size_t k = n_obj; k < n; ++k) {
    const double r = spec.ego_radius * std::sqrt(rng.uniform());
    const double th = rng.uniform() * kTwoPi;
    Point p;
    p.x = r * std::cos(th);
    p.y = r * std::sin(th);
    p.intensity = rng.uniform(0.0, 5.0);
    pts.push_back(p);
  }
  return PointCloudFrame(frame_name(i), t, std::move(pts), true);
}

json spec_json(const SceneSpec& s) {
  return {{"seed", s.seed},
          {"n_frames", s.n_frames},
          {"n_objects", s.n_objects},
          {"object_length", s.object_length},
          {"object_width", s.object_width},
          {"object_height", s.object_height},
          {"ego_radius", s.ego_radius},
          {"lidar_density", s.lidar_density},
          {"radar_density", s.radar_density},
          {"max_speed", s.max_speed},
          {"noise", s.noise},
          {"radar_noise", s.radar_noise},
          {"dt", s.dt},
          {"sensor_height", s.sensor_height}};
}

json features_json(const FeatureBatchSpec& f) {
  return {{"seed", f.seed},         {"batch", f.batch}, {"channels", f.channels},          {"height", f.height},
          {"width", f.width},       {"noise", f.noise}, {"offset_range", f.offset_range}};
}

}  // namespace

void SceneSpec::validate() const {
  if (!(lidar_density > 0.0) || !(radar_density > 0.0)) throw ConfigError("densities must be > 0");
  if (!(radar_density < lidar_density)) throw ConfigError("radar density must be below the LiDAR density");
  if (!(object_length > 0.0 && object_width > 0.0 && object_height > 0.0)) {
    throw ConfigError("object extents must be > 0");
  }
  if (!(ego_radius > 2.0)) throw ConfigError("ego radius must exceed 2 m");
  if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
  if (!(max_speed >= 0.0) || !(noise >= 0.0) || !(radar_noise >= 0.0)) {
    throw ConfigError("speed and noise must be >= 0");
  }
}

SyntheticCorpus gen_scene(const SceneSpec& spec) {
  spec.validate();
  SyntheticCorpus out;
  out.spec = spec;
  CounterRng rng(spec.seed, 0);
  for (std::size_t k = 0; k < spec.n_objects; ++k) {
    ObjectTrack o;
    o.id = k;
    const double r = rng.uniform(5.0, 0.6 * spec.ego_radius);
    const double th = rng.uniform() * kTwoPi;
    o.x0 = r * std::cos(th);
    o.y0 = r * std::sin(th);
    o.heading = rng.uniform() * kTwoPi;
    const double speed = rng.uniform() * spec.max_speed;
    o.vx = speed * std::cos(o.heading);
    o.vy = speed * std::sin(o.heading);
    o.length = spec.object_length;
    o.width = spec.object_width;
    o.height = spec.object_height;
    out.objects.push_back(o);
  }
  for (std::size_t i = 0; i < spec.n_frames; ++i) {
    out.lidar.push_back(lidar_frame(spec, out.objects, i));
    out.radar.push_back(radar_frame(spec, out.objects, i));
  }
  return out;
}

std::vector<std::int64_t> radar_counts(const SyntheticCorpus& corpus) {
  std::vector<std::int64_t> counts;
  for (const auto& f : corpus.radar) counts.push_back(static_cast<std::int64_t>(f.size()));
  return counts;
}

FeatureBatch gen_feature_batch(const FeatureBatchSpec& spec) {
  if (spec.batch == 0 || spec.channels == 0 || spec.height == 0 || spec.width == 0) {
    throw ConfigError("feature batch dimensions must be >= 1");
  }
  if (!(spec.noise >= 0.0) || spec.offset_range < 0) throw ConfigError("noise and offset range must be >= 0");
  const std::size_t c = spec.channels, h = spec.height, w = spec.width;
  FeatureBatch out;
  out.spec = spec;
  const CounterRng root(spec.seed, 7);
  for (std::size_t b = 0; b < spec.batch; ++b) {
    CounterRng rng = root.split(b);
    const int offset = static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * spec.offset_range + 1))) -
                       spec.offset_range;
    std::vector<double> latent(c * h * w);
    for (auto& v : latent) v = rng.normal();
    contrastive::Scene scene;
    for (auto m : {contrastive::Modality::image, contrastive::Modality::radar}) {
      for (auto v : {contrastive::View::bev, contrastive::View::fv}) {
        std::vector<double> data(c * h * w);
        for (std::size_t row = 0; row < c * h; ++row) {
          for (std::size_t j = 0; j < w; ++j) {
            std::size_t src = j;
            if (m == contrastive::Modality::radar) {
              src = static_cast<std::size_t>(((static_cast<long>(j) + offset) % static_cast<long>(w) +
                                              static_cast<long>(w)) % static_cast<long>(w));
            }
            data[row * w + j] = latent[row * w + src] + spec.noise * rng.normal();
          }
        }
        scene.maps.push_back(contrastive::FeatureMap::make(tensor::Tensor({c, h, w}, std::move(data)), m, v));
      }
    }
    out.scenes.push_back(std::move(scene));
    out.offsets.push_back(offset);
  }
  return out;
}

FeatureBatchSpec pretrain_batch_spec(std::uint64_t seed) {
  FeatureBatchSpec spec;
  spec.seed = seed;
  spec.noise = 1.0;
  return spec;
}

std::vector<std::size_t> in_bound_columns(std::size_t width, int offset) {
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < width; ++j) {
    const long partner = static_cast<long>(j) + offset;
    if (partner >= 0 && partner < static_cast<long>(width)) cols.push_back(j);
  }
  return cols;
}

std::string manifest_json(const SyntheticCorpus& corpus, const FeatureBatchSpec& features) {
  json frames = json::array();
  for (std::size_t i = 0; i < corpus.lidar.size(); ++i) {
    const auto& id = corpus.lidar[i].frame_id();
    frames.push_back({{"index", i},
                      {"frame_id", id},
                      {"timestamp", corpus.lidar[i].timestamp()},
                      {"lidar", "lidar/" + id + ".l2rpcf"},
                      {"radar", "radar/" + id + ".csv"},
                      {"lidar_points", corpus.lidar[i].size()},
                      {"radar_points", corpus.radar[i].size()}});
  }
  json objects = json::array();
  for (const auto& o : corpus.objects) {
    objects.push_back({{"id", o.id},
                       {"x0", o.x0},
                       {"y0", o.y0},
                       {"heading", o.heading},
                       {"vx", o.vx},
                       {"vy", o.vy},
                       {"length", o.length},
                       {"width", o.width},
                       {"height", o.height}});
  }
  const json j = {{"format", "l2r-synthetic-corpus"},
                  {"seed", corpus.spec.seed},
                  {"spec", spec_json(corpus.spec)},
                  {"frames", frames},
                  {"objects", objects},
                  {"feature_batch", features_json(features)}};
  return j.dump(2) + "\n";
}

void write_corpus(const SyntheticCorpus& corpus, const FeatureBatchSpec& features, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "lidar", ec);
  if (!ec) fs::create_directories(dir / "radar", ec);
  if (ec) throw IoError("cannot create corpus directory " + dir.string() + ": " + ec.message());
  std::string counts;
  for (std::size_t i = 0; i < corpus.lidar.size(); ++i) {
    const auto& id = corpus.lidar[i].frame_id();
    write_frame_native(corpus.lidar[i], dir / "lidar" / (id + ".l2rpcf"));
    write_frame_csv(corpus.radar[i], dir / "radar" / (id + ".csv"));
    counts += std::to_string(corpus.radar[i].size()) + "\n";
  }
  io::write_text_atomic(dir / "radar_counts.txt", counts);
  io::write_text_atomic(dir / "manifest.json", manifest_json(corpus, features));
}

CorpusOnDisk read_corpus(const std::filesystem::path& dir) {
  json j;
  try {
    j = json::parse(io::read_text(dir / "manifest.json"));
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("manifest.json: ") + e.what());
  }
  CorpusOnDisk out;
  try {
    out.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& f : j.at("frames")) {
      const auto id = f.at("frame_id").get<std::string>();
      const double ts = f.at("timestamp").get<double>();
      out.lidar.push_back(read_frame(dir / f.at("lidar").get<std::string>()).with_identity(id, ts));
      out.radar.push_back(read_frame(dir / f.at("radar").get<std::string>()).with_identity(id, ts));
    }
    if (j.contains("feature_batch")) {
      const auto& fb = j.at("feature_batch");
      FeatureBatchSpec spec;
      spec.seed = fb.at("seed").get<std::uint64_t>();
      spec.batch = fb.at("batch").get<std::size_t>();
      spec.channels = fb.at("channels").get<std::size_t>();
      spec.height = fb.at("height").get<std::size_t>();
      spec.width = fb.at("width").get<std::size_t>();
      spec.noise = fb.at("noise").get<double>();
      spec.offset_range = fb.at("offset_range").get<int>();
      out.features = spec;
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("manifest.json: ") + e.what());
  }
  return out;
}

}  // namespace l2r::synth
