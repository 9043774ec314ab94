#include <gtest/gtest.h>

#include <filesystem>

#include "l2r/error.hpp"
#include "l2r/synth.hpp"

using namespace l2r;
using namespace l2r::synth;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("l2r_synth_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

SceneSpec small_spec(std::uint64_t seed) {
  SceneSpec s;
  s.seed = seed;
  s.n_frames = 6;
  s.n_objects = 4;
  s.ego_radius = 30.0;
  return s;
}

}  // namespace

TEST(GenScene, SameSeedSameBytes) {
  const auto a = gen_scene(small_spec(3)), b = gen_scene(small_spec(3)), c = gen_scene(small_spec(4));
  EXPECT_EQ(a.lidar, b.lidar);
  EXPECT_EQ(a.radar, b.radar);
  EXPECT_NE(a.lidar, c.lidar);
}

TEST(GenScene, FrameIdentityAndPlausibility) {
  const auto spec = small_spec(1);
  const auto c = gen_scene(spec);
  ASSERT_EQ(c.lidar.size(), spec.n_frames);
  ASSERT_EQ(c.radar.size(), spec.n_frames);
  EXPECT_EQ(c.objects.size(), spec.n_objects);
  for (std::size_t i = 0; i < spec.n_frames; ++i) {
    EXPECT_EQ(c.lidar[i].frame_id(), c.radar[i].frame_id());
    EXPECT_DOUBLE_EQ(c.lidar[i].timestamp(), static_cast<double>(i) * spec.dt);
    EXPECT_LT(static_cast<double>(c.radar[i].size()), 0.1 * static_cast<double>(c.lidar[i].size()));
    EXPECT_TRUE(c.radar[i].has_velocity());
    for (const auto& p : c.radar[i].points()) EXPECT_EQ(p.z, 0.0);
  }
  EXPECT_EQ(c.lidar[0].frame_id(), "frame_0000");
}

TEST(GenScene, NoObjectsStillProducesGround) {
  auto spec = small_spec(2);
  spec.n_objects = 0;
  const auto c = gen_scene(spec);
  EXPECT_TRUE(c.objects.empty());
  for (const auto& f : c.lidar) EXPECT_GT(f.size(), 0u);
}

TEST(GenScene, ZeroFramesIsEmpty) {
  auto spec = small_spec(2);
  spec.n_frames = 0;
  const auto c = gen_scene(spec);
  EXPECT_TRUE(c.lidar.empty());
  EXPECT_TRUE(c.radar.empty());
}

TEST(SceneSpec, Validation) {
  auto s = small_spec(0);
  s.radar_density = s.lidar_density;
  EXPECT_THROW(s.validate(), ConfigError);
  s = small_spec(0);
  s.dt = 0;
  EXPECT_THROW(gen_scene(s), ConfigError);
}

TEST(FeatureBatch, NoiselessMapsAgreeUpToShift) {
  FeatureBatchSpec spec;
  spec.noise = 0.0;
  const auto fb = gen_feature_batch(spec);
  ASSERT_EQ(fb.scenes.size(), spec.batch);
  for (std::size_t b = 0; b < spec.batch; ++b) {
    const auto& s = fb.scenes[b];
    const auto ib = s.get(contrastive::Modality::image, contrastive::View::bev).tensor.data();
    const auto rb = s.get(contrastive::Modality::radar, contrastive::View::bev).tensor.data();
    const auto ifv = s.get(contrastive::Modality::image, contrastive::View::fv).tensor.data();
    EXPECT_TRUE(std::equal(ib.begin(), ib.end(), ifv.begin()));
    const int off = fb.offsets[b];
    EXPECT_LE(std::abs(off), spec.offset_range);
    const std::size_t w = spec.width;
    for (std::size_t row = 0; row < spec.channels * spec.height; ++row)
      for (std::size_t j = 0; j < w; ++j)
        EXPECT_EQ(rb[row * w + j], ib[row * w + static_cast<std::size_t>(static_cast<int>(j + w) + off) % w]);
  }
}

TEST(FeatureBatch, InBoundColumns) {
  EXPECT_EQ(in_bound_columns(4, 0).size(), 4u);
  EXPECT_EQ(in_bound_columns(4, 1), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(in_bound_columns(4, -1), (std::vector<std::size_t>{1, 2, 3}));
}

TEST(Corpus, RoundTrip) {
  const auto dir = scratch("roundtrip");
  const auto c = gen_scene(small_spec(5));
  write_corpus(c, pretrain_batch_spec(5), dir);
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "radar_counts.txt"));
  const auto back = read_corpus(dir);
  EXPECT_EQ(back.seed, 5u);
  ASSERT_EQ(back.lidar.size(), c.lidar.size());
  for (std::size_t i = 0; i < c.lidar.size(); ++i) {
    EXPECT_EQ(back.lidar[i], c.lidar[i]);
    EXPECT_EQ(back.radar[i].frame_id(), c.radar[i].frame_id());
    EXPECT_EQ(back.radar[i].size(), c.radar[i].size());
  }
  ASSERT_TRUE(back.features.has_value());
  EXPECT_EQ(back.features->noise, pretrain_batch_spec(5).noise);
  EXPECT_EQ(manifest_json(c, pretrain_batch_spec(5)), manifest_json(gen_scene(small_spec(5)), pretrain_batch_spec(5)));
  std::filesystem::remove_all(dir);
}

TEST(Corpus, MissingManifest) {
  const auto dir = scratch("missing");
  std::filesystem::create_directories(dir);
  EXPECT_THROW(read_corpus(dir), IoError);
  std::filesystem::remove_all(dir);
}

TEST(RadarCounts, MatchFrames) {
  const auto c = gen_scene(small_spec(8));
  const auto counts = radar_counts(c);
  ASSERT_EQ(counts.size(), c.radar.size());
  for (std::size_t i = 0; i < counts.size(); ++i) EXPECT_EQ(counts[i], static_cast<std::int64_t>(c.radar[i].size()));
}
