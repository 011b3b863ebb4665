#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>

#include "ovenet/data.hpp"
#include "temp_dir.hpp"

using namespace ovenet;
using ovenet::testing::TempDir;

namespace {
SynthConfig small_synth(std::uint64_t seed = 0) {
  SynthConfig c;
  c.height = 40;
  c.width = 48;
  c.seed = seed;
  return c;
}
std::vector<float> vec(const Tensor<float>& t) { return {t.values().begin(), t.values().end()}; }
}  // namespace

TEST(Synth, DeterministicInSeedAndIndex) {
  const auto a = generate_scene(small_synth(3), 7);
  const auto b = generate_scene(small_synth(3), 7);
  const auto c = generate_scene(small_synth(4), 7);
  EXPECT_EQ(vec(a.image), vec(b.image));
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NE(vec(a.image), vec(c.image));
  EXPECT_EQ(dataset_checksum({a}), dataset_checksum({b}));
  EXPECT_NE(dataset_checksum({a}), dataset_checksum({c}));
}

TEST(Synth, LabelsInRangeAndPixelsQuantized) {
  const auto scenes = generate_scenes(small_synth(), 10);
  std::set<int> seen;
  for (const auto& s : scenes) {
    EXPECT_EQ(s.image.shape(), (Shape{3, 40, 48}));
    for (auto id : s.labels.ids) {
      ASSERT_GE(id, 0);
      ASSERT_LT(id, 6);
      seen.insert(id);
    }
    for (float v : s.image.values()) {
      ASSERT_GE(v, 0.0f);
      ASSERT_LE(v, 1.0f);
      ASSERT_FLOAT_EQ(v * 255.0f, std::round(v * 255.0f));
    }
  }
  EXPECT_GE(seen.size(), 4u);
}

TEST(Synth, Validation) {
  auto c = small_synth();
  c.height = 16;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_synth();
  c.num_classes = 1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Netpbm, RoundTripIsExact) {
  TempDir dir;
  const auto s = generate_scene(small_synth(1), 0);
  save_scene(dir.path(), "a", s);
  EXPECT_EQ(vec(read_ppm(dir / "a.ppm")), vec(s.image));
  EXPECT_EQ(read_pgm(dir / "a.pgm"), s.labels);
}

TEST(Netpbm, RejectsMalformedFiles) {
  TempDir dir;
  std::ofstream(dir / "bad.ppm") << "P3\n2 2\n255\n";
  EXPECT_THROW(read_ppm(dir / "bad.ppm"), IoError);
  std::ofstream(dir / "short.ppm", std::ios::binary) << "P6\n2 2\n255\nabc";
  EXPECT_THROW(read_ppm(dir / "short.ppm"), IoError);
  EXPECT_THROW(read_pgm(dir / "missing.pgm"), IoError);
}

TEST(LoadDataset, SortedByStemAndValidated) {
  TempDir dir;
  const auto scenes = generate_scenes(small_synth(2), 3);
  save_scene(dir.path(), "s2", scenes[2]);
  save_scene(dir.path(), "s0", scenes[0]);
  save_scene(dir.path(), "s1", scenes[1]);
  const auto loaded = load_dataset(dir.path(), 6);
  ASSERT_EQ(loaded.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(loaded[i].stem, "s" + std::to_string(i));
    EXPECT_EQ(loaded[i].scene.labels, scenes[i].labels);
  }
  EXPECT_THROW(load_dataset(dir.path(), 2), IoError);  // labels >= 2 present
  std::filesystem::remove(dir / "s1.pgm");
  try {
    load_dataset(dir.path(), 6);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("s1"), std::string::npos);
  }
}

TEST(LoadDataset, EmptyDirectoryIsEmpty) {
  TempDir dir;
  EXPECT_TRUE(load_dataset(dir.path(), 6).empty());
  EXPECT_THROW(load_dataset(dir / "nope", 6), IoError);
}

TEST(Augment, CropSizeAndDeterminism) {
  const auto s = generate_scene(small_synth(5), 0);
  AugmentConfig cfg;
  cfg.crop_height = 32;
  cfg.crop_width = 32;
  std::mt19937_64 r1(9), r2(9);
  const auto a = augment(s, cfg, r1);
  const auto b = augment(s, cfg, r2);
  EXPECT_EQ(a.image.shape(), (Shape{3, 32, 32}));
  EXPECT_EQ(a.labels.height, 32);
  EXPECT_EQ(vec(a.image), vec(b.image));
  EXPECT_EQ(a.labels, b.labels);
}

TEST(Augment, IdentityParamsReproduceTheCrop) {
  const auto s = generate_scene(small_synth(6), 0);
  AugmentConfig cfg;
  cfg.crop_height = 40;
  cfg.crop_width = 48;
  const auto out = apply_augment(s, AugmentParams{1.0, 0, 0, false}, cfg);
  EXPECT_EQ(vec(out.image), vec(s.image));
  EXPECT_EQ(out.labels, s.labels);
}

TEST(Augment, SmallScenesArePaddedWithIgnore) {
  const auto s = generate_scene(small_synth(7), 0);
  AugmentConfig cfg;
  cfg.crop_height = 40;
  cfg.crop_width = 48;
  const auto out = apply_augment(s, AugmentParams{0.5, 0, 0, false}, cfg);
  EXPECT_EQ(out.labels.at(39, 47), kIgnoreId);
  EXPECT_NE(out.labels.at(0, 0), kIgnoreId);
}

TEST(Augment, FlipTwiceIsIdentity) {
  const auto s = generate_scene(small_synth(8), 0);
  const auto f = flip_horizontal(s);
  EXPECT_EQ(f.labels.at(3, 0), s.labels.at(3, 47));
  const auto ff = flip_horizontal(f);
  EXPECT_EQ(vec(ff.image), vec(s.image));
  EXPECT_EQ(ff.labels, s.labels);
}

TEST(Augment, ResizeKeepsLabelsInSet) {
  const auto s = generate_scene(small_synth(9), 0);
  const auto r = resize_scene(s, 60, 72);
  EXPECT_EQ(r.image.shape(), (Shape{3, 60, 72}));
  const std::set<int> before(s.labels.ids.begin(), s.labels.ids.end());
  for (auto id : r.labels.ids) EXPECT_TRUE(before.count(id));
}
