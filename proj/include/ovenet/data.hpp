#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ovenet/label_map.hpp"
#include "ovenet/tensor.hpp"

namespace ovenet {

/// RGB image (3,H,W) with values in [0,1] and its per-pixel labels.
struct Scene {
  Tensor<float> image;
  LabelMap labels;

  std::int64_t height() const { return labels.height; }
  std::int64_t width() const { return labels.width; }
};

enum class ShapeKind { kRectangle, kStripe, kDisc };

struct SynthConfig {
  int num_classes = 6;
  int height = 96;
  int width = 96;
  int min_shapes = 3;
  int max_shapes = 8;
  /// Uniform per-shape, per-channel perturbation of the class color.
  double color_jitter = 0.05;
  double noise_sigma = 0.08;
  std::vector<ShapeKind> kinds{ShapeKind::kRectangle, ShapeKind::kStripe, ShapeKind::kDisc};
  std::uint64_t seed = 0;

  void validate() const;
};

/// Mean RGB color of a class; class 0 is the background.
std::array<float, 3> class_color(int class_id);

/// Deterministic in (cfg.seed, index). Background is class 0; shapes are
/// painted back to front with class colors, per-shape jitter and Gaussian
/// pixel noise, then quantized to 8 bits so a disk round trip is exact.
Scene generate_scene(const SynthConfig& cfg, std::uint64_t index);
std::vector<Scene> generate_scenes(const SynthConfig& cfg, std::uint64_t count, std::uint64_t first_index = 0);

struct AugmentConfig {
  std::int64_t crop_height = 96;
  std::int64_t crop_width = 96;
  double scale_min = 0.5;
  double scale_max = 2.0;
  double flip_probability = 0.5;
  std::int32_t ignore_id = kIgnoreId;
};

struct AugmentParams {
  double scale = 1.0;
  std::int64_t crop_y = 0;
  std::int64_t crop_x = 0;
  bool flip = false;
};

/// Draws scale, crop offset and flip for a scene of the given size. Scenes
/// that end up smaller than the crop are padded (image 0, labels ignore_id)
/// before cropping.
AugmentParams sample_augment(std::int64_t height, std::int64_t width, const AugmentConfig& cfg, std::mt19937_64& rng);
/// Rescale (bilinear image, nearest labels), pad, crop, then flip.
Scene apply_augment(const Scene& scene, const AugmentParams& params, const AugmentConfig& cfg);
Scene augment(const Scene& scene, const AugmentConfig& cfg, std::mt19937_64& rng);

Scene resize_scene(const Scene& scene, std::int64_t height, std::int64_t width);
Scene flip_horizontal(const Scene& scene);

// Binary Netpbm I/O. Images are P6 RGB, label maps P5 8-bit.
void write_ppm(const std::filesystem::path& path, const Tensor<float>& image);
Tensor<float> read_ppm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const LabelMap& labels);
LabelMap read_pgm(const std::filesystem::path& path);
/// Writes raw 8-bit RGB (H*W*3, interleaved).
void write_rgb_ppm(const std::filesystem::path& path, std::int64_t height, std::int64_t width,
                   const std::vector<std::uint8_t>& rgb);

void save_scene(const std::filesystem::path& dir, const std::string& stem, const Scene& scene);

struct NamedScene {
  std::string stem;
  Scene scene;
};

/// Reads every `<stem>.ppm` / `<stem>.pgm` pair from `dir`, sorted by stem.
/// Unpaired files, size mismatches, and labels that are neither < num_classes
/// nor ignore_id raise IoError naming the offending file.
std::vector<NamedScene> load_dataset(const std::filesystem::path& dir, int num_classes,
                                     std::int32_t ignore_id = kIgnoreId);

/// FNV-1a over quantized image bytes and labels, in order.
std::uint64_t dataset_checksum(const std::vector<Scene>& scenes);

}  // namespace ovenet
