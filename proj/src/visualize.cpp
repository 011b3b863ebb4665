#include "ovenet/visualize.hpp"

#include <cmath>
#include <numbers>

#include "ovenet/head.hpp"
#include "ovenet/trainer.hpp"

namespace ovenet {

const std::vector<std::array<std::uint8_t, 3>>& flow_color_wheel() {
  static const auto wheel = [] {
    constexpr int kRY = 15, kYG = 6, kGC = 4, kCB = 11, kBM = 13, kMR = 6;
    std::vector<std::array<std::uint8_t, 3>> w;
    auto ramp = [](int i, int n) { return static_cast<std::uint8_t>(255 * i / n); };
    for (int i = 0; i < kRY; ++i) w.push_back({255, ramp(i, kRY), 0});
    for (int i = 0; i < kYG; ++i) w.push_back({static_cast<std::uint8_t>(255 - ramp(i, kYG)), 255, 0});
    for (int i = 0; i < kGC; ++i) w.push_back({0, 255, ramp(i, kGC)});
    for (int i = 0; i < kCB; ++i) w.push_back({0, static_cast<std::uint8_t>(255 - ramp(i, kCB)), 255});
    for (int i = 0; i < kBM; ++i) w.push_back({ramp(i, kBM), 0, 255});
    for (int i = 0; i < kMR; ++i) w.push_back({255, 0, static_cast<std::uint8_t>(255 - ramp(i, kMR))});
    return w;
  }();
  return wheel;
}

std::array<std::uint8_t, 3> flow_color(double u, double v) {
  const auto& wheel = flow_color_wheel();
  const int ncols = static_cast<int>(wheel.size());
  const double rad = std::min(std::sqrt(u * u + v * v), 1.0);
  const double a = std::atan2(-v, -u) / std::numbers::pi;
  const double fk = (a + 1.0) / 2.0 * (ncols - 1);
  const int k0 = static_cast<int>(std::floor(fk));
  const int k1 = (k0 + 1) % ncols;
  const double f = fk - k0;
  std::array<std::uint8_t, 3> rgb{};
  for (int ch = 0; ch < 3; ++ch) {
    const double c0 = wheel[k0][ch] / 255.0, c1 = wheel[k1][ch] / 255.0;
    double col = (1.0 - f) * c0 + f * c1;
    col = 1.0 - rad * (1.0 - col);
    rgb[ch] = static_cast<std::uint8_t>(std::floor(255.0 * col));
  }
  return rgb;
}

template <typename T>
std::vector<std::uint8_t> render_offsets(const Tensor<T>& offsets, double tau, std::int64_t b) {
  if (offsets.rank() != 4 || offsets.dim(1) != 2) {
    throw ShapeError("render_offsets: expected (B,2,H,W), got " + shape_string(offsets.shape()));
  }
  if (!(tau > 0.0)) throw ConfigError("render_offsets: tau must be positive");
  if (b < 0 || b >= offsets.dim(0)) throw ShapeError("render_offsets: batch index out of range");
  const std::int64_t plane = offsets.dim(2) * offsets.dim(3);
  const auto v = offsets.values();
  const T* ou = v.data() + b * 2 * plane;
  const T* ov = ou + plane;
  std::vector<std::uint8_t> rgb;
  rgb.reserve(static_cast<std::size_t>(plane * 3));
  for (std::int64_t p = 0; p < plane; ++p) {
    const auto c = flow_color(static_cast<double>(ou[p]) / tau, static_cast<double>(ov[p]) / tau);
    rgb.insert(rgb.end(), c.begin(), c.end());
  }
  return rgb;
}

std::vector<std::uint8_t> render_flow_wheel(std::int64_t size) {
  if (size < 2) throw ConfigError("render_flow_wheel: size must be >= 2");
  const double c = (static_cast<double>(size) - 1.0) / 2.0;
  std::vector<std::uint8_t> rgb;
  rgb.reserve(static_cast<std::size_t>(size * size * 3));
  for (std::int64_t y = 0; y < size; ++y) {
    for (std::int64_t x = 0; x < size; ++x) {
      const auto col = flow_color((static_cast<double>(x) - c) / c, (static_cast<double>(y) - c) / c);
      rgb.insert(rgb.end(), col.begin(), col.end());
    }
  }
  return rgb;
}

template <typename T>
std::vector<std::uint8_t> render_confidence(const Tensor<T>& confidence, std::int64_t b) {
  if (confidence.rank() != 4 || confidence.dim(1) != 1) {
    throw ShapeError("render_confidence: expected (B,1,H,W), got " + shape_string(confidence.shape()));
  }
  if (b < 0 || b >= confidence.dim(0)) throw ShapeError("render_confidence: batch index out of range");
  const std::int64_t plane = confidence.dim(2) * confidence.dim(3);
  const T* f = confidence.values().data() + b * plane;
  std::vector<std::uint8_t> rgb;
  rgb.reserve(static_cast<std::size_t>(plane * 3));
  for (std::int64_t p = 0; p < plane; ++p) {
    const double g = std::clamp(static_cast<double>(f[p]), 0.0, 1.0);
    const auto byte = static_cast<std::uint8_t>(std::lround(255.0 * g));
    rgb.insert(rgb.end(), {byte, byte, byte});
  }
  return rgb;
}

std::array<std::uint8_t, 3> class_palette(std::int32_t id) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 8> kPalette = {{
      {64, 64, 64},
      {228, 26, 28},
      {77, 175, 74},
      {55, 126, 184},
      {255, 217, 47},
      {152, 78, 163},
      {23, 190, 207},
      {255, 127, 0},
  }};
  if (id == kIgnoreId) return {0, 0, 0};
  if (id >= 0 && id < static_cast<std::int32_t>(kPalette.size())) return kPalette[static_cast<std::size_t>(id)];
  std::uint32_t h = 2166136261u ^ static_cast<std::uint32_t>(id);
  h *= 16777619u;
  h ^= h >> 13;
  h *= 0x5bd1e995u;
  return {static_cast<std::uint8_t>(h), static_cast<std::uint8_t>(h >> 8), static_cast<std::uint8_t>(h >> 16)};
}

std::vector<std::uint8_t> render_labels(const LabelMap& labels, std::int64_t b) {
  if (b < 0 || b >= labels.batch) throw ShapeError("render_labels: batch index out of range");
  std::vector<std::uint8_t> rgb;
  rgb.reserve(static_cast<std::size_t>(labels.height * labels.width * 3));
  for (std::int64_t y = 0; y < labels.height; ++y) {
    for (std::int64_t x = 0; x < labels.width; ++x) {
      const auto c = class_palette(labels.at(b, y, x));
      rgb.insert(rgb.end(), c.begin(), c.end());
    }
  }
  return rgb;
}

template <typename T>
void write_visualization(const ModelState<T>& state, const Scene& scene, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto [images, labels] = make_batch<T>({&scene});
  const auto out = forward(state, images);
  const auto h = scene.height(), w = scene.width();
  if (out.offsets) {
    write_rgb_ppm(out_dir / "offsets.ppm", h, w, render_offsets(*out.offsets, state.config.tau));
    write_rgb_ppm(out_dir / "confidence.ppm", h, w, render_confidence(*out.confidence));
  } else {
    write_rgb_ppm(out_dir / "offsets.ppm", h, w, std::vector<std::uint8_t>(static_cast<std::size_t>(h * w * 3), 255));
    write_rgb_ppm(out_dir / "confidence.ppm", h, w, std::vector<std::uint8_t>(static_cast<std::size_t>(h * w * 3), 0));
  }
  write_rgb_ppm(out_dir / "pred_initial.ppm", h, w, render_labels(predict_classes(out.initial_logits)));
  write_rgb_ppm(out_dir / "pred_seed.ppm", h, w, render_labels(predict_classes(out.seed_logits)));
  write_rgb_ppm(out_dir / "pred_fused.ppm", h, w, render_labels(predict_classes(out.fused_logits)));
}

template std::vector<std::uint8_t> render_offsets(const Tensor<float>&, double, std::int64_t);
template std::vector<std::uint8_t> render_offsets(const Tensor<double>&, double, std::int64_t);
template std::vector<std::uint8_t> render_confidence(const Tensor<float>&, std::int64_t);
template std::vector<std::uint8_t> render_confidence(const Tensor<double>&, std::int64_t);
template void write_visualization(const ModelState<float>&, const Scene&, const std::filesystem::path&);
template void write_visualization(const ModelState<double>&, const Scene&, const std::filesystem::path&);

}  // namespace ovenet
