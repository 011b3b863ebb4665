#pragma once
// Offset, confidence and class-map rendering to 8-bit RGB.
//
// Offsets use the Middlebury flow color wheel: direction picks the hue,
// magnitude (normalized by tau, clamped to 1) blends from white to the
// fully saturated wheel color. A zero vector is white.

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "ovenet/data.hpp"
#include "ovenet/label_map.hpp"
#include "ovenet/model.hpp"
#include "ovenet/tensor.hpp"

namespace ovenet {

/// The 55-entry wheel (RY 15, YG 6, GC 4, CB 11, BM 13, MR 6).
const std::vector<std::array<std::uint8_t, 3>>& flow_color_wheel();

/// Color of a normalized flow vector (u, v); |(u,v)| = 1 is saturated.
std::array<std::uint8_t, 3> flow_color(double u, double v);

/// Interleaved RGB of image `b` of an offset field (B,2,H,W), scaled by 1/tau.
template <typename T>
std::vector<std::uint8_t> render_offsets(const Tensor<T>& offsets, double tau, std::int64_t b = 0);

/// size x size wheel from the radial field u = (x - c)/c, v = (y - c)/c,
/// c = (size - 1)/2.
std::vector<std::uint8_t> render_flow_wheel(std::int64_t size);

/// Gray RGB of a (B,1,H,W) map with values in [0,1].
template <typename T>
std::vector<std::uint8_t> render_confidence(const Tensor<T>& confidence, std::int64_t b = 0);

/// Fixed palette: 0 black-gray background, then red, green, blue, yellow,
/// magenta, cyan, orange; later ids get hashed colors; the ignore id is black.
std::array<std::uint8_t, 3> class_palette(std::int32_t id);
std::vector<std::uint8_t> render_labels(const LabelMap& labels, std::int64_t b = 0);

/// Runs the model on one scene and writes offsets.ppm, confidence.ppm,
/// pred_initial.ppm, pred_seed.ppm and pred_fused.ppm into `out_dir`.
/// Baseline models get a white offset image and a black confidence image.
template <typename T>
void write_visualization(const ModelState<T>& state, const Scene& scene, const std::filesystem::path& out_dir);

}  // namespace ovenet
