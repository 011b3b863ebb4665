#include "ovenet/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace ovenet {
namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Implementation-independent draws (the standard distributions are not
// specified bit-for-bit across library vendors).
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::int64_t uniform_int(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

double gaussian(std::mt19937_64& rng) {
  const double u1 = 1.0 - unit(rng);
  const double u2 = unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

float quantize(double v) { return static_cast<float>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)) / 255.0f; }

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0));
}

}  // namespace

void SynthConfig::validate() const {
  if (num_classes < 2) throw ConfigError("synth: num_classes must be >= 2");
  if (height < 32 || width < 32) throw ConfigError("synth: height and width must be >= 32");
  if (min_shapes < 0 || max_shapes < min_shapes) throw ConfigError("synth: invalid shape count range");
  if (kinds.empty()) throw ConfigError("synth: no shape kinds enabled");
  if (noise_sigma < 0.0 || color_jitter < 0.0) throw ConfigError("synth: noise and jitter must be >= 0");
}

std::array<float, 3> class_color(int class_id) {
  static constexpr std::array<std::array<float, 3>, 8> kPalette{{
      {0.45f, 0.45f, 0.45f},
      {0.85f, 0.20f, 0.20f},
      {0.20f, 0.70f, 0.25f},
      {0.20f, 0.30f, 0.85f},
      {0.90f, 0.80f, 0.20f},
      {0.70f, 0.30f, 0.80f},
      {0.20f, 0.80f, 0.80f},
      {0.95f, 0.55f, 0.15f},
  }};
  if (class_id >= 0 && class_id < static_cast<int>(kPalette.size())) return kPalette[class_id];
  std::mt19937_64 rng(splitmix(static_cast<std::uint64_t>(class_id)));
  return {static_cast<float>(unit(rng)), static_cast<float>(unit(rng)), static_cast<float>(unit(rng))};
}

Scene generate_scene(const SynthConfig& cfg, std::uint64_t index) {
  cfg.validate();
  std::mt19937_64 rng(splitmix(splitmix(cfg.seed) ^ (index * 0xD1B54A32D192ED03ull + 1)));
  const std::int64_t h = cfg.height, w = cfg.width, plane = h * w;
  const std::int64_t base = std::min(h, w);

  std::vector<double> rgb(static_cast<std::size_t>(3 * plane));
  LabelMap labels(h, w, 0);
  auto jittered = [&](int cls) {
    auto c = class_color(cls);
    std::array<double, 3> out{};
    for (int ch = 0; ch < 3; ++ch) out[ch] = c[ch] + cfg.color_jitter * (2.0 * unit(rng) - 1.0);
    return out;
  };
  auto paint = [&](std::int64_t y, std::int64_t x, int cls, const std::array<double, 3>& color) {
    labels.at(y, x) = cls;
    for (int ch = 0; ch < 3; ++ch) rgb[ch * plane + y * w + x] = color[ch];
  };

  const auto background = jittered(0);
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) paint(y, x, 0, background);
  }

  const auto shapes = uniform_int(rng, cfg.min_shapes, cfg.max_shapes);
  for (std::int64_t s = 0; s < shapes; ++s) {
    const int cls = static_cast<int>(uniform_int(rng, 1, cfg.num_classes - 1));
    const ShapeKind kind = cfg.kinds[static_cast<std::size_t>(uniform_int(rng, 0, std::ssize(cfg.kinds) - 1))];
    const auto color = jittered(cls);
    switch (kind) {
      case ShapeKind::kRectangle: {
        const auto rh = uniform_int(rng, base / 12, base / 3);
        const auto rw = uniform_int(rng, base / 12, base / 3);
        const auto y0 = uniform_int(rng, 0, h - rh);
        const auto x0 = uniform_int(rng, 0, w - rw);
        for (auto y = y0; y < y0 + rh; ++y) {
          for (auto x = x0; x < x0 + rw; ++x) paint(y, x, cls, color);
        }
        break;
      }
      case ShapeKind::kStripe: {
        const bool horizontal = uniform_int(rng, 0, 1) == 0;
        const auto thickness = uniform_int(rng, base / 24, base / 10);
        const auto extent = horizontal ? h : w;
        const auto start = uniform_int(rng, 0, extent - thickness);
        for (std::int64_t y = 0; y < h; ++y) {
          for (std::int64_t x = 0; x < w; ++x) {
            const auto t = horizontal ? y : x;
            if (t >= start && t < start + thickness) paint(y, x, cls, color);
          }
        }
        break;
      }
      case ShapeKind::kDisc: {
        const auto r = uniform_int(rng, base / 20, base / 6);
        const auto cy = uniform_int(rng, 0, h - 1);
        const auto cx = uniform_int(rng, 0, w - 1);
        for (std::int64_t y = std::max<std::int64_t>(0, cy - r); y <= std::min(h - 1, cy + r); ++y) {
          for (std::int64_t x = std::max<std::int64_t>(0, cx - r); x <= std::min(w - 1, cx + r); ++x) {
            if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r) paint(y, x, cls, color);
          }
        }
        break;
      }
    }
  }

  std::vector<float> image(rgb.size());
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    const double noisy = cfg.noise_sigma > 0.0 ? rgb[i] + cfg.noise_sigma * gaussian(rng) : rgb[i];
    image[i] = quantize(noisy);
  }
  return Scene{Tensor<float>(Shape{3, h, w}, std::move(image)), std::move(labels)};
}

std::vector<Scene> generate_scenes(const SynthConfig& cfg, std::uint64_t count, std::uint64_t first_index) {
  std::vector<Scene> scenes;
  scenes.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) scenes.push_back(generate_scene(cfg, first_index + i));
  return scenes;
}

Scene resize_scene(const Scene& scene, std::int64_t height, std::int64_t width) {
  if (height < 1 || width < 1) throw ShapeError("resize_scene: target size must be positive");
  const std::int64_t ih = scene.height(), iw = scene.width();
  if (height == ih && width == iw) return Scene{scene.image.detach(), scene.labels};
  auto src = scene.image.values();
  std::vector<float> out(static_cast<std::size_t>(3 * height * width));
  LabelMap labels(height, width, 0);
  const double ry = static_cast<double>(ih) / static_cast<double>(height);
  const double rx = static_cast<double>(iw) / static_cast<double>(width);
  for (std::int64_t y = 0; y < height; ++y) {
    const double sy = std::max(0.0, (static_cast<double>(y) + 0.5) * ry - 0.5);
    const auto y0 = std::min(static_cast<std::int64_t>(sy), ih - 1);
    const auto y1 = std::min(y0 + 1, ih - 1);
    const double fy = sy - static_cast<double>(y0);
    const auto ny = std::min(static_cast<std::int64_t>((static_cast<double>(y) + 0.5) * ry), ih - 1);
    for (std::int64_t x = 0; x < width; ++x) {
      const double sx = std::max(0.0, (static_cast<double>(x) + 0.5) * rx - 0.5);
      const auto x0 = std::min(static_cast<std::int64_t>(sx), iw - 1);
      const auto x1 = std::min(x0 + 1, iw - 1);
      const double fx = sx - static_cast<double>(x0);
      for (int c = 0; c < 3; ++c) {
        const float* p = src.data() + c * ih * iw;
        const double top = (1 - fx) * p[y0 * iw + x0] + fx * p[y0 * iw + x1];
        const double bottom = (1 - fx) * p[y1 * iw + x0] + fx * p[y1 * iw + x1];
        out[c * height * width + y * width + x] = static_cast<float>((1 - fy) * top + fy * bottom);
      }
      const auto nx = std::min(static_cast<std::int64_t>((static_cast<double>(x) + 0.5) * rx), iw - 1);
      labels.at(y, x) = scene.labels.at(ny, nx);
    }
  }
  return Scene{Tensor<float>(Shape{3, height, width}, std::move(out)), std::move(labels)};
}

Scene flip_horizontal(const Scene& scene) {
  const std::int64_t h = scene.height(), w = scene.width();
  auto src = scene.image.values();
  std::vector<float> out(src.size());
  LabelMap labels(h, w, 0);
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) out[(c * h + y) * w + x] = src[(c * h + y) * w + (w - 1 - x)];
      labels.at(y, x) = scene.labels.at(y, w - 1 - x);
    }
  }
  return Scene{Tensor<float>(Shape{3, h, w}, std::move(out)), std::move(labels)};
}

namespace {

std::int64_t scaled_extent(std::int64_t extent, double scale) {
  return std::max<std::int64_t>(1, std::llround(static_cast<double>(extent) * scale));
}

void check_crop(const AugmentConfig& cfg) {
  if (cfg.crop_height < 1 || cfg.crop_width < 1) {
    throw ShapeError("augment: degenerate crop " + std::to_string(cfg.crop_height) + "x" +
                     std::to_string(cfg.crop_width));
  }
  if (!(cfg.scale_min > 0.0) || cfg.scale_max < cfg.scale_min) throw ConfigError("augment: invalid scale range");
}

}  // namespace

AugmentParams sample_augment(std::int64_t height, std::int64_t width, const AugmentConfig& cfg,
                             std::mt19937_64& rng) {
  check_crop(cfg);
  AugmentParams p;
  p.scale = cfg.scale_min + (cfg.scale_max - cfg.scale_min) * unit(rng);
  const auto sh = std::max(scaled_extent(height, p.scale), cfg.crop_height);
  const auto sw = std::max(scaled_extent(width, p.scale), cfg.crop_width);
  p.crop_y = uniform_int(rng, 0, sh - cfg.crop_height);
  p.crop_x = uniform_int(rng, 0, sw - cfg.crop_width);
  p.flip = unit(rng) < cfg.flip_probability;
  return p;
}

Scene apply_augment(const Scene& scene, const AugmentParams& params, const AugmentConfig& cfg) {
  check_crop(cfg);
  const Scene scaled =
      resize_scene(scene, scaled_extent(scene.height(), params.scale), scaled_extent(scene.width(), params.scale));
  const std::int64_t sh = scaled.height(), sw = scaled.width();
  const std::int64_t ch = cfg.crop_height, cw = cfg.crop_width;
  if (params.crop_y < 0 || params.crop_x < 0 || params.crop_y + ch > std::max(sh, ch) ||
      params.crop_x + cw > std::max(sw, cw)) {
    throw ShapeError("augment: crop window outside the scaled scene");
  }
  auto src = scaled.image.values();
  std::vector<float> out(static_cast<std::size_t>(3 * ch * cw), 0.0f);
  LabelMap labels(ch, cw, cfg.ignore_id);
  for (std::int64_t y = 0; y < ch; ++y) {
    const auto sy = y + params.crop_y;
    if (sy >= sh) continue;
    for (std::int64_t x = 0; x < cw; ++x) {
      const auto sx = x + params.crop_x;
      if (sx >= sw) continue;
      for (int c = 0; c < 3; ++c) out[(c * ch + y) * cw + x] = src[(c * sh + sy) * sw + sx];
      labels.at(y, x) = scaled.labels.at(sy, sx);
    }
  }
  Scene cropped{Tensor<float>(Shape{3, ch, cw}, std::move(out)), std::move(labels)};
  return params.flip ? flip_horizontal(cropped) : cropped;
}

Scene augment(const Scene& scene, const AugmentConfig& cfg, std::mt19937_64& rng) {
  return apply_augment(scene, sample_augment(scene.height(), scene.width(), cfg, rng), cfg);
}

namespace {

std::string read_token(std::istream& in) {
  std::string token;
  while (true) {
    const int c = in.peek();
    if (c == EOF) break;
    if (c == '#') {
      std::string comment;
      std::getline(in, comment);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  while (in.peek() != EOF && !std::isspace(in.peek())) token.push_back(static_cast<char>(in.get()));
  return token;
}

struct NetpbmHeader {
  std::int64_t width, height;
};

NetpbmHeader read_header(std::istream& in, const std::filesystem::path& path, const char* magic) {
  if (read_token(in) != magic) throw IoError(path.string() + ": expected binary " + magic + " file");
  NetpbmHeader h{};
  try {
    h.width = std::stoll(read_token(in));
    h.height = std::stoll(read_token(in));
    if (std::stoll(read_token(in)) != 255) throw IoError(path.string() + ": only maxval 255 is supported");
  } catch (const std::logic_error&) {
    throw IoError(path.string() + ": malformed header");
  }
  if (h.width < 1 || h.height < 1) throw IoError(path.string() + ": invalid dimensions");
  in.get();  // single whitespace before the raster
  return h;
}

std::vector<std::uint8_t> read_raster(std::istream& in, const std::filesystem::path& path, std::size_t bytes) {
  std::vector<std::uint8_t> raster(bytes);
  in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw IoError(path.string() + ": truncated raster");
  return raster;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

}  // namespace

void write_rgb_ppm(const std::filesystem::path& path, std::int64_t height, std::int64_t width,
                   const std::vector<std::uint8_t>& rgb) {
  if (static_cast<std::int64_t>(rgb.size()) != 3 * height * width) throw ShapeError("write_rgb_ppm: size mismatch");
  auto out = open_out(path);
  out << "P6\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

void write_ppm(const std::filesystem::path& path, const Tensor<float>& image) {
  if (image.rank() != 3 || image.dim(0) != 3) throw ShapeError("write_ppm: image must be (3,H,W)");
  const auto h = image.dim(1), w = image.dim(2), plane = h * w;
  auto v = image.values();
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(3 * plane));
  for (std::int64_t p = 0; p < plane; ++p) {
    for (int c = 0; c < 3; ++c) rgb[3 * p + c] = to_byte(v[c * plane + p]);
  }
  write_rgb_ppm(path, h, w, rgb);
}

Tensor<float> read_ppm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const auto hdr = read_header(in, path, "P6");
  const auto plane = hdr.width * hdr.height;
  const auto raster = read_raster(in, path, static_cast<std::size_t>(3 * plane));
  std::vector<float> v(raster.size());
  for (std::int64_t p = 0; p < plane; ++p) {
    for (int c = 0; c < 3; ++c) v[c * plane + p] = static_cast<float>(raster[3 * p + c]) / 255.0f;
  }
  return Tensor<float>(Shape{3, hdr.height, hdr.width}, std::move(v));
}

void write_pgm(const std::filesystem::path& path, const LabelMap& labels) {
  if (labels.batch != 1) throw ShapeError("write_pgm: expected a single label map");
  auto out = open_out(path);
  out << "P5\n" << labels.width << ' ' << labels.height << "\n255\n";
  std::vector<char> raster(labels.ids.size());
  for (std::size_t i = 0; i < raster.size(); ++i) {
    const auto id = labels.ids[i];
    if (id < 0 || id > 255) throw IoError("write_pgm: label id " + std::to_string(id) + " does not fit in 8 bits");
    raster[i] = static_cast<char>(static_cast<std::uint8_t>(id));
  }
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

LabelMap read_pgm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const auto hdr = read_header(in, path, "P5");
  const auto raster = read_raster(in, path, static_cast<std::size_t>(hdr.width * hdr.height));
  LabelMap labels(hdr.height, hdr.width, 0);
  for (std::size_t i = 0; i < raster.size(); ++i) labels.ids[i] = raster[i];
  return labels;
}

void save_scene(const std::filesystem::path& dir, const std::string& stem, const Scene& scene) {
  write_ppm(dir / (stem + ".ppm"), scene.image);
  write_pgm(dir / (stem + ".pgm"), scene.labels);
}

std::vector<NamedScene> load_dataset(const std::filesystem::path& dir, int num_classes, std::int32_t ignore_id) {
  if (!std::filesystem::is_directory(dir)) throw IoError(dir.string() + ": not a directory");
  std::map<std::string, std::pair<bool, bool>> stems;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    const auto stem = entry.path().stem().string();
    if (ext == ".ppm") stems[stem].first = true;
    if (ext == ".pgm") stems[stem].second = true;
  }
  std::vector<NamedScene> scenes;
  for (const auto& [stem, present] : stems) {
    if (!present.first) throw IoError((dir / (stem + ".pgm")).string() + ": missing image " + stem + ".ppm");
    if (!present.second) throw IoError((dir / (stem + ".ppm")).string() + ": missing label map " + stem + ".pgm");
    const auto label_path = dir / (stem + ".pgm");
    Scene scene{read_ppm(dir / (stem + ".ppm")), read_pgm(label_path)};
    if (scene.image.dim(1) != scene.labels.height || scene.image.dim(2) != scene.labels.width) {
      throw IoError(label_path.string() + ": label map size differs from image size");
    }
    for (auto id : scene.labels.ids) {
      if (id != ignore_id && id >= num_classes) {
        throw IoError(label_path.string() + ": label " + std::to_string(id) + " out of range for " +
                      std::to_string(num_classes) + " classes");
      }
    }
    scenes.push_back({stem, std::move(scene)});
  }
  return scenes;
}

std::uint64_t dataset_checksum(const std::vector<Scene>& scenes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::uint8_t byte) {
    h ^= byte;
    h *= 0x100000001b3ull;
  };
  for (const auto& s : scenes) {
    for (float v : s.image.values()) mix(to_byte(v));
    for (auto id : s.labels.ids) mix(static_cast<std::uint8_t>(id));
  }
  return h;
}

}  // namespace ovenet
