#include "dnirb/dataset.hpp"

#include <algorithm>
#include <memory>
#include <cmath>
#include <random>

#include "dnirb/errors.hpp"

namespace dnirb {

AugmentationSet AugmentationSet::none() {
  AugmentationSet s;
  s.flip = false;
  s.rotations = {true, false, false, false};
  s.scales = {1.0};
  return s;
}

AugmentationSet AugmentationSet::dihedral() {
  AugmentationSet s;
  s.scales = {1.0};
  return s;
}

std::size_t AugmentationSet::transforms_per_patch() const {
  std::size_t rot = 1;  // identity always present
  for (std::size_t i = 1; i < 4; ++i) rot += rotations[i] ? 1 : 0;
  return rot * (flip ? 2 : 1);
}

std::size_t patch_grid_count(std::size_t dim, const PatchSpec& spec) {
  if (spec.stride < 1 || spec.stride > spec.patch_size || spec.patch_size < 1) {
    throw ConfigError("patch spec requires 1 <= stride <= patch_size, got stride " +
                      std::to_string(spec.stride) + ", patch " +
                      std::to_string(spec.patch_size));
  }
  if (dim < spec.patch_size) {
    throw DataError("image dimension " + std::to_string(dim) +
                    " smaller than patch size " + std::to_string(spec.patch_size));
  }
  return (dim - spec.patch_size) / spec.stride + 1;
}

std::vector<GrayImage> extract_patches(const GrayImage& img, const PatchSpec& spec) {
  const std::size_t nx = patch_grid_count(img.width, spec);
  const std::size_t ny = patch_grid_count(img.height, spec);
  const std::size_t p = spec.patch_size;
  std::vector<GrayImage> out;
  out.reserve(nx * ny);
  for (std::size_t gy = 0; gy < ny; ++gy) {
    for (std::size_t gx = 0; gx < nx; ++gx) {
      GrayImage patch(p, p);
      const std::size_t x0 = gx * spec.stride, y0 = gy * spec.stride;
      for (std::size_t y = 0; y < p; ++y) {
        const auto* src = img.pixels.data() + (y0 + y) * img.width + x0;
        std::copy_n(src, p, patch.pixels.data() + y * p);
      }
      out.push_back(std::move(patch));
    }
  }
  return out;
}

GrayImage rotate90(const GrayImage& img) {
  // Counter-clockwise: source (x, y) lands at (y, w - 1 - x).
  GrayImage out(img.height, img.width);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      out.at(y, img.width - 1 - x) = img.at(x, y);
    }
  }
  return out;
}

GrayImage flip_horizontal(const GrayImage& img) {
  GrayImage out = img;
  for (std::size_t y = 0; y < img.height; ++y) {
    auto row = out.pixels.begin() + static_cast<std::ptrdiff_t>(y * img.width);
    std::reverse(row, row + static_cast<std::ptrdiff_t>(img.width));
  }
  return out;
}

std::vector<GrayImage> augment(const GrayImage& patch, const AugmentationSet& set) {
  if (patch.width != patch.height) {
    throw ShapeError("augment expects a square patch, got " + std::to_string(patch.width) +
                     "x" + std::to_string(patch.height));
  }
  std::vector<GrayImage> out;
  GrayImage rotated = patch;
  for (std::size_t r = 0; r < 4; ++r) {
    if (r == 0 || set.rotations[r]) {
      out.push_back(rotated);
      if (set.flip) out.push_back(flip_horizontal(rotated));
    }
    rotated = rotate90(rotated);
  }
  return out;
}

GrayImage resize_bilinear(const GrayImage& img, double factor) {
  if (!(factor > 0.0)) throw ConfigError("scale factor must be positive");
  if (factor == 1.0) return img;
  const auto w = static_cast<std::size_t>(std::lround(img.width * factor));
  const auto h = static_cast<std::size_t>(std::lround(img.height * factor));
  if (w == 0 || h == 0) throw ConfigError("scale factor shrinks image to nothing");
  GrayImage out(w, h);
  const double sx = static_cast<double>(img.width) / w;
  const double sy = static_cast<double>(img.height) / h;
  for (std::size_t y = 0; y < h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height - 1.0);
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);
    const double ty = fy - y0;
    for (std::size_t x = 0; x < w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width - 1.0);
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, img.width - 1);
      const double tx = fx - x0;
      const double top = img.at(x0, y0) * (1 - tx) + img.at(x1, y0) * tx;
      const double bot = img.at(x0, y1) * (1 - tx) + img.at(x1, y1) * tx;
      out.at(x, y) = static_cast<std::uint8_t>(std::lround(top * (1 - ty) + bot * ty));
    }
  }
  return out;
}

namespace {

std::vector<double> scales_with_identity(const AugmentationSet& set) {
  std::vector<double> scales = set.scales;
  if (std::find(scales.begin(), scales.end(), 1.0) == scales.end()) {
    scales.insert(scales.begin(), 1.0);
  }
  return scales;
}

bool fits(const GrayImage& img, const PatchSpec& spec) {
  return img.width >= spec.patch_size && img.height >= spec.patch_size;
}

}  // namespace

std::vector<GrayImage> extract_augmented(std::span<const GrayImage> images,
                                         const PatchSpec& spec,
                                         const AugmentationSet& set) {
  std::vector<GrayImage> out;
  for (const GrayImage& img : images) {
    for (double scale : scales_with_identity(set)) {
      const GrayImage scaled = resize_bilinear(img, scale);
      if (scale != 1.0 && !fits(scaled, spec)) continue;
      for (const GrayImage& patch : extract_patches(scaled, spec)) {
        for (GrayImage& a : augment(patch, set)) out.push_back(std::move(a));
      }
    }
  }
  return out;
}

PatchStats patch_stats(std::span<const GrayImage> images, const PatchSpec& spec,
                       const AugmentationSet& set) {
  PatchStats stats;
  stats.images = images.size();
  const std::size_t per_patch = set.transforms_per_patch();
  for (const GrayImage& img : images) {
    for (double scale : scales_with_identity(set)) {
      std::size_t w = img.width, h = img.height;
      if (scale != 1.0) {
        w = static_cast<std::size_t>(std::lround(img.width * scale));
        h = static_cast<std::size_t>(std::lround(img.height * scale));
        if (w < spec.patch_size || h < spec.patch_size) continue;
      }
      const std::size_t n = patch_grid_count(w, spec) * patch_grid_count(h, spec);
      if (scale == 1.0) stats.base_patches += n;
      stats.augmented_patches += n * per_patch;
    }
  }
  return stats;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

TrainingPair make_training_pair(const Tensor& clean_patch, const NoiseModel& model,
                                std::uint64_t seed, std::size_t index) {
  Tensor clean = snap_to_intensity_grid(clean_patch);
  check_unit_range(clean, "clean patch");
  const Tensor noise = sample_noise(model, clean.shape(), derive_seed(seed, index));
  TrainingPair pair{clean, Tensor(clean.shape())};
  auto y = pair.noisy.data();
  auto t = pair.target.data();
  auto v = noise.data();
  auto x = clean.data();
  for (std::size_t j = 0; j < y.size(); ++j) {
    y[j] = snap_intensity(std::clamp(x[j] + v[j] / 255.0, 0.0, 1.0));
    t[j] = y[j] - x[j];  // exact on the grid
  }
  return pair;
}

std::vector<TrainingPair> make_training_pairs(std::span<const Tensor> clean_patches,
                                              const NoiseModel& model, std::uint64_t seed) {
  std::vector<TrainingPair> pairs;
  pairs.reserve(clean_patches.size());
  for (std::size_t i = 0; i < clean_patches.size(); ++i) {
    pairs.push_back(make_training_pair(clean_patches[i], model, seed, i));
  }
  return pairs;
}

std::vector<TrainingPair> make_training_pairs(std::span<const GrayImage> clean_patches,
                                              const NoiseModel& model, std::uint64_t seed) {
  std::vector<TrainingPair> pairs;
  pairs.reserve(clean_patches.size());
  for (std::size_t i = 0; i < clean_patches.size(); ++i) {
    pairs.push_back(make_training_pair(to_tensor(clean_patches[i]), model, seed, i));
  }
  return pairs;
}

PairSource PairSource::view(std::span<const TrainingPair> pairs) {
  return {pairs.size(), [pairs](std::size_t i) { return pairs[i]; }};
}

PairSource PairSource::lazy(std::vector<GrayImage> clean_patches, const NoiseModel& model,
                            std::uint64_t seed) {
  auto patches = std::make_shared<const std::vector<GrayImage>>(std::move(clean_patches));
  const std::size_t n = patches->size();
  return {n, [patches, model, seed](std::size_t i) {
            return make_training_pair(to_tensor((*patches)[i]), model, seed, i);
          }};
}

GrayImage synth_thermal_scene(std::size_t width, std::size_t height, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double W = static_cast<double>(width), H = static_cast<double>(height);
  std::vector<double> field(width * height);

  const double base = 100.0 + 40.0 * u(rng);
  const double gx = (u(rng) - 0.5) * 40.0, gy = (u(rng) - 0.5) * 40.0;
  const double wave_amp = 6.0 * u(rng), wave_f = 1.0 + 3.0 * u(rng), wave_ph = 6.28 * u(rng);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      field[y * width + x] = base + gx * (x / W - 0.5) + gy * (y / H - 0.5) +
                             wave_amp * std::sin(wave_f * 6.28 * x / W + wave_ph);
    }
  }

  // Warm or cool bodies.
  const int blobs = 3 + static_cast<int>(u(rng) * 4);
  for (int b = 0; b < blobs; ++b) {
    const double cx = u(rng) * W, cy = u(rng) * H;
    const double sx = 3.0 + u(rng) * 0.12 * W, sy = 3.0 + u(rng) * 0.12 * H;
    const double amp = (u(rng) < 0.7 ? 1.0 : -1.0) * (20.0 + 40.0 * u(rng));
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double dx = (x - cx) / sx, dy = (y - cy) / sy;
        field[y * width + x] += amp * std::exp(-0.5 * (dx * dx + dy * dy));
      }
    }
  }

  // Soft-edged rectangles (structures with sharp-ish boundaries).
  const int rects = 2 + static_cast<int>(u(rng) * 3);
  for (int r = 0; r < rects; ++r) {
    const double x0 = u(rng) * W, y0 = u(rng) * H;
    const double x1 = x0 + (0.1 + 0.4 * u(rng)) * W, y1 = y0 + (0.1 + 0.4 * u(rng)) * H;
    const double amp = (u(rng) < 0.5 ? 1.0 : -1.0) * (15.0 + 35.0 * u(rng));
    const double edge = 0.6 + 1.4 * u(rng);
    auto step = [edge](double t) { return 1.0 / (1.0 + std::exp(-t / edge)); };
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double m = step(x - x0) * step(x1 - x) * step(y - y0) * step(y1 - y);
        field[y * width + x] += amp * m;
      }
    }
  }

  GrayImage img(width, height);
  for (std::size_t i = 0; i < field.size(); ++i) {
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(field[i], 50.0, 205.0)));
  }
  return img;
}

}  // namespace dnirb
