#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dnirb/image.hpp"
#include "dnirb/noise.hpp"
#include "dnirb/tensor.hpp"

namespace dnirb {

struct PatchSpec {
  std::size_t patch_size = 40;
  std::size_t stride = 14;
};

/// Which dihedral transforms and image scales to enumerate. The identity
/// (rotation 0, no flip, scale 1.0) is always produced.
struct AugmentationSet {
  bool flip = true;
  std::array<bool, 4> rotations = {true, true, true, true};  // 0, 90, 180, 270
  std::vector<double> scales = {1.0, 0.9, 0.8, 0.7};

  /// Identity only.
  static AugmentationSet none();
  /// Rotations and flips at scale 1.0.
  static AugmentationSet dihedral();
  std::size_t transforms_per_patch() const;
};

/// Anchors per axis: floor((dim - patch) / stride) + 1.
std::size_t patch_grid_count(std::size_t dim, const PatchSpec& spec);

/// Top-left anchored grid of patches in row-major anchor order. Margins the
/// grid does not reach are dropped.
std::vector<GrayImage> extract_patches(const GrayImage& img, const PatchSpec& spec);

GrayImage rotate90(const GrayImage& img);  // counter-clockwise
GrayImage flip_horizontal(const GrayImage& img);

/// Rotation/flip members of `set` applied to a square patch, in order
/// rotation 0, 90, 180, 270, each followed by its flipped copy. Scaling is
/// handled per image by extract_augmented().
std::vector<GrayImage> augment(const GrayImage& patch, const AugmentationSet& set);

/// Bilinear resize by `factor` (output dims rounded to nearest).
GrayImage resize_bilinear(const GrayImage& img, double factor);

/// Full per-image pipeline: for each scale, resize, extract patches, then
/// augment each patch. Order: image, scale, anchor, transform. Scales that
/// shrink an image below the patch size are skipped.
std::vector<GrayImage> extract_augmented(std::span<const GrayImage> images,
                                         const PatchSpec& spec,
                                         const AugmentationSet& set);

struct PatchStats {
  std::size_t images = 0;
  std::size_t base_patches = 0;      // scale 1.0, before rotation/flip
  std::size_t augmented_patches = 0; // all scales and transforms
};

PatchStats patch_stats(std::span<const GrayImage> images, const PatchSpec& spec,
                       const AugmentationSet& set);

/// Noisy input and its regression target. target == noisy - clean exactly.
struct TrainingPair {
  Tensor noisy;
  Tensor target;
};

/// One pair per patch with independent noise; the target is the post-clip
/// noise so noisy - target reproduces the clean patch.
std::vector<TrainingPair> make_training_pairs(std::span<const GrayImage> clean_patches,
                                              const NoiseModel& model, std::uint64_t seed);
std::vector<TrainingPair> make_training_pairs(std::span<const Tensor> clean_patches,
                                              const NoiseModel& model, std::uint64_t seed);

/// Pair `index` of make_training_pairs(..., seed) built from one patch.
TrainingPair make_training_pair(const Tensor& clean_patch, const NoiseModel& model,
                                std::uint64_t seed, std::size_t index);

/// Random-access training pairs. lazy() keeps only the 8-bit patches and
/// synthesises pair i on request; it yields the same pairs as
/// make_training_pairs() with the same seed.
struct PairSource {
  std::size_t size = 0;
  std::function<TrainingPair(std::size_t)> get;

  bool empty() const { return size == 0; }

  /// Non-owning view; `pairs` must outlive the source.
  static PairSource view(std::span<const TrainingPair> pairs);
  static PairSource lazy(std::vector<GrayImage> clean_patches, const NoiseModel& model,
                         std::uint64_t seed);
};

/// Deterministic child seed for stream `index` of `seed` (SplitMix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// Smooth thermal-like test scene: a background gradient plus warm blobs
/// and soft-edged rectangles, intensities kept roughly in [50, 205].
GrayImage synth_thermal_scene(std::size_t width, std::size_t height, std::uint64_t seed);

}  // namespace dnirb
