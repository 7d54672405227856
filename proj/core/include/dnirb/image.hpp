#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dnirb/tensor.hpp"

namespace dnirb {

/// 8-bit single-channel image, row-major.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(std::size_t w, std::size_t h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(w * h, fill) {}

  std::uint8_t& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
  std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Normalised intensities are kept on a 2^-40 grid. Sums and differences of
/// grid values in [0, 1] are then exact, which makes noisy - (noisy - clean)
/// reproduce clean bit-for-bit.
inline constexpr double kIntensityGridScale = 1099511627776.0;  // 2^40
double snap_intensity(double v);
Tensor snap_to_intensity_grid(const Tensor& t);

/// (1, 1, h, w) tensor with intensities divided by 255 (grid-snapped).
Tensor to_tensor(const GrayImage& img);
/// Rounds a single-channel [0,1] tensor (batch item `n`) back to 8 bits.
GrayImage from_tensor(const Tensor& t, std::size_t n = 0);

/// Binary PGM (P5, maxval 255).
GrayImage decode_pgm(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_pgm(const GrayImage& img);

/// Reads PGM or 8-bit grayscale PNG, chosen by file signature.
GrayImage load_image(const std::filesystem::path& path);
/// Writes PNG when the extension is ".png", PGM otherwise.
void save_image(const GrayImage& img, const std::filesystem::path& path);

/// Newline-delimited list of image paths. Blank lines and lines starting
/// with '#' are skipped; relative paths resolve against the manifest's
/// directory.
std::vector<std::filesystem::path> read_dataset_manifest(const std::filesystem::path& path);

}  // namespace dnirb
