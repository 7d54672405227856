#include "dnirb/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dnirb/errors.hpp"

namespace dnirb {

double snap_intensity(double v) {
  return std::nearbyint(v * kIntensityGridScale) / kIntensityGridScale;
}

Tensor snap_to_intensity_grid(const Tensor& t) {
  Tensor out = t;
  for (double& v : out.data()) v = snap_intensity(v);
  return out;
}

Tensor to_tensor(const GrayImage& img) {
  Tensor t(Shape{1, 1, img.height, img.width});
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    t[i] = snap_intensity(img.pixels[i] / 255.0);
  }
  return t;
}

GrayImage from_tensor(const Tensor& t, std::size_t n) {
  const Shape& s = t.shape();
  if (s.c != 1) throw ShapeError("from_tensor expects one channel, got " + to_string(s));
  GrayImage img(s.w, s.h);
  auto src = t.sample(n);
  for (std::size_t i = 0; i < src.size(); ++i) {
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(src[i], 0.0, 1.0) * 255.0));
  }
  return img;
}

namespace {

class HeaderParser {
 public:
  explicit HeaderParser(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* what) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size()) {
      throw TruncatedImageError(std::string("PGM header truncated before ") + what);
    }
    if (!std::isdigit(bytes_[pos_])) {
      throw ImageFormatError(std::string("PGM header: expected ") + what);
    }
    std::size_t v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > (1u << 24)) throw ImageFormatError(std::string("PGM header: ") + what + " too large");
    }
    return v;
  }

  std::size_t pos_ = 0;

 private:
  const std::vector<std::uint8_t>& bytes_;
};

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image: " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

GrayImage load_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw ImageFormatError("malformed PNG " + path.string() + ": " + image.message);
  }
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw UnsupportedDepthError("PNG " + path.string() + " is 16-bit; only 8-bit is supported");
  }
  if (image.format & PNG_FORMAT_FLAG_COLOR) {
    png_image_free(&image);
    throw ImageFormatError("PNG " + path.string() + " is not grayscale");
  }
  image.format = PNG_FORMAT_GRAY;
  GrayImage img(image.width, image.height);
  if (!png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr)) {
    throw TruncatedImageError("failed decoding PNG " + path.string() + ": " + image.message);
  }
  return img;
}

void save_png(const GrayImage& img, const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.pixels.data(), 0, nullptr)) {
    throw DataError("failed writing PNG " + path.string() + ": " + image.message);
  }
}

}  // namespace

GrayImage decode_pgm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw ImageFormatError("not a binary PGM (missing P5 magic)");
  }
  HeaderParser p(bytes);
  p.pos_ = 2;
  if (p.pos_ < bytes.size() && !std::isspace(bytes[p.pos_]) && bytes[p.pos_] != '#') {
    throw ImageFormatError("PGM header: junk after magic");
  }
  const std::size_t w = p.number("width");
  const std::size_t h = p.number("height");
  const std::size_t maxval = p.number("maxval");
  if (w == 0 || h == 0) throw ImageFormatError("PGM header: zero image dimension");
  if (maxval == 0) throw ImageFormatError("PGM header: maxval must be positive");
  if (maxval != 255) {
    throw UnsupportedDepthError("PGM maxval " + std::to_string(maxval) +
                                " unsupported (only 255)");
  }
  if (p.pos_ >= bytes.size()) throw TruncatedImageError("PGM truncated after header");
  if (!std::isspace(bytes[p.pos_])) throw ImageFormatError("PGM header: missing separator");
  ++p.pos_;
  const std::size_t need = w * h;
  if (bytes.size() - p.pos_ < need) {
    throw TruncatedImageError("PGM pixel data truncated: expected " + std::to_string(need) +
                              " bytes, found " + std::to_string(bytes.size() - p.pos_));
  }
  GrayImage img(w, h);
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(p.pos_), need, img.pixels.begin());
  return img;
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
  const std::string header = "P5\n" + std::to_string(img.width) + " " +
                             std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

GrayImage load_image(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes = read_all(path);
  static constexpr std::uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::equal(kPngSig, kPngSig + 8, bytes.begin())) {
    return load_png(path);
  }
  try {
    return decode_pgm(bytes);
  } catch (const ImageFormatError& e) {
    // Re-throw with the file name attached, preserving the error kind.
    const std::string msg = path.string() + ": " + e.what();
    if (dynamic_cast<const UnsupportedDepthError*>(&e)) throw UnsupportedDepthError(msg);
    if (dynamic_cast<const TruncatedImageError*>(&e)) throw TruncatedImageError(msg);
    throw ImageFormatError(msg);
  }
}

void save_image(const GrayImage& img, const std::filesystem::path& path) {
  if (img.pixels.size() != img.width * img.height || img.width == 0 || img.height == 0) {
    throw DataError("cannot save an image with inconsistent dimensions");
  }
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") {
    save_png(img, path);
    return;
  }
  const std::vector<std::uint8_t> bytes = encode_pgm(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open image for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing image: " + path.string());
}

std::vector<std::filesystem::path> read_dataset_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset manifest: " + path.string());
  const std::filesystem::path base = path.parent_path();
  std::vector<std::filesystem::path> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    std::filesystem::path p = line.substr(first, last - first + 1);
    out.push_back(p.is_absolute() ? p : base / p);
  }
  if (out.empty()) throw DataError("dataset manifest lists no images: " + path.string());
  return out;
}

}  // namespace dnirb
