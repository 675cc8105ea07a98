#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

namespace cascade {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 8-bit raster, interleaved channels (1 = gray, 3 = RGB), row-major.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, int c) : width(w), height(h), channels(c), pixels(std::size_t(w) * h * c) {}

  std::uint8_t& at(int x, int y, int c = 0) {
    return pixels[(std::size_t(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c = 0) const {
    return pixels[(std::size_t(y) * width + x) * channels + c];
  }
};

// Single-channel plane of reals. Luma planes hold integers in [0, 255], but
// the filters accept arbitrary values.
struct GrayPlane {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  GrayPlane() = default;
  GrayPlane(int w, int h) : width(w), height(h), values(std::size_t(w) * h, 0.0) {}

  double& at(int x, int y) { return values[std::size_t(y) * width + x]; }
  double at(int x, int y) const { return values[std::size_t(y) * width + x]; }
};

Image load_image(const std::filesystem::path& path);
Image decode_image(std::span<const std::uint8_t> bytes);
// Format chosen by extension (.png, .ppm, .pgm, .jpg, ...).
void save_image(const Image& image, const std::filesystem::path& path, int jpeg_quality = 95);
std::vector<std::uint8_t> encode_jpeg(const Image& image, int quality);

// round(0.299 R + 0.587 G + 0.114 B); gray images pass through.
GrayPlane to_luma(const Image& image);

// Population variance of the 4-neighbour Laplacian response over interior
// pixels (no padding). Requires both dimensions >= 3.
double laplacian_variance(const GrayPlane& plane);

// Mean absolute residual between each interior pixel and the median of its
// four edge-adjacent neighbours. Requires both dimensions >= 3.
double noise_score(const GrayPlane& plane);

// Error level analysis: mean absolute per-channel difference between the
// image and its JPEG re-encode at `quality` (1..100).
double ela_score(const Image& image, int quality = 90);

// 64-bit difference hash: area-downsample the plane to 9x8 and set one bit
// per horizontally adjacent pair where the left cell is brighter.
std::uint64_t difference_hash(const GrayPlane& plane);

int hamming_distance(std::uint64_t a, std::uint64_t b);

}  // namespace cascade
