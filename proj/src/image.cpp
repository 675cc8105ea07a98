#include "cascade/image.h"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>

#include <fmt/format.h>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace cascade {

namespace {

Image from_mat(const cv::Mat& mat) {
  if (mat.empty()) throw ImageError("empty image");
  cv::Mat eight_bit = mat;
  if (mat.depth() != CV_8U) mat.convertTo(eight_bit, CV_8U, mat.depth() == CV_16U ? 1.0 / 257.0 : 1.0);
  const int channels = eight_bit.channels();
  if (channels != 1 && channels != 3 && channels != 4) {
    throw ImageError(fmt::format("unsupported channel count {}", channels));
  }
  const int out_channels = channels == 1 ? 1 : 3;
  Image image(eight_bit.cols, eight_bit.rows, out_channels);
  for (int y = 0; y < eight_bit.rows; ++y) {
    const std::uint8_t* row = eight_bit.ptr<std::uint8_t>(y);
    for (int x = 0; x < eight_bit.cols; ++x) {
      if (out_channels == 1) {
        image.at(x, y) = row[x];
      } else {
        // OpenCV stores BGR(A).
        const std::uint8_t* px = row + std::size_t(x) * channels;
        image.at(x, y, 0) = px[2];
        image.at(x, y, 1) = px[1];
        image.at(x, y, 2) = px[0];
      }
    }
  }
  return image;
}

cv::Mat to_mat(const Image& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw ImageError(fmt::format("unsupported channel count {}", image.channels));
  }
  cv::Mat mat(image.height, image.width, image.channels == 1 ? CV_8UC1 : CV_8UC3);
  for (int y = 0; y < image.height; ++y) {
    std::uint8_t* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < image.width; ++x) {
      if (image.channels == 1) {
        row[x] = image.at(x, y);
      } else {
        row[3 * x + 0] = image.at(x, y, 2);
        row[3 * x + 1] = image.at(x, y, 1);
        row[3 * x + 2] = image.at(x, y, 0);
      }
    }
  }
  return mat;
}

void require_filter_size(const GrayPlane& plane) {
  if (plane.width < 3 || plane.height < 3) {
    throw ImageError(fmt::format("image {}x{} too small, need at least 3x3", plane.width,
                                 plane.height));
  }
}

// Coverage weights of source cells [k, k+1) over the output cell
// [i * scale, (i + 1) * scale).
std::vector<std::vector<std::pair<int, double>>> area_weights(int source, int target) {
  std::vector<std::vector<std::pair<int, double>>> weights(target);
  const double scale = static_cast<double>(source) / target;
  for (int i = 0; i < target; ++i) {
    const double lo = i * scale;
    const double hi = (i + 1) * scale;
    for (int k = static_cast<int>(std::floor(lo)); k < source && k < hi; ++k) {
      const double overlap = std::min<double>(hi, k + 1) - std::max<double>(lo, k);
      if (overlap > 0) weights[i].emplace_back(k, overlap / scale);
    }
  }
  return weights;
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  cv::Mat mat;
  try {
    mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception& e) {
    throw ImageError(fmt::format("cannot decode '{}': {}", path.string(), e.what()));
  }
  if (mat.empty()) throw ImageError(fmt::format("cannot decode '{}'", path.string()));
  return from_mat(mat);
}

Image decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw ImageError("empty image buffer");
  cv::Mat mat;
  try {
    const cv::Mat buffer(1, static_cast<int>(bytes.size()), CV_8UC1,
                         const_cast<std::uint8_t*>(bytes.data()));
    mat = cv::imdecode(buffer, cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception& e) {
    throw ImageError(fmt::format("cannot decode image buffer: {}", e.what()));
  }
  if (mat.empty()) throw ImageError("cannot decode image buffer");
  return from_mat(mat);
}

void save_image(const Image& image, const std::filesystem::path& path, int jpeg_quality) {
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), to_mat(image), {cv::IMWRITE_JPEG_QUALITY, jpeg_quality});
  } catch (const cv::Exception& e) {
    throw ImageError(fmt::format("cannot write '{}': {}", path.string(), e.what()));
  }
  if (!ok) throw ImageError(fmt::format("cannot write '{}'", path.string()));
}

std::vector<std::uint8_t> encode_jpeg(const Image& image, int quality) {
  if (quality < 1 || quality > 100) {
    throw ImageError(fmt::format("JPEG quality {} outside [1, 100]", quality));
  }
  std::vector<std::uint8_t> buffer;
  bool ok = false;
  try {
    ok = cv::imencode(".jpg", to_mat(image), buffer, {cv::IMWRITE_JPEG_QUALITY, quality});
  } catch (const cv::Exception& e) {
    throw ImageError(fmt::format("JPEG encoder failed: {}", e.what()));
  }
  if (!ok) throw ImageError("JPEG encoder failed");
  return buffer;
}

GrayPlane to_luma(const Image& image) {
  GrayPlane plane(image.width, image.height);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      if (image.channels == 1) {
        plane.at(x, y) = image.at(x, y);
      } else {
        const double luma =
            0.299 * image.at(x, y, 0) + 0.587 * image.at(x, y, 1) + 0.114 * image.at(x, y, 2);
        plane.at(x, y) = std::round(luma);
      }
    }
  }
  return plane;
}

double laplacian_variance(const GrayPlane& p) {
  require_filter_size(p);
  // Two passes: mean, then centered sum of squares.
  const std::size_t n = std::size_t(p.width - 2) * (p.height - 2);
  std::vector<double> response;
  response.reserve(n);
  for (int y = 1; y + 1 < p.height; ++y) {
    for (int x = 1; x + 1 < p.width; ++x) {
      response.push_back(p.at(x, y - 1) + p.at(x - 1, y) + p.at(x + 1, y) + p.at(x, y + 1) -
                         4.0 * p.at(x, y));
    }
  }
  double mean = 0.0;
  for (double r : response) mean += r;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double r : response) ss += (r - mean) * (r - mean);
  return ss / static_cast<double>(n);
}

double noise_score(const GrayPlane& p) {
  require_filter_size(p);
  double total = 0.0;
  std::size_t n = 0;
  for (int y = 1; y + 1 < p.height; ++y) {
    for (int x = 1; x + 1 < p.width; ++x) {
      std::array<double, 4> nb = {p.at(x, y - 1), p.at(x - 1, y), p.at(x + 1, y), p.at(x, y + 1)};
      std::sort(nb.begin(), nb.end());
      const double median = 0.5 * (nb[1] + nb[2]);
      total += std::fabs(p.at(x, y) - median);
      ++n;
    }
  }
  return total / static_cast<double>(n);
}

double ela_score(const Image& image, int quality) {
  if (image.pixels.empty()) throw ImageError("empty image");
  const auto encoded = encode_jpeg(image, quality);
  const Image decoded = decode_image(encoded);
  if (decoded.width != image.width || decoded.height != image.height ||
      decoded.channels != image.channels) {
    throw ImageError("re-encoded image changed shape");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    total += std::abs(int(image.pixels[i]) - int(decoded.pixels[i]));
  }
  return total / static_cast<double>(image.pixels.size());
}

std::uint64_t difference_hash(const GrayPlane& plane) {
  if (plane.width < 1 || plane.height < 1) throw ImageError("empty plane");
  constexpr int kCols = 9;
  constexpr int kRows = 8;
  const auto wx = area_weights(plane.width, kCols);
  const auto wy = area_weights(plane.height, kRows);
  std::array<double, kCols * kRows> cells{};
  for (int r = 0; r < kRows; ++r) {
    for (int c = 0; c < kCols; ++c) {
      double v = 0.0;
      for (const auto& [y, fy] : wy[r]) {
        for (const auto& [x, fx] : wx[c]) v += fy * fx * plane.at(x, y);
      }
      cells[r * kCols + c] = v;
    }
  }
  std::uint64_t hash = 0;
  for (int r = 0; r < kRows; ++r) {
    for (int c = 0; c + 1 < kCols; ++c) {
      hash <<= 1;
      if (cells[r * kCols + c] > cells[r * kCols + c + 1]) hash |= 1;
    }
  }
  return hash;
}

int hamming_distance(std::uint64_t a, std::uint64_t b) { return std::popcount(a ^ b); }

}  // namespace cascade
