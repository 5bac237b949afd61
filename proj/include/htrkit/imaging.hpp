#pragma once

// Grayscale raster primitives. Intensities are 8-bit, 0 = ink, 255 = paper.
// Every operation rounds to nearest with halves away from zero and clamps to
// [0, 255]; geometric operations fill uncovered pixels with 255.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "htrkit/errors.hpp"

namespace htrkit::imaging {

class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, std::uint8_t fill = 255) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
      throw ValidationError("image dimensions must be positive, got " + std::to_string(width) + "x" +
                            std::to_string(height));
    }
    pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }
  GrayImage(int width, int height, std::vector<std::uint8_t> pixels) : GrayImage(width, height) {
    if (pixels.size() != pixels_.size()) throw ValidationError("pixel buffer does not match dimensions");
    pixels_ = std::move(pixels);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }
  std::size_t size() const { return pixels_.size(); }

  std::uint8_t at(int x, int y) const { return pixels_[index(x, y)]; }
  std::uint8_t& at(int x, int y) { return pixels_[index(x, y)]; }

  // Replicate-border access.
  std::uint8_t clamped(int x, int y) const {
    return at(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1));
  }

  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::span<std::uint8_t> pixels() { return pixels_; }

  bool operator==(const GrayImage&) const = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

inline std::uint8_t to_pixel(double v) {
  if (!(v > 0.0)) return 0;  // also maps NaN to 0
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(std::round(v));
}

// Double-valued raster for displacement fields and intermediate sums.
struct FloatImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  FloatImage() = default;
  FloatImage(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  double& at(int x, int y) { return data[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
  double at(int x, int y) const { return data[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
  double clamped(int x, int y) const { return at(std::clamp(x, 0, width - 1), std::clamp(y, 0, height - 1)); }
};

class Kernel {
 public:
  Kernel(int side, std::vector<double> coefficients) : side_(side), coef_(std::move(coefficients)) {
    if (side != 3 && side != 5 && side != 7) throw ValidationError("kernel side must be 3, 5 or 7");
    if (coef_.size() != static_cast<std::size_t>(side * side)) {
      throw ValidationError("kernel needs side*side coefficients");
    }
  }

  static Kernel identity(int side = 3) {
    std::vector<double> c(static_cast<std::size_t>(side * side), 0.0);
    c[c.size() / 2] = 1.0;
    return Kernel(side, std::move(c));
  }

  static Kernel box(int side = 3) {
    return Kernel(side, std::vector<double>(static_cast<std::size_t>(side * side), 1.0 / (side * side)));
  }

  static Kernel sharpen() { return Kernel(3, {0, -1, 0, -1, 5, -1, 0, -1, 0}); }

  // Normalized line of ones through the centre at `angle_deg`.
  static Kernel motion(int side, double angle_deg) {
    std::vector<double> c(static_cast<std::size_t>(side * side), 0.0);
    const double r = (side - 1) / 2.0;
    const double a = angle_deg * std::numbers::pi / 180.0;
    const double dx = std::cos(a), dy = std::sin(a);
    for (int s = -side * 4; s <= side * 4; ++s) {
      const double t = s * r / (side * 4.0);
      const int x = static_cast<int>(std::round(r + t * dx));
      const int y = static_cast<int>(std::round(r + t * dy));
      c[static_cast<std::size_t>(y * side + x)] = 1.0;
    }
    const double sum = std::accumulate(c.begin(), c.end(), 0.0);
    for (auto& v : c) v /= sum;
    return Kernel(side, std::move(c));
  }

  int side() const { return side_; }
  double at(int kx, int ky) const { return coef_[static_cast<std::size_t>(ky * side_ + kx)]; }
  double sum() const { return std::accumulate(coef_.begin(), coef_.end(), 0.0); }
  bool is_smoothing() const {
    return std::abs(sum() - 1.0) < 1e-9 && std::all_of(coef_.begin(), coef_.end(), [](double v) { return v >= 0; });
  }

  // Blend toward the identity: (1 - s)·identity + s·this.
  Kernel blended(double strength) const {
    Kernel id = identity(side_);
    std::vector<double> c(coef_.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = (1.0 - strength) * id.coef_[i] + strength * coef_[i];
    return Kernel(side_, std::move(c));
  }

 private:
  int side_;
  std::vector<double> coef_;
};

inline GrayImage convolve(const GrayImage& img, const Kernel& k) {
  GrayImage out(img.width(), img.height());
  const int r = k.side() / 2;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double acc = 0.0;
      for (int ky = 0; ky < k.side(); ++ky) {
        for (int kx = 0; kx < k.side(); ++kx) {
          acc += k.at(kx, ky) * img.clamped(x + kx - r, y + ky - r);
        }
      }
      out.at(x, y) = to_pixel(acc);
    }
  }
  return out;
}

// Sigma used when only a kernel size is given (same rule as OpenCV).
inline double sigma_for_ksize(int ksize) { return 0.3 * ((ksize - 1) * 0.5 - 1) + 0.8; }

inline std::vector<double> gaussian_kernel_1d(double sigma, int ksize) {
  if (ksize <= 0) ksize = 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1;
  if (ksize % 2 == 0) throw ValidationError("gaussian kernel size must be odd");
  std::vector<double> k(static_cast<std::size_t>(ksize));
  const int r = ksize / 2;
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    const double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + r)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Separable filter with replicate border on a double field.
inline FloatImage separable_filter(const FloatImage& in, std::span<const double> k) {
  const int r = static_cast<int>(k.size() / 2);
  FloatImage tmp(in.width, in.height), out(in.width, in.height);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * in.clamped(x + i, y);
      tmp.at(x, y) = acc;
    }
  }
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * tmp.clamped(x, y + i);
      out.at(x, y) = acc;
    }
  }
  return out;
}

inline FloatImage to_float(const GrayImage& img) {
  FloatImage f(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) f.data[i] = img.pixels()[i];
  return f;
}

inline GrayImage to_gray(const FloatImage& f) {
  GrayImage g(f.width, f.height);
  for (std::size_t i = 0; i < g.size(); ++i) g.pixels()[i] = to_pixel(f.data[i]);
  return g;
}

// sigma <= 0 with ksize > 0 derives sigma from ksize; sigma <= 0 and
// ksize <= 0 is the identity. ksize <= 0 otherwise means 2*ceil(3σ)+1.
inline GrayImage gaussian_blur(const GrayImage& img, double sigma, int ksize = 0) {
  if (sigma <= 0.0) {
    if (ksize <= 1) return img;
    sigma = sigma_for_ksize(ksize);
  }
  const auto k = gaussian_kernel_1d(sigma, ksize);
  return to_gray(separable_filter(to_float(img), k));
}

inline GrayImage median_blur3(const GrayImage& img) {
  GrayImage out(img.width(), img.height());
  std::array<std::uint8_t, 9> win{};
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      int n = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) win[static_cast<std::size_t>(n++)] = img.clamped(x + dx, y + dy);
      std::nth_element(win.begin(), win.begin() + 4, win.end());
      out.at(x, y) = win[4];
    }
  }
  return out;
}

// 3x3 minimum (grows dark ink) or maximum (thins it) filter.
inline GrayImage min_filter3(const GrayImage& img, bool take_max = false) {
  GrayImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      std::uint8_t v = img.at(x, y);
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const std::uint8_t u = img.clamped(x + dx, y + dy);
          v = take_max ? std::max(v, u) : std::min(v, u);
        }
      out.at(x, y) = v;
    }
  }
  return out;
}

struct OtsuResult {
  int threshold = 0;
  bool degenerate = false;  // fewer than two distinct intensities
};

namespace detail {

using u128 = unsigned __int128;

// Exact a/b < c/d for b, d > 0 by continued-fraction expansion.
inline bool fraction_less(u128 a, u128 b, u128 c, u128 d) {
  while (true) {
    const u128 qa = a / b, qc = c / d;
    if (qa != qc) return qa < qc;
    const u128 ra = a % b, rc = c % d;
    if (ra == 0) return rc != 0;
    if (rc == 0) return false;
    // ra/b < rc/d  <=>  d/rc < b/ra
    const u128 na = d, nb = rc, nc = b, nd = ra;
    a = na;
    b = nb;
    c = nc;
    d = nd;
  }
}

}  // namespace detail

inline std::array<std::uint64_t, 256> histogram(const GrayImage& img) {
  std::array<std::uint64_t, 256> h{};
  for (auto v : img.pixels()) ++h[v];
  return h;
}

// Threshold t maximizing between-class variance for classes {v <= t} and
// {v > t}; ties resolve to the smallest t. Scores are compared exactly as
// (n1·S0 − n0·S1)² / (n0·n1), which is N²·σ_B².
inline OtsuResult otsu_threshold(const GrayImage& img) {
  const auto h = histogram(img);
  std::uint64_t total_n = 0, total_s = 0;
  int distinct = 0, only = 0;
  for (int v = 0; v < 256; ++v) {
    total_n += h[static_cast<std::size_t>(v)];
    total_s += h[static_cast<std::size_t>(v)] * static_cast<std::uint64_t>(v);
    if (h[static_cast<std::size_t>(v)]) {
      ++distinct;
      only = v;
    }
  }
  if (distinct < 2) return {only, true};

  using detail::u128;
  bool have = false;
  u128 best_num = 0, best_den = 1;
  int best_t = 0;
  std::uint64_t n0 = 0, s0 = 0;
  for (int t = 0; t < 255; ++t) {
    n0 += h[static_cast<std::size_t>(t)];
    s0 += h[static_cast<std::size_t>(t)] * static_cast<std::uint64_t>(t);
    const std::uint64_t n1 = total_n - n0, s1 = total_s - s0;
    if (n0 == 0 || n1 == 0) continue;
    const u128 a = static_cast<u128>(n1) * s0, b = static_cast<u128>(n0) * s1;
    const u128 diff = a > b ? a - b : b - a;
    const u128 num = diff * diff;
    const u128 den = static_cast<u128>(n0) * n1;
    if (!have || detail::fraction_less(best_num, best_den, num, den)) {
      have = true;
      best_num = num;
      best_den = den;
      best_t = t;
    }
  }
  return {best_t, false};
}

// v > t -> 255, else 0.
inline GrayImage binarize(const GrayImage& img, int t) {
  GrayImage out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) out.pixels()[i] = img.pixels()[i] > t ? 255 : 0;
  return out;
}

// Bilinear sample at a real-valued source coordinate (pixel centres at
// integers); coordinates outside [0, w-1] x [0, h-1] take `fill`.
inline double sample_bilinear(const GrayImage& img, double x, double y, double fill = 255.0) {
  constexpr double eps = 1e-9;
  if (!(x >= -eps && y >= -eps && x <= img.width() - 1 + eps && y <= img.height() - 1 + eps)) return fill;
  x = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width() - 1), y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = x - x0, fy = y - y0;
  const double top = img.at(x0, y0) * (1 - fx) + img.at(x1, y0) * fx;
  const double bot = img.at(x0, y1) * (1 - fx) + img.at(x1, y1) * fx;
  return top * (1 - fy) + bot * fy;
}

// `inverse_map(x_out, y_out)` returns the source coordinate for each output
// pixel.
template <typename InverseMap>
GrayImage warp(const GrayImage& img, InverseMap&& inverse_map, int out_width, int out_height,
               std::uint8_t fill = 255) {
  GrayImage out(out_width, out_height, fill);
  for (int y = 0; y < out_height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      const auto [sx, sy] = inverse_map(static_cast<double>(x), static_cast<double>(y));
      out.at(x, y) = to_pixel(sample_bilinear(img, sx, sy, fill));
    }
  }
  return out;
}

template <typename InverseMap>
GrayImage warp(const GrayImage& img, InverseMap&& inverse_map, std::uint8_t fill = 255) {
  return warp(img, std::forward<InverseMap>(inverse_map), img.width(), img.height(), fill);
}

// Rotation about the image centre by `degrees` (counter-clockwise on screen).
inline GrayImage rotate(const GrayImage& img, double degrees, std::uint8_t fill = 255) {
  const double a = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(a), s = std::sin(a);
  const double cx = (img.width() - 1) / 2.0, cy = (img.height() - 1) / 2.0;
  return warp(img, [&](double x, double y) {
    const double dx = x - cx, dy = y - cy;
    return std::pair{cx + c * dx - s * dy, cy + s * dx + c * dy};
  }, fill);
}

inline GrayImage translate(const GrayImage& img, double dx, double dy, std::uint8_t fill = 255) {
  return warp(img, [&](double x, double y) { return std::pair{x - dx, y - dy}; }, fill);
}

// Corner-aligned bilinear resize.
inline GrayImage resize(const GrayImage& img, int new_width, int new_height) {
  const double sx = new_width > 1 ? (img.width() - 1.0) / (new_width - 1.0) : 0.0;
  const double sy = new_height > 1 ? (img.height() - 1.0) / (new_height - 1.0) : 0.0;
  return warp(img, [&](double x, double y) { return std::pair{x * sx, y * sy}; }, new_width, new_height);
}

// 3x3 projective transform, row-major, mapping (x, y, 1).
using Homography = std::array<double, 9>;

// Solves for H with H·src[i] ~ dst[i] over four point pairs.
inline Homography solve_homography(const std::array<std::pair<double, double>, 4>& src,
                                   const std::array<std::pair<double, double>, 4>& dst) {
  std::array<std::array<double, 9>, 8> m{};
  for (int i = 0; i < 4; ++i) {
    const auto [x, y] = src[static_cast<std::size_t>(i)];
    const auto [u, v] = dst[static_cast<std::size_t>(i)];
    m[static_cast<std::size_t>(2 * i)] = {x, y, 1, 0, 0, 0, -u * x, -u * y, u};
    m[static_cast<std::size_t>(2 * i + 1)] = {0, 0, 0, x, y, 1, -v * x, -v * y, v};
  }
  for (std::size_t col = 0; col < 8; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < 8; ++r)
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    if (std::abs(m[piv][col]) < 1e-12) throw ValidationError("degenerate homography");
    std::swap(m[col], m[piv]);
    for (std::size_t r = 0; r < 8; ++r) {
      if (r == col) continue;
      const double f = m[r][col] / m[col][col];
      for (std::size_t c = col; c < 9; ++c) m[r][c] -= f * m[col][c];
    }
  }
  Homography h{};
  for (std::size_t i = 0; i < 8; ++i) h[i] = m[i][8] / m[i][i];
  h[8] = 1.0;
  return h;
}

inline std::pair<double, double> apply_homography(const Homography& h, double x, double y) {
  const double w = h[6] * x + h[7] * y + h[8];
  return {(h[0] * x + h[1] * y + h[2]) / w, (h[3] * x + h[4] * y + h[5]) / w};
}

}  // namespace htrkit::imaging
