#pragma once

// Image-level augmentation operators, the probabilistic noise pipeline used
// for synthetic renders, and multiplicity expansion of a line manifest.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "htrkit/errors.hpp"
#include "htrkit/image_io.hpp"
#include "htrkit/imaging.hpp"
#include "htrkit/manifest.hpp"
#include "htrkit/parallel.hpp"
#include "htrkit/rng.hpp"

namespace htrkit::augment {

using imaging::GrayImage;

enum class AugKind {
  // line-image suite
  kRotation,
  kShift,
  kPerspective,
  kShear,
  kHStretch,
  kVStretch,
  kBlur,
  kMotionBlur,
  kJpeg,
  kJitter,
  kGaussianNoise,
  kElasticBlur,
  kSaltPepper,
  kBlurredPatches,
  kSine,
  kHorizontal,
  kElastic,
  kMedBlur,
  kMorph,
  kSharpen,
  // synthetic-noise stages
  kPiecewiseAffine,
  kDropout,
  kLinearContrast,
  kBrightness,
  kLaplaceNoise,
  kVTranslate,
  kConvBlur,
};

inline constexpr std::size_t kSuiteSize = 20;
inline constexpr std::size_t kKindCount = 27;

inline constexpr std::array<std::string_view, kKindCount> kKindNames{
    "rotation", "shift",          "perspective",      "shear",           "hstretch",   "vstretch",
    "blur",     "motion_blur",    "jpeg",             "jitter",          "gaussian_noise",
    "elasticblur", "saltpepper",  "blurredpatches",   "sine",            "horizontal", "elastic",
    "med_blur", "morph",          "sharpen",          "piecewise_affine", "dropout",   "linear_contrast",
    "brightness", "laplace_noise", "vertical_translation", "conv_blur"};

inline std::string_view to_string(AugKind k) { return kKindNames[static_cast<std::size_t>(k)]; }

inline AugKind parse_kind(std::string_view name) {
  for (std::size_t i = 0; i < kKindCount; ++i) {
    if (kKindNames[i] == name) return static_cast<AugKind>(i);
  }
  throw ValidationError("unknown augmentation '" + std::string(name) + "'");
}

// Warp-class operators pass 1x1 images through untouched.
inline bool is_geometric(AugKind k) {
  switch (k) {
    case AugKind::kRotation:
    case AugKind::kShift:
    case AugKind::kPerspective:
    case AugKind::kShear:
    case AugKind::kHStretch:
    case AugKind::kVStretch:
    case AugKind::kJitter:
    case AugKind::kElasticBlur:
    case AugKind::kSine:
    case AugKind::kHorizontal:
    case AugKind::kElastic:
    case AugKind::kPiecewiseAffine:
    case AugKind::kVTranslate:
      return true;
    default:
      return false;
  }
}

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Range&) const = default;
};

// `a` and `b` are the operator's primary and secondary parameter ranges;
// their meaning per kind is listed in default_spec.
struct AugSpec {
  AugKind kind = AugKind::kRotation;
  Range a;
  Range b;
  int ksize = 0;
  double p = 1.0;
  std::uint64_t seed = 0;

  bool operator==(const AugSpec&) const = default;
};

inline AugSpec default_spec(AugKind k) {
  AugSpec s;
  s.kind = k;
  switch (k) {
    case AugKind::kRotation: s.a = {-3, 3}; break;                      // degrees
    case AugKind::kShift: s.a = {5, 20}; s.b = {5, 20}; break;          // |dx|, |dy| px
    case AugKind::kPerspective: s.a = {0.02, 0.06}; break;              // corner offset / side
    case AugKind::kShear: s.a = {-0.2, 0.2}; break;                     // x += k·(y − cy)
    case AugKind::kHStretch:
    case AugKind::kVStretch: s.a = {1.2, 1.2}; break;                   // factor
    case AugKind::kBlur: s.ksize = 5; break;                            // σ from ksize when a = 0
    case AugKind::kMotionBlur: s.a = {3, 5}; s.b = {0, 180}; break;     // ksize, angle
    case AugKind::kJpeg: s.a = {30, 70}; break;                         // quality
    case AugKind::kJitter: s.a = {1, 1}; break;                         // neighbour radius px
    case AugKind::kGaussianNoise: s.a = {4, 12}; break;                 // σ in intensity levels
    case AugKind::kElasticBlur: s.a = {1.5, 3.0}; s.b = {0.6, 1.0}; s.ksize = 3; break;
    case AugKind::kSaltPepper: s.a = {0.002, 0.01}; break;              // density
    case AugKind::kBlurredPatches: s.a = {0.1, 0.2}; s.b = {1, 3}; s.ksize = 5; break;
    case AugKind::kSine: s.a = {1, 3}; s.b = {40, 120}; break;          // amplitude, wavelength px
    case AugKind::kHorizontal: s.a = {1, 4}; break;                     // sag at centre px
    case AugKind::kElastic: s.a = {1.5, 3.0}; s.b = {0.6, 1.0}; break;  // α, σ
    case AugKind::kMedBlur:
    case AugKind::kMorph:
    case AugKind::kSharpen: break;
    case AugKind::kPiecewiseAffine: s.a = {0.005, 0.015}; s.p = 0.6; break;
    case AugKind::kDropout: s.a = {0.01, 0.03}; s.p = 0.4; break;
    case AugKind::kLinearContrast: s.a = {0.7, 1.4}; s.p = 0.3; break;
    case AugKind::kBrightness: s.a = {0.85, 1.15}; s.p = 0.3; break;
    case AugKind::kLaplaceNoise: s.a = {0.01, 0.01}; s.p = 0.3; break;  // scale / 255
    case AugKind::kVTranslate: s.a = {-0.015, 0.015}; s.p = 0.5; break;  // fraction of height
    case AugKind::kConvBlur: s.a = {1, 1}; break;                       // blend strength
  }
  return s;
}

inline void validate(const AugSpec& s) {
  const auto name = std::string(to_string(s.kind));
  if (!(s.p >= 0.0 && s.p <= 1.0)) throw ValidationError(name + ": probability must be in [0, 1]");
  if (s.a.lo > s.a.hi || s.b.lo > s.b.hi) throw ValidationError(name + ": range lower bound exceeds upper");
  auto nonneg = [&](const Range& r) {
    if (r.lo < 0) throw ValidationError(name + ": parameter must be non-negative");
  };
  switch (s.kind) {
    case AugKind::kShift:
    case AugKind::kPerspective:
    case AugKind::kJitter:
    case AugKind::kGaussianNoise:
    case AugKind::kHorizontal:
    case AugKind::kPiecewiseAffine:
    case AugKind::kLaplaceNoise:
    case AugKind::kLinearContrast:
    case AugKind::kBrightness:
      nonneg(s.a);
      nonneg(s.b);
      break;
    case AugKind::kHStretch:
    case AugKind::kVStretch:
      if (s.a.lo <= 0) throw ValidationError(name + ": stretch factor must be positive");
      break;
    case AugKind::kBlur:
      nonneg(s.a);
      if (s.ksize != 0 && (s.ksize < 1 || s.ksize % 2 == 0)) throw ValidationError(name + ": ksize must be odd");
      break;
    case AugKind::kMotionBlur:
      if (s.a.lo < 3 || s.a.hi > 7) throw ValidationError(name + ": kernel size must lie in [3, 7]");
      break;
    case AugKind::kJpeg:
      if (s.a.lo < 1 || s.a.hi > 100) throw ValidationError(name + ": quality must lie in [1, 100]");
      break;
    case AugKind::kElastic:
    case AugKind::kElasticBlur:
      nonneg(s.a);
      nonneg(s.b);
      break;
    case AugKind::kSaltPepper:
    case AugKind::kDropout:
      if (s.a.lo < 0 || s.a.hi > 1) throw ValidationError(name + ": density must lie in [0, 1]");
      break;
    case AugKind::kBlurredPatches:
      if (s.a.lo < 0 || s.a.hi > 1 || s.b.lo < 0) throw ValidationError(name + ": bad patch parameters");
      break;
    case AugKind::kSine:
      nonneg(s.a);
      if (s.b.lo <= 0) throw ValidationError(name + ": wavelength must be positive");
      break;
    case AugKind::kConvBlur:
      if (s.a.lo < 0 || s.a.hi > 1) throw ValidationError(name + ": blend strength must lie in [0, 1]");
      break;
    default:
      break;
  }
}

namespace detail {

inline int draw_int(Rng& rng, const Range& r) {
  return rng.integer(static_cast<int>(std::lround(r.lo)), static_cast<int>(std::lround(r.hi)));
}

inline GrayImage point_map(const GrayImage& img, auto&& f) {
  GrayImage out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) out.pixels()[i] = imaging::to_pixel(f(static_cast<double>(img.pixels()[i])));
  return out;
}

// Uniform noise field smoothed by a Gaussian and scaled by alpha.
inline imaging::FloatImage displacement_field(Rng& rng, int w, int h, double alpha, double sigma) {
  imaging::FloatImage f(w, h);
  for (auto& v : f.data) v = rng.uniform(-1.0, 1.0);
  if (sigma > 0) {
    const auto k = imaging::gaussian_kernel_1d(sigma, 0);
    f = imaging::separable_filter(f, k);
  }
  for (auto& v : f.data) v *= alpha;
  return f;
}

inline GrayImage elastic(const GrayImage& img, Rng& rng, double alpha, double sigma) {
  const auto dx = displacement_field(rng, img.width(), img.height(), alpha, sigma);
  const auto dy = displacement_field(rng, img.width(), img.height(), alpha, sigma);
  return imaging::warp(img, [&](double x, double y) {
    const int ix = static_cast<int>(x), iy = static_cast<int>(y);
    return std::pair{x + dx.at(ix, iy), y + dy.at(ix, iy)};
  });
}

// 4x4 control grid; displacement is interpolated barycentrically over the two
// triangles of each cell, giving a piecewise-affine map.
inline GrayImage piecewise_affine(const GrayImage& img, Rng& rng, double scale) {
  constexpr int kGrid = 4;
  const double w = img.width() - 1.0, h = img.height() - 1.0;
  std::array<std::array<std::pair<double, double>, kGrid>, kGrid> disp{};
  for (auto& row : disp)
    for (auto& d : row) d = {rng.normal(0.0, scale * img.width()), rng.normal(0.0, scale * img.height())};
  const double cw = w / (kGrid - 1), ch = h / (kGrid - 1);
  return imaging::warp(img, [&](double x, double y) {
    const int cx = std::min(kGrid - 2, static_cast<int>(cw > 0 ? x / cw : 0));
    const int cy = std::min(kGrid - 2, static_cast<int>(ch > 0 ? y / ch : 0));
    const double u = cw > 0 ? x / cw - cx : 0.0, v = ch > 0 ? y / ch - cy : 0.0;
    const auto& p00 = disp[static_cast<std::size_t>(cy)][static_cast<std::size_t>(cx)];
    const auto& p10 = disp[static_cast<std::size_t>(cy)][static_cast<std::size_t>(cx + 1)];
    const auto& p01 = disp[static_cast<std::size_t>(cy + 1)][static_cast<std::size_t>(cx)];
    const auto& p11 = disp[static_cast<std::size_t>(cy + 1)][static_cast<std::size_t>(cx + 1)];
    double ddx, ddy;
    if (u >= v) {  // triangle p00, p10, p11
      ddx = p00.first + u * (p10.first - p00.first) + v * (p11.first - p10.first);
      ddy = p00.second + u * (p10.second - p00.second) + v * (p11.second - p10.second);
    } else {  // triangle p00, p01, p11
      ddx = p00.first + v * (p01.first - p00.first) + u * (p11.first - p01.first);
      ddy = p00.second + v * (p01.second - p00.second) + u * (p11.second - p01.second);
    }
    return std::pair{x - ddx, y - ddy};
  });
}

inline GrayImage perspective(const GrayImage& img, Rng& rng, const Range& r) {
  const double w = img.width() - 1.0, h = img.height() - 1.0;
  const std::array<std::pair<double, double>, 4> src{{{0, 0}, {w, 0}, {w, h}, {0, h}}};
  // Corners move inward by a random fraction of each side.
  const std::array<std::pair<double, double>, 4> sign{{{1, 1}, {-1, 1}, {-1, -1}, {1, -1}}};
  std::array<std::pair<double, double>, 4> dst{};
  for (std::size_t i = 0; i < 4; ++i) {
    dst[i] = {src[i].first + sign[i].first * rng.uniform(r.lo, r.hi) * w,
              src[i].second + sign[i].second * rng.uniform(r.lo, r.hi) * h};
  }
  imaging::Homography inv;
  try {
    inv = imaging::solve_homography(dst, src);
  } catch (const ValidationError&) {
    return img;
  }
  return imaging::warp(img, [&](double x, double y) { return imaging::apply_homography(inv, x, y); });
}

inline GrayImage blurred_patches(const GrayImage& img, Rng& rng, const AugSpec& s) {
  const auto blurred = imaging::gaussian_blur(img, 0.0, s.ksize > 1 ? s.ksize : 5);
  GrayImage out = img;
  const int count = draw_int(rng, s.b);
  for (int n = 0; n < count; ++n) {
    const int side = std::max(1, static_cast<int>(std::lround(rng.uniform(s.a.lo, s.a.hi) * img.height())));
    const int bw = std::min(side, img.width()), bh = std::min(side, img.height());
    const int x0 = rng.integer(0, img.width() - bw), y0 = rng.integer(0, img.height() - bh);
    for (int y = y0; y < y0 + bh; ++y)
      for (int x = x0; x < x0 + bw; ++x) out.at(x, y) = blurred.at(x, y);
  }
  return out;
}

}  // namespace detail

// One operator with parameters drawn from Rng(spec.seed). The probability
// field is ignored here; see apply_pipeline.
inline GrayImage apply(const GrayImage& img, const AugSpec& s) {
  validate(s);
  if (is_geometric(s.kind) && img.width() == 1 && img.height() == 1) return img;
  Rng rng(s.seed);
  auto draw = [&](const Range& r) { return rng.uniform(r.lo, r.hi); };
  switch (s.kind) {
    case AugKind::kRotation:
      return imaging::rotate(img, draw(s.a));
    case AugKind::kShift: {
      const int mx = detail::draw_int(rng, s.a), my = detail::draw_int(rng, s.b);
      const int sx = rng.bernoulli(0.5) ? 1 : -1, sy = rng.bernoulli(0.5) ? 1 : -1;
      return imaging::translate(img, sx * mx, sy * my);
    }
    case AugKind::kPerspective:
      return detail::perspective(img, rng, s.a);
    case AugKind::kShear: {
      const double k = draw(s.a), cy = (img.height() - 1) / 2.0;
      return imaging::warp(img, [&](double x, double y) { return std::pair{x - k * (y - cy), y}; });
    }
    case AugKind::kHStretch:
    case AugKind::kVStretch: {
      const double f = draw(s.a);
      const bool horiz = s.kind == AugKind::kHStretch;
      const int w = horiz ? std::max(1, static_cast<int>(std::lround(img.width() * f))) : img.width();
      const int h = horiz ? img.height() : std::max(1, static_cast<int>(std::lround(img.height() * f)));
      return imaging::resize(img, w, h);
    }
    case AugKind::kBlur:
      return imaging::gaussian_blur(img, draw(s.a), s.ksize);
    case AugKind::kMotionBlur: {
      int k = detail::draw_int(rng, s.a);
      if (k % 2 == 0) k += 1;
      return imaging::convolve(img, imaging::Kernel::motion(std::min(k, 7), draw(s.b)));
    }
    case AugKind::kJpeg: {
      const int q = detail::draw_int(rng, s.a);
      return imaging::decode_jpeg(imaging::encode_jpeg(img, q));
    }
    case AugKind::kJitter: {
      const int r = detail::draw_int(rng, s.a);
      GrayImage out(img.width(), img.height());
      for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
          const int dx = rng.integer(-r, r), dy = rng.integer(-r, r);
          out.at(x, y) = img.clamped(x + dx, y + dy);
        }
      return out;
    }
    case AugKind::kGaussianNoise: {
      const double sigma = draw(s.a);
      return detail::point_map(img, [&](double v) { return v + rng.normal(0.0, sigma); });
    }
    case AugKind::kElasticBlur: {
      const double alpha = draw(s.a), sigma = draw(s.b);
      return imaging::gaussian_blur(detail::elastic(img, rng, alpha, sigma), 0.0, s.ksize);
    }
    case AugKind::kSaltPepper: {
      const double d = draw(s.a);
      GrayImage out = img;
      for (auto& p : out.pixels()) {
        const double u = rng.uniform();
        const bool salt = rng.bernoulli(0.5);
        if (u < d) p = salt ? 255 : 0;
      }
      return out;
    }
    case AugKind::kBlurredPatches:
      return detail::blurred_patches(img, rng, s);
    case AugKind::kSine: {
      const double amp = draw(s.a), wavelength = draw(s.b), phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      return imaging::warp(img, [&](double x, double y) {
        return std::pair{x, y - amp * std::sin(2.0 * std::numbers::pi * x / wavelength + phase)};
      });
    }
    case AugKind::kHorizontal: {
      const double sag = draw(s.a) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
      const double cx = (img.width() - 1) / 2.0;
      return imaging::warp(img, [&](double x, double y) {
        const double t = cx > 0 ? (x - cx) / cx : 0.0;
        return std::pair{x, y - sag * (1.0 - t * t)};
      });
    }
    case AugKind::kElastic: {
      const double alpha = draw(s.a), sigma = draw(s.b);
      return detail::elastic(img, rng, alpha, sigma);
    }
    case AugKind::kMedBlur:
      return imaging::median_blur3(img);
    case AugKind::kMorph:
      return imaging::min_filter3(img, rng.bernoulli(0.5));
    case AugKind::kSharpen:
      return imaging::convolve(img, imaging::Kernel::sharpen());
    case AugKind::kPiecewiseAffine:
      return detail::piecewise_affine(img, rng, draw(s.a));
    case AugKind::kDropout: {
      const double rate = draw(s.a);
      GrayImage out = img;
      for (auto& p : out.pixels())
        if (rng.uniform() < rate) p = 0;
      return out;
    }
    case AugKind::kLinearContrast: {
      const double f = draw(s.a);
      return detail::point_map(img, [&](double v) { return 128.0 + f * (v - 128.0); });
    }
    case AugKind::kBrightness: {
      const double f = draw(s.a);
      return detail::point_map(img, [&](double v) { return v * f; });
    }
    case AugKind::kLaplaceNoise: {
      const double scale = draw(s.a) * 255.0;
      if (scale <= 0) return img;
      return detail::point_map(img, [&](double v) { return v + rng.laplace(scale); });
    }
    case AugKind::kVTranslate:
      return imaging::translate(img, 0.0, draw(s.a) * img.height());
    case AugKind::kConvBlur:
      return imaging::convolve(img, imaging::Kernel::box(3).blended(draw(s.a)));
  }
  return img;
}

using NoisePipeline = std::vector<AugSpec>;

// Synthetic-render degradation stages in application order.
inline NoisePipeline default_noise_pipeline() {
  NoisePipeline p;
  p.push_back(default_spec(AugKind::kPiecewiseAffine));
  AugSpec el = default_spec(AugKind::kElastic);
  el.p = 0.5;
  p.push_back(el);
  AugSpec mb = default_spec(AugKind::kMotionBlur);
  mb.p = 0.4;
  p.push_back(mb);
  p.push_back(default_spec(AugKind::kDropout));
  AugSpec gb = default_spec(AugKind::kBlur);
  gb.a = {0.5, 0.9};
  gb.ksize = 0;
  gb.p = 0.4;
  p.push_back(gb);
  p.push_back(default_spec(AugKind::kLinearContrast));
  p.push_back(default_spec(AugKind::kBrightness));
  p.push_back(default_spec(AugKind::kLaplaceNoise));
  p.push_back(default_spec(AugKind::kVTranslate));
  p.push_back(default_spec(AugKind::kConvBlur));
  return p;
}

// Each stage draws a firing uniform and a stage seed from Rng(seed); both
// are consumed whether or not the stage fires, so stage i's parameters do not
// depend on earlier stages' outcomes.
inline GrayImage apply_pipeline(const GrayImage& img, const NoisePipeline& pipeline, std::uint64_t seed) {
  Rng rng(seed);
  GrayImage out = img;
  for (const auto& stage : pipeline) {
    const double u = rng.uniform();
    AugSpec s = stage;
    s.seed = rng.next();
    if (u < stage.p) out = apply(out, s);
  }
  return out;
}

// The 20 line-image operators with default parameters.
inline std::vector<AugSpec> default_pool() {
  std::vector<AugSpec> pool;
  for (std::size_t i = 0; i < kSuiteSize; ++i) pool.push_back(default_spec(static_cast<AugKind>(i)));
  return pool;
}

inline nlohmann::ordered_json to_json(const AugSpec& s) {
  nlohmann::ordered_json j;
  j["kind"] = std::string(to_string(s.kind));
  j["a"] = {s.a.lo, s.a.hi};
  j["b"] = {s.b.lo, s.b.hi};
  j["ksize"] = s.ksize;
  j["p"] = s.p;
  return j;
}

// Fields absent from `j` keep the kind's defaults.
inline AugSpec spec_from_json(const nlohmann::json& j) {
  try {
    AugSpec s = default_spec(parse_kind(j.at("kind").get<std::string>()));
    auto range = [&](const char* key, Range& r) {
      if (auto it = j.find(key); it != j.end()) {
        if (it->is_number()) {
          r.lo = r.hi = it->get<double>();
        } else {
          if (!it->is_array() || it->size() != 2) throw ValidationError(std::string(key) + " must be [lo, hi]");
          r = {(*it)[0].get<double>(), (*it)[1].get<double>()};
        }
      }
    };
    range("a", s.a);
    range("b", s.b);
    s.ksize = j.value("ksize", s.ksize);
    s.p = j.value("p", s.p);
    validate(s);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad augmentation spec: ") + e.what());
  }
}

// A JSON array of specs. Entries naming a kind already in `base` replace it;
// others are appended.
inline std::vector<AugSpec> apply_overrides(std::vector<AugSpec> base, const nlohmann::json& j) {
  if (!j.is_array()) throw ValidationError("augmentation overrides must be a JSON array");
  for (const auto& item : j) {
    const AugSpec s = spec_from_json(item);
    bool replaced = false;
    for (auto& b : base) {
      if (b.kind == s.kind) {
        b = s;
        replaced = true;
      }
    }
    if (!replaced) base.push_back(s);
  }
  return base;
}

struct ExpandOptions {
  // Variant images go here; empty means next to the source image.
  std::string image_dir;
};

inline std::string variant_image_path(const LineSample& src, std::size_t i, const ExpandOptions& opt) {
  std::filesystem::path p(src.image.empty() ? src.id + ".png" : src.image);
  const std::string name = p.stem().string() + "_aug" + std::to_string(i) + ".png";
  if (!opt.image_dir.empty()) return (std::filesystem::path(opt.image_dir) / name).string();
  return (p.parent_path() / name).string();
}

// Variant i (1-based) of item j has seed mix_seed(base_seed, {j, i}). The
// operator for each variant comes from a per-item permutation of the pool;
// once the pool is exhausted further variants draw with replacement.
inline Manifest expand_dataset(const Manifest& in, int k, const std::vector<AugSpec>& pool, std::uint64_t base_seed,
                               const ExpandOptions& opt = {}) {
  if (k < 0) throw ValidationError("multiplicity must be non-negative");
  if (k > 0 && pool.empty()) throw ValidationError("augmentation pool is empty");
  Manifest out;
  out.reserve(in.size() * static_cast<std::size_t>(k + 1));
  for (std::size_t j = 0; j < in.size(); ++j) {
    const LineSample& src = in[j];
    out.push_back(src);
    if (k == 0) continue;
    Rng pick(mix_seed(base_seed, {j}));
    std::vector<std::size_t> order(pool.size());
    for (std::size_t n = 0; n < order.size(); ++n) order[n] = n;
    pick.shuffle(order);
    for (std::size_t i = 1; i <= static_cast<std::size_t>(k); ++i) {
      const std::size_t op = i <= order.size() ? order[i - 1] : static_cast<std::size_t>(pick.below(pool.size()));
      LineSample v = src;
      v.id = src.id + "#aug" + std::to_string(i);
      v.image = variant_image_path(src, i, opt);
      v.provenance.augmentation = std::string(to_string(pool[op].kind));
      v.provenance.seed = mix_seed(base_seed, {j, i});
      v.provenance.parent = src.image;
      out.push_back(std::move(v));
    }
  }
  return out;
}

// AugSpec used to render a variant: the pool entry for its operator with the
// variant's seed.
inline AugSpec variant_spec(const LineSample& v, const std::vector<AugSpec>& pool) {
  const AugKind kind = parse_kind(v.provenance.augmentation);
  for (const auto& s : pool) {
    if (s.kind == kind) {
      AugSpec out = s;
      out.seed = v.provenance.seed.value_or(0);
      return out;
    }
  }
  throw ValidationError("operator '" + v.provenance.augmentation + "' is not in the pool");
}

// Writes the image of every record with a parent image. Paths are resolved
// against `root`. Output bytes do not depend on the worker count.
inline void materialize(const Manifest& expanded, const std::vector<AugSpec>& pool, const std::filesystem::path& root,
                        unsigned workers = worker_count()) {
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < expanded.size(); ++i)
    if (!expanded[i].provenance.parent.empty()) todo.push_back(i);
  parallel_for(todo.size(), [&](std::size_t n) {
    const LineSample& v = expanded[todo[n]];
    const auto src = imaging::load_image(root / v.provenance.parent);
    imaging::save_image(root / v.image, apply(src, variant_spec(v, pool)));
  }, workers);
}

}  // namespace htrkit::augment
