#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "htrkit/augment.hpp"
#include "htrkit/image_io.hpp"

using namespace htrkit;
using namespace htrkit::augment;
using imaging::GrayImage;

namespace {

// Dark strokes on white, roughly like a text line.
GrayImage line_image(int w = 100, int h = 30, std::uint64_t seed = 1) {
  Rng rng(seed);
  GrayImage img(w, h, 255);
  for (int n = 0; n < w / 4; ++n) {
    const int x = rng.integer(0, w - 3), y0 = rng.integer(h / 4, h / 2), len = rng.integer(3, h / 2);
    for (int y = y0; y < std::min(h, y0 + len); ++y) img.at(x, y) = img.at(x + 1, y) = static_cast<std::uint8_t>(rng.integer(0, 60));
  }
  return img;
}

AugSpec fixed(AugKind k, Range a, std::uint64_t seed = 5) {
  AugSpec s = default_spec(k);
  s.a = a;
  s.seed = seed;
  return s;
}

Manifest toy_manifest(std::size_t n) {
  Manifest m;
  for (std::size_t i = 0; i < n; ++i) {
    LineSample s;
    s.id = "line" + std::to_string(i);
    s.image = "img/line" + std::to_string(i) + ".png";
    s.text = "text " + std::to_string(i);
    s.split = i % 3 == 0 ? Split::kTest : Split::kTrain;
    s.provenance.source = s.id;
    m.push_back(s);
  }
  return m;
}

}  // namespace

TEST(AugKind, NamesRoundTrip) {
  for (std::size_t i = 0; i < kKindCount; ++i) {
    const auto k = static_cast<AugKind>(i);
    EXPECT_EQ(parse_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_kind("swirl"), ValidationError);
  EXPECT_EQ(default_pool().size(), 20u);
}

TEST(Apply, ZeroRotationIsIdentity) {
  const auto img = line_image();
  EXPECT_EQ(apply(img, fixed(AugKind::kRotation, {0, 0})), img);
}

TEST(Apply, HStretchWidensByOnePointTwo) {
  const auto img = line_image(100, 30);
  const auto out = apply(img, default_spec(AugKind::kHStretch));
  EXPECT_EQ(out.width(), 120);
  EXPECT_EQ(out.height(), 30);
  const auto v = apply(img, default_spec(AugKind::kVStretch));
  EXPECT_EQ(v.width(), 100);
  EXPECT_EQ(v.height(), 36);
}

TEST(Apply, SaltPepperZeroDensityIsIdentity) {
  const auto img = line_image();
  EXPECT_EQ(apply(img, fixed(AugKind::kSaltPepper, {0, 0})), img);
}

TEST(Apply, ShiftOnWhiteStaysWhite) {
  const GrayImage white(40, 20, 255);
  AugSpec s = default_spec(AugKind::kShift);
  s.a = {5, 5};
  s.b = {0, 0};
  EXPECT_EQ(apply(white, s), white);
}

TEST(Apply, ShiftMovesContentByDrawnAmount) {
  GrayImage img(40, 20, 255);
  img.at(20, 10) = 0;
  AugSpec s = default_spec(AugKind::kShift);
  s.a = {5, 5};
  s.b = {0, 0};
  const auto out = apply(img, s);
  int dark = 0;
  for (int x = 0; x < 40; ++x) {
    if (out.at(x, 10) == 0) {
      ++dark;
      EXPECT_EQ(std::abs(x - 20), 5);
    }
  }
  EXPECT_EQ(dark, 1);
}

TEST(Apply, OneByOnePassesThroughWarps) {
  const GrayImage dot(1, 1, 17);
  for (std::size_t i = 0; i < kKindCount; ++i) {
    AugSpec s = default_spec(static_cast<AugKind>(i));
    if (!is_geometric(s.kind)) continue;
    EXPECT_EQ(apply(dot, s), dot) << to_string(s.kind);
  }
}

TEST(Apply, EveryOperatorDeterministicAndShapePreserving) {
  const auto img = line_image(60, 24);
  for (std::size_t i = 0; i < kKindCount; ++i) {
    AugSpec s = default_spec(static_cast<AugKind>(i));
    s.seed = 99;
    const auto a = apply(img, s), b = apply(img, s);
    EXPECT_EQ(a, b) << to_string(s.kind);
    if (s.kind != AugKind::kHStretch && s.kind != AugKind::kVStretch) {
      EXPECT_EQ(a.width(), img.width()) << to_string(s.kind);
      EXPECT_EQ(a.height(), img.height()) << to_string(s.kind);
    }
  }
}

TEST(Apply, OperatorsChangeSomething) {
  const auto img = line_image(60, 24);
  for (std::size_t i = 0; i < kKindCount; ++i) {
    AugSpec s = default_spec(static_cast<AugKind>(i));
    if (s.kind == AugKind::kHStretch || s.kind == AugKind::kVStretch) continue;
    bool changed = false;
    for (std::uint64_t seed = 0; seed < 5 && !changed; ++seed) {
      s.seed = seed;
      changed = apply(img, s) != img;
    }
    EXPECT_TRUE(changed) << to_string(s.kind);
  }
}

TEST(Apply, RandomImagesAllOperatorsRandomSeeds) {
  Rng rng(77);
  for (int t = 0; t < 10; ++t) {
    GrayImage img(rng.integer(1, 40), rng.integer(1, 20));
    for (auto& p : img.pixels()) p = static_cast<std::uint8_t>(rng.integer(0, 255));
    for (std::size_t i = 0; i < kKindCount; ++i) {
      AugSpec s = default_spec(static_cast<AugKind>(i));
      s.seed = rng.next();
      const auto out = apply(img, s);
      EXPECT_EQ(out.size(), static_cast<std::size_t>(out.width()) * static_cast<std::size_t>(out.height()));
    }
  }
}

TEST(Apply, Validation) {
  AugSpec s = default_spec(AugKind::kJpeg);
  s.a = {0, 50};
  EXPECT_THROW(apply(line_image(), s), ValidationError);
  s = default_spec(AugKind::kRotation);
  s.p = 1.5;
  EXPECT_THROW(apply(line_image(), s), ValidationError);
  s = default_spec(AugKind::kRotation);
  s.a = {3, -3};
  EXPECT_THROW(apply(line_image(), s), ValidationError);
}

TEST(Pipeline, ZeroProbabilitiesIsIdentity) {
  auto p = default_noise_pipeline();
  for (auto& s : p) s.p = 0.0;
  const auto img = line_image();
  EXPECT_EQ(apply_pipeline(img, p, 42), img);
}

TEST(Pipeline, IdentityParametersAtProbabilityOne) {
  NoisePipeline p;
  auto add = [&](AugKind k, Range a) {
    AugSpec s = default_spec(k);
    s.a = a;
    if (k == AugKind::kElastic) s.b = {0.8, 0.8};
    s.p = 1.0;
    p.push_back(s);
  };
  add(AugKind::kPiecewiseAffine, {0, 0});
  add(AugKind::kElastic, {0, 0});
  add(AugKind::kDropout, {0, 0});
  add(AugKind::kBlur, {0, 0});
  p.back().ksize = 0;
  add(AugKind::kLinearContrast, {1, 1});
  add(AugKind::kBrightness, {1, 1});
  add(AugKind::kLaplaceNoise, {0, 0});
  add(AugKind::kVTranslate, {0, 0});
  add(AugKind::kConvBlur, {0, 0});
  add(AugKind::kRotation, {0, 0});
  add(AugKind::kGaussianNoise, {0, 0});
  const auto img = line_image();
  EXPECT_EQ(apply_pipeline(img, p, 42), img);
}

TEST(Pipeline, SameSeedIsByteIdentical) {
  const auto img = line_image();
  const auto p = default_noise_pipeline();
  const auto a = apply_pipeline(img, p, 42), b = apply_pipeline(img, p, 42);
  EXPECT_EQ(imaging::encode_png(a), imaging::encode_png(b));
  bool differs = false;
  for (std::uint64_t s = 43; s < 48 && !differs; ++s) differs = apply_pipeline(img, p, s) != a;
  EXPECT_TRUE(differs);
}

TEST(Pipeline, DefaultProbabilities) {
  const auto p = default_noise_pipeline();
  ASSERT_EQ(p.size(), 10u);
  const std::vector<double> expected{0.6, 0.5, 0.4, 0.4, 0.4, 0.3, 0.3, 0.3, 0.5, 1.0};
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_DOUBLE_EQ(p[i].p, expected[i]) << to_string(p[i].kind);
  EXPECT_EQ(p[0].a, (Range{0.005, 0.015}));
  EXPECT_EQ(p[1].a, (Range{1.5, 3.0}));
  EXPECT_EQ(p[1].b, (Range{0.6, 1.0}));
  EXPECT_EQ(p[2].a, (Range{3, 5}));
  EXPECT_EQ(p[4].a, (Range{0.5, 0.9}));
}

TEST(Pipeline, StageFiringRateMatchesProbability) {
  NoisePipeline p{fixed(AugKind::kBrightness, {0, 0})};
  p[0].p = 0.3;
  const GrayImage img(2, 2, 200);
  int fired = 0;
  for (std::uint64_t s = 0; s < 4000; ++s) fired += apply_pipeline(img, p, s) != img;
  EXPECT_NEAR(fired / 4000.0, 0.3, 0.03);
}

TEST(Expand, CardinalityMatchesMultiplicityTable) {
  const auto m = toy_manifest(2480);
  const auto pool = default_pool();
  EXPECT_EQ(expand_dataset(m, 2, pool, 42).size(), 7440u);
  EXPECT_EQ(expand_dataset(m, 4, pool, 42).size(), 12400u);
  EXPECT_EQ(expand_dataset(m, 8, pool, 42).size(), 22320u);
  EXPECT_EQ(expand_dataset(m, 12, pool, 42).size(), 32240u);
  EXPECT_EQ(expand_dataset(m, 16, pool, 42).size(), 42160u);
}

TEST(Expand, ZeroIsUnchangedNegativeThrows) {
  const auto m = toy_manifest(5);
  EXPECT_EQ(expand_dataset(m, 0, default_pool(), 1), m);
  EXPECT_THROW(expand_dataset(m, -1, default_pool(), 1), ValidationError);
}

TEST(Expand, VariantsCopyTextAndSplitAndDrawWithoutReplacement) {
  const auto m = toy_manifest(7);
  const auto out = expand_dataset(m, 24, default_pool(), 9);
  ASSERT_EQ(out.size(), 7u * 25u);
  for (std::size_t j = 0; j < m.size(); ++j) {
    const std::size_t base = j * 25;
    EXPECT_EQ(out[base], m[j]);
    std::set<std::string> first20;
    for (std::size_t i = 1; i <= 24; ++i) {
      const auto& v = out[base + i];
      EXPECT_EQ(v.text, m[j].text);
      EXPECT_EQ(v.split, m[j].split);
      EXPECT_EQ(v.provenance.parent, m[j].image);
      EXPECT_EQ(v.provenance.seed, mix_seed(9, {j, i}));
      if (i <= 20) first20.insert(v.provenance.augmentation);
    }
    EXPECT_EQ(first20.size(), 20u);
  }
  check_unique_ids(out);
}

TEST(Expand, DeterministicAndPrefixStable) {
  const auto m = toy_manifest(30);
  const auto a = expand_dataset(m, 4, default_pool(), 3);
  EXPECT_EQ(a, expand_dataset(m, 4, default_pool(), 3));
  EXPECT_NE(a, expand_dataset(m, 4, default_pool(), 4));
  // Item j's variants do not depend on the items after it.
  const Manifest head(m.begin(), m.begin() + 10);
  const auto b = expand_dataset(head, 4, default_pool(), 3);
  EXPECT_TRUE(std::equal(b.begin(), b.end(), a.begin()));
}

TEST(Expand, MaterializeIsWorkerCountInvariant) {
  const auto root = std::filesystem::temp_directory_path() / "htrkit_expand_test";
  std::filesystem::remove_all(root);
  auto m = toy_manifest(4);
  for (std::size_t i = 0; i < m.size(); ++i) imaging::save_image(root / m[i].image, line_image(50, 20, i));
  const auto pool = default_pool();
  const auto out = expand_dataset(m, 8, pool, 42);
  std::vector<std::vector<std::uint8_t>> first;
  materialize(out, pool, root, 1);
  for (const auto& s : out) first.push_back(imaging::read_bytes(root / s.image));
  materialize(out, pool, root, 4);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(imaging::read_bytes(root / out[i].image), first[i]);
  std::filesystem::remove_all(root);
}

TEST(Overrides, ReplaceAndAppend) {
  const auto j = nlohmann::json::parse(R"([{"kind": "rotation", "a": [-1, 1], "p": 0.5},
                                           {"kind": "dropout", "a": 0.02}])");
  const auto pool = apply_overrides(default_pool(), j);
  ASSERT_EQ(pool.size(), 21u);
  EXPECT_EQ(pool[0].a, (Range{-1, 1}));
  EXPECT_DOUBLE_EQ(pool[0].p, 0.5);
  EXPECT_EQ(pool[20].kind, AugKind::kDropout);
  EXPECT_EQ(pool[20].a, (Range{0.02, 0.02}));
  EXPECT_THROW(apply_overrides(default_pool(), nlohmann::json::parse(R"([{"kind": "warp"}])")), ValidationError);
  EXPECT_THROW(apply_overrides(default_pool(), nlohmann::json::parse(R"({"kind": "blur"})")), ValidationError);
  EXPECT_EQ(spec_from_json(to_json(pool[0])), pool[0]);
}
