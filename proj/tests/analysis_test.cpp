#include <gtest/gtest.h>

#include "htrkit/analysis.hpp"
#include "htrkit/rng.hpp"

using namespace htrkit;
using namespace htrkit::analysis;
using metrics::Rational;

namespace {

UncertaintyRecord rec(double ratio, bool error) {
  UncertaintyRecord r;
  r.relative_prob = ratio;
  r.is_error = error;
  return r;
}

decode::StepRecord step(decode::TokenId chosen, decode::TopList top) {
  return {chosen, top.empty() ? 0.0 : top[0].second, std::move(top)};
}

}  // namespace

TEST(Confusion, SubstitutionDeletionInsertion) {
  std::vector<metrics::Alignment> al{metrics::align("abcd", "abxd")};
  auto m = build_confusion(al);
  EXPECT_EQ((m.substitutions[{U'c', U'x'}]), 1u);
  EXPECT_EQ(m.total_substitutions(), 1u);

  m = build_confusion(std::vector<metrics::Alignment>{metrics::align("ab", "a")});
  EXPECT_EQ(m.deletions[U'b'], 1u);
  m = build_confusion(std::vector<metrics::Alignment>{metrics::align("a", "ab")});
  EXPECT_EQ(m.insertions[U'b'], 1u);
}

TEST(Confusion, TotalsReconcileWithAlignmentCounts) {
  Rng rng(5);
  const std::u32string alphabet = U"abcकखग ";
  std::vector<metrics::Alignment> al;
  std::size_t s = 0, d = 0, i = 0;
  for (int n = 0; n < 300; ++n) {
    std::u32string r, h;
    for (int k = rng.integer(0, 12); k > 0; --k) r += alphabet[rng.below(alphabet.size())];
    for (int k = rng.integer(0, 12); k > 0; --k) h += alphabet[rng.below(alphabet.size())];
    al.push_back(metrics::align(utf8::encode(r), utf8::encode(h)));
    s += al.back().substitutions;
    d += al.back().deletions;
    i += al.back().insertions;
  }
  const auto m = build_confusion(al);
  EXPECT_EQ(m.total_substitutions(), s);
  EXPECT_EQ(m.total_deletions(), d);
  EXPECT_EQ(m.total_insertions(), i);
  const auto shares = error_share(m);
  Rational sum = 0;
  std::uint64_t count = 0;
  for (std::size_t k = 0; k < shares.size(); ++k) {
    sum += shares[k].share;
    count += shares[k].count;
    if (k) {
      EXPECT_TRUE(shares[k - 1].count > shares[k].count ||
                  (shares[k - 1].count == shares[k].count && shares[k - 1].ch < shares[k].ch));
    }
  }
  EXPECT_EQ(sum, 1);
  EXPECT_EQ(count, s + d + i);
}

TEST(ErrorShare, RankingAndShares) {
  ConfusionMatrix m;
  m.substitutions[{U'x', U'q'}] = 3;
  m.deletions[U'x'] = 1;
  m.insertions[U'y'] = 6;
  const auto s = error_share(m);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].ch, U'y');
  EXPECT_EQ(s[0].count, 6u);
  EXPECT_EQ(s[0].share, Rational(3, 5));
  EXPECT_EQ(s[1].ch, U'x');
  EXPECT_EQ(s[1].share, Rational(2, 5));
  EXPECT_EQ(error_share(m, 1).size(), 1u);
  EXPECT_TRUE(error_share(ConfusionMatrix{}).empty());
}

TEST(ErrorShare, TiesBreakByCodepoint) {
  ConfusionMatrix m;
  m.deletions[U'z'] = 2;
  m.deletions[U'a'] = 2;
  const auto s = error_share(m);
  EXPECT_EQ(s[0].ch, U'a');
  EXPECT_EQ(s[1].ch, U'z');
}

TEST(Histogram, HalfOpenBins) {
  const std::vector<Rational> cers{Rational(0), Rational(1, 10), Rational(1, 20), Rational(3, 2)};
  const auto bins = cer_histogram(cers, Rational(1, 10));
  ASSERT_EQ(bins.size(), 16u);
  EXPECT_EQ(bins[0].count, 2u);
  EXPECT_EQ(bins[1].count, 1u);
  EXPECT_EQ(bins[15].count, 1u);
  EXPECT_EQ(bins[15].lo, Rational(3, 2));
  std::uint64_t total = 0;
  for (const auto& b : bins) total += b.count;
  EXPECT_EQ(total, cers.size());
  EXPECT_TRUE(cer_histogram({}, Rational(1, 10)).empty());
  EXPECT_THROW(cer_histogram(cers, Rational(0)), ValidationError);
}

TEST(LengthBins, WeightedCerPerBin) {
  const std::vector<metrics::LineScore> lines{{10, Rational(1, 10)}, {30, Rational(0)}, {100, Rational(1, 2)}};
  const std::vector<std::int64_t> edges{0, 50, 80, 200};
  const auto bins = cer_vs_length(lines, edges);
  ASSERT_EQ(bins.size(), 3u);
  EXPECT_EQ(*bins[0].weighted_cer, Rational(1, 40));
  EXPECT_EQ(bins[0].lines, 2u);
  EXPECT_FALSE(bins[1].weighted_cer.has_value());
  EXPECT_EQ(*bins[2].weighted_cer, Rational(1, 2));
  const std::vector<std::int64_t> bad{5, 5};
  EXPECT_THROW(cer_vs_length(lines, bad), ValidationError);
}

TEST(Uncertainty, RelativeProbability) {
  EXPECT_DOUBLE_EQ(relative_probability({{3, 0.8}, {4, 0.2}}), 0.25);
  EXPECT_DOUBLE_EQ(relative_probability({{3, 1.0}}), 0.0);
  EXPECT_GE(relative_probability({{3, 0.8}, {4, 0.2}}), 0.034);
}

TEST(Uncertainty, RelativeProbabilityInUnitIntervalForSortedDistributions) {
  Rng rng(9);
  for (int n = 0; n < 100000; ++n) {
    const auto k = static_cast<std::size_t>(rng.integer(1, 6));
    std::vector<double> w(k);
    double sum = 0;
    for (auto& x : w) sum += x = rng.uniform() + 1e-12;
    std::sort(w.rbegin(), w.rend());
    decode::TopList top;
    for (std::size_t i = 0; i < k; ++i) top.push_back({static_cast<int>(i), w[i] / sum});
    const double r = relative_probability(top);
    ASSERT_GE(r, 0.0);
    ASSERT_LE(r, 1.0);
  }
}

TEST(Uncertainty, DetectionScoreExample) {
  // 4 errors, 2 of them flagged, plus 2 flagged correct tokens.
  std::vector<UncertaintyRecord> r{rec(0.5, true), rec(0.5, true), rec(0.0, true), rec(0.0, true),
                                   rec(0.5, false), rec(0.5, false), rec(0.0, false)};
  const auto s = score_detection(r, 0.034);
  EXPECT_EQ(s.precision, Rational(1, 2));
  EXPECT_EQ(s.recall, Rational(1, 2));
  EXPECT_EQ(s.f1, Rational(1, 2));
  const auto none = score_detection(r, 0.9);
  EXPECT_FALSE(none.precision_defined);
  EXPECT_EQ(none.precision, 0);
  EXPECT_EQ(none.f1, 0);
}

TEST(Uncertainty, ScanAlignsTokensAndCountsRecoverable) {
  LinePrediction line;
  line.id = "l1";
  line.eos = 1;
  line.reference = {5, 6, 7};
  // predicted 5 9 7 then EOS; step 2 has the right token 6 as runner-up.
  line.steps = {step(5, {{5, 0.9}, {8, 0.1}}), step(9, {{9, 0.6}, {6, 0.4}}), step(7, {{7, 0.99}, {2, 0.01}}),
                step(1, {{1, 1.0}})};
  const std::vector<LinePrediction> lines{line};
  const auto rep = uncertainty_scan(lines, 0.034);
  ASSERT_EQ(rep.records.size(), 3u);
  EXPECT_FALSE(rep.records[0].is_error);
  EXPECT_TRUE(rep.records[1].is_error);
  EXPECT_EQ(rep.records[1].correct_token, 6);
  EXPECT_TRUE(rep.records[1].recoverable);
  EXPECT_TRUE(rep.records[1].flagged);
  EXPECT_FALSE(rep.records[2].flagged);
  EXPECT_EQ(rep.score.errors, 1u);
  EXPECT_EQ(rep.score.flagged, 2u);
  EXPECT_EQ(rep.recoverable, 1u);
  EXPECT_EQ(rep.recoverable_flagged, 1u);
  EXPECT_EQ(rep.missed_reference_tokens, 0u);
}

TEST(Uncertainty, DeletionsAndInsertions) {
  LinePrediction line;
  line.eos = 1;
  line.reference = {5, 6, 7, 8};
  line.steps = {step(5, {{5, 1.0}}), step(8, {{8, 1.0}})};
  auto rep = uncertainty_scan(std::vector<LinePrediction>{line}, 0.034);
  EXPECT_EQ(rep.records.size(), 2u);
  EXPECT_EQ(rep.missed_reference_tokens, 2u);
  line.reference = {5};
  rep = uncertainty_scan(std::vector<LinePrediction>{line}, 0.034);
  ASSERT_EQ(rep.records.size(), 2u);
  EXPECT_TRUE(rep.records[1].is_error);
  EXPECT_FALSE(rep.records[1].correct_token.has_value());
  EXPECT_FALSE(rep.records[1].recoverable);
}

TEST(Sweep, RecoversSeparatingThreshold) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const double cut = rng.uniform(0.05, 0.95);
    std::vector<UncertaintyRecord> r;
    for (int n = rng.integer(1, 40); n > 0; --n) r.push_back(rec(rng.uniform(cut, 1.0), true));
    for (int n = rng.integer(1, 40); n > 0; --n) r.push_back(rec(rng.uniform(0.0, cut * 0.999), false));
    const auto sw = threshold_sweep(r, ratio_grid(r));
    EXPECT_EQ(sw.best.f1, 1);
    double min_err = 1.0, max_ok = 0.0;
    for (const auto& x : r) {
      if (x.is_error) {
        min_err = std::min(min_err, x.relative_prob);
      } else {
        max_ok = std::max(max_ok, x.relative_prob);
      }
    }
    EXPECT_GT(sw.best_threshold, max_ok);
    EXPECT_LE(sw.best_threshold, min_err);
  }
}

TEST(Sweep, FlagCountMonotoneAndTiesPickSmallest) {
  Rng rng(4);
  std::vector<UncertaintyRecord> r;
  for (int n = 0; n < 500; ++n) r.push_back(rec(rng.uniform(), rng.bernoulli(0.3)));
  std::vector<double> grid;
  for (int k = 0; k <= 100; ++k) grid.push_back(k / 100.0);
  const auto sw = threshold_sweep(r, grid);
  for (std::size_t k = 1; k < sw.curve.size(); ++k) EXPECT_LE(sw.curve[k].flagged, sw.curve[k - 1].flagged);
  for (const auto& c : sw.curve) {
    EXPECT_LE(c.f1, sw.best.f1);
    if (c.f1 == sw.best.f1) {
      EXPECT_GE(c.threshold, sw.best_threshold);
    }
  }
  // All records errors: every threshold down to the lowest ratio gives F1 = 1.
  std::vector<UncertaintyRecord> all{rec(0.2, true), rec(0.4, true)};
  EXPECT_DOUBLE_EQ(threshold_sweep(all, {0.0, 0.1, 0.2, 0.3}).best_threshold, 0.0);
  EXPECT_THROW(threshold_sweep(r, {}), ValidationError);
}

TEST(Heatmap, DarkestCellIsMostFrequentPair) {
  ConfusionMatrix m;
  m.substitutions[{U'a', U'b'}] = 4;
  m.substitutions[{U'b', U'c'}] = 1;
  const auto h = confusion_heatmap(m, 30, 2);
  ASSERT_EQ(h.labels.size(), 3u);
  EXPECT_EQ(h.labels[0], U'b');
  EXPECT_EQ(h.image.width(), 6);
  EXPECT_EQ(h.image.at(0 * 2, 1 * 2), 0);  // row a, column b
  EXPECT_EQ(h.image.at(0, 0), 255);
  EXPECT_FALSE(confusion_csv(m).empty());
}
