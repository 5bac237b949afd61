#include <gtest/gtest.h>

#include "htrkit/metrics.hpp"
#include "htrkit/rng.hpp"
#include "oracles.hpp"

using namespace htrkit;
using namespace htrkit::metrics;

TEST(Align, Identity) {
  const auto a = align("abc", "abc");
  EXPECT_EQ(a.substitutions, 0u);
  EXPECT_EQ(a.deletions, 0u);
  EXPECT_EQ(a.insertions, 0u);
  EXPECT_EQ(a.correct, 3u);
}

TEST(Align, SingleSubstitutionMatchesBruteForce) {
  const auto a = align("abcd", "abxd");
  EXPECT_EQ(a.substitutions, 1u);
  EXPECT_EQ(a.deletions, 0u);
  EXPECT_EQ(a.insertions, 0u);
  EXPECT_EQ(a.correct, 3u);
  EXPECT_EQ(static_cast<int>(a.distance()), oracle::edit_distance(U"abcd", U"abxd"));
}

TEST(Align, FullDeletion) {
  const auto a = align("ab", "");
  EXPECT_EQ(a.deletions, 2u);
  EXPECT_EQ(a.correct, 0u);
  ASSERT_EQ(a.ops.size(), 2u);
  EXPECT_EQ(a.ops[0].kind, EditKind::kDel);
}

TEST(Align, TieBreakPrefersSubstitutionOverIndel) {
  // "ab" -> "ba": distance 2, either two SUBs or DEL+INS; SUB preferred.
  const auto a = align("ab", "ba");
  EXPECT_EQ(a.distance(), 2u);
  EXPECT_EQ(a.substitutions, 2u);
}

TEST(Align, ZeroWidthStrippedByDefault) {
  EXPECT_EQ(align("क\u200Bख", "कख").distance(), 0u);
  EXPECT_EQ(align("क\u200Bख", "कख", {.strip_zero_width = false}).distance(), 1u);
}

TEST(Align, CountsInvariantAndReplayOnRandomPairs) {
  Rng rng(1);
  const std::u32string alpha = U"abcक";
  for (int t = 0; t < 2000; ++t) {
    std::u32string r, h;
    for (int i = rng.integer(0, 8); i > 0; --i) r.push_back(alpha[rng.below(alpha.size())]);
    for (int i = rng.integer(0, 8); i > 0; --i) h.push_back(alpha[rng.below(alpha.size())]);
    const auto a = align(utf8::encode(r), utf8::encode(h));
    EXPECT_EQ(a.ref_length(), r.size());
    EXPECT_EQ(a.hyp_length(), h.size());
    const auto replay = apply_ops(a);
    EXPECT_EQ(std::u32string(replay.begin(), replay.end()), h);
    std::size_t s = 0, d = 0, i = 0, c = 0;
    for (const auto& op : a.ops) {
      switch (op.kind) {
        case EditKind::kSub: ++s; break;
        case EditKind::kDel: ++d; break;
        case EditKind::kIns: ++i; break;
        case EditKind::kMatch: ++c; break;
      }
    }
    EXPECT_EQ(s, a.substitutions);
    EXPECT_EQ(d, a.deletions);
    EXPECT_EQ(i, a.insertions);
    EXPECT_EQ(c, a.correct);
  }
}

TEST(Align, TriangleInequality) {
  Rng rng(2);
  const std::string alpha = "abcd";
  auto rand_str = [&] {
    std::string s;
    for (int i = rng.integer(0, 10); i > 0; --i) s.push_back(alpha[rng.below(alpha.size())]);
    return s;
  };
  for (int t = 0; t < 2000; ++t) {
    const auto a = rand_str(), b = rand_str(), c = rand_str();
    EXPECT_LE(align(a, c).distance(), align(a, b).distance() + align(b, c).distance());
  }
}

TEST(Align, MatchesBfsOracleOnSmallStrings) {
  oracle::EditGraph g(U"ab", 4);
  const auto& nodes = g.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto dist = g.distances_from(i);
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      const auto a = align_sequences<char32_t>(std::span<const char32_t>(nodes[i]),
                                               std::span<const char32_t>(nodes[j]));
      ASSERT_EQ(static_cast<int>(a.distance()), dist[j]);
    }
  }
}

TEST(Cer, Examples) {
  EXPECT_EQ(cer("abcd", "abxd"), Rational(1, 4));
  EXPECT_EQ(cer("x", "x"), Rational(0));
  EXPECT_EQ(cer("a", "abc"), Rational(2));
  EXPECT_THROW(cer("", "abc"), ValidationError);
}

TEST(WeightedCer, Examples) {
  const std::vector<LineScore> a{{10, Rational(1, 10)}, {30, Rational(0)}};
  EXPECT_EQ(weighted_cer(a), Rational(1, 40));
  const std::vector<LineScore> b{{5, Rational(0)}};
  EXPECT_EQ(weighted_cer(b), Rational(0));
  const std::vector<LineScore> c{{1, Rational(1)}, {1, Rational(1)}};
  EXPECT_EQ(weighted_cer(c), Rational(1));
  const std::vector<LineScore> z{{0, Rational(1)}};
  EXPECT_THROW(weighted_cer(z), ValidationError);
  EXPECT_THROW(weighted_cer(std::span<const LineScore>{}), ValidationError);
}

TEST(WeightedCer, Properties) {
  Rng rng(4);
  for (int t = 0; t < 500; ++t) {
    std::vector<LineScore> lines;
    Rational lo = 100, hi = -1;
    const bool equal_len = t % 2 == 0;
    for (int i = rng.integer(1, 8); i > 0; --i) {
      const long long len = equal_len ? 7 : rng.integer(1, 50);
      const Rational c(rng.integer(0, 60), len);
      lo = std::min(lo, c);
      hi = std::max(hi, c);
      lines.push_back({len, c});
    }
    const Rational w = weighted_cer(lines);
    EXPECT_GE(w, lo);
    EXPECT_LE(w, hi);
    if (equal_len) { EXPECT_EQ(w, mean_cer(lines)); }
    if (lines.size() == 1) { EXPECT_EQ(w, lines[0].cer); }
  }
}

TEST(ExactMatch, Examples) {
  const std::vector<TextPair> a{{"a", "a"}, {"b", "c"}};
  EXPECT_EQ(exact_match_accuracy(a), Rational(1, 2));
  EXPECT_THROW(exact_match_accuracy(std::span<const TextPair>{}), ValidationError);
  const std::vector<TextPair> zw{{"क\u200Bख", "कख"}};
  EXPECT_EQ(exact_match_accuracy(zw), Rational(1));
}

TEST(Evaluate, SummaryAndEmptyPolicy) {
  const std::vector<EvalRecord> recs{{"1", "abcd", "abxd"}, {"2", "x", "x"}, {"3", "", "q"}};
  EXPECT_THROW(evaluate(recs), ValidationError);
  const auto s = evaluate(recs, {}, EmptyRefPolicy::kSkip);
  EXPECT_EQ(s.skipped_empty, 1u);
  EXPECT_EQ(s.lines.size(), 2u);
  EXPECT_EQ(s.mean_cer, Rational(1, 8));
  EXPECT_EQ(s.weighted_cer, Rational(1, 5));
  EXPECT_EQ(s.accuracy, Rational(1, 2));
}
