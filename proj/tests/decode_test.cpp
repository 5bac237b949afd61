#include <gtest/gtest.h>

#include <sstream>

#include "decode_util.hpp"
#include "htrkit/decode.hpp"

using namespace htrkit;
using namespace htrkit::decode;

namespace {

MarkovScorer toy() { return load_markov(std::string(HTRKIT_SOURCE_DIR) + "/data/toy_markov.json"); }

constexpr TokenId A = 2, B = 3, EOS = 1, BOS = 0;

// A single chain BOS -> 2 -> 3 -> EOS with probability 1.
MarkovScorer chain() {
  std::vector<std::vector<double>> rows{{0, 0, 1, 0}, {0, 0, 0, 0}, {0, 0, 0, 1}, {0, 1, 0, 0}};
  return MarkovScorer({"b", "e", "x", "y"}, 0, 1, rows, {{1, 0}, {0, 1}, {1, 1}, {1, -1}});
}

}  // namespace

TEST(Toy, GreedyPicksAThenEos) {
  const auto r = greedy(toy(), 10);
  EXPECT_EQ(r.tokens, (std::vector<TokenId>{BOS, A, EOS}));
  EXPECT_NEAR(probability(r), 0.20, 1e-12);
  EXPECT_FALSE(r.truncated);
}

TEST(Toy, BeamWidthTwoFindsB) {
  const auto r = beam(toy(), 2, 10);
  EXPECT_EQ(r.tokens, (std::vector<TokenId>{BOS, B, EOS}));
  EXPECT_NEAR(probability(r), 0.405, 1e-12);
}

TEST(Toy, ExhaustiveOptimumIsB) {
  const auto bf = test_util::brute_force(toy(), 3);
  EXPECT_NEAR(std::exp(bf.best()), 0.405, 1e-12);
  EXPECT_NEAR(beam(toy(), 64, 3).log_prob, bf.best(), 1e-12);
}

TEST(Toy, LowTemperatureAlmostAlwaysGreedy) {
  const auto s = toy();
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    hits += sample(s, {.tau = 0.01}, seed, 10).tokens == std::vector<TokenId>{BOS, A, EOS};
  }
  EXPECT_GE(hits, 9990);
}

TEST(Toy, ContrastiveWithOneHotEqualsGreedy) {
  const auto s = toy();
  for (double alpha : {0.0, 0.2, 0.6, 1.0}) {
    EXPECT_EQ(contrastive(s, 5, alpha, 10).tokens, greedy(s, 10).tokens) << alpha;
  }
}

TEST(Greedy, SingleChainAndTruncation) {
  const auto c = chain();
  EXPECT_EQ(greedy(c, 10).tokens, (std::vector<TokenId>{0, 2, 3, 1}));
  const auto t = greedy(c, 1);
  EXPECT_TRUE(t.truncated);
  EXPECT_EQ(t.tokens, (std::vector<TokenId>{0, 2}));
  EXPECT_TRUE(beam(c, 3, 1).truncated);
  EXPECT_THROW(greedy(c, 0), ValidationError);
}

TEST(Greedy, TiesGoToLowestId) {
  std::vector<std::vector<double>> rows{{0, 0.2, 0.4, 0.4}, {0, 0, 0, 0}, {0, 1, 0, 0}, {0, 1, 0, 0}};
  const MarkovScorer s({"b", "e", "x", "y"}, 0, 1, rows);
  EXPECT_EQ(greedy(s, 5).tokens[1], 2);
  EXPECT_EQ(beam(s, 1, 5).tokens[1], 2);
}

TEST(Records, SortedAndConsistentLogProb) {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const auto s = test_util::random_markov(rng, static_cast<std::size_t>(rng.integer(3, 6)));
    for (const auto& r : {greedy(s, 6, 0), beam(s, 3, 6, 0), sample(s, {.p = 0.9}, 7, 6, 0)}) {
      double lp = 0.0;
      for (const auto& st : r.steps) {
        lp += std::log(st.chosen_prob);
        double sum = 0.0;
        for (std::size_t i = 0; i < st.top.size(); ++i) {
          sum += st.top[i].second;
          if (i) { EXPECT_GE(st.top[i - 1].second, st.top[i].second); }
        }
        EXPECT_NEAR(sum, 1.0, 1e-9);
      }
      EXPECT_DOUBLE_EQ(lp, r.log_prob);
      EXPECT_TRUE(r.truncated || r.tokens.back() == s.eos());
      EXPECT_EQ(r.tokens.front(), s.bos());
    }
  }
}

TEST(Equivalences, OnRandomScorers) {
  Rng rng(5);
  for (int t = 0; t < 300; ++t) {
    const auto n = static_cast<std::size_t>(rng.integer(3, 6));
    const int L = rng.integer(1, 5);
    const auto s = test_util::random_markov(rng, n);
    const auto g = greedy(s, L);
    EXPECT_EQ(beam(s, 1, L).tokens, g.tokens);
    EXPECT_EQ(sample(s, {.k = 1}, rng.next(), L).tokens, g.tokens);
    EXPECT_EQ(contrastive(s, static_cast<int>(n), 0.0, L).tokens, g.tokens);
    EXPECT_EQ(contrastive(s, 1, 0.7, L).tokens, g.tokens);
    // Every step maximum is at least 1/|V|, so this nucleus is one token.
    EXPECT_EQ(sample(s, {.p = 1.0 / static_cast<double>(n)}, rng.next(), L).tokens, g.tokens);
  }
}

TEST(Equivalences, WideBeamIsExhaustive) {
  Rng rng(6);
  for (int t = 0; t < 200; ++t) {
    const auto n = static_cast<std::size_t>(rng.integer(3, 5));
    const int L = rng.integer(1, 4);
    const auto s = test_util::random_markov(rng, n, false);
    const int width = static_cast<int>(std::pow(static_cast<double>(n), L));
    const auto bf = test_util::brute_force(s, L);
    const auto r = beam(s, width, L);
    EXPECT_EQ(r.truncated, !bf.any_finished);
    EXPECT_NEAR(r.log_prob, bf.best(), 1e-12);
  }
}

TEST(Beam, ScoreMonotoneInWidth) {
  Rng rng(7);
  int violations = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto s = test_util::random_markov(rng, static_cast<std::size_t>(rng.integer(3, 6)), false);
    const int L = rng.integer(1, 6);
    double prev = -INFINITY;
    for (int w : {1, 5, 10, 20}) {
      const auto r = beam(s, w, L);
      const double score = r.truncated ? -INFINITY : r.log_prob;
      if (score < prev - 1e-12) ++violations;
      prev = std::max(prev, score);
    }
  }
  EXPECT_EQ(violations, 0);
}

TEST(Contrastive, NeedsRepresentations) {
  std::vector<std::vector<double>> rows{{0, 1, 0}, {0, 0, 0}, {0, 1, 0}};
  const MarkovScorer s({"b", "e", "x"}, 0, 1, rows);
  EXPECT_THROW(contrastive(s, 3, 0.5, 5), ValidationError);
}

TEST(Contrastive, PenalizesRepetition) {
  // From x: x 0.6, y 0.4. With one-hot representations α = 0.5 prefers y
  // after one x: 0.5·0.6 − 0.5·1 < 0.5·0.4 − 0.
  std::vector<std::vector<double>> rows{{0, 0, 1, 0}, {0, 0, 0, 0}, {0, 0, 0.6, 0.4}, {0, 1, 0, 0}};
  const MarkovScorer s({"b", "e", "x", "y"}, 0, 1, rows, {{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}});
  EXPECT_EQ(contrastive(s, 2, 0.5, 5).tokens, (std::vector<TokenId>{0, 2, 3, 1}));
  EXPECT_TRUE(greedy(s, 5).truncated);
}

TEST(Sampling, ShapeDistribution) {
  const std::vector<double> p{0.1, 0.2, 0.3, 0.4};
  const auto k2 = shape_distribution(p, {.k = 2});
  EXPECT_NEAR(k2[3], 4.0 / 7.0, 1e-12);
  EXPECT_NEAR(k2[2], 3.0 / 7.0, 1e-12);
  EXPECT_EQ(k2[0], 0.0);
  const auto p05 = shape_distribution(p, {.p = 0.5});  // 0.4 < 0.5, 0.4+0.3 >= 0.5
  EXPECT_NEAR(p05[3], 4.0 / 7.0, 1e-12);
  EXPECT_EQ(p05[1], 0.0);
  const auto t = shape_distribution(p, {.tau = 0.5});  // squares, renormalized
  EXPECT_NEAR(t[3], 0.16 / 0.30, 1e-12);
  const auto one = shape_distribution(p, {.tau = 1.0});
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(one[i], p[i], 1e-12);
  EXPECT_THROW(shape_distribution(p, {.p = 0.0}), ValidationError);
  EXPECT_THROW(shape_distribution(p, {.k = 0}), ValidationError);
}

TEST(Sampling, ReproduciblePerSeed) {
  Rng rng(8);
  const auto s = test_util::random_markov(rng, 6);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    EXPECT_EQ(sample(s, {.tau = 0.8}, seed, 6).tokens, sample(s, {.tau = 0.8}, seed, 6).tokens);
  }
}

TEST(Sampling, EmpiricalFrequenciesMatchTopK) {
  const std::vector<double> p{0.1, 0.2, 0.3, 0.4};
  const auto q = shape_distribution(p, {.k = 3});
  Rng rng(9);
  std::vector<int> counts(4, 0);
  for (int i = 0; i < 20000; ++i) ++counts[static_cast<std::size_t>(draw(q, rng))];
  EXPECT_EQ(counts[0], 0);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_NEAR(counts[i] / 20000.0, q[i], 0.015);
}

TEST(Replay, ServesRecordedStepsThenEos) {
  std::istringstream in(R"({"id": "l1", "step": 1, "top": [[5, 0.5], [6, 0.5]]}
{"id": "l1", "step": 0, "top": [[4, 0.6], [5, 0.2]]}
)");
  const auto f = parse_replay(in, 8);
  ASSERT_EQ(f.items.at("l1").size(), 2u);
  const ReplayScorer s(f.items.at("l1"), f.vocab_size, 1, 2);
  const auto p0 = s.next(std::vector<TokenId>{1});
  EXPECT_NEAR(p0[4], 0.75, 1e-12);
  EXPECT_NEAR(p0[5], 0.25, 1e-12);
  const auto r = greedy(s, 10);
  EXPECT_EQ(r.tokens, (std::vector<TokenId>{1, 4, 5, 2}));
  std::istringstream gap(R"({"id": "x", "step": 1, "top": [[1, 1.0]]})");
  EXPECT_THROW(parse_replay(gap), ValidationError);
}

TEST(Grid, DefaultShapeAndDedupe) {
  const auto g = default_grid();
  EXPECT_EQ(g.size(), 27u);
  EXPECT_EQ(dedupe(g).size(), 27u);
  auto doubled = g;
  doubled.insert(doubled.end(), g.begin(), g.end());
  EXPECT_EQ(dedupe(doubled).size(), 27u);
}

TEST(Grid, RunsOverReplayItems) {
  const auto s = toy();
  const std::vector<GridItem> items{{"a", "A"}, {"b", "B"}};
  auto detok = [&](std::span<const TokenId> toks) {
    std::string out;
    for (TokenId t : toks)
      if (t == A || t == B) out += s.vocab()[static_cast<std::size_t>(t)];
    return out;
  };
  const ScorerFor sf = [&](std::size_t) -> const Scorer& { return s; };
  EXPECT_TRUE(run_grid(items, sf, detok, {}).empty());
  std::vector<DecodeConfig> grid{{.strategy = Strategy::kGreedy}, {.strategy = Strategy::kBeam, .width = 2},
                                 {.strategy = Strategy::kGreedy}};
  const auto rows = run_grid(items, sf, detok, grid);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].accuracy, metrics::Rational(1, 2));
  EXPECT_EQ(rows[1].accuracy, metrics::Rational(1, 2));
  const auto sampled1 = run_grid(items, sf, detok, default_grid(), 1);
  const auto sampled3 = run_grid(items, sf, detok, default_grid(), 3);
  EXPECT_EQ(grid_csv(sampled1), grid_csv(sampled3));
}

TEST(Config, JsonAndValidation) {
  const auto c = config_from_json(nlohmann::json::parse(R"({"strategy": "top_p", "p": 0.7})"));
  EXPECT_EQ(c.strategy, Strategy::kTopP);
  EXPECT_EQ(c.label(), "top_p(p=0.7)");
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"strategy": "top_p", "p": 0})")), ValidationError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"strategy": "nucleus"})")), ValidationError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"strategy": "beam", "width": 0})")), ValidationError);
}

TEST(Markov, FileValidation) {
  auto j = nlohmann::json::parse(R"({"vocab": ["b", "e", "x"], "bos": "b", "eos": "e",
                                     "transitions": {"b": {"x": 0.5, "e": 0.4}, "x": {"e": 1}}})");
  EXPECT_THROW(markov_from_json(j), ValidationError);
  j["transitions"]["b"]["x"] = 0.6;
  EXPECT_NO_THROW(markov_from_json(j));
  j["transitions"]["b"]["z"] = 0.0;
  EXPECT_THROW(markov_from_json(j), ValidationError);
}
