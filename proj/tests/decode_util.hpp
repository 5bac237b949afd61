#pragma once

// Random Markov scorers and a brute-force sequence oracle for the decoders.

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "htrkit/decode.hpp"
#include "htrkit/rng.hpp"

namespace test_util {

using htrkit::decode::MarkovScorer;
using htrkit::decode::TokenId;

// Vocabulary of `n` tokens (BOS = 0, EOS = 1). Row weights are small
// integers, so exact probability ties and zero transitions both occur.
inline MarkovScorer random_markov(htrkit::Rng& rng, std::size_t n, bool with_embeddings = true) {
  std::vector<std::string> vocab;
  for (std::size_t i = 0; i < n; ++i) vocab.push_back("t" + std::to_string(i));
  std::vector<std::vector<double>> rows(n, std::vector<double>(n, 0.0));
  for (std::size_t r = 0; r < n; ++r) {
    if (r == 1) continue;
    double sum = 0.0;
    std::vector<int> w(n, 0);
    while (sum == 0.0) {
      for (std::size_t c = 1; c < n; ++c) {
        w[c] = rng.integer(0, 4);
        sum += w[c];
      }
    }
    for (std::size_t c = 1; c < n; ++c) rows[r][c] = w[c] / sum;
  }
  std::vector<std::vector<double>> emb;
  if (with_embeddings) {
    for (std::size_t i = 0; i < n; ++i) emb.push_back({rng.normal(), rng.normal(), rng.normal()});
  }
  return MarkovScorer(vocab, 0, 1, std::move(rows), std::move(emb));
}

// Highest sum-of-log-prob sequence over all continuations of length <=
// max_len ending in EOS; if none finishes, the best length-max_len prefix.
// Scores accumulate left to right exactly as the beam decoder does.
struct BruteForceResult {
  double finished = -INFINITY;
  double unfinished = -INFINITY;
  bool any_finished = false;

  double best() const { return any_finished ? finished : unfinished; }
};

inline BruteForceResult brute_force(const htrkit::decode::Scorer& s, int max_len) {
  BruteForceResult out;
  std::vector<TokenId> seq{s.bos()};
  std::function<void(double)> rec = [&](double score) {
    if (static_cast<int>(seq.size()) - 1 == max_len) {
      out.unfinished = std::max(out.unfinished, score);
      return;
    }
    const auto p = s.next(seq);
    for (std::size_t v = 0; v < p.size(); ++v) {
      if (p[v] <= 0.0) continue;
      const double sc = score + std::log(p[v]);
      if (static_cast<TokenId>(v) == s.eos()) {
        out.any_finished = true;
        out.finished = std::max(out.finished, sc);
      } else {
        seq.push_back(static_cast<TokenId>(v));
        rec(sc);
        seq.pop_back();
      }
    }
  };
  rec(0.0);
  return out;
}

}  // namespace test_util
