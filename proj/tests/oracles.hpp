#pragma once

// Independent brute-force oracles used only by the tests.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace oracle {

// All strings over `alphabet` with length <= max_len, plus their shortest
// edit-path distances by breadth-first search in the edit graph (unit-cost
// insert/delete/substitute). An optimal script can always be ordered as
// deletions, substitutions, insertions, so intermediate strings never exceed
// the longer endpoint; restricting the graph to length <= max_len is exact.
class EditGraph {
 public:
  EditGraph(std::u32string alphabet, std::size_t max_len) : alphabet_(std::move(alphabet)), max_len_(max_len) {
    nodes_.push_back(U"");
    for (std::size_t len = 1; len <= max_len_; ++len) {
      const std::size_t start = nodes_.size();
      for (std::size_t i = 0; i < start; ++i) {
        if (nodes_[i].size() != len - 1) continue;
        for (char32_t c : alphabet_) nodes_.push_back(nodes_[i] + c);
      }
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) index_[nodes_[i]] = i;
  }

  const std::vector<std::u32string>& nodes() const { return nodes_; }
  std::size_t index(const std::u32string& s) const { return index_.at(s); }

  std::vector<int> distances_from(std::size_t src) const {
    std::vector<int> dist(nodes_.size(), -1);
    std::deque<std::size_t> q{src};
    dist[src] = 0;
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop_front();
      const std::u32string& s = nodes_[u];
      auto visit = [&](const std::u32string& t) {
        const std::size_t v = index_.at(t);
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          q.push_back(v);
        }
      };
      for (std::size_t i = 0; i < s.size(); ++i) {
        visit(s.substr(0, i) + s.substr(i + 1));
        for (char32_t c : alphabet_) {
          if (c == s[i]) continue;
          std::u32string t = s;
          t[i] = c;
          visit(t);
        }
      }
      if (s.size() < max_len_) {
        for (std::size_t i = 0; i <= s.size(); ++i) {
          for (char32_t c : alphabet_) visit(s.substr(0, i) + c + s.substr(i));
        }
      }
    }
    return dist;
  }

 private:
  std::u32string alphabet_;
  std::size_t max_len_;
  std::vector<std::u32string> nodes_;
  std::unordered_map<std::u32string, std::size_t> index_;
};

inline int edit_distance(const std::u32string& a, const std::u32string& b) {
  std::u32string alpha;
  for (char32_t c : a + b) {
    if (alpha.find(c) == std::u32string::npos) alpha.push_back(c);
  }
  EditGraph g(alpha, std::max(a.size(), b.size()));
  return g.distances_from(g.index(a))[g.index(b)];
}

// Otsu by definition: between-class variance w0·w1·(mu0 − mu1)² over the
// pixel list itself (no histogram), computed in exact rationals for every
// t in 0..255. Returns all maximizing thresholds.
inline std::vector<int> otsu_maximizers(const std::vector<std::uint8_t>& px) {
  using R = boost::multiprecision::cpp_rational;
  std::vector<R> var(256, R(-1));
  for (int t = 0; t < 256; ++t) {
    R n0 = 0, n1 = 0, s0 = 0, s1 = 0;
    for (auto v : px) {
      if (v <= t) { n0 += 1; s0 += v; } else { n1 += 1; s1 += v; }
    }
    if (n0 == 0 || n1 == 0) continue;
    const R n = n0 + n1;
    const R d = s0 / n0 - s1 / n1;
    var[static_cast<std::size_t>(t)] = (n0 / n) * (n1 / n) * d * d;
  }
  const R best = *std::max_element(var.begin(), var.end());
  std::vector<int> out;
  for (int t = 0; t < 256; ++t)
    if (var[static_cast<std::size_t>(t)] == best && best >= 0) out.push_back(t);
  return out;
}

}  // namespace oracle
