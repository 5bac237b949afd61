#pragma once

// Decoding strategies over an abstract next-token scorer: greedy, beam
// search, contrastive search and temperature / top-k / top-p sampling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "htrkit/errors.hpp"
#include "htrkit/metrics.hpp"
#include "htrkit/parallel.hpp"
#include "htrkit/rng.hpp"

namespace htrkit::decode {

using TokenId = std::int32_t;

inline constexpr double kProbTolerance = 1e-9;

// Prefixes passed to a scorer start with BOS.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual TokenId bos() const = 0;
  virtual TokenId eos() const = 0;
  virtual std::vector<double> next(std::span<const TokenId> prefix) const = 0;
  virtual bool has_representations() const { return false; }
  // Representation of `token` when it follows `prefix`.
  virtual std::vector<double> representation(std::span<const TokenId> /*prefix*/, TokenId /*token*/) const {
    throw ValidationError("scorer provides no token representations");
  }
};

inline void check_distribution(std::span<const double> p, std::size_t vocab) {
  if (p.size() != vocab) throw ValidationError("scorer returned a distribution of the wrong size");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw ValidationError("scorer returned a negative or NaN probability");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kProbTolerance) throw ValidationError("scorer distribution does not sum to 1");
}

// First-order Markov chain over token ids; the state is the last token.
class MarkovScorer : public Scorer {
 public:
  MarkovScorer(std::vector<std::string> vocab, TokenId bos, TokenId eos, std::vector<std::vector<double>> transitions,
               std::vector<std::vector<double>> embeddings = {})
      : vocab_(std::move(vocab)), bos_(bos), eos_(eos), rows_(std::move(transitions)), emb_(std::move(embeddings)) {
    const std::size_t n = vocab_.size();
    if (n < 2) throw ValidationError("Markov scorer needs at least two tokens");
    if (bos_ < 0 || eos_ < 0 || static_cast<std::size_t>(bos_) >= n || static_cast<std::size_t>(eos_) >= n || bos_ == eos_) {
      throw ValidationError("bad BOS/EOS ids");
    }
    if (rows_.size() != n) throw ValidationError("transition table needs one row per token");
    for (std::size_t i = 0; i < n; ++i) {
      if (static_cast<TokenId>(i) == eos_) continue;
      check_distribution(rows_[i], n);
    }
    if (!emb_.empty()) {
      if (emb_.size() != n) throw ValidationError("embedding table needs one vector per token");
      for (const auto& e : emb_)
        if (e.size() != emb_[0].size() || e.empty()) throw ValidationError("embeddings must share a positive dimension");
    }
  }

  std::size_t vocab_size() const override { return vocab_.size(); }
  TokenId bos() const override { return bos_; }
  TokenId eos() const override { return eos_; }
  const std::vector<std::string>& vocab() const { return vocab_; }

  std::vector<double> next(std::span<const TokenId> prefix) const override {
    if (prefix.empty()) throw ValidationError("prefix must start with BOS");
    const TokenId last = prefix.back();
    if (last < 0 || static_cast<std::size_t>(last) >= vocab_.size() || last == eos_) {
      throw ValidationError("no transition out of token " + std::to_string(last));
    }
    return rows_[static_cast<std::size_t>(last)];
  }

  bool has_representations() const override { return !emb_.empty(); }

  std::vector<double> representation(std::span<const TokenId>, TokenId token) const override {
    if (emb_.empty()) return Scorer::representation({}, token);
    return emb_.at(static_cast<std::size_t>(token));
  }

 private:
  std::vector<std::string> vocab_;
  TokenId bos_, eos_;
  std::vector<std::vector<double>> rows_;
  std::vector<std::vector<double>> emb_;
};

// {"vocab": [names], "bos": name, "eos": name,
//  "transitions": {from: {to: p}}, "embeddings": {name: [..]}}
// Missing transitions are 0; every non-EOS token needs a row.
inline MarkovScorer markov_from_json(const nlohmann::json& j) {
  try {
    const auto vocab = j.at("vocab").get<std::vector<std::string>>();
    std::map<std::string, TokenId> id;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      if (!id.emplace(vocab[i], static_cast<TokenId>(i)).second) throw ValidationError("duplicate token " + vocab[i]);
    }
    auto lookup = [&](const std::string& name) {
      auto it = id.find(name);
      if (it == id.end()) throw ValidationError("unknown token '" + name + "'");
      return it->second;
    };
    const TokenId bos = lookup(j.at("bos").get<std::string>()), eos = lookup(j.at("eos").get<std::string>());
    std::vector<std::vector<double>> rows(vocab.size(), std::vector<double>(vocab.size(), 0.0));
    for (const auto& [from, row] : j.at("transitions").items()) {
      for (const auto& [to, p] : row.items()) {
        rows[static_cast<std::size_t>(lookup(from))][static_cast<std::size_t>(lookup(to))] = p.get<double>();
      }
    }
    std::vector<std::vector<double>> emb;
    if (auto it = j.find("embeddings"); it != j.end()) {
      emb.assign(vocab.size(), {});
      for (const auto& [name, v] : it->items()) emb[static_cast<std::size_t>(lookup(name))] = v.get<std::vector<double>>();
    }
    return MarkovScorer(vocab, bos, eos, std::move(rows), std::move(emb));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad Markov scorer file: ") + e.what());
  }
}

inline MarkovScorer load_markov(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return markov_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

using TopList = std::vector<std::pair<TokenId, double>>;

// Serves recorded per-step distributions regardless of the prefix content:
// step t (prefix length t+1) returns the t-th recorded list, renormalized.
// Past the last recorded step the only continuation is EOS.
class ReplayScorer : public Scorer {
 public:
  ReplayScorer(std::vector<TopList> steps, std::size_t vocab_size, TokenId bos, TokenId eos)
      : steps_(std::move(steps)), vocab_(vocab_size), bos_(bos), eos_(eos) {
    if (static_cast<std::size_t>(std::max(bos, eos)) >= vocab_) throw ValidationError("BOS/EOS outside vocabulary");
    for (const auto& s : steps_) {
      double sum = 0.0;
      for (const auto& [t, p] : s) {
        if (t < 0 || static_cast<std::size_t>(t) >= vocab_) throw ValidationError("replay token outside vocabulary");
        if (!(p >= 0.0)) throw ValidationError("replay probability must be non-negative");
        sum += p;
      }
      if (!(sum > 0.0)) throw ValidationError("replay step has no probability mass");
    }
  }

  std::size_t vocab_size() const override { return vocab_; }
  TokenId bos() const override { return bos_; }
  TokenId eos() const override { return eos_; }
  std::size_t steps() const { return steps_.size(); }

  std::vector<double> next(std::span<const TokenId> prefix) const override {
    if (prefix.empty()) throw ValidationError("prefix must start with BOS");
    std::vector<double> out(vocab_, 0.0);
    const std::size_t t = prefix.size() - 1;
    if (t >= steps_.size()) {
      out[static_cast<std::size_t>(eos_)] = 1.0;
      return out;
    }
    double sum = 0.0;
    for (const auto& [tok, p] : steps_[t]) sum += p;
    for (const auto& [tok, p] : steps_[t]) out[static_cast<std::size_t>(tok)] += p / sum;
    return out;
  }

 private:
  std::vector<TopList> steps_;
  std::size_t vocab_;
  TokenId bos_, eos_;
};

struct ReplayFile {
  std::size_t vocab_size = 0;
  std::map<std::string, std::vector<TopList>> items;  // id -> steps in order
};

// JSONL, one record per step: {"id": .., "step": t, "top": [[token, p], ..]}.
// Steps of an id must be 0..n-1 without gaps, in any order.
inline ReplayFile parse_replay(std::istream& in, std::size_t min_vocab = 0) {
  ReplayFile f;
  std::map<std::string, std::map<std::size_t, TopList>> raw;
  std::string line;
  std::size_t lineno = 0;
  TokenId max_tok = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto id = j.at("id").get<std::string>();
      const auto step = j.at("step").get<std::size_t>();
      TopList top;
      for (const auto& pair : j.at("top")) {
        top.emplace_back(pair.at(0).get<TokenId>(), pair.at(1).get<double>());
        max_tok = std::max(max_tok, top.back().first);
      }
      if (top.empty()) throw ValidationError("empty top list");
      if (!raw[id].emplace(step, std::move(top)).second) throw ValidationError("duplicate step");
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("replay line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("replay line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  for (auto& [id, steps] : raw) {
    std::vector<TopList> seq;
    for (auto& [t, top] : steps) {
      if (t != seq.size()) throw ValidationError("replay steps for '" + id + "' are not contiguous from 0");
      seq.push_back(std::move(top));
    }
    f.items.emplace(id, std::move(seq));
  }
  f.vocab_size = std::max<std::size_t>(min_vocab, static_cast<std::size_t>(max_tok + 1));
  return f;
}

inline ReplayFile load_replay(const std::filesystem::path& path, std::size_t min_vocab = 0) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_replay(in, min_vocab);
}

inline void write_replay_record(std::ostream& out, const std::string& id, std::size_t step, const TopList& top) {
  nlohmann::ordered_json j;
  j["id"] = id;
  j["step"] = step;
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& [t, p] : top) arr.push_back({t, p});
  j["top"] = std::move(arr);
  out << j.dump() << '\n';
}

struct StepRecord {
  TokenId chosen = 0;
  double chosen_prob = 0.0;
  TopList top;  // sorted by probability desc, then token id asc
};

struct DecodeResult {
  std::vector<TokenId> tokens;  // BOS first; EOS last unless truncated
  std::vector<StepRecord> steps;
  double log_prob = 0.0;
  bool truncated = false;
};

// (prob desc, id asc) ordering of a full distribution.
inline std::vector<TokenId> ranked(std::span<const double> p) {
  std::vector<TokenId> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) {
    return p[static_cast<std::size_t>(a)] > p[static_cast<std::size_t>(b)];
  });
  return order;
}

inline TokenId argmax(std::span<const double> p) {
  TokenId best = 0;
  for (std::size_t i = 1; i < p.size(); ++i)
    if (p[i] > p[static_cast<std::size_t>(best)]) best = static_cast<TokenId>(i);
  return best;
}

// Re-queries the scorer along `tokens` to fill per-step records and the
// model log-probability. top_n = 0 keeps the full distribution.
inline DecodeResult annotate(const Scorer& scorer, std::vector<TokenId> tokens, std::size_t top_n, bool truncated) {
  DecodeResult r;
  r.truncated = truncated;
  for (std::size_t t = 1; t < tokens.size(); ++t) {
    const auto p = scorer.next(std::span<const TokenId>(tokens.data(), t));
    StepRecord s;
    s.chosen = tokens[t];
    s.chosen_prob = p[static_cast<std::size_t>(tokens[t])];
    const auto order = ranked(p);
    const std::size_t n = top_n == 0 ? order.size() : std::min(top_n, order.size());
    for (std::size_t i = 0; i < n; ++i) s.top.emplace_back(order[i], p[static_cast<std::size_t>(order[i])]);
    r.log_prob += std::log(s.chosen_prob);
    r.steps.push_back(std::move(s));
  }
  r.tokens = std::move(tokens);
  return r;
}

inline double probability(const DecodeResult& r) { return std::exp(r.log_prob); }

enum class Strategy { kGreedy, kBeam, kContrastive, kTemperature, kTopK, kTopP };

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::kGreedy: return "greedy";
    case Strategy::kBeam: return "beam";
    case Strategy::kContrastive: return "contrastive";
    case Strategy::kTemperature: return "temperature";
    case Strategy::kTopK: return "top_k";
    case Strategy::kTopP: return "top_p";
  }
  return "?";
}

inline Strategy parse_strategy(const std::string& s) {
  for (auto k : {Strategy::kGreedy, Strategy::kBeam, Strategy::kContrastive, Strategy::kTemperature, Strategy::kTopK,
                 Strategy::kTopP}) {
    if (s == to_string(k)) return k;
  }
  throw ValidationError("unknown decoding strategy '" + s + "'");
}

struct DecodeConfig {
  Strategy strategy = Strategy::kGreedy;
  int width = 1;
  int k = 1;
  double alpha = 0.0;
  double tau = 1.0;
  double p = 1.0;
  int max_len = 256;
  std::uint64_t seed = 42;
  std::size_t record_top = 5;

  void validate() const {
    if (max_len < 1) throw ValidationError("max_len must be at least 1");
    switch (strategy) {
      case Strategy::kBeam:
        if (width < 1) throw ValidationError("beam width must be at least 1");
        break;
      case Strategy::kContrastive:
        if (k < 1) throw ValidationError("contrastive k must be at least 1");
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
        break;
      case Strategy::kTemperature:
        if (!(tau > 0.0)) throw ValidationError("temperature must be positive");
        break;
      case Strategy::kTopK:
        if (k < 1) throw ValidationError("top-k k must be at least 1");
        break;
      case Strategy::kTopP:
        if (!(p > 0.0 && p <= 1.0)) throw ValidationError("top-p p must lie in (0, 1]");
        break;
      case Strategy::kGreedy:
        break;
    }
  }

  // Parameters that matter for this strategy, as "name=value" pairs.
  std::string params() const {
    auto num = [](double v) {
      std::ostringstream os;
      os << v;
      return os.str();
    };
    switch (strategy) {
      case Strategy::kBeam: return "width=" + std::to_string(width);
      case Strategy::kContrastive: return "k=" + std::to_string(k) + ";alpha=" + num(alpha);
      case Strategy::kTemperature: return "tau=" + num(tau);
      case Strategy::kTopK: return "k=" + std::to_string(k);
      case Strategy::kTopP: return "p=" + num(p);
      case Strategy::kGreedy: break;
    }
    return "";
  }

  std::string label() const { return std::string(to_string(strategy)) + "(" + params() + ")"; }
};

inline DecodeResult greedy(const Scorer& scorer, int max_len, std::size_t record_top = 5) {
  if (max_len < 1) throw ValidationError("max_len must be at least 1");
  std::vector<TokenId> seq{scorer.bos()};
  for (int t = 0; t < max_len; ++t) {
    const auto p = scorer.next(seq);
    seq.push_back(argmax(p));
    if (seq.back() == scorer.eos()) return annotate(scorer, std::move(seq), record_top, false);
  }
  return annotate(scorer, std::move(seq), record_top, true);
}

// Raw sum-of-log-prob beam. Each step ranks every (live hypothesis, token)
// extension by (score desc, token asc, parent asc) and keeps the first
// `width`; kept extensions ending in EOS are retired. Decoding stops when no
// live hypothesis remains, when the best retired score is at least the best
// live score (extensions can only lose probability), or at max_len. The
// highest-scoring retired hypothesis wins, earliest retired on ties; with
// none retired the best live hypothesis is returned as truncated.
inline DecodeResult beam(const Scorer& scorer, int width, int max_len, std::size_t record_top = 5) {
  if (width < 1) throw ValidationError("beam width must be at least 1");
  if (max_len < 1) throw ValidationError("max_len must be at least 1");
  struct Hyp {
    std::vector<TokenId> seq;
    double score;
  };
  struct Cand {
    double score;
    TokenId token;
    std::size_t parent;
  };
  std::vector<Hyp> live{{{scorer.bos()}, 0.0}};
  std::optional<Hyp> best_done;
  for (int t = 0; t < max_len && !live.empty(); ++t) {
    std::vector<Cand> cands;
    for (std::size_t h = 0; h < live.size(); ++h) {
      const auto p = scorer.next(live[h].seq);
      for (std::size_t v = 0; v < p.size(); ++v) {
        if (p[v] > 0.0) cands.push_back({live[h].score + std::log(p[v]), static_cast<TokenId>(v), h});
      }
    }
    const std::size_t keep = std::min(cands.size(), static_cast<std::size_t>(width));
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Cand& a, const Cand& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.token != b.token) return a.token < b.token;
                        return a.parent < b.parent;
                      });
    std::vector<Hyp> next;
    for (std::size_t i = 0; i < keep; ++i) {
      Hyp h{live[cands[i].parent].seq, cands[i].score};
      h.seq.push_back(cands[i].token);
      if (cands[i].token == scorer.eos()) {
        if (!best_done || h.score > best_done->score) best_done = std::move(h);
      } else {
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);
    if (best_done && !live.empty() && best_done->score >= live.front().score) break;
  }
  if (best_done) return annotate(scorer, std::move(best_done->seq), record_top, false);
  if (live.empty()) throw ValidationError("beam search found no hypothesis with positive probability");
  return annotate(scorer, std::move(live.front().seq), record_top, true);
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("representation dimensions differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

// Picks, among the k most probable tokens, the maximum of
// (1 − α)·p(v) − α·max_j cos(h_v, h_j), where h_j ranges over the
// representations of previously generated tokens. Ties go to the earlier
// candidate in (prob desc, id asc) order.
inline DecodeResult contrastive(const Scorer& scorer, int k, double alpha, int max_len, std::size_t record_top = 5) {
  if (!scorer.has_representations()) {
    throw ValidationError("contrastive search needs token representations; use greedy for this scorer");
  }
  if (k < 1) throw ValidationError("contrastive k must be at least 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
  if (max_len < 1) throw ValidationError("max_len must be at least 1");
  std::vector<TokenId> seq{scorer.bos()};
  std::vector<std::vector<double>> history;
  for (int t = 0; t < max_len; ++t) {
    const auto p = scorer.next(seq);
    const auto order = ranked(p);
    const std::size_t n = std::min(static_cast<std::size_t>(k), order.size());
    TokenId pick = order[0];
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> pick_repr;
    for (std::size_t i = 0; i < n; ++i) {
      const TokenId v = order[i];
      if (p[static_cast<std::size_t>(v)] <= 0.0) break;
      auto h = scorer.representation(seq, v);
      double penalty = 0.0;
      if (!history.empty()) {
        penalty = -std::numeric_limits<double>::infinity();
        for (const auto& prev : history) penalty = std::max(penalty, cosine(h, prev));
      }
      const double score = (1.0 - alpha) * p[static_cast<std::size_t>(v)] - alpha * penalty;
      if (score > best) {
        best = score;
        pick = v;
        pick_repr = std::move(h);
      }
    }
    seq.push_back(pick);
    if (pick == scorer.eos()) return annotate(scorer, std::move(seq), record_top, false);
    history.push_back(std::move(pick_repr));
  }
  return annotate(scorer, std::move(seq), record_top, true);
}

struct SampleParams {
  std::optional<double> tau;
  std::optional<int> k;
  std::optional<double> p;
};

// Applies temperature, then top-k, then top-p, renormalizing after each.
inline std::vector<double> shape_distribution(std::span<const double> probs, const SampleParams& sp) {
  std::vector<double> q(probs.begin(), probs.end());
  if (sp.tau) {
    if (!(*sp.tau > 0.0)) throw ValidationError("temperature must be positive");
    double max_log = -std::numeric_limits<double>::infinity();
    for (double v : q)
      if (v > 0.0) max_log = std::max(max_log, std::log(v));
    double sum = 0.0;
    for (double& v : q) {
      v = v > 0.0 ? std::exp((std::log(v) - max_log) / *sp.tau) : 0.0;
      sum += v;
    }
    for (double& v : q) v /= sum;
  }
  const auto order = ranked(q);
  if (sp.k) {
    if (*sp.k < 1) throw ValidationError("top-k k must be at least 1");
    std::vector<double> r(q.size(), 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < std::min(static_cast<std::size_t>(*sp.k), order.size()); ++i) {
      const auto t = static_cast<std::size_t>(order[i]);
      r[t] = q[t];
      sum += q[t];
    }
    for (double& v : r) v /= sum;
    q = std::move(r);
  }
  if (sp.p) {
    if (!(*sp.p > 0.0 && *sp.p <= 1.0)) throw ValidationError("top-p p must lie in (0, 1]");
    std::vector<double> r(q.size(), 0.0);
    double cum = 0.0;
    for (TokenId t : order) {
      const auto i = static_cast<std::size_t>(t);
      if (q[i] <= 0.0) break;
      r[i] = q[i];
      cum += q[i];
      if (cum >= *sp.p) break;
    }
    for (double& v : r) v /= cum;
    q = std::move(r);
  }
  return q;
}

// Inverse-CDF draw walking tokens in (prob desc, id asc) order.
inline TokenId draw(std::span<const double> q, Rng& rng) {
  const auto order = ranked(q);
  const double u = rng.uniform();
  double cum = 0.0;
  TokenId last = order[0];
  for (TokenId t : order) {
    const double v = q[static_cast<std::size_t>(t)];
    if (v <= 0.0) break;
    last = t;
    cum += v;
    if (u < cum) return t;
  }
  return last;
}

// Log-probability and records use the unshaped model distribution.
inline DecodeResult sample(const Scorer& scorer, const SampleParams& sp, std::uint64_t seed, int max_len,
                           std::size_t record_top = 5) {
  if (max_len < 1) throw ValidationError("max_len must be at least 1");
  Rng rng(seed);
  std::vector<TokenId> seq{scorer.bos()};
  for (int t = 0; t < max_len; ++t) {
    const auto q = shape_distribution(scorer.next(seq), sp);
    seq.push_back(draw(q, rng));
    if (seq.back() == scorer.eos()) return annotate(scorer, std::move(seq), record_top, false);
  }
  return annotate(scorer, std::move(seq), record_top, true);
}

inline DecodeResult run(const Scorer& scorer, const DecodeConfig& c) {
  c.validate();
  switch (c.strategy) {
    case Strategy::kGreedy: return greedy(scorer, c.max_len, c.record_top);
    case Strategy::kBeam: return beam(scorer, c.width, c.max_len, c.record_top);
    case Strategy::kContrastive: return contrastive(scorer, c.k, c.alpha, c.max_len, c.record_top);
    case Strategy::kTemperature: return sample(scorer, {.tau = c.tau}, c.seed, c.max_len, c.record_top);
    case Strategy::kTopK: return sample(scorer, {.k = c.k}, c.seed, c.max_len, c.record_top);
    case Strategy::kTopP: return sample(scorer, {.p = c.p}, c.seed, c.max_len, c.record_top);
  }
  return {};
}

// Beam widths {1,5,10,20}; contrastive k {5,10} x α {0.2,0.6,0.8};
// τ {0.2,0.4,0.6,0.8,0.9,1.0}; top-k {3,5,10,20,50}; top-p {0.5,..,0.95}.
inline std::vector<DecodeConfig> default_grid() {
  std::vector<DecodeConfig> g;
  for (int w : {1, 5, 10, 20}) g.push_back({.strategy = Strategy::kBeam, .width = w});
  for (int k : {5, 10})
    for (double a : {0.2, 0.6, 0.8}) g.push_back({.strategy = Strategy::kContrastive, .k = k, .alpha = a});
  for (double tau : {0.2, 0.4, 0.6, 0.8, 0.9, 1.0}) g.push_back({.strategy = Strategy::kTemperature, .tau = tau});
  for (int k : {3, 5, 10, 20, 50}) g.push_back({.strategy = Strategy::kTopK, .k = k});
  for (double p : {0.5, 0.6, 0.7, 0.8, 0.9, 0.95}) g.push_back({.strategy = Strategy::kTopP, .p = p});
  return g;
}

// Order-preserving removal of configs with the same label.
inline std::vector<DecodeConfig> dedupe(const std::vector<DecodeConfig>& grid) {
  std::vector<DecodeConfig> out;
  std::vector<std::string> seen;
  for (const auto& c : grid) {
    const auto l = c.label();
    if (std::find(seen.begin(), seen.end(), l) == seen.end()) {
      seen.push_back(l);
      out.push_back(c);
    }
  }
  return out;
}

inline DecodeConfig config_from_json(const nlohmann::json& j, DecodeConfig base = {}) {
  try {
    if (j.contains("strategy")) base.strategy = parse_strategy(j.at("strategy").get<std::string>());
    base.width = j.value("width", base.width);
    base.k = j.value("k", base.k);
    base.alpha = j.value("alpha", base.alpha);
    base.tau = j.value("tau", base.tau);
    base.p = j.value("p", base.p);
    base.max_len = j.value("max_len", base.max_len);
    base.seed = j.value("seed", base.seed);
    base.record_top = j.value("record_top", base.record_top);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad decode config: ") + e.what());
  }
  base.validate();
  return base;
}

struct GridItem {
  std::string id;
  std::string reference;
};

struct GridRow {
  DecodeConfig config;
  metrics::Rational mean_cer;
  metrics::Rational weighted_cer;
  metrics::Rational accuracy;
};

using ScorerFor = std::function<const Scorer&(std::size_t item)>;
using Detokenize = std::function<std::string(std::span<const TokenId>)>;

// Decodes every item under every config. Sampling configs seed item i with
// mix_seed(config.seed, {i}), so rows do not depend on the worker count.
inline std::vector<GridRow> run_grid(const std::vector<GridItem>& items, const ScorerFor& scorer_for,
                                     const Detokenize& detok, const std::vector<DecodeConfig>& grid,
                                     unsigned workers = worker_count()) {
  std::vector<GridRow> rows;
  const auto configs = dedupe(grid);
  if (configs.empty()) return rows;
  if (items.empty()) throw ValidationError("grid evaluation needs at least one item");
  for (const auto& cfg : configs) {
    cfg.validate();
    std::vector<metrics::EvalRecord> recs(items.size());
    parallel_for(items.size(), [&](std::size_t i) {
      DecodeConfig c = cfg;
      c.seed = mix_seed(cfg.seed, {i});
      const auto r = run(scorer_for(i), c);
      recs[i] = {items[i].id, items[i].reference, detok(r.tokens)};
    }, workers);
    const auto s = metrics::evaluate(recs);
    rows.push_back({cfg, s.mean_cer, s.weighted_cer, s.accuracy});
  }
  return rows;
}

inline std::string grid_csv(const std::vector<GridRow>& rows) {
  std::ostringstream os;
  os << "strategy,params,cer,weighted_cer,accuracy\n";
  for (const auto& r : rows) {
    os << to_string(r.config.strategy) << ',' << r.config.params() << ',' << metrics::to_double(r.mean_cer) << ','
       << metrics::to_double(r.weighted_cer) << ',' << metrics::to_double(r.accuracy) << '\n';
  }
  return os.str();
}

inline nlohmann::ordered_json to_json(const DecodeResult& r) {
  nlohmann::ordered_json j;
  j["tokens"] = r.tokens;
  j["log_prob"] = r.log_prob;
  j["truncated"] = r.truncated;
  nlohmann::ordered_json steps = nlohmann::ordered_json::array();
  for (const auto& s : r.steps) {
    nlohmann::ordered_json top = nlohmann::ordered_json::array();
    for (const auto& [t, p] : s.top) top.push_back({t, p});
    steps.push_back({{"chosen", s.chosen}, {"prob", s.chosen_prob}, {"top", std::move(top)}});
  }
  j["steps"] = std::move(steps);
  return j;
}

}  // namespace htrkit::decode
