#pragma once

// Error analysis over aligned predictions: character confusions, error-share
// ranking, CER distributions, and token uncertainty flagging from the
// decoder's per-step top-k probabilities.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "htrkit/decode.hpp"
#include "htrkit/errors.hpp"
#include "htrkit/image_io.hpp"
#include "htrkit/imaging.hpp"
#include "htrkit/metrics.hpp"
#include "htrkit/utf8.hpp"

namespace htrkit::analysis {

using metrics::Rational;

struct ConfusionMatrix {
  std::map<std::pair<char32_t, char32_t>, std::uint64_t> substitutions;  // (ref, hyp)
  std::map<char32_t, std::uint64_t> deletions;                           // ref char
  std::map<char32_t, std::uint64_t> insertions;                          // hyp char

  void add(const metrics::Alignment& a) {
    for (const auto& op : a.ops) {
      switch (op.kind) {
        case metrics::EditKind::kSub: ++substitutions[{*op.ref, *op.hyp}]; break;
        case metrics::EditKind::kDel: ++deletions[*op.ref]; break;
        case metrics::EditKind::kIns: ++insertions[*op.hyp]; break;
        case metrics::EditKind::kMatch: break;
      }
    }
  }

  std::uint64_t total_substitutions() const {
    std::uint64_t n = 0;
    for (const auto& [k, v] : substitutions) n += v;
    return n;
  }
  std::uint64_t total_deletions() const {
    std::uint64_t n = 0;
    for (const auto& [k, v] : deletions) n += v;
    return n;
  }
  std::uint64_t total_insertions() const {
    std::uint64_t n = 0;
    for (const auto& [k, v] : insertions) n += v;
    return n;
  }
  bool empty() const { return substitutions.empty() && deletions.empty() && insertions.empty(); }
};

inline ConfusionMatrix build_confusion(std::span<const metrics::Alignment> alignments) {
  ConfusionMatrix m;
  for (const auto& a : alignments) m.add(a);
  return m;
}

struct ErrorShare {
  char32_t ch = 0;
  std::uint64_t count = 0;
  Rational share;
};

// Per-character error totals: substitutions and deletions count against the
// reference character, insertions against the inserted character. Sorted by
// count descending, then codepoint ascending; top_n = 0 keeps all.
inline std::vector<ErrorShare> error_share(const ConfusionMatrix& m, std::size_t top_n = 0) {
  std::map<char32_t, std::uint64_t> per;
  for (const auto& [k, v] : m.substitutions) per[k.first] += v;
  for (const auto& [c, v] : m.deletions) per[c] += v;
  for (const auto& [c, v] : m.insertions) per[c] += v;
  std::uint64_t total = 0;
  for (const auto& [c, v] : per) total += v;
  std::vector<ErrorShare> out;
  for (const auto& [c, v] : per) out.push_back({c, v, Rational(v, total)});
  std::stable_sort(out.begin(), out.end(), [](const ErrorShare& a, const ErrorShare& b) { return a.count > b.count; });
  if (top_n && out.size() > top_n) out.resize(top_n);
  return out;
}

struct HistogramBin {
  Rational lo, hi;
  std::uint64_t count = 0;
};

// Half-open bins [k·w, (k+1)·w) from 0 up to the bin holding the maximum.
inline std::vector<HistogramBin> cer_histogram(std::span<const Rational> cers, const Rational& width) {
  if (width <= 0) throw ValidationError("bin width must be positive");
  std::vector<HistogramBin> bins;
  if (cers.empty()) return bins;
  std::vector<std::size_t> idx;
  std::size_t max_idx = 0;
  for (const auto& c : cers) {
    if (c < 0) throw ValidationError("CER must be non-negative");
    const Rational q = c / width;
    const auto k = static_cast<std::size_t>(boost::multiprecision::numerator(q) / boost::multiprecision::denominator(q));
    idx.push_back(k);
    max_idx = std::max(max_idx, k);
  }
  for (std::size_t k = 0; k <= max_idx; ++k) bins.push_back({width * k, width * (k + 1), 0});
  for (auto k : idx) ++bins[k].count;
  return bins;
}

struct LengthBin {
  std::int64_t lo = 0, hi = 0;  // [lo, hi)
  std::size_t lines = 0;
  std::optional<Rational> weighted_cer;  // absent when the bin is empty
};

// Length-weighted CER per length bin; `edges` strictly increasing, giving
// edges.size() − 1 bins. Lines outside every bin are ignored.
inline std::vector<LengthBin> cer_vs_length(std::span<const metrics::LineScore> lines,
                                            std::span<const std::int64_t> edges) {
  if (edges.size() < 2) throw ValidationError("need at least two bin edges");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (edges[i] <= edges[i - 1]) throw ValidationError("bin edges must be strictly increasing");
  std::vector<LengthBin> bins;
  std::vector<std::vector<metrics::LineScore>> members(edges.size() - 1);
  for (const auto& l : lines) {
    const auto it = std::upper_bound(edges.begin(), edges.end(), l.length);
    if (it == edges.begin() || it == edges.end()) continue;
    members[static_cast<std::size_t>(it - edges.begin() - 1)].push_back(l);
  }
  for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
    LengthBin bin{edges[b], edges[b + 1], members[b].size(), std::nullopt};
    if (!members[b].empty()) bin.weighted_cer = metrics::weighted_cer(members[b]);
    bins.push_back(bin);
  }
  return bins;
}

using decode::TokenId;

struct UncertaintyRecord {
  std::string id;
  std::size_t position = 0;  // index among predicted tokens
  decode::TopList top3;
  TokenId predicted = 0;
  double relative_prob = 0.0;  // prob2 / prob1; 0 with a single candidate
  bool flagged = false;
  bool is_error = false;
  std::optional<TokenId> correct_token;  // aligned reference token for substitutions
  bool recoverable = false;              // error whose correct token is in top3
};

struct LinePrediction {
  std::string id;
  std::vector<TokenId> reference;         // reference token ids, no specials
  std::vector<decode::StepRecord> steps;  // decoder steps; a trailing EOS step is ignored
  TokenId eos = 2;
};

inline double relative_probability(const decode::TopList& top) {
  if (top.size() < 2 || top[0].second <= 0.0) return 0.0;
  return std::clamp(top[1].second / top[0].second, 0.0, 1.0);
}

struct DetectionScore {
  double threshold = 0.0;
  std::size_t flagged = 0;
  std::size_t errors = 0;
  std::size_t true_positives = 0;
  Rational precision, recall, f1;
  bool precision_defined = false;  // false when nothing is flagged; precision reported as 0
};

// Exact precision/recall/F1 of "relative_prob >= threshold" as a detector of
// "is_error".
inline DetectionScore score_detection(std::span<const UncertaintyRecord> records, double threshold) {
  DetectionScore s;
  s.threshold = threshold;
  for (const auto& r : records) {
    const bool f = r.relative_prob >= threshold;
    s.flagged += f;
    s.errors += r.is_error;
    s.true_positives += f && r.is_error;
  }
  s.precision_defined = s.flagged > 0;
  s.precision = s.flagged ? Rational(s.true_positives, s.flagged) : Rational(0);
  s.recall = s.errors ? Rational(s.true_positives, s.errors) : Rational(0);
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : Rational(0);
  return s;
}

struct UncertaintyReport {
  std::vector<UncertaintyRecord> records;
  DetectionScore score;
  std::size_t missed_reference_tokens = 0;  // deletions: reference tokens with no prediction
  std::size_t recoverable = 0;              // errors with the correct token in top3
  std::size_t recoverable_flagged = 0;
};

// Aligns each line's predicted tokens to its reference tokens with the
// character-metric alignment (over token ids). Matches are correct,
// substitutions and insertions are errors; a substitution is recoverable when
// the reference token is among the step's top 3.
inline UncertaintyReport uncertainty_scan(std::span<const LinePrediction> lines, double threshold) {
  UncertaintyReport rep;
  for (const auto& line : lines) {
    std::vector<TokenId> pred;
    std::vector<const decode::StepRecord*> step_of;
    for (const auto& s : line.steps) {
      if (s.chosen == line.eos) break;
      pred.push_back(s.chosen);
      step_of.push_back(&s);
    }
    const auto a = metrics::align_sequences<TokenId>(std::span<const TokenId>(line.reference),
                                                     std::span<const TokenId>(pred));
    for (const auto& op : a.ops) {
      if (op.kind == metrics::EditKind::kDel) {
        ++rep.missed_reference_tokens;
        continue;
      }
      const std::size_t pos = op.hyp_pos;
      const auto& step = *step_of[pos];
      UncertaintyRecord r;
      r.id = line.id;
      r.position = pos;
      r.predicted = step.chosen;
      r.top3.assign(step.top.begin(), step.top.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(3, step.top.size())));
      r.relative_prob = relative_probability(step.top);
      r.flagged = r.relative_prob >= threshold;
      r.is_error = op.kind != metrics::EditKind::kMatch;
      if (op.kind == metrics::EditKind::kSub) r.correct_token = *op.ref;
      if (r.correct_token) {
        for (const auto& [t, p] : r.top3) r.recoverable |= t == *r.correct_token;
      }
      rep.recoverable += r.recoverable;
      rep.recoverable_flagged += r.recoverable && r.flagged;
      rep.records.push_back(std::move(r));
    }
  }
  rep.score = score_detection(rep.records, threshold);
  return rep;
}

struct SweepResult {
  double best_threshold = 0.0;
  DetectionScore best;
  std::vector<DetectionScore> curve;
};

// Distinct relative probabilities of the records, ascending.
inline std::vector<double> ratio_grid(std::span<const UncertaintyRecord> records) {
  std::vector<double> g;
  for (const auto& r : records) g.push_back(r.relative_prob);
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

// Highest F1 over the grid; ties go to the smallest threshold.
inline SweepResult threshold_sweep(std::span<const UncertaintyRecord> records, std::vector<double> grid) {
  if (grid.empty()) throw ValidationError("threshold grid is empty");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  SweepResult out;
  for (double t : grid) {
    out.curve.push_back(score_detection(records, t));
    if (out.curve.size() == 1 || out.curve.back().f1 > out.best.f1) {
      out.best = out.curve.back();
      out.best_threshold = t;
    }
  }
  return out;
}

// Reports

inline std::string csv_char(char32_t c) {
  std::string s = utf8::format_codepoint(c);
  if (c > 0x20 && c != U',' && c != U'"' && c != 0x7F) {
    s += ' ';
    utf8::append(s, c);
  }
  return s;
}

inline std::string confusion_csv(const ConfusionMatrix& m) {
  std::ostringstream os;
  os << "kind,ref,hyp,count\n";
  for (const auto& [k, v] : m.substitutions) os << "sub," << csv_char(k.first) << ',' << csv_char(k.second) << ',' << v << '\n';
  for (const auto& [c, v] : m.deletions) os << "del," << csv_char(c) << ",," << v << '\n';
  for (const auto& [c, v] : m.insertions) os << "ins,," << csv_char(c) << ',' << v << '\n';
  return os.str();
}

inline std::string error_share_csv(const std::vector<ErrorShare>& rows) {
  std::ostringstream os;
  os << "char,errors,share\n";
  for (const auto& r : rows) os << csv_char(r.ch) << ',' << r.count << ',' << metrics::to_double(r.share) << '\n';
  return os.str();
}

inline std::string histogram_csv(const std::vector<HistogramBin>& bins) {
  std::ostringstream os;
  os << "lo,hi,lines\n";
  for (const auto& b : bins) os << metrics::to_double(b.lo) << ',' << metrics::to_double(b.hi) << ',' << b.count << '\n';
  return os.str();
}

inline std::string length_csv(const std::vector<LengthBin>& bins) {
  std::ostringstream os;
  os << "lo,hi,lines,weighted_cer\n";
  for (const auto& b : bins) {
    os << b.lo << ',' << b.hi << ',' << b.lines << ',';
    if (b.weighted_cer) os << metrics::to_double(*b.weighted_cer);
    os << '\n';
  }
  return os.str();
}

inline std::string sweep_csv(const SweepResult& s) {
  std::ostringstream os;
  os << "threshold,flagged,errors,true_positives,precision,recall,f1\n";
  for (const auto& c : s.curve) {
    os << c.threshold << ',' << c.flagged << ',' << c.errors << ',' << c.true_positives << ','
       << metrics::to_double(c.precision) << ',' << metrics::to_double(c.recall) << ',' << metrics::to_double(c.f1)
       << '\n';
  }
  return os.str();
}

inline nlohmann::ordered_json to_json(const DetectionScore& s) {
  nlohmann::ordered_json j;
  j["threshold"] = s.threshold;
  j["flagged"] = s.flagged;
  j["errors"] = s.errors;
  j["true_positives"] = s.true_positives;
  j["precision"] = metrics::to_double(s.precision);
  j["precision_defined"] = s.precision_defined;
  j["recall"] = metrics::to_double(s.recall);
  j["f1"] = metrics::to_double(s.f1);
  return j;
}

// Grid over the characters most involved in substitutions: row = reference,
// column = hypothesis, darker = more frequent. Each cell is `cell` pixels.
struct Heatmap {
  std::vector<char32_t> labels;
  imaging::GrayImage image;
};

inline Heatmap confusion_heatmap(const ConfusionMatrix& m, std::size_t top = 30, int cell = 8) {
  std::map<char32_t, std::uint64_t> involvement;
  for (const auto& [k, v] : m.substitutions) {
    involvement[k.first] += v;
    involvement[k.second] += v;
  }
  std::vector<std::pair<char32_t, std::uint64_t>> ranked(involvement.begin(), involvement.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > top) ranked.resize(top);
  Heatmap h;
  for (const auto& [c, n] : ranked) h.labels.push_back(c);
  const int n = std::max<int>(1, static_cast<int>(h.labels.size()));
  h.image = imaging::GrayImage(n * cell, n * cell, 255);
  std::uint64_t peak = 0;
  for (const auto& [k, v] : m.substitutions) peak = std::max(peak, v);
  for (std::size_t r = 0; r < h.labels.size(); ++r)
    for (std::size_t c = 0; c < h.labels.size(); ++c) {
      auto it = m.substitutions.find({h.labels[r], h.labels[c]});
      if (it == m.substitutions.end()) continue;
      const auto v = imaging::to_pixel(255.0 - 255.0 * static_cast<double>(it->second) / static_cast<double>(peak));
      for (int y = 0; y < cell; ++y)
        for (int x = 0; x < cell; ++x) h.image.at(static_cast<int>(c) * cell + x, static_cast<int>(r) * cell + y) = v;
    }
  return h;
}

}  // namespace htrkit::analysis
