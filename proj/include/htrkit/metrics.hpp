#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "json.hpp"

#include "htrkit/errors.hpp"
#include "htrkit/textnorm.hpp"
#include "htrkit/utf8.hpp"

namespace htrkit::metrics {

using Rational = boost::multiprecision::cpp_rational;

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

inline std::string to_string(const Rational& r) {
  return numerator(r).str() + "/" + denominator(r).str();
}

enum class EditKind : std::uint8_t { kMatch, kSub, kDel, kIns };

template <typename T>
struct EditOp {
  EditKind kind;
  std::optional<T> ref;
  std::optional<T> hyp;
  std::size_t ref_pos;  // index into ref (for INS: insertion point)
  std::size_t hyp_pos;  // index into hyp (for DEL: insertion point)
};

template <typename T>
struct BasicAlignment {
  std::vector<EditOp<T>> ops;
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t correct = 0;

  std::size_t distance() const { return substitutions + deletions + insertions; }
  std::size_t ref_length() const { return substitutions + deletions + correct; }
  std::size_t hyp_length() const { return substitutions + insertions + correct; }
};

using Alignment = BasicAlignment<char32_t>;

// Unit-cost Levenshtein alignment with full backtrace. Ties in the backtrace
// prefer MATCH > SUB > DEL > INS, so the edit script is deterministic.
template <typename T>
BasicAlignment<T> align_sequences(std::span<const T> ref, std::span<const T> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  const std::size_t cols = m + 1;
  std::vector<std::uint32_t> d((n + 1) * cols);
  for (std::size_t j = 0; j <= m; ++j) d[j] = static_cast<std::uint32_t>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    d[i * cols] = static_cast<std::uint32_t>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      const std::uint32_t diag = d[(i - 1) * cols + j - 1] + (ref[i - 1] == hyp[j - 1] ? 0u : 1u);
      const std::uint32_t del = d[(i - 1) * cols + j] + 1;
      const std::uint32_t ins = d[i * cols + j - 1] + 1;
      d[i * cols + j] = std::min({diag, del, ins});
    }
  }

  BasicAlignment<T> a;
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    const std::uint32_t cur = d[i * cols + j];
    if (i > 0 && j > 0) {
      const std::uint32_t diag = d[(i - 1) * cols + j - 1];
      if (ref[i - 1] == hyp[j - 1] && diag == cur) {
        a.ops.push_back({EditKind::kMatch, ref[i - 1], hyp[j - 1], i - 1, j - 1});
        ++a.correct;
        --i, --j;
        continue;
      }
      if (ref[i - 1] != hyp[j - 1] && diag + 1 == cur) {
        a.ops.push_back({EditKind::kSub, ref[i - 1], hyp[j - 1], i - 1, j - 1});
        ++a.substitutions;
        --i, --j;
        continue;
      }
    }
    if (i > 0 && d[(i - 1) * cols + j] + 1 == cur) {
      a.ops.push_back({EditKind::kDel, ref[i - 1], std::nullopt, i - 1, j});
      ++a.deletions;
      --i;
      continue;
    }
    a.ops.push_back({EditKind::kIns, std::nullopt, hyp[j - 1], i, j - 1});
    ++a.insertions;
    --j;
  }
  std::reverse(a.ops.begin(), a.ops.end());
  return a;
}

struct AlignOptions {
  bool strip_zero_width = true;
};

inline std::u32string comparison_units(std::string_view text, const AlignOptions& opt = {}) {
  std::u32string cps = utf8::decode(text);
  if (opt.strip_zero_width) cps = textnorm::strip_zero_width(std::u32string_view(cps));
  return cps;
}

inline Alignment align(std::string_view ref, std::string_view hyp, const AlignOptions& opt = {}) {
  const std::u32string r = comparison_units(ref, opt);
  const std::u32string h = comparison_units(hyp, opt);
  return align_sequences<char32_t>(std::span<const char32_t>(r), std::span<const char32_t>(h));
}

// Replays the script on `ref`; used to check that ops reproduce `hyp`.
template <typename T>
std::vector<T> apply_ops(const BasicAlignment<T>& a) {
  std::vector<T> out;
  for (const auto& op : a.ops) {
    if (op.kind != EditKind::kDel) out.push_back(*op.hyp);
  }
  return out;
}

inline Rational cer_from(const Alignment& a) {
  if (a.ref_length() == 0) throw ValidationError("CER undefined for empty reference (N = 0)");
  return Rational(static_cast<long long>(a.distance()), static_cast<long long>(a.ref_length()));
}

// (S + D + I) / N over codepoints after zero-width stripping.
inline Rational cer(std::string_view ref, std::string_view hyp, const AlignOptions& opt = {}) {
  return cer_from(align(ref, hyp, opt));
}

struct LineScore {
  std::int64_t length;  // l_i, reference characters
  Rational cer;
};

// Σ l_i·CER_i / Σ l_i
inline Rational weighted_cer(std::span<const LineScore> lines) {
  Rational num = 0;
  std::int64_t den = 0;
  for (const auto& l : lines) {
    if (l.length < 0) throw ValidationError("negative line length");
    num += Rational(l.length) * l.cer;
    den += l.length;
  }
  if (den == 0) throw ValidationError("weighted CER undefined: total length is zero");
  return num / den;
}

inline Rational mean_cer(std::span<const LineScore> lines) {
  if (lines.empty()) throw ValidationError("mean CER undefined for empty set");
  Rational sum = 0;
  for (const auto& l : lines) sum += l.cer;
  return sum / static_cast<long long>(lines.size());
}

struct TextPair {
  std::string reference;
  std::string hypothesis;
};

inline Rational exact_match_accuracy(std::span<const TextPair> pairs, const AlignOptions& opt = {}) {
  if (pairs.empty()) throw ValidationError("exact-match accuracy undefined for empty set");
  long long hits = 0;
  for (const auto& p : pairs) {
    if (comparison_units(p.reference, opt) == comparison_units(p.hypothesis, opt)) ++hits;
  }
  return Rational(hits, static_cast<long long>(pairs.size()));
}

struct LineEval {
  std::string id;
  std::int64_t length = 0;
  Alignment alignment;
  Rational cer;
};

struct EvalSummary {
  std::vector<LineEval> lines;
  std::size_t skipped_empty = 0;
  Rational mean_cer;
  Rational weighted_cer;
  Rational accuracy;
};

struct EvalRecord {
  std::string id;
  std::string reference;
  std::string hypothesis;
};

enum class EmptyRefPolicy { kFail, kSkip };

inline EvalSummary evaluate(std::span<const EvalRecord> records, const AlignOptions& opt = {},
                            EmptyRefPolicy policy = EmptyRefPolicy::kFail) {
  EvalSummary s;
  std::vector<LineScore> scores;
  long long hits = 0;
  for (const auto& r : records) {
    Alignment a = align(r.reference, r.hypothesis, opt);
    if (a.ref_length() == 0) {
      if (policy == EmptyRefPolicy::kSkip) {
        ++s.skipped_empty;
        continue;
      }
      throw ValidationError("record '" + r.id + "' has an empty reference");
    }
    if (a.distance() == 0) ++hits;
    LineEval le{r.id, static_cast<std::int64_t>(a.ref_length()), std::move(a), 0};
    le.cer = cer_from(le.alignment);
    scores.push_back({le.length, le.cer});
    s.lines.push_back(std::move(le));
  }
  if (s.lines.empty()) throw ValidationError("no scorable records");
  s.mean_cer = mean_cer(scores);
  s.weighted_cer = weighted_cer(scores);
  s.accuracy = Rational(hits, static_cast<long long>(s.lines.size()));
  return s;
}

// Predictions JSONL: {"id": .., "reference": .., "hypothesis": ..} per line.
inline std::vector<EvalRecord> parse_predictions(std::istream& in) {
  std::vector<EvalRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.value("id", std::to_string(lineno)), j.at("reference").get<std::string>(),
                     j.at("hypothesis").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("predictions line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!utf8::is_valid(out.back().reference) || !utf8::is_valid(out.back().hypothesis))
      throw ValidationError("predictions line " + std::to_string(lineno) + ": invalid UTF-8");
  }
  return out;
}

inline std::vector<EvalRecord> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_predictions(in);
}

}  // namespace htrkit::metrics
