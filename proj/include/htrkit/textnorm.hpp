#pragma once

// Rule-driven transcription cleanup: codepoint mapping, bullet deletion,
// whitespace collapse and edge trimming, with per-rule edit accounting.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "htrkit/errors.hpp"
#include "htrkit/manifest.hpp"
#include "htrkit/utf8.hpp"

namespace htrkit::textnorm {

inline constexpr std::string_view kBulletRule = "bullet_symbols";
inline constexpr std::string_view kSpaceRule = "extra_space";

inline bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\v' || c == U'\f' ||
         c == 0x00A0 || c == 0x3000 || (c >= 0x2000 && c <= 0x200A) || c == 0x202F ||
         c == 0x205F;
}

class NormRuleSet {
 public:
  struct Mapping {
    std::u32string replacement;  // empty = delete
    std::size_t rule;            // index into rule_names()
  };

  // Rule labels group mappings for reporting; two synthetic rules for bullets
  // and whitespace always exist so the report layout is stable.
  NormRuleSet() {
    names_.emplace_back(kBulletRule);
    names_.emplace_back(kSpaceRule);
  }

  // Adds a mapping under `rule` (created on first use).
  void map(char32_t from, std::u32string to, std::string_view rule) {
    if (map_.contains(from)) {
      throw ValidationError("duplicate rule key " + utf8::format_codepoint(from));
    }
    map_.emplace(from, Mapping{std::move(to), rule_index(rule)});
    validate();
  }

  void add_bullet(char32_t cp) {
    bullets_.insert(cp);
    validate();
  }

  bool collapse_whitespace = true;
  bool strip_edges = true;

  const std::map<char32_t, Mapping>& mappings() const { return map_; }
  const std::set<char32_t>& bullets() const { return bullets_; }
  const std::vector<std::string>& rule_names() const { return names_; }
  std::size_t bullet_rule() const { return 0; }
  std::size_t space_rule() const { return 1; }

  std::size_t rule_index(std::string_view rule) {
    auto it = std::find(names_.begin(), names_.end(), rule);
    if (it != names_.end()) return static_cast<std::size_t>(it - names_.begin());
    names_.emplace_back(rule);
    return names_.size() - 1;
  }

 private:
  // Closure: nothing a rule emits may be rewritten by another rule, which is
  // what makes a single pass idempotent.
  void validate() const {
    for (const auto& [key, m] : map_) {
      if (bullets_.contains(key)) {
        throw ValidationError(utf8::format_codepoint(key) + " is both a mapping key and a bullet");
      }
      for (char32_t r : m.replacement) {
        if (map_.contains(r) || bullets_.contains(r)) {
          throw ValidationError("rule set not closed: replacement " + utf8::format_codepoint(r) +
                                " is itself rewritten");
        }
      }
    }
  }

  std::map<char32_t, Mapping> map_;
  std::set<char32_t> bullets_;
  std::vector<std::string> names_;
};

// Pipe to danda, ASCII to Devanagari digits, combining candrabindu U+0310 to
// the Devanagari sign U+0901, combining macron removal.
inline NormRuleSet default_rules() {
  NormRuleSet rules;
  rules.map(U'|', U"।", "pipe_to_danda");
  for (char32_t d = 0; d < 10; ++d) rules.map(U'0' + d, std::u32string(1, 0x0966 + d), "ascii_digits");
  rules.map(0x0310, U"ँ", "chandrabindu");
  rules.map(0x0304, U"", "combining_macrons");
  return rules;
}

struct LineResult {
  std::string text;
  std::vector<std::size_t> counts;  // edits per rule, indexed like rule_names()

  std::size_t total_edits() const {
    std::size_t n = 0;
    for (auto c : counts) n += c;
    return n;
  }
};

// Order: codepoint map, bullet deletion, whitespace collapse, trim.
inline LineResult normalize_line(std::string_view text, const NormRuleSet& rules) {
  LineResult res;
  res.counts.assign(rules.rule_names().size(), 0);
  const std::u32string in = utf8::decode(text);

  std::u32string mapped;
  mapped.reserve(in.size());
  for (char32_t c : in) {
    if (auto it = rules.mappings().find(c); it != rules.mappings().end()) {
      ++res.counts[it->second.rule];
      mapped += it->second.replacement;
    } else if (rules.bullets().contains(c)) {
      ++res.counts[rules.bullet_rule()];
    } else {
      mapped.push_back(c);
    }
  }

  std::u32string out;
  out.reserve(mapped.size());
  std::size_t& space_edits = res.counts[rules.space_rule()];
  for (std::size_t i = 0; i < mapped.size();) {
    if (!is_space(mapped[i])) {
      out.push_back(mapped[i++]);
      continue;
    }
    std::size_t j = i;
    while (j < mapped.size() && is_space(mapped[j])) ++j;
    const bool at_edge = i == 0 || j == mapped.size();
    if (rules.strip_edges && at_edge) {
      space_edits += j - i;
    } else if (rules.collapse_whitespace) {
      // A run becomes one U+0020; every other codepoint in it is an edit.
      space_edits += (j - i) - 1;
      if (mapped[i] != U' ') ++space_edits;
      out.push_back(U' ');
    } else {
      out.append(mapped, i, j - i);
    }
    i = j;
  }
  res.text = utf8::encode(out);
  return res;
}

inline bool is_zero_width(char32_t c) { return c == 0x200B || c == 0x200C || c == 0x200D; }

inline std::u32string strip_zero_width(std::u32string_view text) {
  std::u32string out;
  out.reserve(text.size());
  for (char32_t c : text) {
    if (!is_zero_width(c)) out.push_back(c);
  }
  return out;
}

inline std::string strip_zero_width(std::string_view text) {
  return utf8::encode(strip_zero_width(std::u32string_view(utf8::decode(text))));
}

// Removes U+0304 plus any caller-supplied upper-dash marks.
inline std::string remove_combining_macrons(std::string_view text,
                                            const std::set<char32_t>& extra_marks = {}) {
  std::u32string out;
  for (char32_t c : utf8::decode(text)) {
    if (c == 0x0304 || extra_marks.contains(c)) continue;
    out.push_back(c);
  }
  return utf8::encode(out);
}

struct NormReport {
  std::vector<std::string> rules;
  std::vector<std::size_t> counts;
  std::vector<std::size_t> lines_affected;
  std::size_t total_lines = 0;

  std::size_t index_of(std::string_view rule) const {
    auto it = std::find(rules.begin(), rules.end(), rule);
    if (it == rules.end()) throw ValidationError("no rule named " + std::string(rule));
    return static_cast<std::size_t>(it - rules.begin());
  }
  std::size_t count(std::string_view rule) const { return counts[index_of(rule)]; }
  std::size_t affected(std::string_view rule) const { return lines_affected[index_of(rule)]; }
};

inline NormReport empty_report(const NormRuleSet& rules) {
  NormReport r;
  r.rules = rules.rule_names();
  r.counts.assign(r.rules.size(), 0);
  r.lines_affected.assign(r.rules.size(), 0);
  return r;
}

inline void accumulate(NormReport& report, const LineResult& line) {
  ++report.total_lines;
  for (std::size_t i = 0; i < line.counts.size(); ++i) {
    report.counts[i] += line.counts[i];
    if (line.counts[i] > 0) ++report.lines_affected[i];
  }
}

struct ManifestResult {
  Manifest manifest;
  NormReport report;
};

inline ManifestResult normalize_manifest(Manifest manifest, const NormRuleSet& rules) {
  ManifestResult out{std::move(manifest), empty_report(rules)};
  for (auto& sample : out.manifest) {
    LineResult r = normalize_line(sample.text, rules);
    accumulate(out.report, r);
    sample.text = std::move(r.text);
  }
  return out;
}

inline std::string report_csv(const NormReport& r) {
  std::ostringstream os;
  os << "rule,count,lines_affected,percent_of_lines\n";
  for (std::size_t i = 0; i < r.rules.size(); ++i) {
    const double pct = r.total_lines ? 100.0 * static_cast<double>(r.lines_affected[i]) /
                                           static_cast<double>(r.total_lines)
                                     : 0.0;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", pct);
    os << r.rules[i] << ',' << r.counts[i] << ',' << r.lines_affected[i] << ',' << buf << '\n';
  }
  return os.str();
}

// Rule file: `U+XXXX -> U+YYYY[,U+ZZZZ...]`, `U+XXXX -> DELETE` or
// `U+XXXX -> BULLET`. `#` starts a comment; a comment of the form
// `# rule: <name>` labels the mappings that follow. Flags:
// `collapse_whitespace = on|off`, `strip_edges = on|off`.
inline NormRuleSet parse_rules(std::istream& in) {
  NormRuleSet rules;
  std::string label = "custom";
  std::string line;
  std::size_t lineno = 0;

  const auto parse_cp = [&](std::string tok) -> char32_t {
    auto trim = [](std::string& s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
    };
    trim(tok);
    if (tok.size() < 3 || (tok[0] != 'U' && tok[0] != 'u') || tok[1] != '+') {
      throw ValidationError("rule line " + std::to_string(lineno) + ": expected U+XXXX, got '" + tok + "'");
    }
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(tok.substr(2), &used, 16);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() - 2 || v > 0x10FFFF) {
      throw ValidationError("rule line " + std::to_string(lineno) + ": bad codepoint '" + tok + "'");
    }
    return static_cast<char32_t>(v);
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (auto hash = line.find('#'); hash != std::string::npos) {
      std::string comment = line.substr(hash + 1);
      comment.erase(0, comment.find_first_not_of(" \t"));
      if (comment.rfind("rule:", 0) == 0) {
        label = comment.substr(5);
        label.erase(0, label.find_first_not_of(" \t"));
        label.erase(label.find_last_not_of(" \t") + 1);
        if (label.empty()) throw ValidationError("rule line " + std::to_string(lineno) + ": empty rule label");
      }
      line.erase(hash);
    }
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    if (auto eq = line.find('='); eq != std::string::npos && line.find("->") == std::string::npos) {
      std::string key = line.substr(0, eq);
      std::string val = line.substr(eq + 1);
      for (auto* s : {&key, &val}) {
        s->erase(0, s->find_first_not_of(" \t"));
        s->erase(s->find_last_not_of(" \t") + 1);
      }
      bool on;
      if (val == "on" || val == "true") on = true;
      else if (val == "off" || val == "false") on = false;
      else throw ValidationError("rule line " + std::to_string(lineno) + ": flag value must be on/off");
      if (key == "collapse_whitespace") rules.collapse_whitespace = on;
      else if (key == "strip_edges") rules.strip_edges = on;
      else throw ValidationError("rule line " + std::to_string(lineno) + ": unknown flag '" + key + "'");
      continue;
    }

    const auto arrow = line.find("->");
    if (arrow == std::string::npos) {
      throw ValidationError("rule line " + std::to_string(lineno) + ": missing '->'");
    }
    const char32_t from = parse_cp(line.substr(0, arrow));
    std::string rhs = line.substr(arrow + 2);
    rhs.erase(0, rhs.find_first_not_of(" \t"));
    rhs.erase(rhs.find_last_not_of(" \t") + 1);
    if (rhs == "DELETE") {
      rules.map(from, U"", label);
    } else if (rhs == "BULLET") {
      rules.add_bullet(from);
    } else {
      std::u32string to;
      std::stringstream parts(rhs);
      std::string tok;
      while (std::getline(parts, tok, ',')) to.push_back(parse_cp(tok));
      if (to.empty()) throw ValidationError("rule line " + std::to_string(lineno) + ": empty replacement");
      rules.map(from, std::move(to), label);
    }
  }
  return rules;
}

inline NormRuleSet load_rules(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open rule file " + path.string());
  return parse_rules(in);
}

}  // namespace htrkit::textnorm
