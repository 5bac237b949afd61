#pragma once

// Byte-pair-encoding subword tokenizer with character- and byte-level base
// alphabets. Lines are tokenized whole; there is no whitespace pre-splitting.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "htrkit/errors.hpp"
#include "htrkit/manifest.hpp"
#include "htrkit/utf8.hpp"

namespace htrkit::tokenizer {

using TokenId = std::int32_t;

enum class Mode { kChar, kByte };

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr std::size_t kNumSpecials = 4;
inline constexpr std::size_t kDefaultVocabSize = 500;

inline const std::vector<std::string>& special_names() {
  static const std::vector<std::string> names{"<pad>", "<bos>", "<eos>", "<unk>"};
  return names;
}

inline const char* to_string(Mode m) { return m == Mode::kChar ? "char" : "byte"; }

inline Mode parse_mode(std::string_view s) {
  if (s == "char") return Mode::kChar;
  if (s == "byte") return Mode::kByte;
  throw ValidationError("tokenizer mode must be 'char' or 'byte', got '" + std::string(s) + "'");
}

struct Merge {
  TokenId left;
  TokenId right;
  bool operator==(const Merge&) const = default;
};

class BpeModel {
 public:
  // Rebuilds the vocabulary from alphabet + merges; ids are specials, then
  // the sorted alphabet, then one id per merge whose concatenation is new.
  BpeModel(Mode mode, std::vector<std::uint32_t> alphabet, std::vector<Merge> merges = {},
           std::size_t requested_size = 0)
      : mode_(mode), alphabet_(std::move(alphabet)), requested_size_(requested_size) {
    std::sort(alphabet_.begin(), alphabet_.end());
    alphabet_.erase(std::unique(alphabet_.begin(), alphabet_.end()), alphabet_.end());
    for (std::size_t i = 0; i < kNumSpecials; ++i) tokens_.emplace_back();
    for (std::uint32_t a : alphabet_) {
      std::string s;
      if (mode_ == Mode::kByte) {
        if (a > 0xFF) throw ValidationError("byte alphabet value out of range");
        s.push_back(static_cast<char>(a));
      } else {
        if (a > 0x10FFFF || (a >= 0xD800 && a <= 0xDFFF)) throw ValidationError("bad alphabet codepoint");
        utf8::append(s, a);
      }
      add_token(s);
    }
    for (const Merge& m : merges) add_merge(m);
  }

  Mode mode() const { return mode_; }
  const std::vector<std::uint32_t>& alphabet() const { return alphabet_; }
  const std::vector<Merge>& merges() const { return merges_; }
  std::size_t size() const { return tokens_.size(); }
  std::size_t requested_size() const { return requested_size_; }

  // Token bytes; specials are empty.
  const std::string& token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) throw ValidationError("token id out of range");
    return tokens_[static_cast<std::size_t>(id)];
  }

  bool is_special(TokenId id) const { return id >= 0 && id < static_cast<TokenId>(kNumSpecials); }

  std::optional<TokenId> find(std::string_view s) const {
    if (auto it = ids_.find(std::string(s)); it != ids_.end()) return it->second;
    return std::nullopt;
  }

  // Appends a merge; its parts must already exist. Returns the result id.
  TokenId add_merge(Merge m) {
    if (m.left < static_cast<TokenId>(kNumSpecials) || m.right < static_cast<TokenId>(kNumSpecials) ||
        static_cast<std::size_t>(m.left) >= tokens_.size() || static_cast<std::size_t>(m.right) >= tokens_.size()) {
      throw ValidationError("merge refers to unknown or special token");
    }
    const std::string s = tokens_[static_cast<std::size_t>(m.left)] + tokens_[static_cast<std::size_t>(m.right)];
    TokenId result;
    if (auto it = ids_.find(s); it != ids_.end()) {
      result = it->second;
    } else {
      result = add_token(s);
    }
    const std::uint64_t key = pair_key(m.left, m.right);
    if (!ranks_.contains(key)) ranks_.emplace(key, Rank{merges_.size(), result});
    merges_.push_back(m);
    return result;
  }

  struct Rank {
    std::size_t rank;
    TokenId result;
  };

  const Rank* rank_of(TokenId l, TokenId r) const {
    auto it = ranks_.find(pair_key(l, r));
    return it == ranks_.end() ? nullptr : &it->second;
  }

  // Base tokenization: bytes, or codepoints with UNK for out-of-alphabet.
  std::vector<TokenId> base_tokens(std::string_view text) const {
    std::vector<TokenId> out;
    if (mode_ == Mode::kByte) {
      out.reserve(text.size());
      for (unsigned char b : text) out.push_back(base_id(b));
      return out;
    }
    std::size_t pos = 0;
    while (pos < text.size()) {
      const char32_t cp = utf8::next(text, pos);
      auto it = std::lower_bound(alphabet_.begin(), alphabet_.end(), static_cast<std::uint32_t>(cp));
      if (it != alphabet_.end() && *it == cp) {
        out.push_back(static_cast<TokenId>(kNumSpecials + static_cast<std::size_t>(it - alphabet_.begin())));
      } else {
        out.push_back(kUnk);
      }
    }
    return out;
  }

  static std::uint64_t pair_key(TokenId l, TokenId r) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(l)) << 32) | static_cast<std::uint32_t>(r);
  }

 private:
  TokenId base_id(unsigned char b) const {
    // Byte alphabet is always the full 0..255 range when trained here, but a
    // loaded model may carry a subset.
    auto it = std::lower_bound(alphabet_.begin(), alphabet_.end(), static_cast<std::uint32_t>(b));
    if (it != alphabet_.end() && *it == b) {
      return static_cast<TokenId>(kNumSpecials + static_cast<std::size_t>(it - alphabet_.begin()));
    }
    return kUnk;
  }

  TokenId add_token(const std::string& s) {
    const auto id = static_cast<TokenId>(tokens_.size());
    tokens_.push_back(s);
    ids_.emplace(s, id);
    return id;
  }

  Mode mode_;
  std::vector<std::uint32_t> alphabet_;
  std::vector<Merge> merges_;
  std::size_t requested_size_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
  std::unordered_map<std::uint64_t, Rank> ranks_;
};

namespace detail {

inline void merge_in_place(std::vector<TokenId>& seq, TokenId l, TokenId r, TokenId result) {
  std::size_t w = 0;
  for (std::size_t i = 0; i < seq.size();) {
    if (i + 1 < seq.size() && seq[i] == l && seq[i + 1] == r) {
      seq[w++] = result;
      i += 2;
    } else {
      seq[w++] = seq[i++];
    }
  }
  seq.resize(w);
}

}  // namespace detail

// Greedy BPE: repeatedly merge the most frequent adjacent pair (ties broken by
// the lexicographically smallest (left, right) token bytes) until the
// vocabulary reaches `vocab_size` or no pair occurs at least twice.
inline BpeModel train_bpe(std::span<const std::string> corpus, std::size_t vocab_size, Mode mode) {
  if (corpus.empty()) throw ValidationError("cannot train a tokenizer on an empty corpus");

  std::vector<std::uint32_t> alphabet;
  if (mode == Mode::kByte) {
    for (std::uint32_t b = 0; b < 256; ++b) alphabet.push_back(b);
  } else {
    std::unordered_set<std::uint32_t> seen;
    for (const auto& line : corpus) {
      for (char32_t c : utf8::decode(line)) seen.insert(c);
    }
    alphabet.assign(seen.begin(), seen.end());
  }
  if (vocab_size < alphabet.size() + kNumSpecials) {
    throw ValidationError("vocab size " + std::to_string(vocab_size) + " is smaller than alphabet + specials (" +
                          std::to_string(alphabet.size() + kNumSpecials) + ")");
  }
  BpeModel model(mode, std::move(alphabet), {}, vocab_size);

  // Unique lines with multiplicities, in sorted order.
  std::map<std::string, std::int64_t> unique;
  for (const auto& line : corpus) ++unique[line];
  std::vector<std::vector<TokenId>> seqs;
  std::vector<std::int64_t> weight;
  for (const auto& [line, n] : unique) {
    seqs.push_back(model.base_tokens(line));
    weight.push_back(n);
  }

  std::unordered_map<std::uint64_t, std::int64_t> counts;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> where;
  auto add_pairs = [&](std::size_t li, std::int64_t sign) {
    const auto& s = seqs[li];
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      const std::uint64_t key = BpeModel::pair_key(s[i], s[i + 1]);
      counts[key] += sign * weight[li];
      if (sign > 0) where[key].push_back(li);
    }
  };
  for (std::size_t li = 0; li < seqs.size(); ++li) add_pairs(li, +1);

  while (model.size() < vocab_size) {
    std::uint64_t best = 0;
    std::int64_t best_count = 0;
    for (const auto& [key, c] : counts) {
      if (c < 2 || c < best_count) continue;
      if (c > best_count) {
        best = key;
        best_count = c;
        continue;
      }
      const auto l = static_cast<TokenId>(key >> 32), r = static_cast<TokenId>(key & 0xFFFFFFFF);
      const auto bl = static_cast<TokenId>(best >> 32), br = static_cast<TokenId>(best & 0xFFFFFFFF);
      const int cmp = model.token(l).compare(model.token(bl));
      if (cmp < 0 || (cmp == 0 && model.token(r) < model.token(br))) best = key;
    }
    if (best_count < 2) break;

    const Merge m{static_cast<TokenId>(best >> 32), static_cast<TokenId>(best & 0xFFFFFFFF)};
    const TokenId result = model.add_merge(m);

    std::vector<std::size_t> lines = std::move(where[best]);
    where.erase(best);
    std::sort(lines.begin(), lines.end());
    lines.erase(std::unique(lines.begin(), lines.end()), lines.end());
    for (std::size_t li : lines) {
      add_pairs(li, -1);
      detail::merge_in_place(seqs[li], m.left, m.right, result);
      add_pairs(li, +1);
    }
    for (auto it = counts.begin(); it != counts.end();) {
      if (it->second == 0) {
        where.erase(it->first);
        it = counts.erase(it);
      } else {
        ++it;
      }
    }
  }
  return model;
}

inline std::vector<TokenId> encode(const BpeModel& model, std::string_view text) {
  std::vector<TokenId> seq = model.base_tokens(text);
  while (seq.size() > 1) {
    const BpeModel::Rank* best = nullptr;
    TokenId bl = 0, br = 0;
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
      const auto* r = model.rank_of(seq[i], seq[i + 1]);
      if (r && (!best || r->rank < best->rank)) {
        best = r;
        bl = seq[i];
        br = seq[i + 1];
      }
    }
    if (!best) break;
    detail::merge_in_place(seq, bl, br, best->result);
  }
  return seq;
}

// Specials render as nothing; byte-mode output is re-validated as UTF-8.
inline std::string decode(const BpeModel& model, std::span<const TokenId> ids) {
  std::string out;
  for (TokenId id : ids) {
    if (model.is_special(id)) continue;
    out += model.token(id);
  }
  return model.mode() == Mode::kByte ? utf8::sanitize(out) : out;
}

inline nlohmann::ordered_json to_json(const BpeModel& model) {
  nlohmann::ordered_json j;
  j["format"] = "htrkit-bpe";
  j["version"] = 1;
  j["mode"] = to_string(model.mode());
  j["specials"] = special_names();
  j["alphabet"] = model.alphabet();
  auto merges = nlohmann::ordered_json::array();
  for (const auto& m : model.merges()) merges.push_back({m.left, m.right});
  j["merges"] = std::move(merges);
  j["vocab_size"] = model.size();
  j["requested_vocab_size"] = model.requested_size();
  return j;
}

inline BpeModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "htrkit-bpe") throw ValidationError("not a BPE model file");
    if (j.at("version").get<int>() != 1) throw ValidationError("unsupported BPE model version");
    if (j.at("specials").get<std::vector<std::string>>() != special_names()) {
      throw ValidationError("unexpected special tokens in model file");
    }
    std::vector<Merge> merges;
    for (const auto& m : j.at("merges")) merges.push_back({m.at(0).get<TokenId>(), m.at(1).get<TokenId>()});
    BpeModel model(parse_mode(j.at("mode").get<std::string>()), j.at("alphabet").get<std::vector<std::uint32_t>>(),
                   std::move(merges), j.value("requested_vocab_size", std::size_t{0}));
    if (j.contains("vocab_size") && j["vocab_size"].get<std::size_t>() != model.size()) {
      throw ValidationError("model vocab_size does not match its merges");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad BPE model file: ") + e.what());
  }
}

inline void save_model(const std::filesystem::path& path, const BpeModel& model) {
  write_text_file(path, to_json(model).dump(1) + "\n");
}

inline BpeModel load_model(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("bad BPE model file " + path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace htrkit::tokenizer
