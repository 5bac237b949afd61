#pragma once

// Line rendering from glyph atlases and synthetic corpus generation.
//
// Atlas file layout (little-endian):
//   magic "HTRATLS1" | u16 name_len | name bytes | u16 line_height | u32 count
//   count x { u32 codepoint | u16 advance | u16 width | u16 height | width*height coverage bytes }
// Coverage 0 is background, 255 is full ink. Codepoints render independently;
// there is no shaping, so conjuncts and reordered vowel signs are not composed.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "htrkit/augment.hpp"
#include "htrkit/errors.hpp"
#include "htrkit/image_io.hpp"
#include "htrkit/imaging.hpp"
#include "htrkit/manifest.hpp"
#include "htrkit/parallel.hpp"
#include "htrkit/rng.hpp"
#include "htrkit/textnorm.hpp"
#include "htrkit/utf8.hpp"

namespace htrkit::synthgen {

using imaging::GrayImage;

struct Glyph {
  int advance = 0;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> coverage;  // row-major, width*height

  bool operator==(const Glyph&) const = default;
};

class GlyphAtlas {
 public:
  GlyphAtlas(std::string name, int line_height) : name_(std::move(name)), line_height_(line_height) {
    if (line_height < 4 || line_height > 4096) throw ValidationError("atlas line height must lie in [4, 4096]");
    tofu_ = make_tofu(line_height);
  }

  const std::string& name() const { return name_; }
  int line_height() const { return line_height_; }
  const std::map<char32_t, Glyph>& glyphs() const { return glyphs_; }
  const Glyph& tofu() const { return tofu_; }

  void add(char32_t cp, Glyph g) {
    if (g.width < 0 || g.height < 0 || g.advance < 0) throw ValidationError("glyph dimensions must be non-negative");
    if (g.height > line_height_) {
      throw ValidationError("glyph " + utf8::format_codepoint(cp) + " is taller than the line height");
    }
    if (g.coverage.size() != static_cast<std::size_t>(g.width) * static_cast<std::size_t>(g.height)) {
      throw ValidationError("glyph " + utf8::format_codepoint(cp) + " bitmap size mismatch");
    }
    glyphs_[cp] = std::move(g);
  }

  bool covers(char32_t cp) const { return glyphs_.count(cp) != 0; }

  const Glyph& glyph(char32_t cp) const {
    auto it = glyphs_.find(cp);
    return it == glyphs_.end() ? tofu_ : it->second;
  }

  bool operator==(const GlyphAtlas&) const = default;

 private:
  // Hollow box, visible at any size.
  static Glyph make_tofu(int lh) {
    Glyph g;
    g.height = std::max(3, lh * 3 / 4);
    g.width = std::max(3, lh / 2);
    g.advance = g.width + std::max(1, lh / 12);
    g.coverage.assign(static_cast<std::size_t>(g.width * g.height), 0);
    for (int y = 0; y < g.height; ++y)
      for (int x = 0; x < g.width; ++x)
        if (x == 0 || y == 0 || x == g.width - 1 || y == g.height - 1)
          g.coverage[static_cast<std::size_t>(y * g.width + x)] = 255;
    return g;
  }

  std::string name_;
  int line_height_;
  std::map<char32_t, Glyph> glyphs_;
  Glyph tofu_;
};

namespace detail {

inline bool is_devanagari(char32_t c) { return c >= 0x0900 && c <= 0x097F; }

// Marks that attach to the previous letter and so take little horizontal room.
inline bool is_mark(char32_t c) {
  return (c >= 0x0900 && c <= 0x0903) || (c >= 0x093A && c <= 0x094F && c != 0x093D) ||
         (c >= 0x0951 && c <= 0x0957) || c == 0x0962 || c == 0x0963 || (c >= 0x0300 && c <= 0x036F);
}

inline void stroke(Glyph& g, double x0, double y0, double x1, double y1, int thickness, std::uint8_t ink) {
  const int steps = std::max(1, static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)) * 2)));
  for (int s = 0; s <= steps; ++s) {
    const double t = static_cast<double>(s) / steps;
    const int cx = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
    const int cy = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
    for (int dy = 0; dy < thickness; ++dy)
      for (int dx = 0; dx < thickness; ++dx) {
        const int x = cx + dx, y = cy + dy;
        if (x >= 0 && y >= 0 && x < g.width && y < g.height) {
          auto& c = g.coverage[static_cast<std::size_t>(y * g.width + x)];
          c = std::max(c, ink);
        }
      }
  }
}

}  // namespace detail

// Deterministic stand-in for a font: each glyph is drawn from random strokes
// seeded by (style_seed, codepoint). Devanagari letters get a headline.
// Covers printable ASCII, the Devanagari block and a few punctuation marks.
inline GlyphAtlas procedural_atlas(const std::string& name, std::uint64_t style_seed, int line_height = 32) {
  GlyphAtlas atlas(name, line_height);
  std::vector<char32_t> cps;
  for (char32_t c = 0x21; c <= 0x7E; ++c) cps.push_back(c);
  for (char32_t c = 0x0900; c <= 0x097F; ++c) cps.push_back(c);
  for (char32_t c : {0x2022, 0x2013, 0x2014, 0x00B0, 0x0304, 0x0310}) cps.push_back(c);
  Rng style(mix_seed(style_seed, {0}));
  const int thickness = std::max(1, line_height / 16 + static_cast<int>(style.below(2)));
  const double slant = style.uniform(-0.15, 0.15);
  const int space = std::max(2, line_height / 4);
  atlas.add(U' ', Glyph{space, 0, 0, {}});
  for (char32_t zw : {0x200B, 0x200C, 0x200D}) atlas.add(zw, Glyph{0, 0, 0, {}});
  for (char32_t c : cps) {
    Rng rng(mix_seed(style_seed, {1, c}));
    Glyph g;
    const bool mark = detail::is_mark(c);
    g.height = mark ? std::max(2, line_height / 3) : std::max(4, line_height * 3 / 4 - static_cast<int>(rng.below(static_cast<std::uint64_t>(line_height / 8 + 1))));
    g.width = mark ? std::max(2, line_height / 5) : std::max(3, line_height / 3 + static_cast<int>(rng.below(static_cast<std::uint64_t>(line_height / 4 + 1))));
    g.advance = mark ? std::max(1, g.width / 2) : g.width + std::max(1, line_height / 16);
    g.coverage.assign(static_cast<std::size_t>(g.width * g.height), 0);
    const int strokes = 2 + static_cast<int>(rng.below(3));
    const double w = g.width - 1.0, h = g.height - 1.0;
    for (int s = 0; s < strokes; ++s) {
      double x0 = rng.uniform(0, w), y0 = rng.uniform(h * 0.2, h), x1 = rng.uniform(0, w), y1 = rng.uniform(h * 0.2, h);
      x0 += slant * (h - y0);
      x1 += slant * (h - y1);
      const auto ink = static_cast<std::uint8_t>(200 + rng.below(56));
      detail::stroke(g, x0, y0, x1, y1, thickness, ink);
    }
    if (detail::is_devanagari(c) && !mark) detail::stroke(g, 0, 0, w, 0, thickness, 255);
    atlas.add(c, std::move(g));
  }
  return atlas;
}

// Three stylistically distinct procedural atlases.
inline std::vector<GlyphAtlas> builtin_atlases(int line_height = 32) {
  return {procedural_atlas("proc-thin", 11, line_height), procedural_atlas("proc-bold", 23, line_height),
          procedural_atlas("proc-slant", 37, line_height)};
}

namespace detail {

inline void put_u16(std::ostream& o, std::uint32_t v) {
  if (v > 0xFFFF) throw ValidationError("atlas field exceeds 16 bits");
  const char b[2] = {static_cast<char>(v & 0xFF), static_cast<char>(v >> 8)};
  o.write(b, 2);
}

inline void put_u32(std::ostream& o, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF), static_cast<char>((v >> 16) & 0xFF),
                     static_cast<char>(v >> 24)};
  o.write(b, 4);
}

inline std::uint32_t get_bytes(std::istream& in, int n) {
  unsigned char b[4] = {};
  if (!in.read(reinterpret_cast<char*>(b), n)) throw IoError("truncated atlas file");
  std::uint32_t v = 0;
  for (int i = n - 1; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline constexpr char kAtlasMagic[8] = {'H', 'T', 'R', 'A', 'T', 'L', 'S', '1'};

}  // namespace detail

inline void write_atlas(std::ostream& out, const GlyphAtlas& atlas) {
  out.write(detail::kAtlasMagic, 8);
  detail::put_u16(out, static_cast<std::uint32_t>(atlas.name().size()));
  out.write(atlas.name().data(), static_cast<std::streamsize>(atlas.name().size()));
  detail::put_u16(out, static_cast<std::uint32_t>(atlas.line_height()));
  detail::put_u32(out, static_cast<std::uint32_t>(atlas.glyphs().size()));
  for (const auto& [cp, g] : atlas.glyphs()) {
    detail::put_u32(out, cp);
    detail::put_u16(out, static_cast<std::uint32_t>(g.advance));
    detail::put_u16(out, static_cast<std::uint32_t>(g.width));
    detail::put_u16(out, static_cast<std::uint32_t>(g.height));
    out.write(reinterpret_cast<const char*>(g.coverage.data()), static_cast<std::streamsize>(g.coverage.size()));
  }
}

inline GlyphAtlas read_atlas(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, detail::kAtlasMagic)) throw IoError("not an atlas file");
  const auto name_len = detail::get_bytes(in, 2);
  std::string name(name_len, '\0');
  if (!in.read(name.data(), name_len)) throw IoError("truncated atlas file");
  GlyphAtlas atlas(name, static_cast<int>(detail::get_bytes(in, 2)));
  const auto count = detail::get_bytes(in, 4);
  for (std::uint32_t i = 0; i < count; ++i) {
    const char32_t cp = detail::get_bytes(in, 4);
    Glyph g;
    g.advance = static_cast<int>(detail::get_bytes(in, 2));
    g.width = static_cast<int>(detail::get_bytes(in, 2));
    g.height = static_cast<int>(detail::get_bytes(in, 2));
    g.coverage.resize(static_cast<std::size_t>(g.width) * static_cast<std::size_t>(g.height));
    if (!in.read(reinterpret_cast<char*>(g.coverage.data()), static_cast<std::streamsize>(g.coverage.size()))) {
      throw IoError("truncated atlas file");
    }
    atlas.add(cp, std::move(g));
  }
  return atlas;
}

inline void save_atlas(const std::filesystem::path& path, const GlyphAtlas& atlas) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_atlas(out, atlas);
  if (!out) throw IoError("write failed for " + path.string());
}

inline GlyphAtlas load_atlas(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_atlas(in);
}

struct RenderSpec {
  int scale = 1;  // integer magnification of atlas bitmaps
  int pad_x = 8;
  int pad_y = 4;
  int background = 255;
  int ink = 0;
  bool allow_empty = false;  // "" renders a blank 2·pad_x-wide line instead of failing

  void validate() const {
    if (scale < 1 || scale > 16) throw ValidationError("render scale must lie in [1, 16]");
    if (pad_x < 0 || pad_y < 0) throw ValidationError("padding must be non-negative");
    if (background < 0 || background > 255 || ink < 0 || ink > 255) {
      throw ValidationError("intensities must lie in [0, 255]");
    }
  }
};

struct RenderResult {
  GrayImage image;
  std::map<char32_t, std::size_t> tofu;  // uncovered codepoint -> occurrences
};

// Glyphs are top-aligned at pad_y; width is Σ advance·scale + 2·pad_x.
inline RenderResult render_line(std::string_view text, const GlyphAtlas& atlas, const RenderSpec& spec = {}) {
  spec.validate();
  const auto cps = utf8::decode(text);
  if (cps.empty() && !spec.allow_empty) throw ValidationError("cannot render an empty line");
  RenderResult r;
  long width = 2L * spec.pad_x;
  for (char32_t c : cps) {
    if (!atlas.covers(c)) ++r.tofu[c];
    width += static_cast<long>(atlas.glyph(c).advance) * spec.scale;
  }
  const long height = static_cast<long>(atlas.line_height()) * spec.scale + 2L * spec.pad_y;
  if (width <= 0) throw ValidationError("rendered line has zero width");
  if (width > 1'000'000) throw ValidationError("rendered line is too wide");
  r.image = GrayImage(static_cast<int>(width), static_cast<int>(height), static_cast<std::uint8_t>(spec.background));
  int pen = spec.pad_x;
  for (char32_t c : cps) {
    const Glyph& g = atlas.glyph(c);
    for (int y = 0; y < g.height * spec.scale; ++y)
      for (int x = 0; x < g.width * spec.scale; ++x) {
        const int cov = g.coverage[static_cast<std::size_t>((y / spec.scale) * g.width + x / spec.scale)];
        if (cov == 0) continue;
        const int px = pen + x, py = spec.pad_y + y;
        if (px >= r.image.width()) continue;
        const double v = spec.background + (spec.ink - spec.background) * (cov / 255.0);
        auto& dst = r.image.at(px, py);
        dst = std::min(dst, imaging::to_pixel(v));
      }
    pen += g.advance * spec.scale;
  }
  return r;
}

// Splits on LF (CRLF accepted), normalizes each line and drops the empty ones.
inline std::vector<std::string> split_corpus_text(std::string_view text, const textnorm::NormRuleSet& rules) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto norm = textnorm::normalize_line(utf8::sanitize(line), rules).text;
    if (!norm.empty()) out.push_back(std::move(norm));
    start = end + 1;
  }
  return out;
}

inline std::vector<std::string> load_corpus_text(const std::vector<std::filesystem::path>& paths,
                                                 const textnorm::NormRuleSet& rules = textnorm::default_rules()) {
  std::vector<std::string> out;
  for (const auto& p : paths) {
    auto lines = split_corpus_text(read_text_file(p), rules);
    out.insert(out.end(), std::make_move_iterator(lines.begin()), std::make_move_iterator(lines.end()));
  }
  return out;
}

struct SynthOptions {
  RenderSpec render;
  std::string image_dir = "synth";  // relative to the output root
  std::string id_prefix = "synth";
};

struct SynthResult {
  Manifest manifest;
  std::map<char32_t, std::size_t> tofu;
};

// Image i renders line i mod |lines| with an atlas drawn uniformly from
// Rng(mix_seed(seed, {i})), then degrades it with the noise pipeline seeded
// from the same stream. When `root` is empty no files are written.
inline SynthResult synthesize_corpus(const std::vector<std::string>& lines, const std::vector<GlyphAtlas>& atlases,
                                     const augment::NoisePipeline& pipeline, std::size_t count, std::uint64_t seed,
                                     const std::filesystem::path& root, const SynthOptions& opt = {},
                                     unsigned workers = worker_count()) {
  if (lines.empty()) throw ValidationError("synthesis needs at least one text line");
  if (atlases.empty()) throw ValidationError("synthesis needs at least one glyph atlas");
  for (const auto& s : pipeline) augment::validate(s);
  SynthResult out;
  out.manifest.resize(count);
  std::vector<std::map<char32_t, std::size_t>> tofu(count);
  const int digits = std::max<int>(6, static_cast<int>(std::to_string(count).size()));
  parallel_for(count, [&](std::size_t i) {
    const std::uint64_t item_seed = mix_seed(seed, {i});
    Rng rng(item_seed);
    const GlyphAtlas& atlas = atlases[static_cast<std::size_t>(rng.below(atlases.size()))];
    const std::uint64_t noise_seed = rng.next();
    const std::string& text = lines[i % lines.size()];
    auto rendered = render_line(text, atlas, opt.render);
    tofu[i] = std::move(rendered.tofu);
    std::string num = std::to_string(i);
    num.insert(0, static_cast<std::size_t>(std::max(0, digits - static_cast<int>(num.size()))), '0');
    LineSample& s = out.manifest[i];
    s.id = opt.id_prefix + num;
    s.image = (std::filesystem::path(opt.image_dir) / (s.id + ".png")).string();
    s.text = text;
    s.stage = 1;
    s.provenance.source = "line" + std::to_string(i % lines.size());
    s.provenance.augmentation = "synthetic";
    s.provenance.seed = item_seed;
    s.provenance.atlas = atlas.name();
    if (!root.empty()) {
      imaging::save_image(root / s.image, augment::apply_pipeline(rendered.image, pipeline, noise_seed));
    }
  }, workers);
  for (const auto& t : tofu)
    for (const auto& [cp, n] : t) out.tofu[cp] += n;
  return out;
}

// Renders (without writing) the image for manifest entry `s` produced by
// synthesize_corpus; used to verify determinism.
inline GrayImage rerender(const LineSample& s, const std::vector<GlyphAtlas>& atlases,
                          const augment::NoisePipeline& pipeline, const RenderSpec& spec = {}) {
  if (!s.provenance.seed) throw ValidationError("sample has no render seed");
  Rng rng(*s.provenance.seed);
  const GlyphAtlas& atlas = atlases[static_cast<std::size_t>(rng.below(atlases.size()))];
  const std::uint64_t noise_seed = rng.next();
  return augment::apply_pipeline(render_line(s.text, atlas, spec).image, pipeline, noise_seed);
}

// Random Devanagari-like lines: consonant clusters with vowel signs, spaces
// and an occasional danda.
inline std::vector<std::string> random_devanagari_lines(std::size_t n, std::uint64_t seed, int min_words = 3,
                                                        int max_words = 9) {
  Rng rng(seed);
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::u32string line;
    const int words = rng.integer(min_words, max_words);
    for (int w = 0; w < words; ++w) {
      if (w) line.push_back(U' ');
      const int syllables = rng.integer(1, 4);
      for (int s = 0; s < syllables; ++s) {
        line.push_back(static_cast<char32_t>(rng.integer(0x0915, 0x0939)));
        if (rng.bernoulli(0.15)) {
          line.push_back(0x094D);
          line.push_back(static_cast<char32_t>(rng.integer(0x0915, 0x0939)));
        }
        if (rng.bernoulli(0.5)) line.push_back(static_cast<char32_t>(rng.integer(0x093E, 0x094C)));
        if (rng.bernoulli(0.05)) line.push_back(0x0902);
      }
    }
    if (rng.bernoulli(0.3)) line += U" ।";
    out.push_back(utf8::encode(line));
  }
  return out;
}

}  // namespace htrkit::synthgen
