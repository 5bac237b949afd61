#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "htrkit/errors.hpp"

namespace htrkit {

enum class Split { kUnassigned, kTrain, kEval, kTest };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kEval: return "eval";
    case Split::kTest: return "test";
    case Split::kUnassigned: break;
  }
  return "unassigned";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "eval") return Split::kEval;
  if (s == "test") return Split::kTest;
  if (s == "unassigned" || s.empty()) return Split::kUnassigned;
  throw ValidationError("unknown split tag '" + s + "'");
}

struct Provenance {
  std::string source;                   // source document / line id
  std::string augmentation = "original";  // operator name for variants
  std::optional<std::uint64_t> seed;    // render or augmentation seed
  std::string atlas;                    // glyph atlas for synthetic renders
  std::string parent;                   // source image of an augmented variant

  bool operator==(const Provenance&) const = default;
};

// One line image with its transcription; the dataset interchange unit.
struct LineSample {
  std::string id;
  std::string image;
  std::string text;
  Split split = Split::kUnassigned;
  int stage = 3;
  Provenance provenance;

  bool operator==(const LineSample&) const = default;
};

using Manifest = std::vector<LineSample>;

inline nlohmann::ordered_json to_json(const LineSample& s) {
  nlohmann::ordered_json prov;
  prov["source"] = s.provenance.source;
  prov["augmentation"] = s.provenance.augmentation;
  if (s.provenance.seed) prov["seed"] = *s.provenance.seed;
  if (!s.provenance.atlas.empty()) prov["atlas"] = s.provenance.atlas;
  if (!s.provenance.parent.empty()) prov["parent"] = s.provenance.parent;
  nlohmann::ordered_json j;
  j["id"] = s.id;
  j["image"] = s.image;
  j["text"] = s.text;
  j["split"] = to_string(s.split);
  j["stage"] = s.stage;
  j["provenance"] = std::move(prov);
  return j;
}

inline LineSample line_sample_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("manifest record is not a JSON object");
  LineSample s;
  try {
    s.id = j.at("id").get<std::string>();
    s.image = j.value("image", std::string{});
    s.text = j.at("text").get<std::string>();
    s.split = parse_split(j.value("split", std::string{}));
    s.stage = j.value("stage", 3);
    if (auto it = j.find("provenance"); it != j.end()) {
      const auto& p = *it;
      s.provenance.source = p.value("source", std::string{});
      s.provenance.augmentation = p.value("augmentation", std::string{"original"});
      if (auto sd = p.find("seed"); sd != p.end()) s.provenance.seed = sd->get<std::uint64_t>();
      s.provenance.atlas = p.value("atlas", std::string{});
      s.provenance.parent = p.value("parent", std::string{});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad manifest record: ") + e.what());
  }
  if (s.stage < 1 || s.stage > 3) throw ValidationError("stage must be 1, 2 or 3 in record " + s.id);
  if (s.provenance.source.empty()) s.provenance.source = s.id;
  return s;
}

inline void check_unique_ids(const Manifest& m) {
  std::unordered_set<std::string> seen;
  for (const auto& s : m) {
    if (!seen.insert(s.id).second) throw ValidationError("duplicate manifest id '" + s.id + "'");
  }
}

inline Manifest parse_manifest(std::istream& in) {
  Manifest m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
    m.push_back(line_sample_from_json(j));
  }
  check_unique_ids(m);
  return m;
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  return parse_manifest(in);
}

inline std::string serialize_manifest(const Manifest& m) {
  std::string out;
  for (const auto& s : m) {
    out += to_json(s).dump();
    out += '\n';
  }
  return out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed for " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  write_text_file(path, serialize_manifest(m));
}

}  // namespace htrkit
