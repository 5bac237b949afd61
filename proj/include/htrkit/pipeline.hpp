#pragma once

// Dataset splits, run configuration, stage/audit reports and the end-to-end
// run: corpus -> synth -> normalize -> split -> augment -> tokenizer ->
// replay decode -> score -> analyze.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "htrkit/analysis.hpp"
#include "htrkit/augment.hpp"
#include "htrkit/decode.hpp"
#include "htrkit/errors.hpp"
#include "htrkit/manifest.hpp"
#include "htrkit/metrics.hpp"
#include "htrkit/parallel.hpp"
#include "htrkit/rng.hpp"
#include "htrkit/synthgen.hpp"
#include "htrkit/textnorm.hpp"
#include "htrkit/tokenizer.hpp"

namespace htrkit::pipeline {

using decode::TokenId;

struct Ratios {
  double train = 0.8;
  double eval = 0.1;
  double test = 0.1;

  void validate() const {
    for (double r : {train, eval, test})
      if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("split ratios must lie in [0, 1]");
    if (std::abs(train + eval + test - 1.0) > 1e-9) throw ValidationError("split ratios must sum to 1");
  }
};

// Largest-remainder apportionment of n items; remainder ties go to train,
// then eval, then test.
inline std::array<std::size_t, 3> split_counts(std::size_t n, const Ratios& r) {
  r.validate();
  const std::array<double, 3> ratio{r.train, r.eval, r.test};
  std::array<std::size_t, 3> count{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double q = static_cast<double>(n) * ratio[i];
    const double f = std::floor(q + 1e-9);
    count[i] = static_cast<std::size_t>(f);
    rem[i] = q - f;
    assigned += count[i];
  }
  while (assigned < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (rem[i] > rem[best] + 1e-12) best = i;
    ++count[best];
    rem[best] = -1.0;
    ++assigned;
  }
  return count;
}

// Seeded Fisher-Yates shuffle of the entries, then contiguous cuts of the
// apportioned sizes. With `by_source`, whole provenance sources are shuffled
// and each is placed in the first split still below its target size.
// Record order is preserved; only split tags change.
inline Manifest split(Manifest m, const Ratios& ratios, std::uint64_t seed, bool by_source = false) {
  const auto target = split_counts(m.size(), ratios);
  constexpr std::array<Split, 3> tags{Split::kTrain, Split::kEval, Split::kTest};
  Rng rng(seed);
  if (!by_source) {
    std::vector<std::size_t> order(m.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    std::size_t pos = 0;
    for (int s = 0; s < 3; ++s)
      for (std::size_t n = 0; n < target[s]; ++n) m[order[pos++]].split = tags[s];
    return m;
  }
  std::vector<std::string> sources;
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < m.size(); ++i) {
    auto& v = members[m[i].provenance.source];
    if (v.empty()) sources.push_back(m[i].provenance.source);
    v.push_back(i);
  }
  rng.shuffle(sources);
  std::array<std::size_t, 3> filled{};
  for (const auto& src : sources) {
    int s = 0;
    while (s < 2 && filled[s] >= target[s]) ++s;
    for (auto i : members[src]) m[i].split = tags[s];
    filled[s] += members[src].size();
  }
  return m;
}

inline Manifest select(const Manifest& m, Split s) {
  Manifest out;
  for (const auto& x : m)
    if (x.split == s) out.push_back(x);
  return out;
}

// Stage x split counts, mirroring the three-stage data table.
struct StageTable {
  std::array<std::array<std::uint64_t, 4>, 3> counts{};  // [stage-1][split]

  void add(int stage, Split split, std::uint64_t n = 1) {
    if (stage < 1 || stage > 3) throw ValidationError("stage must be 1, 2 or 3");
    counts[static_cast<std::size_t>(stage - 1)][static_cast<std::size_t>(split)] += n;
  }
  std::uint64_t at(int stage, Split split) const {
    return counts[static_cast<std::size_t>(stage - 1)][static_cast<std::size_t>(split)];
  }
  std::uint64_t total(Split split) const {
    std::uint64_t n = 0;
    for (const auto& row : counts) n += row[static_cast<std::size_t>(split)];
    return n;
  }
  std::uint64_t unassigned() const { return total(Split::kUnassigned); }
};

inline StageTable stage_report(std::span<const Manifest> manifests) {
  StageTable t;
  for (const auto& m : manifests)
    for (const auto& s : m) t.add(s.stage, s.split);
  return t;
}

inline std::string stage_csv(const StageTable& t) {
  static const char* names[] = {"pretraining", "transfer", "final"};
  const bool un = t.unassigned() > 0;
  std::ostringstream os;
  os << "stage,train,eval,test" << (un ? ",unassigned" : "") << '\n';
  for (int st = 1; st <= 3; ++st) {
    os << names[st - 1] << ',' << t.at(st, Split::kTrain) << ',' << t.at(st, Split::kEval) << ','
       << t.at(st, Split::kTest);
    if (un) os << ',' << t.at(st, Split::kUnassigned);
    os << '\n';
  }
  os << "total," << t.total(Split::kTrain) << ',' << t.total(Split::kEval) << ',' << t.total(Split::kTest);
  if (un) os << ',' << t.unassigned();
  os << '\n';
  return os.str();
}

struct AuditReport {
  std::size_t records = 0;
  std::size_t variants = 0;
  std::vector<std::string> issues;          // leakage or dangling references
  std::size_t sources_across_splits = 0;    // informational: sources in more than one split
  std::size_t texts_across_splits = 0;      // informational: identical texts in more than one split

  bool ok() const { return issues.empty(); }
};

// Every augmented variant must point at an existing original image and carry
// that original's split tag.
inline AuditReport audit(const Manifest& m) {
  AuditReport r;
  r.records = m.size();
  std::set<std::string> ids;
  std::map<std::string, Split> by_image;
  std::map<std::string, std::set<Split>> src_splits, text_splits;
  for (const auto& s : m) {
    if (!ids.insert(s.id).second) r.issues.push_back("duplicate id " + s.id);
    if (s.provenance.parent.empty() && !s.image.empty()) by_image.emplace(s.image, s.split);
  }
  for (const auto& s : m) {
    if (s.provenance.parent.empty()) {
      src_splits[s.provenance.source].insert(s.split);
      text_splits[s.text].insert(s.split);
      continue;
    }
    ++r.variants;
    auto it = by_image.find(s.provenance.parent);
    if (it == by_image.end()) {
      r.issues.push_back("variant " + s.id + " has no original '" + s.provenance.parent + "' in the manifest");
    } else if (it->second != s.split) {
      r.issues.push_back("variant " + s.id + " is in " + to_string(s.split) + " but its original is in " +
                         to_string(it->second));
    }
  }
  for (const auto& [k, v] : src_splits) r.sources_across_splits += v.size() > 1;
  for (const auto& [k, v] : text_splits) r.texts_across_splits += v.size() > 1;
  return r;
}

inline nlohmann::ordered_json to_json(const AuditReport& r) {
  nlohmann::ordered_json j;
  j["ok"] = r.ok();
  j["records"] = r.records;
  j["variants"] = r.variants;
  j["sources_across_splits"] = r.sources_across_splits;
  j["texts_across_splits"] = r.texts_across_splits;
  j["issues"] = r.issues;
  return j;
}

// Seeded stand-in for a recognizer: per reference token, a top-3 list whose
// leader is the reference token except with probability `error_rate`
// (substitution; the reference token is then runner-up half the time) or
// `deletion_rate` (the step is skipped).
struct SimulatorOptions {
  double error_rate = 0.08;
  double deletion_rate = 0.01;
};

inline std::vector<decode::TopList> simulate_steps(std::span<const TokenId> reference, std::span<const TokenId> candidates,
                                                   std::uint64_t seed,
                                                   const SimulatorOptions& opt = {}) {
  if (candidates.size() < 3) throw ValidationError("simulator needs at least three candidate tokens");
  Rng rng(seed);
  auto other = [&](std::initializer_list<TokenId> avoid) {
    for (;;) {
      const TokenId t = candidates[static_cast<std::size_t>(rng.below(candidates.size()))];
      if (std::find(avoid.begin(), avoid.end(), t) == avoid.end()) return t;
    }
  };
  std::vector<decode::TopList> steps;
  for (TokenId ref : reference) {
    const double u = rng.uniform();
    if (u < opt.deletion_rate) continue;
    decode::TopList top;
    if (u < opt.deletion_rate + opt.error_rate) {
      const TokenId wrong = other({ref});
      const double p1 = rng.uniform(0.3, 0.7);
      const bool near = rng.bernoulli(0.5);
      const TokenId second = near ? ref : other({ref, wrong});
      const double p2 = p1 * (near ? rng.uniform(0.02, 0.9) : rng.uniform(0.0, 0.3));
      const TokenId third = other({ref, wrong, second});
      top = {{wrong, p1}, {second, p2}, {third, std::min(p2, std::max(0.0, 1.0 - p1 - p2)) * rng.uniform()}};
    } else {
      const double d = rng.uniform();
      const double p1 = 1.0 - 0.25 * d * d * d;
      const double p2 = (1.0 - p1) * rng.uniform(0.05, 0.95);
      const TokenId second = other({ref});
      top = {{ref, p1}, {second, p2}, {other({ref, second}), std::min(p2, 1.0 - p1 - p2) * rng.uniform()}};
    }
    steps.push_back(std::move(top));
  }
  return steps;
}

// Non-special tokens that decode to valid UTF-8 on their own.
inline std::vector<TokenId> printable_tokens(const tokenizer::BpeModel& model) {
  std::vector<TokenId> out;
  for (std::size_t i = tokenizer::kNumSpecials; i < model.size(); ++i) {
    const auto& s = model.token(static_cast<TokenId>(i));
    if (!s.empty() && utf8::is_valid(s)) out.push_back(static_cast<TokenId>(i));
  }
  return out;
}

struct RunConfig {
  std::uint64_t seed = 42;
  Ratios ratios;
  bool split_by_source = false;
  std::string rules;  // rule file; empty uses the built-in rules
  int multiplicity = 8;
  std::size_t vocab_size = tokenizer::kDefaultVocabSize;
  tokenizer::Mode tokenizer_mode = tokenizer::Mode::kByte;
  std::size_t corpus_lines = 200;
  std::string corpus;  // text file; empty generates random lines
  double threshold = 0.034;
  SimulatorOptions simulator;
  std::vector<decode::DecodeConfig> grid;  // empty: no grid sweep

  void validate() const {
    ratios.validate();
    if (multiplicity < 0) throw ValidationError("multiplicity must be non-negative");
    if (vocab_size < tokenizer::kNumSpecials + 1) throw ValidationError("vocab size too small");
    if (corpus.empty() && corpus_lines == 0) throw ValidationError("corpus_lines must be positive");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ValidationError("threshold must lie in [0, 1]");
    for (double p : {simulator.error_rate, simulator.deletion_rate})
      if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("simulator rates must lie in [0, 1]");
    if (simulator.error_rate + simulator.deletion_rate > 1.0) throw ValidationError("simulator rates exceed 1");
    for (const auto& c : grid) c.validate();
  }
};

inline RunConfig config_from_json(const nlohmann::json& j, RunConfig c = {}) {
  static const std::set<std::string> known{"seed",       "ratios",     "split_by_source", "rules",     "multiplicity",
                                           "vocab_size", "tokenizer_mode", "corpus_lines", "corpus",   "threshold",
                                           "simulator",  "grid",       "workers"};
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ValidationError("unknown config key '" + k + "'");
  try {
    c.seed = j.value("seed", c.seed);
    if (j.contains("ratios")) {
      const auto& r = j.at("ratios");
      if (r.is_array()) {
        if (r.size() != 3) throw ValidationError("ratios must have three entries");
        c.ratios = {r[0].get<double>(), r[1].get<double>(), r[2].get<double>()};
      } else {
        c.ratios = {r.value("train", c.ratios.train), r.value("eval", c.ratios.eval), r.value("test", c.ratios.test)};
      }
    }
    c.split_by_source = j.value("split_by_source", c.split_by_source);
    c.rules = j.value("rules", c.rules);
    c.multiplicity = j.value("multiplicity", c.multiplicity);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    if (j.contains("tokenizer_mode")) c.tokenizer_mode = tokenizer::parse_mode(j.at("tokenizer_mode").get<std::string>());
    c.corpus_lines = j.value("corpus_lines", c.corpus_lines);
    c.corpus = j.value("corpus", c.corpus);
    c.threshold = j.value("threshold", c.threshold);
    if (j.contains("simulator")) {
      const auto& s = j.at("simulator");
      c.simulator.error_rate = s.value("error_rate", c.simulator.error_rate);
      c.simulator.deletion_rate = s.value("deletion_rate", c.simulator.deletion_rate);
    }
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      c.grid.clear();
      if (g.is_string() && g.get<std::string>() == "default") {
        c.grid = decode::default_grid();
      } else {
        for (const auto& e : g) c.grid.push_back(decode::config_from_json(e));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad config: ") + e.what());
  }
  c.validate();
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path, RunConfig base = {}) {
  const std::string text = read_text_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return config_from_json(j, base);
}

inline textnorm::NormRuleSet rules_for(const RunConfig& c) {
  return c.rules.empty() ? textnorm::default_rules() : textnorm::load_rules(c.rules);
}

// Derived stream seeds, one per stage, so stages stay independent.
enum class Stream : std::uint64_t { kCorpus = 1, kSynth, kSplit, kAugment, kReplay };

inline std::uint64_t stream_seed(const RunConfig& c, Stream s) {
  return mix_seed(c.seed, {static_cast<std::uint64_t>(s)});
}

struct RunSummary {
  std::size_t lines = 0;
  std::array<std::size_t, 3> split_sizes{};
  std::size_t augmented_train = 0;
  std::size_t vocab_size = 0;
  metrics::EvalSummary eval;
  analysis::UncertaintyReport uncertainty;
  analysis::SweepResult sweep;
  AuditReport audit;
};

inline std::string eval_csv(const metrics::EvalSummary& s) {
  std::ostringstream os;
  os << "id,length,substitutions,deletions,insertions,cer\n";
  for (const auto& l : s.lines) {
    os << l.id << ',' << l.length << ',' << l.alignment.substitutions << ',' << l.alignment.deletions << ','
       << l.alignment.insertions << ',' << metrics::to_double(l.cer) << '\n';
  }
  return os.str();
}

inline nlohmann::ordered_json to_json(const metrics::EvalSummary& s) {
  nlohmann::ordered_json j;
  j["lines"] = s.lines.size();
  j["skipped_empty"] = s.skipped_empty;
  j["cer"] = metrics::to_double(s.mean_cer);
  j["cer_exact"] = metrics::to_string(s.mean_cer);
  j["weighted_cer"] = metrics::to_double(s.weighted_cer);
  j["weighted_cer_exact"] = metrics::to_string(s.weighted_cer);
  j["accuracy"] = metrics::to_double(s.accuracy);
  j["accuracy_exact"] = metrics::to_string(s.accuracy);
  return j;
}

// Writes the analysis artifacts for scored predictions into `dir`.
inline void write_analysis(const std::filesystem::path& dir, const metrics::EvalSummary& eval,
                           const analysis::UncertaintyReport* unc, const analysis::SweepResult* sweep) {
  std::vector<metrics::Alignment> al;
  std::vector<metrics::Rational> cers;
  std::vector<metrics::LineScore> scores;
  for (const auto& l : eval.lines) {
    al.push_back(l.alignment);
    cers.push_back(l.cer);
    scores.push_back({l.length, l.cer});
  }
  const auto cm = analysis::build_confusion(al);
  write_text_file(dir / "confusion.csv", analysis::confusion_csv(cm));
  write_text_file(dir / "error_share.csv", analysis::error_share_csv(analysis::error_share(cm)));
  write_text_file(dir / "cer_histogram.csv", analysis::histogram_csv(analysis::cer_histogram(cers, {1, 20})));
  const std::vector<std::int64_t> edges{0, 20, 40, 60, 80, 100, 120, 160, 200, 1000000};
  write_text_file(dir / "cer_vs_length.csv", analysis::length_csv(analysis::cer_vs_length(scores, edges)));
  const auto hm = analysis::confusion_heatmap(cm);
  imaging::save_image(dir / "confusion_heatmap.png", hm.image);
  std::string labels = "index,char\n";
  for (std::size_t i = 0; i < hm.labels.size(); ++i) labels += std::to_string(i) + ',' + analysis::csv_char(hm.labels[i]) + '\n';
  write_text_file(dir / "confusion_heatmap_labels.csv", labels);

  nlohmann::ordered_json j;
  j["scores"] = to_json(eval);
  j["substitutions"] = cm.total_substitutions();
  j["deletions"] = cm.total_deletions();
  j["insertions"] = cm.total_insertions();
  nlohmann::ordered_json top = nlohmann::ordered_json::array();
  for (const auto& e : analysis::error_share(cm, 10))
    top.push_back({{"char", analysis::csv_char(e.ch)}, {"errors", e.count}, {"share", metrics::to_double(e.share)}});
  j["top_error_chars"] = std::move(top);
  if (unc) {
    nlohmann::ordered_json u;
    u["tokens"] = unc->records.size();
    u["detection"] = analysis::to_json(unc->score);
    u["missed_reference_tokens"] = unc->missed_reference_tokens;
    u["recoverable"] = unc->recoverable;
    u["recoverable_flagged"] = unc->recoverable_flagged;
    if (sweep) {
      u["best_threshold"] = sweep->best_threshold;
      u["best"] = analysis::to_json(sweep->best);
      write_text_file(dir / "threshold_sweep.csv", analysis::sweep_csv(*sweep));
    }
    j["uncertainty"] = std::move(u);
  }
  write_text_file(dir / "summary.json", j.dump(2) + '\n');
}

// End-to-end run writing every artifact under `out`. Output bytes depend
// only on the config, never on `workers`.
inline RunSummary run_pipeline(const RunConfig& cfg, const std::filesystem::path& out,
                               unsigned workers = worker_count()) {
  cfg.validate();
  namespace fs = std::filesystem;
  RunSummary sum;
  const auto rules = rules_for(cfg);

  // Corpus and synthetic renders.
  std::vector<std::string> lines = cfg.corpus.empty()
                                       ? synthgen::random_devanagari_lines(cfg.corpus_lines, stream_seed(cfg, Stream::kCorpus))
                                       : synthgen::load_corpus_text({cfg.corpus}, rules);
  if (lines.empty()) throw ValidationError("corpus has no lines");
  std::string corpus_text;
  for (const auto& l : lines) corpus_text += l + '\n';
  write_text_file(out / "corpus.txt", corpus_text);
  const auto atlases = synthgen::builtin_atlases();
  const auto synth = synthgen::synthesize_corpus(lines, atlases, augment::default_noise_pipeline(), lines.size(),
                                                 stream_seed(cfg, Stream::kSynth), out, {}, workers);
  write_manifest(out / "manifest_raw.jsonl", synth.manifest);
  sum.lines = synth.manifest.size();

  // Normalize, split, augment the train split.
  const auto norm = textnorm::normalize_manifest(synth.manifest, rules);
  write_text_file(out / "normalization_report.csv", textnorm::report_csv(norm.report));
  const auto tagged = split(norm.manifest, cfg.ratios, stream_seed(cfg, Stream::kSplit), cfg.split_by_source);
  write_manifest(out / "manifest_split.jsonl", tagged);
  const Manifest train = select(tagged, Split::kTrain);
  const Manifest eval = select(tagged, Split::kEval);
  const Manifest test = select(tagged, Split::kTest);
  sum.split_sizes = {train.size(), eval.size(), test.size()};
  const auto pool = augment::default_pool();
  const Manifest train_aug = augment::expand_dataset(train, cfg.multiplicity, pool, stream_seed(cfg, Stream::kAugment));
  augment::materialize(train_aug, pool, out, workers);
  Manifest full = train_aug;
  full.insert(full.end(), eval.begin(), eval.end());
  full.insert(full.end(), test.begin(), test.end());
  write_manifest(out / "manifest_augmented.jsonl", full);
  sum.augmented_train = train_aug.size();
  sum.audit = audit(full);
  write_text_file(out / "audit.json", to_json(sum.audit).dump(2) + '\n');
  const std::vector<Manifest> stages{full};
  write_text_file(out / "stage_report.csv", stage_csv(stage_report(stages)));

  // Tokenizer over the train transcriptions.
  std::vector<std::string> train_text;
  for (const auto& s : train) train_text.push_back(s.text);
  const auto model = tokenizer::train_bpe(train_text, cfg.vocab_size, cfg.tokenizer_mode);
  tokenizer::save_model(out / "tokenizer.json", model);
  sum.vocab_size = model.size();

  // Simulated recognizer output over eval + test, replayed through greedy.
  Manifest held = eval;
  held.insert(held.end(), test.begin(), test.end());
  const auto candidates = printable_tokens(model);
  std::ostringstream replay;
  std::vector<std::vector<decode::TopList>> steps(held.size());
  std::vector<std::vector<TokenId>> refs(held.size());
  for (std::size_t i = 0; i < held.size(); ++i) {
    refs[i] = tokenizer::encode(model, held[i].text);
    steps[i] = simulate_steps(refs[i], candidates, mix_seed(stream_seed(cfg, Stream::kReplay), {i}), cfg.simulator);
    for (std::size_t t = 0; t < steps[i].size(); ++t) decode::write_replay_record(replay, held[i].id, t, steps[i][t]);
  }
  write_text_file(out / "replay.jsonl", replay.str());

  std::vector<metrics::EvalRecord> recs(held.size());
  std::vector<analysis::LinePrediction> preds(held.size());
  std::ostringstream pred_out;
  for (std::size_t i = 0; i < held.size(); ++i) {
    const decode::ReplayScorer scorer(steps[i], model.size(), tokenizer::kBos, tokenizer::kEos);
    const auto r = decode::greedy(scorer, static_cast<int>(steps[i].size()) + 1, 3);
    std::vector<TokenId> body = r.tokens;
    if (!body.empty() && body.back() == tokenizer::kEos) body.pop_back();
    recs[i] = {held[i].id, held[i].text, tokenizer::decode(model, body)};
    preds[i] = {held[i].id, refs[i], r.steps, tokenizer::kEos};
    nlohmann::ordered_json j;
    j["id"] = held[i].id;
    j["reference"] = recs[i].reference;
    j["hypothesis"] = recs[i].hypothesis;
    j["split"] = to_string(held[i].split);
    j["decode"] = decode::to_json(r);
    pred_out << j.dump() << '\n';
  }
  write_text_file(out / "predictions.jsonl", pred_out.str());

  sum.eval = metrics::evaluate(recs, {}, metrics::EmptyRefPolicy::kSkip);
  write_text_file(out / "scores.csv", eval_csv(sum.eval));
  write_text_file(out / "scores.json", to_json(sum.eval).dump(2) + '\n');

  sum.uncertainty = analysis::uncertainty_scan(preds, cfg.threshold);
  const auto grid = analysis::ratio_grid(sum.uncertainty.records);
  if (!grid.empty()) sum.sweep = analysis::threshold_sweep(sum.uncertainty.records, grid);
  write_analysis(out / "analysis", sum.eval, &sum.uncertainty, grid.empty() ? nullptr : &sum.sweep);

  if (!cfg.grid.empty()) {
    std::vector<decode::GridItem> items;
    std::vector<decode::ReplayScorer> scorers;
    for (std::size_t i = 0; i < held.size(); ++i) {
      items.push_back({held[i].id, held[i].text});
      scorers.emplace_back(steps[i], model.size(), tokenizer::kBos, tokenizer::kEos);
    }
    int longest = 1;
    for (const auto& st : steps) longest = std::max(longest, static_cast<int>(st.size()) + 1);
    auto grid_cfg = cfg.grid;
    for (auto& c : grid_cfg) c.max_len = std::max(c.max_len, longest);
    const auto rows = decode::run_grid(
        items, [&](std::size_t i) -> const decode::Scorer& { return scorers[i]; },
        [&](std::span<const TokenId> t) { return tokenizer::decode(model, t); }, grid_cfg, workers);
    write_text_file(out / "grid.csv", decode::grid_csv(rows));
  }
  return sum;
}

}  // namespace htrkit::pipeline
