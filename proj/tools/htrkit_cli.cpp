// htrkit command-line front end. Exit codes: 0 ok, 1 validation error,
// 2 I/O error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "htrkit/analysis.hpp"
#include "htrkit/augment.hpp"
#include "htrkit/decode.hpp"
#include "htrkit/errors.hpp"
#include "htrkit/image_io.hpp"
#include "htrkit/imaging.hpp"
#include "htrkit/manifest.hpp"
#include "htrkit/metrics.hpp"
#include "htrkit/parallel.hpp"
#include "htrkit/pipeline.hpp"
#include "htrkit/synthgen.hpp"
#include "htrkit/textnorm.hpp"
#include "htrkit/tokenizer.hpp"

namespace fs = std::filesystem;
using namespace htrkit;
using json = nlohmann::ordered_json;

namespace {

// Flags shared with RunConfig; unset flags fall back to --config, then defaults.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::vector<double> ratios;
  std::optional<std::string> rules;
  std::optional<int> multiplicity;
  std::optional<std::size_t> vocab_size;
  std::optional<std::string> mode;
  std::optional<double> threshold;
};

struct Context {
  std::string config_path;
  Overrides ov;

  pipeline::RunConfig config() const {
    pipeline::RunConfig c = config_path.empty() ? pipeline::RunConfig{} : pipeline::load_config(config_path);
    if (ov.seed) c.seed = *ov.seed;
    if (!ov.ratios.empty()) {
      if (ov.ratios.size() != 3) throw ValidationError("--ratios takes three values");
      c.ratios = {ov.ratios[0], ov.ratios[1], ov.ratios[2]};
    }
    if (ov.rules) c.rules = *ov.rules;
    if (ov.multiplicity) c.multiplicity = *ov.multiplicity;
    if (ov.vocab_size) c.vocab_size = *ov.vocab_size;
    if (ov.mode) c.tokenizer_mode = tokenizer::parse_mode(*ov.mode);
    if (ov.threshold) c.threshold = *ov.threshold;
    c.validate();
    return c;
  }
};

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

std::vector<std::string> read_lines(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

std::vector<std::string> manifest_texts(const Manifest& m, const std::string& split) {
  std::vector<std::string> out;
  const bool all = split == "all";
  const Split want = all ? Split::kUnassigned : parse_split(split);
  for (const auto& s : m)
    if (all || s.split == want) out.push_back(s.text);
  return out;
}

// --- commands -------------------------------------------------------------

void add_normalize(CLI::App& app, Context& ctx) {
  auto* c = app.add_subcommand("normalize", "Normalize transcriptions of a manifest or a text file");
  auto in = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto report = std::make_shared<std::string>();
  auto text = std::make_shared<bool>(false);
  c->add_option("--in", *in, "Input manifest (JSONL) or text file with --text")->required();
  c->add_option("--out", *out, "Output path")->required();
  c->add_option("--rules", ctx.ov.rules, "Rule file (default: built-in rules)");
  c->add_option("--report", *report, "Per-rule report CSV");
  c->add_flag("--text", *text, "Treat input as plain text, one line per record");
  c->callback([&ctx, in, out, report, text] {
    const auto cfg = ctx.config();
    const auto rules = pipeline::rules_for(cfg);
    textnorm::NormReport rep = textnorm::empty_report(rules);
    if (*text) {
      std::string result;
      for (const auto& line : read_lines(*in)) {
        auto r = textnorm::normalize_line(line, rules);
        textnorm::accumulate(rep, r);
        result += r.text + '\n';
      }
      write_text_file(*out, result);
    } else {
      auto res = textnorm::normalize_manifest(read_manifest(*in), rules);
      write_manifest(*out, res.manifest);
      rep = std::move(res.report);
    }
    if (!report->empty()) write_text_file(*report, textnorm::report_csv(rep));
    json j;
    j["lines"] = rep.total_lines;
    for (std::size_t i = 0; i < rep.rules.size(); ++i) j["edits"][rep.rules[i]] = rep.counts[i];
    print(j);
  });
}

void add_split(CLI::App& app, Context& ctx) {
  auto* c = app.add_subcommand("split", "Assign train/eval/test tags with a seeded shuffle");
  auto in = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto by_source = std::make_shared<bool>(false);
  c->add_option("--in", *in, "Input manifest")->required();
  c->add_option("--out", *out, "Output manifest")->required();
  c->add_option("--seed", ctx.ov.seed, "Shuffle seed (default 42)");
  c->add_option("--ratios", ctx.ov.ratios, "train eval test ratios (default 0.8 0.1 0.1)")->expected(3);
  c->add_flag("--by-source", *by_source, "Keep all lines of a provenance source in one split");
  c->callback([&ctx, in, out, by_source] {
    const auto cfg = ctx.config();
    const auto m = pipeline::split(read_manifest(*in), cfg.ratios, cfg.seed, *by_source || cfg.split_by_source);
    write_manifest(*out, m);
    print({{"train", pipeline::select(m, Split::kTrain).size()},
           {"eval", pipeline::select(m, Split::kEval).size()},
           {"test", pipeline::select(m, Split::kTest).size()}});
  });
}

void add_synth(CLI::App& app, Context& ctx) {
  auto* c = app.add_subcommand("synth", "Render synthetic line images with the degradation pipeline");
  struct Opts {
    std::string out_dir;
    std::vector<std::string> corpus, atlases;
    std::size_t lines = 200, count = 0;
    std::string manifest = "manifest.jsonl";
    std::string noise;
    bool clean = false;
    int stage = 1;
  };
  auto o = std::make_shared<Opts>();
  c->add_option("--out-dir", o->out_dir, "Output root for images and manifest")->required();
  c->add_option("--corpus", o->corpus, "Text corpus files (default: random Devanagari lines)");
  c->add_option("--lines", o->lines, "Random lines to generate when no corpus is given");
  c->add_option("--count", o->count, "Images to render (default: one per line)");
  c->add_option("--atlas", o->atlases, "Glyph atlas files (default: built-in atlases)");
  c->add_option("--manifest", o->manifest, "Manifest file name under --out-dir");
  c->add_option("--noise", o->noise, "JSON array of noise-stage overrides");
  c->add_option("--stage", o->stage, "Stage tag for the records")->check(CLI::Range(1, 3));
  c->add_option("--seed", ctx.ov.seed, "Render seed");
  c->add_option("--rules", ctx.ov.rules, "Rule file applied to corpus lines");
  c->add_flag("--clean", o->clean, "Disable the degradation pipeline");
  c->callback([&ctx, o] {
    const auto cfg = ctx.config();
    const auto lines = o->corpus.empty()
                           ? synthgen::random_devanagari_lines(o->lines, pipeline::stream_seed(cfg, pipeline::Stream::kCorpus))
                           : synthgen::load_corpus_text({o->corpus.begin(), o->corpus.end()}, pipeline::rules_for(cfg));
    std::vector<synthgen::GlyphAtlas> atlases;
    for (const auto& a : o->atlases) atlases.push_back(synthgen::load_atlas(a));
    if (atlases.empty()) atlases = synthgen::builtin_atlases();
    auto noise = augment::default_noise_pipeline();
    if (!o->noise.empty()) {
      try {
        noise = augment::apply_overrides(noise, nlohmann::json::parse(read_text_file(o->noise)));
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError(o->noise + ": " + e.what());
      }
    }
    if (o->clean)
      for (auto& s : noise) s.p = 0.0;
    auto res = synthgen::synthesize_corpus(lines, atlases, noise, o->count ? o->count : lines.size(), cfg.seed,
                                           o->out_dir);
    for (auto& s : res.manifest) s.stage = o->stage;
    write_manifest(fs::path(o->out_dir) / o->manifest, res.manifest);
    json tofu = json::object();
    for (const auto& [cp, n] : res.tofu) tofu[utf8::format_codepoint(cp)] = n;
    print({{"images", res.manifest.size()}, {"tofu", tofu}});
  });
}

void add_augment(CLI::App& app, Context& ctx) {
  auto* c = app.add_subcommand("augment", "Expand a manifest with k augmented variants per training line");
  struct Opts {
    std::string in, out, root, ops, image_dir;
    bool all_splits = false, no_images = false;
  };
  auto o = std::make_shared<Opts>();
  c->add_option("--in", o->in, "Input manifest")->required();
  c->add_option("--out", o->out, "Output manifest")->required();
  c->add_option("--root", o->root, "Image root (default: directory of --in)");
  c->add_option("--multiplicity,-k", ctx.ov.multiplicity, "Variants per line (default 8)");
  c->add_option("--seed", ctx.ov.seed, "Augmentation seed");
  c->add_option("--ops", o->ops, "JSON array of operator parameter overrides");
  c->add_option("--image-dir", o->image_dir, "Directory for variant images, relative to the root");
  c->add_flag("--all-splits", o->all_splits, "Expand every record, not only the train split");
  c->add_flag("--no-images", o->no_images, "Write the manifest only");
  c->callback([&ctx, o] {
    const auto cfg = ctx.config();
    auto pool = augment::default_pool();
    if (!o->ops.empty()) {
      try {
        pool = augment::apply_overrides(pool, nlohmann::json::parse(read_text_file(o->ops)));
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError(o->ops + ": " + e.what());
      }
    }
    const Manifest in = read_manifest(o->in);
    Manifest expand, keep;
    for (const auto& s : in) (o->all_splits || s.split == Split::kTrain ? expand : keep).push_back(s);
    const auto seed = mix_seed(cfg.seed, {static_cast<std::uint64_t>(pipeline::Stream::kAugment)});
    Manifest out = augment::expand_dataset(expand, cfg.multiplicity, pool, seed, {o->image_dir});
    const std::size_t expanded = out.size();
    out.insert(out.end(), keep.begin(), keep.end());
    check_unique_ids(out);
    if (!o->no_images) {
      const fs::path root = o->root.empty() ? fs::path(o->in).parent_path() : fs::path(o->root);
      augment::materialize(out, pool, root);
    }
    write_manifest(o->out, out);
    print({{"input", in.size()}, {"expanded_from", expand.size()}, {"expanded", expanded}, {"total", out.size()}});
  });
}

void add_train_tokenizer(CLI::App& app, Context& ctx) {
  auto* c = app.add_subcommand("train-tokenizer", "Train a BPE tokenizer");
  struct Opts {
    std::string in, out, split = "train";
    bool text = false;
  };
  auto o = std::make_shared<Opts>();
  c->add_option("--in", o->in, "Manifest, or text file with --text")->required();
  c->add_option("--out", o->out, "Tokenizer JSON")->required();
  c->add_option("--vocab-size", ctx.ov.vocab_size, "Vocabulary size including specials (default 500)");
  c->add_option("--mode", ctx.ov.mode, "char or byte (default byte)");
  c->add_option("--split", o->split, "Manifest split to train on, or 'all'");
  c->add_flag("--text", o->text, "Input is plain text, one line per record");
  c->callback([&ctx, o] {
    const auto cfg = ctx.config();
    std::vector<std::string> corpus;
    if (o->text) {
      for (auto& l : read_lines(o->in))
        if (!l.empty()) corpus.push_back(std::move(l));
    } else {
      corpus = manifest_texts(read_manifest(o->in), o->split);
    }
    const auto model = tokenizer::train_bpe(corpus, cfg.vocab_size, cfg.tokenizer_mode);
    tokenizer::save_model(o->out, model);
    print({{"lines", corpus.size()},
           {"mode", tokenizer::to_string(model.mode())},
           {"vocab_size", model.size()},
           {"merges", model.merges().size()}});
  });
}

void add_tokenize(CLI::App& app, Context&) {
  auto* c = app.add_subcommand("tokenize", "Encode text with a trained tokenizer");
  struct Opts {
    std::string model, in, out, text;
  };
  auto o = std::make_shared<Opts>();
  c->add_option("--model", o->model, "Tokenizer JSON")->required();
  auto* in = c->add_option("--in", o->in, "Text file, one line per record");
  auto* txt = c->add_option("--text", o->text, "A single string");
  in->excludes(txt);
  c->add_option("--out", o->out, "Output JSONL (default stdout)");
  c->callback([o] {
    const auto model = tokenizer::load_model(o->model);
    std::vector<std::string> lines = o->in.empty() ? std::vector<std::string>{o->text} : read_lines(o->in);
    std::string result;
    for (const auto& l : lines) {
      if (!utf8::is_valid(l)) throw ValidationError("input is not valid UTF-8");
      const auto ids = tokenizer::encode(model, l);
      json j;
      j["text"] = l;
      j["ids"] = ids;
      json toks = json::array();
      for (auto id : ids) toks.push_back(utf8::sanitize(model.token(id)));
      j["tokens"] = std::move(toks);
      result += j.dump() + '\n';
    }
    if (o->out.empty()) {
      std::cout << result;
    } else {
      write_text_file(o->out, result);
    }
  });
}

void add_score(CLI::App& app, Context&) {
  auto* c = app.add_subcommand("score", "CER, weighted CER and exact-match accuracy over predictions JSONL");
  struct Opts {
    std::string in, out, csv;
    bool keep_zw = false, skip_empty = false;
  };
  auto o = std::make_shared<Opts>();
  c->add_option("--in", o->in, "Predictions JSONL {id, reference, hypothesis}")->required();
  c->add_option("--out", o->out, "Summary JSON");
  c->add_option("--csv", o->csv, "Per-line CSV");
  c->add_flag("--keep-zero-width", o->keep_zw, "Do not strip zero-width characters before comparing");
  c->add_flag("--skip-empty", o->skip_empty, "Skip records with an empty reference instead of failing");
  c->callback([o] {
    const auto recs = metrics::load_predictions(o->in);
    const auto s = metrics::evaluate(recs, {.strip_zero_width = !o->keep_zw},
                                     o->skip_empty ? metrics::EmptyRefPolicy::kSkip : metrics::EmptyRefPolicy::kFail);
    const auto j = pipeline::to_json(s);
    if (!o->out.empty()) write_text_file(o->out, j.dump(2) + '\n');
    if (!o->csv.empty()) write_text_file(o->csv, pipeline::eval_csv(s));
    print(j);
  });
}

struct DecodeFlags {
  std::string strategy = "greedy";
  int width = 1, k = 1, max_len = 256;
  double alpha = 0.0, tau = 1.0, p = 1.0;
  std::uint64_t seed = 42;
  std::size_t record_top = 5;
  std::string config;

  decode::DecodeConfig build() const {
    decode::DecodeConfig c{decode::parse_strategy(strategy), width, k, alpha, tau, p, max_len, seed, record_top};
    if (!config.empty()) {
      try {
        c = decode::config_from_json(nlohmann::json::parse(read_text_file(config)), c);
      } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(config + ": " + e.what());
      }
    }
    c.validate();
    return c;
  }
};

void add_decode_flags(CLI::App* c, DecodeFlags& f) {
  c->add_option("--strategy", f.strategy, "greedy, beam, contrastive, temperature, top_k, top_p");
  c->add_option("--width", f.width, "Beam width");
  c->add_option("--k", f.k, "Top-k / contrastive candidate count");
  c->add_option("--alpha", f.alpha, "Contrastive degeneration penalty");
  c->add_option("--tau", f.tau, "Sampling temperature");
  c->add_option("--p", f.p, "Nucleus mass");
  c->add_option("--max-len", f.max_len, "Maximum generated tokens");
  c->add_option("--decode-seed", f.seed, "Sampling seed");
  c->add_option("--record-top", f.record_top, "Candidates recorded per step");
  c->add_option("--decode-config", f.config, "JSON decode config (overrides flags)");
}

// Scorer sources: a Markov JSON (one scorer for every item) or a replay JSONL
// (one scorer per id), with detokenization through a tokenizer or the
// Markov vocabulary.
struct ScorerSet {
  std::optional<decode::MarkovScorer> markov;
  std::vector<std::string> ids;
  std::vector<decode::ReplayScorer> replay;
  std::optional<tokenizer::BpeModel> model;

  const decode::Scorer& at(std::size_t i) const {
    if (markov) return *markov;
    return replay.at(i);
  }
  std::size_t size() const { return markov ? 1 : replay.size(); }
  std::string detok(std::span<const decode::TokenId> t) const {
    if (model) return tokenizer::decode(*model, t);
    std::string s;
    for (auto id : t)
      if (id != markov->bos() && id != markov->eos()) s += markov->vocab().at(static_cast<std::size_t>(id));
    return s;
  }
};

ScorerSet load_scorers(const std::string& markov, const std::string& replay, const std::string& model) {
  if (markov.empty() == replay.empty()) throw ValidationError("give exactly one of --scorer or --replay");
  ScorerSet s;
  if (!model.empty()) s.model = tokenizer::load_model(model);
  if (!markov.empty()) {
    s.markov = decode::load_markov(markov);
    s.ids = {"0"};
    return s;
  }
  if (!s.model) throw ValidationError("--replay needs --model for the vocabulary and detokenization");
  auto f = decode::load_replay(replay, s.model->size());
  if (f.vocab_size > s.model->size()) throw ValidationError("replay tokens exceed the tokenizer vocabulary");
  for (auto& [id, steps] : f.items) {
    s.ids.push_back(id);
    s.replay.emplace_back(std::move(steps), s.model->size(), tokenizer::kBos, tokenizer::kEos);
  }
  return s;
}

void add_decode(CLI::App& app, Context&) {
  auto* c = app.add_subcommand("decode", "Decode with a strategy over a Markov or replay scorer");
  struct Opts {
    std::string markov, replay, model, out;
    DecodeFlags flags;
  };
  auto o = std::make_shared<Opts>();
  c->add_option("--scorer", o->markov, "Markov scorer JSON");
  c->add_option("--replay", o->replay, "Replay JSONL of recorded per-step distributions");
  c->add_option("--model", o->model, "Tokenizer JSON");
  c->add_option("--out", o->out, "Output JSONL (default stdout)");
  add_decode_flags(c, o->flags);
  c->callback([o] {
    const auto cfg = o->flags.build();
    const auto set = load_scorers(o->markov, o->replay, o->model);
    std::vector<json> rows(set.size());
    parallel_for(set.size(), [&](std::size_t i) {
      auto c2 = cfg;
      if (set.size() > 1) c2.seed = mix_seed(cfg.seed, {i});
      const auto r = decode::run(set.at(i), c2);
      json j;
      j["id"] = set.ids[i];
      j["config"] = cfg.label();
      j["text"] = set.detok(r.tokens);
      j["probability"] = decode::probability(r);
      const json detail = decode::to_json(r);
      for (const auto& [k, v] : detail.items()) j[k] = v;
      rows[i] = std::move(j);
    });
    std::string text;
    for (const auto& r : rows) text += r.dump() + '\n';
    if (o->out.empty()) {
      std::cout << text;
    } else {
      write_text_file(o->out, text);
    }
  });
}

std::map<std::string, std::string> load_references(const std::string& path) {
  std::map<std::string, std::string> refs;
  std::istringstream in(read_text_file(path));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto id = j.at("id").get<std::string>();
      refs[id] = j.contains("reference") ? j.at("reference").get<std::string>() : j.at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  return refs;
}

void add_grid(CLI::App& app, Context& ctx) {
  auto* c = app.add_subcommand("grid", "Sweep the decoding hyperparameter grid and score each configuration");
  struct Opts {
    std::string markov, replay, model, refs, grid, out;
  };
  auto o = std::make_shared<Opts>();
  c->add_option("--scorer", o->markov, "Markov scorer JSON");
  c->add_option("--replay", o->replay, "Replay JSONL");
  c->add_option("--model", o->model, "Tokenizer JSON");
  c->add_option("--refs", o->refs, "References JSONL {id, reference|text} (manifest or predictions)")->required();
  c->add_option("--grid", o->grid, "JSON array of decode configs (default: built-in 27-row grid)");
  c->add_option("--out", o->out, "Output CSV (default stdout)");
  c->callback([&ctx, o] {
    const auto cfg = ctx.config();
    auto grid = cfg.grid.empty() ? decode::default_grid() : cfg.grid;
    if (!o->grid.empty()) {
      grid.clear();
      try {
        for (const auto& e : nlohmann::json::parse(read_text_file(o->grid))) grid.push_back(decode::config_from_json(e));
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError(o->grid + ": " + e.what());
      }
    }
    const auto set = load_scorers(o->markov, o->replay, o->model);
    const auto refs = load_references(o->refs);
    std::vector<decode::GridItem> items;
    std::vector<std::size_t> scorer_index;
    if (set.markov) {
      for (const auto& [id, text] : refs) {
        items.push_back({id, text});
        scorer_index.push_back(0);
      }
    } else {
      for (std::size_t i = 0; i < set.ids.size(); ++i) {
        auto it = refs.find(set.ids[i]);
        if (it == refs.end()) throw ValidationError("no reference for replay id '" + set.ids[i] + "'");
        items.push_back({set.ids[i], it->second});
        scorer_index.push_back(i);
      }
    }
    const auto rows = decode::run_grid(
        items, [&](std::size_t i) -> const decode::Scorer& { return set.at(scorer_index[i]); },
        [&](std::span<const decode::TokenId> t) { return set.detok(t); }, grid);
    const auto csv = decode::grid_csv(rows);
    if (o->out.empty()) {
      std::cout << csv;
    } else {
      write_text_file(o->out, csv);
    }
  });
}

void add_analyze(CLI::App& app, Context& ctx) {
  auto* c = app.add_subcommand("analyze", "Confusion, error-share, CER distribution and uncertainty reports");
  struct Opts {
    std::string in, out_dir, model;
  };
  auto o = std::make_shared<Opts>();
  c->add_option("--in", o->in, "Predictions JSONL; records with a 'decode' field enable the uncertainty scan")
      ->required();
  c->add_option("--out-dir", o->out_dir, "Report directory")->required();
  c->add_option("--model", o->model, "Tokenizer JSON used to tokenize references for the uncertainty scan");
  c->add_option("--threshold", ctx.ov.threshold, "Relative-probability flag threshold (default 0.034)");
  c->callback([&ctx, o] {
    const auto cfg = ctx.config();
    const std::string raw = read_text_file(o->in);
    std::istringstream in(raw);
    const auto recs = metrics::parse_predictions(in);
    const auto s = metrics::evaluate(recs, {}, metrics::EmptyRefPolicy::kSkip);

    std::vector<analysis::LinePrediction> preds;
    if (!o->model.empty()) {
      const auto model = tokenizer::load_model(o->model);
      std::istringstream again(raw);
      std::string line;
      while (std::getline(again, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto j = nlohmann::json::parse(line);
        if (!j.contains("decode")) continue;
        analysis::LinePrediction p;
        p.id = j.value("id", std::string{});
        p.reference = tokenizer::encode(model, j.at("reference").get<std::string>());
        p.eos = tokenizer::kEos;
        try {
          for (const auto& st : j.at("decode").at("steps")) {
            decode::StepRecord r;
            r.chosen = st.at("chosen").get<decode::TokenId>();
            r.chosen_prob = st.at("prob").get<double>();
            for (const auto& t : st.at("top")) r.top.emplace_back(t.at(0).get<decode::TokenId>(), t.at(1).get<double>());
            p.steps.push_back(std::move(r));
          }
        } catch (const nlohmann::json::exception& e) {
          throw ValidationError("bad decode record for '" + p.id + "': " + e.what());
        }
        preds.push_back(std::move(p));
      }
    }
    json j;
    j["lines"] = s.lines.size();
    if (preds.empty()) {
      pipeline::write_analysis(o->out_dir, s, nullptr, nullptr);
    } else {
      const auto unc = analysis::uncertainty_scan(preds, cfg.threshold);
      const auto grid = analysis::ratio_grid(unc.records);
      analysis::SweepResult sweep;
      if (!grid.empty()) sweep = analysis::threshold_sweep(unc.records, grid);
      pipeline::write_analysis(o->out_dir, s, &unc, grid.empty() ? nullptr : &sweep);
      j["detection"] = analysis::to_json(unc.score);
      j["recoverable"] = unc.recoverable;
    }
    j["weighted_cer"] = metrics::to_double(s.weighted_cer);
    print(j);
  });
}

void add_binarize(CLI::App& app, Context&) {
  auto* c = app.add_subcommand("binarize", "Otsu (or fixed-threshold) binarization of an image");
  struct Opts {
    std::string in, out;
    std::optional<int> threshold;
  };
  auto o = std::make_shared<Opts>();
  c->add_option("--in", o->in, "Input PNG/JPEG")->required();
  c->add_option("--out", o->out, "Output image")->required();
  c->add_option("--threshold", o->threshold, "Fixed threshold 0..255 (default: Otsu)")->check(CLI::Range(0, 255));
  c->callback([o] {
    const auto img = imaging::load_image(o->in);
    const auto otsu = imaging::otsu_threshold(img);
    const int t = o->threshold.value_or(otsu.threshold);
    imaging::save_image(o->out, imaging::binarize(img, t));
    print({{"threshold", t}, {"otsu", otsu.threshold}, {"degenerate", otsu.degenerate}});
  });
}

void add_stage_report(CLI::App& app, Context&) {
  auto* c = app.add_subcommand("stage-report", "Line counts per training stage and split");
  auto in = std::make_shared<std::vector<std::string>>();
  auto out = std::make_shared<std::string>();
  c->add_option("--in", *in, "Manifests")->required();
  c->add_option("--out", *out, "Output CSV (default stdout)");
  c->callback([in, out] {
    std::vector<Manifest> ms;
    for (const auto& p : *in) ms.push_back(read_manifest(p));
    const auto csv = pipeline::stage_csv(pipeline::stage_report(ms));
    if (out->empty()) {
      std::cout << csv;
    } else {
      write_text_file(*out, csv);
    }
  });
}

void add_audit(CLI::App& app, Context&) {
  auto* c = app.add_subcommand("audit", "Check that augmented variants share their original's split");
  auto in = std::make_shared<std::string>();
  c->add_option("--in", *in, "Manifest")->required();
  c->callback([in] {
    const auto r = pipeline::audit(read_manifest(*in));
    print(pipeline::to_json(r));
    if (!r.ok()) throw ValidationError("split leakage: " + std::to_string(r.issues.size()) + " issue(s)");
  });
}

void add_run(CLI::App& app, Context& ctx) {
  auto* c = app.add_subcommand("run", "End-to-end run: synth, normalize, split, augment, tokenizer, replay decode, score, analyze");
  struct Opts {
    std::string out_dir, corpus;
    std::optional<std::size_t> lines;
    bool grid = false;
  };
  auto o = std::make_shared<Opts>();
  c->add_option("--out-dir", o->out_dir, "Output directory")->required();
  c->add_option("--seed", ctx.ov.seed, "Run seed (default 42)");
  c->add_option("--ratios", ctx.ov.ratios, "train eval test ratios")->expected(3);
  c->add_option("--rules", ctx.ov.rules, "Rule file");
  c->add_option("--multiplicity,-k", ctx.ov.multiplicity, "Augmentation multiplicity (default 8)");
  c->add_option("--vocab-size", ctx.ov.vocab_size, "Tokenizer vocabulary (default 500)");
  c->add_option("--mode", ctx.ov.mode, "Tokenizer mode (default byte)");
  c->add_option("--threshold", ctx.ov.threshold, "Uncertainty threshold (default 0.034)");
  c->add_option("--lines", o->lines, "Synthetic corpus size (default 200)");
  c->add_option("--corpus", o->corpus, "Text corpus file instead of random lines");
  c->add_flag("--grid", o->grid, "Also sweep the default decoding grid");
  c->callback([&ctx, o] {
    auto cfg = ctx.config();
    if (o->lines) cfg.corpus_lines = *o->lines;
    if (!o->corpus.empty()) cfg.corpus = o->corpus;
    if (o->grid && cfg.grid.empty()) cfg.grid = decode::default_grid();
    cfg.validate();
    const auto s = pipeline::run_pipeline(cfg, o->out_dir);
    json j;
    j["lines"] = s.lines;
    j["split"] = {{"train", s.split_sizes[0]}, {"eval", s.split_sizes[1]}, {"test", s.split_sizes[2]}};
    j["augmented_train"] = s.augmented_train;
    j["vocab_size"] = s.vocab_size;
    j["scores"] = pipeline::to_json(s.eval);
    j["detection"] = analysis::to_json(s.uncertainty.score);
    j["audit_ok"] = s.audit.ok();
    print(j);
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"htrkit: data engineering and evaluation for handwritten text recognition"};
  app.require_subcommand(1);
  Context ctx;
  app.add_option("--config", ctx.config_path, "JSON run config; command flags override it");
  add_normalize(app, ctx);
  add_split(app, ctx);
  add_synth(app, ctx);
  add_augment(app, ctx);
  add_train_tokenizer(app, ctx);
  add_tokenize(app, ctx);
  add_score(app, ctx);
  add_decode(app, ctx);
  add_grid(app, ctx);
  add_analyze(app, ctx);
  add_binarize(app, ctx);
  add_stage_report(app, ctx);
  add_audit(app, ctx);
  add_run(app, ctx);
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
