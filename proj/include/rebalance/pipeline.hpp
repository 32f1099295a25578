#pragma once

// Declarative run configuration and the end-to-end experiment it drives.
// Every stage takes a seed derived from the global seed and the stage name,
// and every artifact is written without timestamps so reruns are
// byte-identical.

#include <filesystem>
#include <initializer_list>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rebalance/augment.hpp"
#include "rebalance/balance.hpp"
#include "rebalance/classifier.hpp"
#include "rebalance/corpus.hpp"
#include "rebalance/crossval.hpp"
#include "rebalance/error.hpp"
#include "rebalance/eval.hpp"
#include "rebalance/fixtures.hpp"
#include "rebalance/io.hpp"
#include "rebalance/llm.hpp"
#include "rebalance/llm_http.hpp"
#include "rebalance/random.hpp"
#include "rebalance/rules.hpp"
#include "rebalance/svg.hpp"
#include "rebalance/text.hpp"

namespace rebalance {

enum class LlmMode { Off, Replay, Live, Synthetic };

inline constexpr std::string_view kSyntheticStamp = "1970-01-01T00:00:00Z";

inline LlmMode parse_llm_mode(std::string_view s) {
  if (s == "off") return LlmMode::Off;
  if (s == "replay") return LlmMode::Replay;
  if (s == "live") return LlmMode::Live;
  if (s == "synthetic") return LlmMode::Synthetic;
  throw ConfigError("unknown llm mode: " + std::string(s));
}

struct RunConfig {
  nlohmann::json source;  // the parsed file, with overrides applied
  std::filesystem::path base_dir;

  std::uint64_t seed = 42;
  std::filesystem::path output_dir = "out";
  std::filesystem::path corpus_path;
  std::optional<Format> corpus_format;
  NormalizeOptions norm;
  std::size_t min_df = 1;
  double train_fraction = 0.8;
  bool stratified_split = true;

  struct Augment {
    std::vector<Method> methods;
    std::map<Method, double> edit_fraction;
    std::size_t top_k_neighbors = 5;
    std::map<std::string, std::string> reserved_map;
    std::optional<std::filesystem::path> embeddings;
    std::optional<std::filesystem::path> lexicon;
  } augment;

  struct Llm {
    LlmMode mode = LlmMode::Off;
    std::optional<std::filesystem::path> transcript;
    std::optional<std::filesystem::path> prompts;
    std::vector<PatternId> patterns;
    LlmSettings settings;
  } llm;

  struct Balance {
    std::size_t target = 0;  // 0: the training split's majority count
    Schedule schedule = Schedule::DoubleEachRound;
    double dedup_threshold = 0.95;
    std::size_t max_rounds = 10;
    std::vector<std::string> source_methods;
    bool both_classes = false;
  } balance;

  TrainConfig train;
  std::optional<std::filesystem::path> rules;

  std::size_t k = 5;
  bool stratified_folds = true;
  bool cv_balance = false;

  std::uint64_t stage_seed(std::string_view stage) const { return derive_seed(seed, stage); }

  std::map<std::string, std::uint64_t> seeds() const {
    std::map<std::string, std::uint64_t> out{{"global", seed}};
    for (const char* s : {"split", "augment", "llm", "balance", "train", "folds"}) out[s] = stage_seed(s);
    return out;
  }

  ModelSpec model_spec() const {
    ModelSpec spec;
    spec.train = train;
    spec.train.seed = stage_seed("train");
    spec.min_df = min_df;
    spec.norm = norm;
    return spec;
  }

  AugmenterConfig augmenter(Method m) const {
    auto cfg = AugmenterConfig::defaults(m, stage_seed("augment"));
    if (const auto it = augment.edit_fraction.find(m); it != augment.edit_fraction.end()) {
      cfg.edit_fraction = it->second;
    }
    cfg.top_k_neighbors = augment.top_k_neighbors;
    cfg.reserved_map = augment.reserved_map;
    return cfg;
  }

  // Where the outputs go does not change what they contain.
  std::string hash() const {
    auto j = source;
    j.erase("output_dir");
    return to_hex(fnv1a64(j.dump()));
  }
};

namespace detail {

inline void allow_keys(const nlohmann::json& j, const std::string& section,
                       std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) throw ConfigError("section " + section + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto k : keys) known = known || k == key;
    if (!known) throw ConfigError("unknown key '" + key + "' in " + section);
  }
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

inline std::filesystem::path existing(const std::filesystem::path& base, const std::string& p,
                                      const std::string& what) {
  auto path = resolve(base, p);
  if (!std::filesystem::exists(path)) throw FileNotFound(path.string() + " (" + what + ")");
  return path;
}

inline bool needs_embeddings(Method m) { return m == Method::InsertEmbedding || m == Method::SubstituteEmbedding; }
inline bool needs_lexicon(Method m) { return m == Method::SubstituteSynonym || m == Method::SubstituteAntonym; }

}  // namespace detail

// Paths in the config resolve against base_dir. Throws ConfigError on unknown
// keys or bad values and FileNotFound on missing inputs.
inline RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  using detail::allow_keys;
  RunConfig c;
  c.source = j;
  c.base_dir = base_dir;
  try {
    allow_keys(j, "config", {"seed", "output_dir", "corpus", "normalize", "vocabulary", "split", "augment", "llm",
                             "balance", "train", "rules", "eval"});
    c.seed = j.value("seed", c.seed);
    c.output_dir = detail::resolve(base_dir, j.value("output_dir", std::string("out")));

    if (!j.contains("corpus")) throw ConfigError("missing corpus section");
    const auto& corpus = j.at("corpus");
    allow_keys(corpus, "corpus", {"path", "format"});
    c.corpus_path = detail::existing(base_dir, corpus.at("path").get<std::string>(), "corpus");
    if (corpus.contains("format")) c.corpus_format = parse_format(corpus.at("format").get<std::string>());

    if (j.contains("normalize")) {
      const auto& n = j.at("normalize");
      allow_keys(n, "normalize", {"lowercase", "urls", "mentions", "hashtags"});
      c.norm.lowercase = n.value("lowercase", c.norm.lowercase);
      c.norm.urls = n.value("urls", c.norm.urls);
      c.norm.mentions = n.value("mentions", c.norm.mentions);
      c.norm.hashtags = n.value("hashtags", c.norm.hashtags);
    }
    if (j.contains("vocabulary")) {
      allow_keys(j.at("vocabulary"), "vocabulary", {"min_df"});
      c.min_df = j.at("vocabulary").value("min_df", c.min_df);
      if (c.min_df < 1) throw ConfigError("vocabulary.min_df must be >= 1");
    }
    if (j.contains("split")) {
      const auto& s = j.at("split");
      allow_keys(s, "split", {"train_fraction", "stratified"});
      c.train_fraction = s.value("train_fraction", c.train_fraction);
      c.stratified_split = s.value("stratified", c.stratified_split);
      if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) {
        throw ConfigError("split.train_fraction must lie in (0, 1)");
      }
    }

    if (j.contains("augment")) {
      const auto& a = j.at("augment");
      allow_keys(a, "augment",
                 {"methods", "edit_fraction", "top_k_neighbors", "reserved_map", "embeddings", "lexicon"});
      for (const auto& m : a.value("methods", std::vector<std::string>{})) {
        const auto method = parse_method(m);
        if (!method) throw ConfigError("unknown augmentation method: " + m);
        c.augment.methods.push_back(*method);
      }
      if (a.contains("edit_fraction")) {
        for (const auto& [name, value] : a.at("edit_fraction").items()) {
          const auto method = parse_method(name);
          if (!method) throw ConfigError("unknown augmentation method in edit_fraction: " + name);
          c.augment.edit_fraction[*method] = value.get<double>();
        }
      }
      c.augment.top_k_neighbors = a.value("top_k_neighbors", c.augment.top_k_neighbors);
      c.augment.reserved_map = a.value("reserved_map", c.augment.reserved_map);
      if (a.contains("embeddings")) {
        c.augment.embeddings = detail::existing(base_dir, a.at("embeddings").get<std::string>(), "embeddings");
      }
      if (a.contains("lexicon")) {
        c.augment.lexicon = detail::existing(base_dir, a.at("lexicon").get<std::string>(), "lexicon");
      }
    }

    if (j.contains("llm")) {
      const auto& l = j.at("llm");
      allow_keys(l, "llm",
                 {"mode", "transcript", "prompts", "patterns", "endpoint_url", "model_name", "temperature",
                  "n_variants", "max_concurrency", "infinite_generation_cap"});
      c.llm.mode = parse_llm_mode(l.value("mode", std::string("off")));
      for (const auto& p : l.value("patterns", std::vector<std::string>{})) {
        const auto id = parse_pattern(p);
        if (!id) throw ConfigError("unknown prompt pattern: " + p);
        c.llm.patterns.push_back(*id);
      }
      if (l.contains("transcript")) {
        const auto t = l.at("transcript").get<std::string>();
        c.llm.transcript = c.llm.mode == LlmMode::Replay ? detail::existing(base_dir, t, "transcript")
                                                         : detail::resolve(base_dir, t);
      }
      if (l.contains("prompts")) c.llm.prompts = detail::existing(base_dir, l.at("prompts").get<std::string>(), "prompts");
      auto& s = c.llm.settings;
      s.endpoint_url = l.value("endpoint_url", s.endpoint_url);
      s.model_name = l.value("model_name", s.model_name);
      s.temperature = l.value("temperature", s.temperature);
      s.n_variants = l.value("n_variants", s.n_variants);
      s.max_concurrency = l.value("max_concurrency", s.max_concurrency);
      s.infinite_generation_cap = l.value("infinite_generation_cap", s.infinite_generation_cap);
      if (s.n_variants < 1 || s.n_variants > kMaxVariantsPerRequest) {
        throw ConfigError("llm.n_variants must lie in [1, 20]");
      }
      if (c.llm.mode == LlmMode::Replay && !c.llm.transcript) throw ConfigError("replay mode needs llm.transcript");
    }

    if (j.contains("balance")) {
      const auto& b = j.at("balance");
      allow_keys(b, "balance",
                 {"target", "schedule", "dedup_threshold", "max_rounds", "source_methods", "both_classes"});
      c.balance.target = b.value("target", c.balance.target);
      c.balance.schedule = parse_schedule(b.value("schedule", std::string("double")));
      c.balance.dedup_threshold = b.value("dedup_threshold", c.balance.dedup_threshold);
      c.balance.max_rounds = b.value("max_rounds", c.balance.max_rounds);
      c.balance.source_methods = b.value("source_methods", c.balance.source_methods);
      c.balance.both_classes = b.value("both_classes", c.balance.both_classes);
      if (!(c.balance.dedup_threshold > 0.0 && c.balance.dedup_threshold <= 1.0)) {
        throw ConfigError("balance.dedup_threshold must lie in (0, 1]");
      }
    }

    if (j.contains("train")) {
      const auto& t = j.at("train");
      allow_keys(t, "train", {"loss", "l2_lambda", "learning_rate", "epochs", "decision_threshold"});
      c.train.loss = parse_loss(t.value("loss", std::string(loss_name(c.train.loss))));
      c.train.l2_lambda = t.value("l2_lambda", c.train.l2_lambda);
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.decision_threshold = t.value("decision_threshold", c.train.decision_threshold);
      try {
        c.train.validate();
      } catch (const PreconditionError& e) {
        throw ConfigError(std::string("train: ") + e.what());
      }
    }

    if (j.contains("rules")) {
      allow_keys(j.at("rules"), "rules", {"path"});
      c.rules = detail::existing(base_dir, j.at("rules").at("path").get<std::string>(), "rules");
    }
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      allow_keys(e, "eval", {"k", "stratified", "balance"});
      c.k = e.value("k", c.k);
      c.stratified_folds = e.value("stratified", c.stratified_folds);
      c.cv_balance = e.value("balance", c.cv_balance);
      if (c.k < 2) throw ConfigError("eval.k must be >= 2");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }

  // Cross-field checks.
  for (Method m : c.augment.methods) {
    if (detail::needs_embeddings(m) && !c.augment.embeddings) {
      throw ConfigError(std::string(method_id(m)) + " needs augment.embeddings");
    }
    if (detail::needs_lexicon(m) && !c.augment.lexicon) {
      throw ConfigError(std::string(method_id(m)) + " needs augment.lexicon");
    }
    if (m == Method::ReservedWord && c.augment.reserved_map.empty()) {
      throw ConfigError("reserved_word needs augment.reserved_map");
    }
  }
  for (const auto& id : c.balance.source_methods) {
    const auto method = parse_method(id);
    const auto pattern = parse_pattern(id);
    if (method) {
      if (std::find(c.augment.methods.begin(), c.augment.methods.end(), *method) == c.augment.methods.end()) {
        throw ConfigError("balance source " + id + " is not listed in augment.methods");
      }
    } else if (pattern) {
      if (c.llm.mode == LlmMode::Off) throw ConfigError("balance source " + id + " needs an llm mode");
    } else {
      throw ConfigError("unknown balance source method: " + id);
    }
  }
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  const auto data = io::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(data);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
  return parse_run_config(j, std::filesystem::absolute(path).parent_path());
}

// Reparses with a new global seed so the config hash reflects the override.
inline RunConfig with_seed(const RunConfig& c, std::uint64_t seed) {
  auto j = c.source;
  j["seed"] = seed;
  auto out = parse_run_config(j, c.base_dir);
  out.output_dir = c.output_dir;
  return out;
}

// ---------------------------------------------------------------------------
// Resources

struct Resources {
  std::optional<EmbeddingTable> embeddings;
  std::optional<Lexicon> lexicon;
  PromptLibrary prompts;
  Transcript transcript;
  std::unique_ptr<Transport> transport;
  GenerateOptions generate_options;

  AugmentResources augment() const {
    return {embeddings ? &*embeddings : nullptr, lexicon ? &*lexicon : nullptr};
  }
};

// Resources live behind a unique_ptr because the transports and generator
// options hold references into them.
inline std::unique_ptr<Resources> load_resources(const RunConfig& c) {
  auto r = std::make_unique<Resources>();
  if (c.augment.embeddings) r->embeddings = load_embeddings(*c.augment.embeddings);
  if (c.augment.lexicon) r->lexicon = load_lexicon(*c.augment.lexicon);
  if (c.llm.prompts) r->prompts = PromptLibrary::load(*c.llm.prompts);
  r->generate_options.max_concurrency = c.llm.settings.max_concurrency;
  r->generate_options.infinite_generation_cap = c.llm.settings.infinite_generation_cap;
  switch (c.llm.mode) {
    case LlmMode::Off:
      break;
    case LlmMode::Replay:
      r->transcript = Transcript::load(*c.llm.transcript);
      r->transport = std::make_unique<ReplayTransport>(r->transcript);
      break;
    case LlmMode::Live:
    case LlmMode::Synthetic:
      if (c.llm.mode == LlmMode::Live) {
        r->transport = std::make_unique<HttpTransport>(c.llm.settings.endpoint_url, api_key_from_env());
      } else {
        r->transport = std::make_unique<SyntheticTransport>();
      }
      if (c.llm.transcript) {
        if (std::filesystem::exists(*c.llm.transcript)) r->transcript = Transcript::load(*c.llm.transcript);
        r->generate_options.record_to = &r->transcript;
        r->generate_options.record_path = *c.llm.transcript;
      }
      // Synthetic replies are not observations, so they carry a fixed stamp.
      if (c.llm.mode == LlmMode::Synthetic) r->generate_options.clock = [] { return std::string(kSyntheticStamp); };
      break;
  }
  return r;
}

inline Generator make_generator(const RunConfig& c, Resources& r, const std::string& id) {
  if (const auto m = parse_method(id)) return augmenter_generator(c.augmenter(*m), r.augment(), c.norm);
  const auto p = parse_pattern(id);
  if (!p) throw ConfigError("unknown generator: " + id);
  if (!r.transport) throw ConfigError(id + " needs an llm mode other than off");
  return llm_generator(r.prompts.get(*p), *r.transport, c.llm.settings, r.generate_options);
}

inline std::vector<Generator> make_generators(const RunConfig& c, Resources& r,
                                              const std::vector<std::string>& ids) {
  std::vector<Generator> out;
  for (const auto& id : ids) out.push_back(make_generator(c, r, id));
  return out;
}

inline BalancePlan balance_plan(const RunConfig& c, const Corpus& train) {
  BalancePlan p;
  p.target_count = c.balance.target ? c.balance.target : train.count(other(train.minority_label()));
  p.schedule = c.balance.schedule;
  p.dedup_threshold = c.balance.dedup_threshold;
  p.max_rounds = c.balance.max_rounds;
  p.source_methods = c.balance.source_methods;
  p.seed = c.stage_seed("balance");
  return p;
}

inline Corpus load_config_corpus(const RunConfig& c) {
  return c.corpus_format ? load_corpus(c.corpus_path, *c.corpus_format) : load_corpus(c.corpus_path);
}

// ---------------------------------------------------------------------------
// Artifact helpers shared with the command-line tool

inline nlohmann::json class_counts(const Corpus& corpus) {
  return {{"positive", corpus.count(Label::Positive)},
          {"negative", corpus.count(Label::Negative)},
          {"total", corpus.size()}};
}

inline Corpus normalized_corpus(const Corpus& corpus, const NormalizeOptions& norm) {
  std::vector<LabeledExample> out = corpus.examples();
  for (auto& ex : out) ex.text = normalize(ex.text, norm);
  return Corpus(std::move(out));
}

inline std::string similarity_csv(const std::map<std::string, SimilarityStats>& report) {
  std::ostringstream out;
  csv::write_row(out, {"method", "mean", "stddev", "count"});
  for (const auto& [method, s] : report) {
    csv::write_row(out, {method, format_metric(s.mean), format_metric(s.stddev), std::to_string(s.count)});
  }
  return out.str();
}

inline nlohmann::json model_bundle(const FittedModel& fm, const NormalizeOptions& norm) {
  return {{"vocabulary", fm.vocab.to_json()},
          {"model", fm.model.to_json()},
          {"normalize",
           {{"lowercase", norm.lowercase}, {"urls", norm.urls}, {"mentions", norm.mentions}, {"hashtags", norm.hashtags}}}};
}

inline std::pair<FittedModel, NormalizeOptions> load_model_bundle(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
    NormalizeOptions norm;
    const auto& n = j.at("normalize");
    norm.lowercase = n.at("lowercase").get<bool>();
    norm.urls = n.at("urls").get<bool>();
    norm.mentions = n.at("mentions").get<bool>();
    norm.hashtags = n.at("hashtags").get<bool>();
    return {FittedModel{Vocabulary::from_json(j.at("vocabulary")), LinearModel::from_json(j.at("model"))}, norm};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid model bundle " + path.string() + ": " + e.what());
  }
}

inline nlohmann::json to_json(const RuleComparison& r) {
  nlohmann::json per_rule = nlohmann::json::array();
  for (const auto& s : r.per_rule) {
    per_rule.push_back({{"rule_id", s.rule_id},
                        {"fires", s.fires},
                        {"flips", s.flips},
                        {"flips_correct", s.flips_correct},
                        {"flips_incorrect", s.flips_incorrect}});
  }
  nlohmann::json conflicts = nlohmann::json::array();
  for (const auto& c : r.conflicts) conflicts.push_back({{"id", c.id}, {"rule_ids", c.rule_ids}});
  return {{"without_rules", to_json(r.without_rules)},
          {"with_rules", to_json(r.with_rules)},
          {"per_rule", per_rule},
          {"conflicts", conflicts}};
}

inline std::string conflicts_csv(const std::vector<RuleConflict>& conflicts) {
  std::ostringstream out;
  csv::write_row(out, {"id", "rule_ids"});
  for (const auto& c : conflicts) {
    std::string ids;
    for (const auto& r : c.rule_ids) ids += (ids.empty() ? "" : ";") + r;
    csv::write_row(out, {c.id, ids});
  }
  return out.str();
}

// One record per minority example and configured word-level method.
inline std::vector<AugmentationRecord> traditional_records(const RunConfig& c, const Resources& r,
                                                           const Corpus& corpus) {
  std::vector<AugmentationRecord> out;
  for (Method m : c.augment.methods) {
    auto batch = augment_corpus(corpus, c.augmenter(m), corpus.minority_label(), r.augment(), c.norm);
    out.insert(out.end(), batch.records.begin(), batch.records.end());
  }
  return out;
}

// Prompted paraphrases of every minority example under each configured pattern.
inline std::vector<AugmentationRecord> llm_records(const RunConfig& c, Resources& r, const Corpus& corpus) {
  std::vector<AugmentationRecord> out;
  if (!r.transport || c.llm.patterns.empty()) return out;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].label == corpus.minority_label()) idx.push_back(i);
  }
  const auto requests = plan_requests(corpus.subset(idx), c.llm.patterns, r.prompts, c.llm.settings,
                                      c.stage_seed("llm"));
  for (auto& batch : generate_batch(requests, *r.transport, r.generate_options)) {
    out.insert(out.end(), batch.begin(), batch.end());
  }
  return out;
}

struct MethodPoint {
  std::string method;  // "none" for the unaugmented baseline
  std::size_t class_count = 0;
  bool reached_target = true;
  EvalReport report;
};

// Balances with each source method on its own. A method whose candidates
// stop passing the duplicate filter is evaluated on what it reached.
inline std::vector<MethodPoint> method_trend(const Corpus& train, const Corpus& test, const BalancePlan& plan,
                                             const std::vector<Generator>& generators, const ModelSpec& spec) {
  std::vector<MethodPoint> out;
  const Label label = plan.label.value_or(train.minority_label());
  out.push_back({"none", train.count(label), false, evaluate_model(fit_model(train, spec), test, spec.norm)});
  for (const auto& g : generators) {
    BalancePlan single = plan;
    single.source_methods = {g.method_id};
    Balancer b(train, single, {g}, spec.norm);
    bool reached = true;
    try {
      while (!b.done()) b.step();
    } catch (const GeneratorExhausted&) {
      reached = false;
    }
    reached = reached && b.count() >= plan.target_count;
    out.push_back({g.method_id, b.count(), reached, evaluate_model(fit_model(b.corpus(), spec), test, spec.norm)});
  }
  return out;
}

inline std::string method_trend_csv(std::span<const MethodPoint> points, Label focus) {
  std::ostringstream out;
  csv::write_row(out, {"x", "class_count", "reached_target", "class", "precision", "recall", "f1", "macro_f1",
                       "accuracy"});
  for (const auto& p : points) {
    const auto& m = p.report.of(focus);
    csv::write_row(out, {p.method, std::to_string(p.class_count), p.reached_target ? "true" : "false",
                         label_name(focus), format_metric(m.precision), format_metric(m.recall),
                         format_metric(m.f1), format_metric(p.report.macro.f1), format_metric(p.report.accuracy)});
  }
  return out.str();
}

inline std::string trend_svg(const std::string& title, const std::string& x_title,
                             std::vector<std::string> x_labels, const std::vector<const EvalReport*>& reports,
                             Label focus) {
  svg::Chart chart{title, x_title, std::move(x_labels), {}};
  svg::Series p{"precision", {}}, r{"recall", {}}, f{"f1", {}};
  for (const auto* rep : reports) {
    const auto& m = rep->of(focus);
    p.y.push_back(m.precision);
    r.y.push_back(m.recall);
    f.y.push_back(m.f1);
  }
  chart.series = {p, r, f};
  return svg::render(chart);
}

// ---------------------------------------------------------------------------
// Full run

struct Artifact {
  std::string path;    // relative to the output directory
  std::string schema;  // json, jsonl, csv, tsv or svg
};

struct RunResult {
  std::vector<Artifact> artifacts;
  Corpus train;
  Corpus test;
  std::optional<Corpus> balanced;
  EvalReport baseline;
  std::optional<EvalReport> balanced_report;
  std::optional<RuleComparison> rules;
  CrossValResult cv;
  std::vector<TrendPoint> trend;
  std::vector<MethodPoint> methods;
  std::vector<AugmentationRecord> augment_records;
  std::vector<AugmentationRecord> llm_records;
};

class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  void write(const std::string& name, const std::string& schema, std::string_view content) {
    io::write_file(dir_ / name, content);
    artifacts_.push_back({name, schema});
  }

  void json(const std::string& name, const nlohmann::json& j) { write(name, "json", j.dump(2) + "\n"); }

  const std::vector<Artifact>& artifacts() const { return artifacts_; }

 private:
  std::filesystem::path dir_;
  std::vector<Artifact> artifacts_;
};

inline RunResult run_pipeline(const RunConfig& c) {
  ArtifactWriter out(c.output_dir);
  auto res = load_resources(c);
  const auto spec = c.model_spec();
  RunResult result;

  // Ingest.
  const Corpus corpus = load_config_corpus(c);
  out.json("summary.json", class_counts(corpus));
  out.write("clean_corpus.tsv", "tsv", format_corpus(normalized_corpus(corpus, c.norm), Format::Tsv));

  // Split.
  auto tt = split(corpus, {c.train_fraction, c.stratified_split, c.stage_seed("split")});
  result.train = tt.train;
  result.test = tt.test;
  const Label minority = tt.train.minority_label();
  out.json("split.json", {{"train", class_counts(tt.train)}, {"test", class_counts(tt.test)}});

  // Augmentation of the training minority.
  result.augment_records = traditional_records(c, *res, tt.train);
  if (!result.augment_records.empty()) {
    out.write("augment_records.jsonl", "jsonl", records_to_jsonl(result.augment_records));
    out.write("augment_similarity.csv", "csv", similarity_csv(method_similarity_report(result.augment_records)));
  }
  result.llm_records = llm_records(c, *res, tt.train);
  if (!result.llm_records.empty()) {
    out.write("llm_records.jsonl", "jsonl", records_to_jsonl(result.llm_records));
    out.write("llm_similarity.csv", "csv", similarity_csv(pattern_similarity_report(result.llm_records)));
  }

  // Baseline model.
  const auto baseline = fit_model(tt.train, spec);
  out.json("model_baseline.json", model_bundle(baseline, c.norm));
  result.baseline = evaluate_model(baseline, tt.test, c.norm);
  out.json("eval_baseline.json", to_json(result.baseline));
  out.write("errors_baseline.csv", "csv", errors_csv(result.baseline));
  std::vector<std::pair<std::string, EvalReport>> reports{{"baseline", result.baseline}};
  const FittedModel* final_model = &baseline;

  // Balancing, the balanced model and the trend reports.
  std::optional<FittedModel> balanced;
  if (!c.balance.source_methods.empty()) {
    const auto plan = balance_plan(c, tt.train);
    const auto generators = make_generators(c, *res, c.balance.source_methods);
    auto grown = c.balance.both_classes ? balance_both(tt.train, plan, generators, std::nullopt, c.norm)
                                        : balance(tt.train, plan, generators, c.norm);
    out.write("balanced_corpus.tsv", "tsv", format_corpus(grown.corpus, Format::Tsv));
    out.write("balance_trace.csv", "csv", grown.trace.to_csv());
    balanced = fit_model(grown.corpus, spec);
    result.balanced = std::move(grown.corpus);
    out.json("model_balanced.json", model_bundle(*balanced, c.norm));
    result.balanced_report = evaluate_model(*balanced, tt.test, c.norm);
    out.json("eval_balanced.json", to_json(*result.balanced_report));
    out.write("errors_balanced.csv", "csv", errors_csv(*result.balanced_report));
    reports.emplace_back("balanced", *result.balanced_report);
    final_model = &*balanced;

    result.trend = trend_experiment(tt.train, tt.test, plan, generators, spec);
    out.write("trend_rounds.csv", "csv", trend_csv(result.trend, minority));
    std::vector<std::string> xs;
    std::vector<const EvalReport*> rs;
    for (const auto& p : result.trend) {
      xs.push_back(std::to_string(p.class_count));
      rs.push_back(&p.report);
    }
    out.write("trend_rounds.svg", "svg",
              trend_svg("Minority class metrics by balancing round", "minority examples in training", xs, rs,
                        minority));

    result.methods = method_trend(tt.train, tt.test, plan, generators, spec);
    out.write("trend_methods.csv", "csv", method_trend_csv(result.methods, minority));
    xs.clear();
    rs.clear();
    for (const auto& p : result.methods) {
      xs.push_back(p.method);
      rs.push_back(&p.report);
    }
    out.write("trend_methods.svg", "svg",
              trend_svg("Minority class metrics by augmentation method", "method", xs, rs, minority));
  }

  // Rule overrides on top of the final model.
  std::optional<RuleSet> rules;
  if (c.rules) {
    rules = load_rules(*c.rules);
    result.rules = compare_with_without(*rules, final_model->model, final_model->vocab, tt.test, c.norm);
    out.json("rules_comparison.json", to_json(*result.rules));
    out.write("rules_fired.csv", "csv", rule_report_csv(result.rules->per_rule));
    out.write("rules_conflicts.csv", "csv", conflicts_csv(result.rules->conflicts));
    out.write("errors_rules.csv", "csv", errors_csv(result.rules->with_rules));
    reports.emplace_back(balanced ? "balanced+rules" : "baseline+rules", result.rules->with_rules);
  }
  out.write("eval_report.csv", "csv", report_csv(reports));

  // Cross-validation over the whole corpus.
  CrossValOptions cv;
  cv.spec = spec;
  cv.rules = rules ? &*rules : nullptr;
  if (c.cv_balance && !c.balance.source_methods.empty()) {
    auto plan = balance_plan(c, tt.train);
    plan.target_count = c.balance.target;
    cv.balance = plan;
    cv.generators = make_generators(c, *res, c.balance.source_methods);
  }
  result.cv = cross_validate(corpus, make_folds(corpus, c.k, c.stratified_folds, c.stage_seed("folds")), cv);
  out.json("cv_summary.json", to_json(result.cv));

  nlohmann::json artifacts = nlohmann::json::array();
  for (const auto& a : out.artifacts()) artifacts.push_back({{"path", a.path}, {"schema", a.schema}});
  nlohmann::json seeds = nlohmann::json::object();
  for (const auto& [name, s] : c.seeds()) seeds[name] = s;
  out.json("manifest.json", {{"config_hash", c.hash()}, {"seeds", seeds}, {"artifacts", artifacts}});
  result.artifacts = out.artifacts();
  result.artifacts.push_back({"manifest.json", "json"});
  return result;
}

// ---------------------------------------------------------------------------
// Fixture files

inline nlohmann::json fixture_config(std::string_view llm_mode) {
  nlohmann::json methods = nlohmann::json::array();
  for (Method m : kAllMethods) methods.push_back(method_id(m));
  nlohmann::json patterns = nlohmann::json::array();
  for (PatternId p : kAllPatterns) patterns.push_back(pattern_name(p));
  return {
      {"seed", 42},
      {"output_dir", "out"},
      {"corpus", {{"path", "corpus.tsv"}, {"format", "tsv"}}},
      {"normalize", {{"lowercase", true}, {"urls", true}, {"mentions", true}, {"hashtags", true}}},
      {"vocabulary", {{"min_df", 1}}},
      {"split", {{"train_fraction", 0.8}, {"stratified", true}}},
      {"augment",
       {{"methods", methods},
        {"top_k_neighbors", 5},
        {"reserved_map", fixtures::reserved_map()},
        {"embeddings", "embeddings.txt"},
        {"lexicon", "lexicon.tsv"}}},
      {"llm",
       {{"mode", llm_mode},
        {"transcript", "transcript.jsonl"},
        {"prompts", "prompts"},
        {"patterns", patterns},
        {"model_name", "gpt-3.5-turbo"},
        {"temperature", 0.8},
        {"n_variants", 5},
        {"max_concurrency", 4},
        {"infinite_generation_cap", 10}}},
      {"balance",
       {{"target", 0},
        {"schedule", "double"},
        {"dedup_threshold", 0.95},
        {"max_rounds", 10},
        {"source_methods",
         {"insert_embedding", "substitute_embedding", "substitute_synonym", "context_manager", "persona"}},
        {"both_classes", false}}},
      {"train", {{"loss", "logistic"}, {"l2_lambda", 1e-4}, {"learning_rate", 0.1}, {"epochs", 20}}},
      {"rules", {{"path", "rules.json"}}},
      {"eval", {{"k", 5}, {"stratified", true}, {"balance", true}}},
  };
}

inline nlohmann::json rules_fixture_config() {
  return {
      {"seed", 42},
      {"output_dir", "out_rules"},
      {"corpus", {{"path", "rules_corpus.tsv"}, {"format", "tsv"}}},
      {"rules", {{"path", "rules.json"}}},
      {"eval", {{"k", 5}, {"stratified", true}}},
  };
}

// Writes the synthetic corpora, resources and configs, then records the
// replay transcript by running the pipeline against the synthetic transport.
// The transcript also covers paraphrasing every minority example of the full
// corpus.
inline void write_fixture_files(const std::filesystem::path& dir, const fixtures::CorpusShape& shape = {}) {
  std::filesystem::create_directories(dir / "prompts");
  write_corpus(fixtures::synthetic_corpus(shape), dir / "corpus.tsv", Format::Tsv);
  write_corpus(fixtures::rules_corpus(shape), dir / "rules_corpus.tsv", Format::Tsv);
  io::write_file(dir / "embeddings.txt", fixtures::embeddings_text(16, shape.seed));
  io::write_file(dir / "lexicon.tsv", fixtures::lexicon_text());
  io::write_file(dir / "rules.json", fixtures::rules_json());
  PromptLibrary().save(dir / "prompts");
  io::write_file(dir / "rules_config.json", rules_fixture_config().dump(2) + "\n");

  std::filesystem::remove(dir / "transcript.jsonl");
  const auto scratch = std::filesystem::temp_directory_path() / ("rebalance_fixture_" + to_hex(shape.seed));
  auto recording = parse_run_config(fixture_config("synthetic"), dir);
  recording.output_dir = scratch;
  run_pipeline(recording);
  // Also cover paraphrasing the whole corpus, which the augment command does.
  auto res = load_resources(recording);
  llm_records(recording, *res, load_config_corpus(recording));
  std::filesystem::remove_all(scratch);
  io::write_file(dir / "config.json", fixture_config("replay").dump(2) + "\n");
}

}  // namespace rebalance
