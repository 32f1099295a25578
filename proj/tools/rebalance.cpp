// rebalance: command-line front end. Every subcommand builds a run config
// (from --config or from scratch), applies its flags on top, validates it and
// writes its artifacts under --out.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rebalance/pipeline.hpp"

namespace fs = std::filesystem;
using namespace rebalance;

namespace {

struct Common {
  std::string config;
  std::string input;
  std::string format;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "run config (JSON)");
  cmd->add_option("--input", c.input, "corpus file (CSV or TSV); overrides the config's corpus");
  cmd->add_option("--format", c.format, "corpus format: csv or tsv (default: from extension)");
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
  cmd->add_option("--seed", c.seed, "global seed override");
}

std::string absolute(const std::string& p) { return fs::absolute(p).string(); }

// Loads --config (or starts empty) and applies the shared flags.
std::pair<nlohmann::json, fs::path> base_config(const Common& c) {
  nlohmann::json j = nlohmann::json::object();
  fs::path base = fs::current_path();
  if (!c.config.empty()) {
    const auto data = io::read_file(c.config);
    try {
      j = nlohmann::json::parse(data);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("invalid JSON in " + c.config + ": " + e.what());
    }
    base = fs::absolute(c.config).parent_path();
  }
  if (!c.input.empty()) {
    j["corpus"]["path"] = absolute(c.input);
    j["corpus"].erase("format");
  }
  if (!c.format.empty()) j["corpus"]["format"] = c.format;
  if (c.seed) j["seed"] = *c.seed;
  j["output_dir"] = absolute(c.out);
  return {j, base};
}

nlohmann::json split_list(const std::string& csv) {
  nlohmann::json out = nlohmann::json::array();
  std::string item;
  std::istringstream in(csv);
  while (std::getline(in, item, ',')) {
    const auto t = io::trim(item);
    if (!t.empty()) out.push_back(std::string(t));
  }
  return out;
}

nlohmann::json all_methods() {
  nlohmann::json out = nlohmann::json::array();
  for (Method m : kAllMethods) out.push_back(method_id(m));
  return out;
}

nlohmann::json all_patterns() {
  nlohmann::json out = nlohmann::json::array();
  for (PatternId p : kAllPatterns) out.push_back(pattern_name(p));
  return out;
}

void print(const nlohmann::json& j) { std::cout << j.dump(2) << "\n"; }

struct AugmentFlags {
  std::string methods;
  bool all_traditional = false;
  bool llm = false;
  std::string patterns;
  std::string replay;
  bool synthetic = false;
  std::string record;
  std::string embeddings;
  std::string lexicon;
};

void add_augment_flags(CLI::App* cmd, AugmentFlags& a) {
  cmd->add_option("--methods", a.methods, "comma-separated augmentation methods");
  cmd->add_flag("--all-traditional", a.all_traditional, "use every word-level method");
  cmd->add_flag("--llm", a.llm, "generate prompted paraphrases");
  cmd->add_option("--patterns", a.patterns, "comma-separated prompt patterns (default: all)");
  cmd->add_option("--replay", a.replay, "serve chat replies from this transcript");
  cmd->add_flag("--synthetic", a.synthetic, "use the offline synthetic paraphraser");
  cmd->add_option("--record", a.record, "transcript to append live or synthetic replies to");
  cmd->add_option("--embeddings", a.embeddings, "word2vec/GloVe text file");
  cmd->add_option("--lexicon", a.lexicon, "synonym/antonym lexicon TSV");
}

void apply_augment_flags(const AugmentFlags& a, nlohmann::json& j) {
  if (a.all_traditional) j["augment"]["methods"] = all_methods();
  if (!a.methods.empty()) j["augment"]["methods"] = split_list(a.methods);
  if (!a.embeddings.empty()) j["augment"]["embeddings"] = absolute(a.embeddings);
  if (!a.lexicon.empty()) j["augment"]["lexicon"] = absolute(a.lexicon);
  if (a.llm) {
    if (!a.replay.empty()) {
      j["llm"]["mode"] = "replay";
      j["llm"]["transcript"] = absolute(a.replay);
    } else if (a.synthetic || !a.record.empty() || j["llm"].value("mode", std::string("off")) == "off") {
      // Without a mode flag, a config that already picks a mode keeps it.
      j["llm"]["mode"] = a.synthetic ? "synthetic" : "live";
      if (!a.record.empty()) j["llm"]["transcript"] = absolute(a.record);
      else j["llm"].erase("transcript");
    }
    if (!a.patterns.empty()) j["llm"]["patterns"] = split_list(a.patterns);
    else if (!j["llm"].contains("patterns")) j["llm"]["patterns"] = all_patterns();
  }
}

int run_app(int argc, char** argv) {
  CLI::App app{"Minority-class text augmentation, balancing and evaluation"};
  app.require_subcommand(1);

  Common ingest_c, augment_c, balance_c, train_c, eval_c, cv_c, rules_c, trend_c, run_c;
  AugmentFlags augment_a, balance_a;

  auto* ingest = app.add_subcommand("ingest", "load, normalize and summarize a corpus");
  add_common(ingest, ingest_c);

  auto* augment = app.add_subcommand("augment", "augment the minority class and report similarity");
  add_common(augment, augment_c);
  add_augment_flags(augment, augment_a);

  auto* balance_cmd = app.add_subcommand("balance", "grow the minority class to a target count");
  add_common(balance_cmd, balance_c);
  add_augment_flags(balance_cmd, balance_a);
  std::optional<std::size_t> target;
  std::string schedule, sources;
  balance_cmd->add_option("--target", target, "target count (default: majority count)");
  balance_cmd->add_option("--schedule", schedule, "double or fill");
  balance_cmd->add_option("--source-methods", sources, "comma-separated generators");

  auto* train_cmd = app.add_subcommand("train", "train a linear classifier");
  add_common(train_cmd, train_c);
  std::string loss;
  std::optional<std::size_t> epochs;
  train_cmd->add_option("--loss", loss, "logistic or hinge");
  train_cmd->add_option("--epochs", epochs, "training epochs");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a trained model on a test corpus");
  add_common(eval_cmd, eval_c);
  std::string model_path;
  eval_cmd->add_option("--model", model_path, "model bundle from train")->required();

  auto* cv_cmd = app.add_subcommand("cv", "k-fold cross-validation");
  add_common(cv_cmd, cv_c);
  std::optional<std::size_t> k;
  std::string cv_rules;
  cv_cmd->add_option("--k", k, "number of folds");
  cv_cmd->add_option("--rules", cv_rules, "apply these rules on top of each fold's model");

  auto* rules_cmd = app.add_subcommand("rules", "apply rule overrides to a model's predictions");
  add_common(rules_cmd, rules_c);
  std::string rules_model, rules_path;
  bool compare = false;
  rules_cmd->add_option("--model", rules_model, "model bundle from train")->required();
  rules_cmd->add_option("--rules", rules_path, "rules JSON (default: from --config)");
  rules_cmd->add_flag("--compare", compare, "report metrics with and without the rules");

  auto* trend_cmd = app.add_subcommand("trend", "metric trend over balancing rounds or methods");
  add_common(trend_cmd, trend_c);
  std::string by = "rounds";
  trend_cmd->add_option("--by", by, "rounds or method")->check(CLI::IsMember({"rounds", "method"}));

  auto* fixtures_cmd = app.add_subcommand("fixtures", "synthetic fixture data");
  fixtures_cmd->require_subcommand(1);
  auto* generate = fixtures_cmd->add_subcommand("generate", "write the synthetic corpora and resources");
  std::string fixtures_out = "fixtures";
  fixtures::CorpusShape shape;
  generate->add_option("--out", fixtures_out, "output directory")->capture_default_str();
  generate->add_option("--seed", shape.seed, "generator seed")->capture_default_str();
  generate->add_option("--signal", shape.signal, "share of tweets carrying an outcome cue")->capture_default_str();
  generate->add_option("--positives", shape.positives)->capture_default_str();
  generate->add_option("--negatives", shape.negatives)->capture_default_str();

  auto* run_cmd = app.add_subcommand("run", "run the whole pipeline from a config");
  add_common(run_cmd, run_c);
  run_cmd->get_option("--config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*ingest) {
    auto [j, base] = base_config(ingest_c);
    const auto cfg = parse_run_config(j, base);
    const auto corpus = load_config_corpus(cfg);
    ArtifactWriter out(cfg.output_dir);
    out.write("clean_corpus.tsv", "tsv", format_corpus(normalized_corpus(corpus, cfg.norm), Format::Tsv));
    out.json("summary.json", class_counts(corpus));
    print(class_counts(corpus));
    return 0;
  }

  if (*augment) {
    auto [j, base] = base_config(augment_c);
    // Only the word-level and prompted generators matter here; without --llm
    // the run is purely word-level.
    j.erase("balance");
    if (!augment_a.llm) j.erase("llm");
    if (augment_a.methods.empty() && !augment_a.all_traditional && augment_a.llm && j.contains("augment")) {
      j["augment"]["methods"] = nlohmann::json::array();
    }
    apply_augment_flags(augment_a, j);
    const auto cfg = parse_run_config(j, base);
    auto res = load_resources(cfg);
    const auto corpus = load_config_corpus(cfg);
    auto records = traditional_records(cfg, *res, corpus);
    const auto llm = llm_records(cfg, *res, corpus);
    records.insert(records.end(), llm.begin(), llm.end());
    if (records.empty()) throw ConfigError("nothing to do: give --methods, --all-traditional or --llm");
    ArtifactWriter out(cfg.output_dir);
    out.write("records.jsonl", "jsonl", records_to_jsonl(records));
    const auto report = similarity_csv(method_similarity_report(records));
    out.write("similarity.csv", "csv", report);
    std::cout << report;
    return 0;
  }

  if (*balance_cmd) {
    auto [j, base] = base_config(balance_c);
    apply_augment_flags(balance_a, j);
    if (target) j["balance"]["target"] = *target;
    if (!schedule.empty()) j["balance"]["schedule"] = schedule;
    if (!sources.empty()) j["balance"]["source_methods"] = split_list(sources);
    const auto cfg = parse_run_config(j, base);
    if (cfg.balance.source_methods.empty()) throw ConfigError("balance needs --source-methods");
    auto res = load_resources(cfg);
    const auto corpus = load_config_corpus(cfg);
    auto result = cfg.balance.both_classes
                      ? balance_both(corpus, balance_plan(cfg, corpus),
                                     make_generators(cfg, *res, cfg.balance.source_methods), std::nullopt, cfg.norm)
                      : balance(corpus, balance_plan(cfg, corpus),
                                make_generators(cfg, *res, cfg.balance.source_methods), cfg.norm);
    ArtifactWriter out(cfg.output_dir);
    out.write("balanced_corpus.tsv", "tsv", format_corpus(result.corpus, Format::Tsv));
    out.write("balance_trace.csv", "csv", result.trace.to_csv());
    std::cout << result.trace.to_csv();
    return 0;
  }

  if (*train_cmd) {
    auto [j, base] = base_config(train_c);
    if (!loss.empty()) j["train"]["loss"] = loss;
    if (epochs) j["train"]["epochs"] = *epochs;
    const auto cfg = parse_run_config(j, base);
    const auto corpus = load_config_corpus(cfg);
    const auto fm = fit_model(corpus, cfg.model_spec());
    ArtifactWriter out(cfg.output_dir);
    out.json("model.json", model_bundle(fm, cfg.norm));
    print({{"model", (cfg.output_dir / "model.json").string()},
           {"n_features", fm.model.weights.size()},
           {"training", class_counts(corpus)}});
    return 0;
  }

  if (*eval_cmd) {
    auto [j, base] = base_config(eval_c);
    const auto cfg = parse_run_config(j, base);
    const auto [fm, norm] = load_model_bundle(model_path);
    const auto report = evaluate_model(fm, load_config_corpus(cfg), norm);
    ArtifactWriter out(cfg.output_dir);
    out.json("eval.json", to_json(report));
    std::vector<std::pair<std::string, EvalReport>> rows{{"model", report}};
    out.write("eval_report.csv", "csv", report_csv(rows));
    out.write("errors.csv", "csv", errors_csv(report));
    print(headline_metrics(report));
    return 0;
  }

  if (*cv_cmd) {
    auto [j, base] = base_config(cv_c);
    if (k) j["eval"]["k"] = *k;
    if (!cv_rules.empty()) j["rules"]["path"] = absolute(cv_rules);
    const auto cfg = parse_run_config(j, base);
    auto res = load_resources(cfg);
    const auto corpus = load_config_corpus(cfg);
    std::optional<RuleSet> rules;
    if (cfg.rules) rules = load_rules(*cfg.rules);
    CrossValOptions opts;
    opts.spec = cfg.model_spec();
    opts.rules = rules ? &*rules : nullptr;
    if (cfg.cv_balance && !cfg.balance.source_methods.empty()) {
      auto plan = balance_plan(cfg, corpus);
      plan.target_count = cfg.balance.target;
      opts.balance = plan;
      opts.generators = make_generators(cfg, *res, cfg.balance.source_methods);
    }
    const auto result =
        cross_validate(corpus, make_folds(corpus, cfg.k, cfg.stratified_folds, cfg.stage_seed("folds")), opts);
    ArtifactWriter out(cfg.output_dir);
    out.json("cv_summary.json", to_json(result));
    print(to_json(result)["summary"]);
    return 0;
  }

  if (*rules_cmd) {
    auto [j, base] = base_config(rules_c);
    if (!rules_path.empty()) j["rules"]["path"] = absolute(rules_path);
    const auto cfg = parse_run_config(j, base);
    if (!cfg.rules) throw ConfigError("rules needs --rules or a rules section in --config");
    const auto rules = load_rules(*cfg.rules);
    const auto [fm, norm] = load_model_bundle(rules_model);
    const auto test = load_config_corpus(cfg);
    const auto cmp = compare_with_without(rules, fm.model, fm.vocab, test, norm);
    ArtifactWriter out(cfg.output_dir);
    std::ostringstream preds;
    csv::write_row(preds, {"id", "base", "final", "fired_rule"});
    for (std::size_t i = 0; i < test.size(); ++i) {
      csv::write_row(preds, {test[i].id, std::to_string(to_int(cmp.base_predictions[i])),
                             std::to_string(to_int(cmp.final_predictions[i])), cmp.fired[i].value_or("")});
    }
    out.write("predictions.csv", "csv", preds.str());
    out.write("rules_fired.csv", "csv", rule_report_csv(cmp.per_rule));
    if (compare) {
      out.json("rules_comparison.json", to_json(cmp));
      out.write("rules_conflicts.csv", "csv", conflicts_csv(cmp.conflicts));
      std::vector<std::pair<std::string, EvalReport>> rows{{"without_rules", cmp.without_rules},
                                                           {"with_rules", cmp.with_rules}};
      out.write("eval_report.csv", "csv", report_csv(rows));
      print({{"without_rules", headline_metrics(cmp.without_rules)},
             {"with_rules", headline_metrics(cmp.with_rules)}});
    } else {
      std::cout << rule_report_csv(cmp.per_rule);
    }
    return 0;
  }

  if (*trend_cmd) {
    auto [j, base] = base_config(trend_c);
    const auto cfg = parse_run_config(j, base);
    if (cfg.balance.source_methods.empty()) throw ConfigError("trend needs balance.source_methods in the config");
    auto res = load_resources(cfg);
    const auto corpus = load_config_corpus(cfg);
    const auto tt = split(corpus, {cfg.train_fraction, cfg.stratified_split, cfg.stage_seed("split")});
    const Label minority = tt.train.minority_label();
    const auto plan = balance_plan(cfg, tt.train);
    const auto generators = make_generators(cfg, *res, cfg.balance.source_methods);
    ArtifactWriter out(cfg.output_dir);
    std::vector<std::string> xs;
    std::vector<const EvalReport*> reports;
    std::string csv;
    if (by == "rounds") {
      const auto points = trend_experiment(tt.train, tt.test, plan, generators, cfg.model_spec());
      csv = trend_csv(points, minority);
      for (const auto& p : points) {
        xs.push_back(std::to_string(p.class_count));
        reports.push_back(&p.report);
      }
      out.write("trend_rounds.csv", "csv", csv);
      out.write("trend_rounds.svg", "svg",
                trend_svg("Minority class metrics by balancing round", "minority examples in training", xs,
                          reports, minority));
    } else {
      const auto points = method_trend(tt.train, tt.test, plan, generators, cfg.model_spec());
      csv = method_trend_csv(points, minority);
      for (const auto& p : points) {
        xs.push_back(p.method);
        reports.push_back(&p.report);
      }
      out.write("trend_methods.csv", "csv", csv);
      out.write("trend_methods.svg", "svg",
                trend_svg("Minority class metrics by augmentation method", "method", xs, reports, minority));
    }
    std::cout << csv;
    return 0;
  }

  if (*generate) {
    write_fixture_files(fixtures_out, shape);
    print({{"fixtures", fs::absolute(fixtures_out).string()},
           {"corpus", class_counts(fixtures::synthetic_corpus(shape))}});
    return 0;
  }

  if (*run_cmd) {
    auto [j, base] = base_config(run_c);
    // --out only overrides the config's output_dir when given explicitly.
    if (run_cmd->get_option("--out")->count() == 0) {
      const auto cfg_json = nlohmann::json::parse(io::read_file(run_c.config));
      j["output_dir"] = cfg_json.value("output_dir", std::string("out"));
    }
    const auto cfg = parse_run_config(j, base);
    const auto result = run_pipeline(cfg);
    print({{"output_dir", cfg.output_dir.string()},
           {"artifacts", result.artifacts.size()},
           {"config_hash", cfg.hash()}});
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_app(argc, argv);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
