#pragma once

// Grows one class of a training corpus toward a target count through rounds
// of augmentation, rejecting near-duplicates of texts already kept.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "rebalance/augment.hpp"
#include "rebalance/classifier.hpp"
#include "rebalance/corpus.hpp"
#include "rebalance/csv.hpp"
#include "rebalance/error.hpp"
#include "rebalance/eval.hpp"
#include "rebalance/llm.hpp"
#include "rebalance/random.hpp"
#include "rebalance/text.hpp"

namespace rebalance {

enum class Schedule { DoubleEachRound, FillInOneRound };

inline Schedule parse_schedule(std::string_view s) {
  if (s == "double") return Schedule::DoubleEachRound;
  if (s == "fill") return Schedule::FillInOneRound;
  throw ConfigError("unknown balance schedule: " + std::string(s));
}

struct BalancePlan {
  std::optional<Label> label;  // class to grow; defaults to the minority class
  std::size_t target_count = 0;
  Schedule schedule = Schedule::DoubleEachRound;
  double dedup_threshold = 0.95;
  std::size_t max_rounds = 10;
  std::vector<std::string> source_methods;
  std::uint64_t seed = 42;
};

struct GenerationTask {
  LabeledExample source;
  std::uint64_t seed = 0;
};

// Produces candidate texts for a batch of sources, one list per task in task
// order. An empty list means the source yielded nothing.
struct Generator {
  std::string method_id;
  std::function<std::vector<std::vector<std::string>>(std::span<const GenerationTask>)> generate;
};

struct RoundStats {
  std::size_t round = 0;
  std::size_t before = 0;
  std::size_t generated = 0;
  std::size_t kept = 0;
  std::size_t after = 0;
};

struct BalanceTrace {
  std::vector<RoundStats> rounds;

  std::string to_csv() const {
    std::ostringstream out;
    csv::write_row(out, {"round", "before", "generated", "kept", "after"});
    for (const auto& r : rounds) {
      csv::write_row(out, {std::to_string(r.round), std::to_string(r.before), std::to_string(r.generated),
                           std::to_string(r.kept), std::to_string(r.after)});
    }
    return out.str();
  }
};

// Round-by-round driver; balance() runs it to completion.
class Balancer {
 public:
  Balancer(const Corpus& train, BalancePlan plan, std::vector<Generator> generators,
           NormalizeOptions norm = {})
      : plan_(std::move(plan)), norm_(norm), examples_(train.examples()) {
    if (train.count(Label::Positive) == 0 || train.count(Label::Negative) == 0) {
      throw PreconditionError("balancing needs both classes in the training corpus");
    }
    if (train.has_augmented()) throw PreconditionError("balancing starts from an unaugmented corpus");
    label_ = plan_.label.value_or(train.minority_label());
    if (plan_.target_count <= train.count(label_)) {
      throw PreconditionError("target count " + std::to_string(plan_.target_count) +
                              " must exceed the current count " + std::to_string(train.count(label_)));
    }
    if (!(plan_.dedup_threshold > 0.0 && plan_.dedup_threshold <= 1.0)) {
      throw PreconditionError("dedup_threshold must lie in (0, 1]");
    }
    if (plan_.max_rounds < 1) throw PreconditionError("max_rounds must be >= 1");
    if (plan_.source_methods.empty()) throw PreconditionError("no source methods configured");
    for (auto& g : generators) generators_[g.method_id] = std::move(g);
    for (const auto& id : plan_.source_methods) {
      if (!generators_.contains(id)) throw ConfigError("no generator configured for " + id);
    }
    for (const auto& ex : examples_) {
      if (ex.label != label_) continue;
      pool_.push_back(ex);
      kept_counts_.emplace_back(analyze(ex.text, norm_));
    }
  }

  Label label() const { return label_; }
  std::size_t count() const { return pool_.size(); }
  bool done() const { return pool_.size() >= plan_.target_count || trace_.rounds.size() >= plan_.max_rounds; }
  const BalanceTrace& trace() const { return trace_; }

  Corpus corpus() const {
    std::vector<LabeledExample> all = examples_;
    for (const auto& ex : pool_) {
      if (ex.origin) all.push_back(ex);
    }
    return Corpus(std::move(all));
  }

  const RoundStats& step() {
    if (done()) throw PreconditionError("balancing already finished");
    const std::size_t round = trace_.rounds.size() + 1;
    const std::size_t before = pool_.size();
    const std::size_t missing = plan_.target_count - before;
    const std::size_t want = plan_.schedule == Schedule::DoubleEachRound ? std::min(before, missing) : missing;

    // Sources: the current pool in a round-seeded order, cycled if needed.
    const std::uint64_t round_seed = derive_seed(plan_.seed, round);
    std::vector<std::size_t> order(before);
    for (std::size_t i = 0; i < before; ++i) order[i] = i;
    Rng rng(round_seed);
    rng.shuffle(order);

    std::map<std::string, std::vector<std::size_t>> by_method;  // method -> request indices
    std::vector<GenerationTask> tasks(want);
    for (std::size_t j = 0; j < want; ++j) {
      tasks[j] = {pool_[order[j % before]], derive_seed(round_seed, j)};
      by_method[plan_.source_methods[j % plan_.source_methods.size()]].push_back(j);
    }
    std::vector<std::vector<std::string>> candidates(want);
    for (const auto& [method, indices] : by_method) {
      std::vector<GenerationTask> batch;
      for (auto j : indices) batch.push_back(tasks[j]);
      auto out = generators_.at(method).generate(batch);
      if (out.size() != batch.size()) throw PreconditionError("generator " + method + " returned a short batch");
      for (std::size_t k = 0; k < indices.size(); ++k) candidates[indices[k]] = std::move(out[k]);
    }

    RoundStats stats{round, before, 0, 0, before};
    for (std::size_t j = 0; j < want; ++j) {
      const std::string& method = plan_.source_methods[j % plan_.source_methods.size()];
      for (const auto& text : candidates[j]) {
        ++stats.generated;
        if (io::trim(text).empty()) continue;
        TermCounts counts(analyze(text, norm_));
        if (counts.empty() || max_similarity(counts) >= plan_.dedup_threshold) continue;
        const auto& src = tasks[j].source;
        const std::string root = src.origin ? src.origin->parent_id : src.id;
        LabeledExample ex{root + "#r" + std::to_string(round) + "n" + std::to_string(j), text, label_,
                          Provenance{method, root}};
        pool_.push_back(std::move(ex));
        kept_counts_.push_back(std::move(counts));
        ++stats.kept;
        break;  // at most one new example per request
      }
    }
    stats.after = pool_.size();
    trace_.rounds.push_back(stats);
    if (stats.kept == 0) {
      throw GeneratorExhausted("round " + std::to_string(round) + " kept none of " +
                               std::to_string(stats.generated) + " candidates");
    }
    return trace_.rounds.back();
  }

  double max_similarity(const TermCounts& counts) const {
    double best = 0.0;
    for (const auto& k : kept_counts_) {
      best = std::max(best, pairwise_similarity(counts, k));
      if (best >= 1.0) break;
    }
    return best;
  }

 private:
  BalancePlan plan_;
  NormalizeOptions norm_;
  Label label_ = Label::Negative;
  std::vector<LabeledExample> examples_;
  std::vector<LabeledExample> pool_;  // every example of label_, originals first
  std::vector<TermCounts> kept_counts_;
  std::map<std::string, Generator> generators_;
  BalanceTrace trace_;
};

struct BalanceResult {
  Corpus corpus;
  BalanceTrace trace;
};

inline BalanceResult balance(const Corpus& train, const BalancePlan& plan, std::vector<Generator> generators,
                             const NormalizeOptions& norm = {}) {
  Balancer b(train, plan, std::move(generators), norm);
  while (!b.done()) b.step();
  return {b.corpus(), b.trace()};
}

// Augments both classes: the minority toward minority_target and the
// majority toward majority_target (2x its size by default).
inline BalanceResult balance_both(const Corpus& train, BalancePlan plan, const std::vector<Generator>& generators,
                                  std::optional<std::size_t> majority_target = std::nullopt,
                                  const NormalizeOptions& norm = {}) {
  const Label minority = train.minority_label();
  const Label majority = other(minority);
  BalancePlan major_plan = plan;
  major_plan.label = majority;
  major_plan.target_count = majority_target.value_or(2 * train.count(majority));
  major_plan.seed = derive_seed(plan.seed, "majority");
  plan.label = minority;

  auto first = balance(train, plan, generators, norm);
  // Grow the majority from the original examples only, then merge.
  auto second = balance(train, major_plan, generators, norm);
  std::vector<LabeledExample> merged = first.corpus.examples();
  for (const auto& ex : second.corpus) {
    if (ex.origin) merged.push_back(ex);
  }
  BalanceTrace trace = first.trace;
  trace.rounds.insert(trace.rounds.end(), second.trace.rounds.begin(), second.trace.rounds.end());
  return {Corpus(std::move(merged)), trace};
}

// ---------------------------------------------------------------------------
// Generators

// Wraps a word-level augmenter; each task yields at most one candidate.
inline Generator augmenter_generator(AugmenterConfig cfg, AugmentResources resources,
                                     NormalizeOptions norm = {}) {
  cfg.validate();
  const std::string id(method_id(cfg.method));
  return {id, [cfg, resources, norm](std::span<const GenerationTask> tasks) {
            std::vector<std::vector<std::string>> out;
            for (const auto& task : tasks) {
              AugmenterConfig local = cfg;
              local.seed = task.seed;
              const auto tokens = analyze(task.source.text, norm);
              try {
                out.push_back({detokenize(augment_one(tokens, local, resources))});
              } catch (const NoEligibleToken&) {
                out.emplace_back();
              }
            }
            return out;
          }};
}

// Wraps a prompt pattern; every parsed variant is a candidate.
inline Generator llm_generator(PromptPattern pattern, Transport& transport, LlmSettings settings,
                               GenerateOptions options = {}) {
  const std::string id(pattern_name(pattern.id));
  return {id, [pattern, &transport, settings, options](std::span<const GenerationTask> tasks) {
            std::vector<GenerationRequest> requests;
            for (const auto& t : tasks) {
              requests.push_back({pattern, t.source, settings.n_variants, settings.temperature,
                                  settings.model_name, t.seed});
            }
            std::vector<std::vector<std::string>> out;
            for (auto& records : generate_batch(requests, transport, options)) {
              std::vector<std::string> texts;
              for (auto& r : records) texts.push_back(std::move(r.augmented_text));
              out.push_back(std::move(texts));
            }
            return out;
          }};
}

// ---------------------------------------------------------------------------
// Trend experiment

struct ModelSpec {
  TrainConfig train;
  std::size_t min_df = 1;
  NormalizeOptions norm;
};

struct FittedModel {
  Vocabulary vocab;
  LinearModel model;
};

inline FittedModel fit_model(const Corpus& train, const ModelSpec& spec) {
  auto vocab = fit_corpus_vocabulary(train, spec.min_df, spec.norm);
  auto model = rebalance::train(train, vocab, spec.train, spec.norm);
  return {std::move(vocab), std::move(model)};
}

inline std::vector<Label> predict_corpus(const FittedModel& fm, const Corpus& corpus, const NormalizeOptions& norm) {
  std::vector<Label> out;
  out.reserve(corpus.size());
  for (const auto& ex : corpus) out.push_back(predict(fm.model, vectorize(analyze(ex.text, norm), fm.vocab)));
  return out;
}

inline EvalReport evaluate_model(const FittedModel& fm, const Corpus& test, const NormalizeOptions& norm) {
  if (test.has_augmented()) throw PreconditionError("evaluation data must not contain augmented examples");
  const auto pred = predict_corpus(fm, test, norm);
  const auto truth = test.labels();
  const auto texts = test.texts();
  std::vector<std::string> ids;
  for (const auto& ex : test) ids.push_back(ex.id);
  return full_report(truth, pred, texts, ids);
}

struct TrendPoint {
  std::size_t round = 0;
  std::size_t class_count = 0;  // size of the grown class after this round
  EvalReport report;
};

// Baseline plus one report per balancing round, each from a fresh model.
inline std::vector<TrendPoint> trend_experiment(const Corpus& train, const Corpus& test, const BalancePlan& plan,
                                                std::vector<Generator> generators, const ModelSpec& spec,
                                                BalanceTrace* trace_out = nullptr) {
  if (test.has_augmented()) throw PreconditionError("test corpus must not contain augmented examples");
  Balancer b(train, plan, std::move(generators), spec.norm);
  std::vector<TrendPoint> out;
  out.push_back({0, b.count(), evaluate_model(fit_model(train, spec), test, spec.norm)});
  while (!b.done()) {
    const auto& stats = b.step();
    out.push_back({stats.round, stats.after, evaluate_model(fit_model(b.corpus(), spec), test, spec.norm)});
  }
  if (trace_out) *trace_out = b.trace();
  return out;
}

inline std::string trend_csv(std::span<const TrendPoint> points, Label focus) {
  std::ostringstream out;
  csv::write_row(out, {"round", "x", "class", "precision", "recall", "f1", "macro_f1", "accuracy"});
  for (const auto& p : points) {
    const auto& m = p.report.of(focus);
    csv::write_row(out, {std::to_string(p.round), std::to_string(p.class_count), label_name(focus),
                         format_metric(m.precision), format_metric(m.recall), format_metric(m.f1),
                         format_metric(p.report.macro.f1), format_metric(p.report.accuracy)});
  }
  return out.str();
}

}  // namespace rebalance
