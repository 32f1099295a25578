#pragma once

// k-fold cross-validation with optional in-fold balancing and rule overrides.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rebalance/balance.hpp"
#include "rebalance/corpus.hpp"
#include "rebalance/eval.hpp"
#include "rebalance/rules.hpp"

namespace rebalance {

struct CrossValOptions {
  ModelSpec spec;
  const RuleSet* rules = nullptr;
  // Applied to the training side of each fold only. A zero target means the
  // training fold's majority count.
  std::optional<BalancePlan> balance;
  std::vector<Generator> generators;
};

struct CrossValResult {
  std::vector<EvalReport> folds;
  std::map<std::string, MeanStd> summary;  // headline metric -> mean, population stddev
};

// Predictions on a test corpus, optionally passed through the rules.
inline EvalReport evaluate_with_rules(const FittedModel& fm, const Corpus& test, const NormalizeOptions& norm,
                                      const RuleSet* rules) {
  if (!rules) return evaluate_model(fm, test, norm);
  if (test.has_augmented()) throw PreconditionError("evaluation data must not contain augmented examples");
  return compare_predictions(*rules, test, predict_corpus(fm, test, norm), norm).with_rules;
}

inline CrossValResult cross_validate(const Corpus& corpus, const FoldPlan& folds, const CrossValOptions& opts) {
  if (folds.assignments().size() != corpus.size()) {
    throw PreconditionError("fold plan does not cover the corpus");
  }
  CrossValResult out;
  for (std::size_t f = 0; f < folds.k(); ++f) {
    const auto train_idx = folds.train_indices(f);
    Corpus train = corpus.subset(train_idx);
    const Corpus test = corpus.subset(folds.test_indices(f));
    if (opts.balance) {
      BalancePlan plan = *opts.balance;
      if (plan.target_count == 0) plan.target_count = train.count(other(train.minority_label()));
      plan.seed = derive_seed(plan.seed, f);
      if (plan.target_count > train.count(plan.label.value_or(train.minority_label()))) {
        train = balance(train, plan, opts.generators, opts.spec.norm).corpus;
      }
    }
    out.folds.push_back(evaluate_with_rules(fit_model(train, opts.spec), test, opts.spec.norm, opts.rules));
  }
  std::map<std::string, std::vector<double>> values;
  for (const auto& r : out.folds) {
    for (const auto& [name, v] : headline_metrics(r)) values[name].push_back(v);
  }
  for (const auto& [name, v] : values) out.summary[name] = mean_std(v);
  return out;
}

inline nlohmann::json to_json(const CrossValResult& r) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : r.folds) folds.push_back(to_json(f));
  nlohmann::json summary = nlohmann::json::object();
  for (const auto& [name, s] : r.summary) summary[name] = {{"mean", s.mean}, {"stddev", s.stddev}};
  return {{"k", r.folds.size()}, {"folds", folds}, {"summary", summary}};
}

}  // namespace rebalance
