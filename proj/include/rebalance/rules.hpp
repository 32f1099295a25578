#pragma once

// Ordered regex rules that override classifier predictions.
//
// Patterns use the Perl dialect of Boost.Regex (lookahead assertions,
// case-insensitive matching) and are searched against the normalized text.
// The first matching rule decides the final label.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/regex.hpp>
#include <nlohmann/json.hpp>

#include "rebalance/classifier.hpp"
#include "rebalance/corpus.hpp"
#include "rebalance/csv.hpp"
#include "rebalance/error.hpp"
#include "rebalance/eval.hpp"
#include "rebalance/io.hpp"
#include "rebalance/text.hpp"

namespace rebalance {

enum class RuleAction { ForceNegative, ForcePositive };

inline std::string_view action_name(RuleAction a) {
  return a == RuleAction::ForcePositive ? "ForcePositive" : "ForceNegative";
}

inline RuleAction parse_action(std::string_view name) {
  if (name == "ForceNegative") return RuleAction::ForceNegative;
  if (name == "ForcePositive") return RuleAction::ForcePositive;
  throw ConfigError("unknown rule action: " + std::string(name));
}

inline Label action_label(RuleAction a) {
  return a == RuleAction::ForcePositive ? Label::Positive : Label::Negative;
}

struct RuleSpec {
  std::string rule_id;
  std::string pattern;
  RuleAction action = RuleAction::ForceNegative;
  std::string note;
};

struct Rule {
  RuleSpec spec;
  boost::regex compiled;

  bool matches(const std::string& text) const { return boost::regex_search(text, compiled); }
};

inline boost::regex compile_pattern(const RuleSpec& spec) {
  try {
    return boost::regex(spec.pattern, boost::regex::perl | boost::regex::icase);
  } catch (const boost::regex_error& e) {
    throw PatternCompileError(spec.rule_id, e.what());
  }
}

class RuleSet {
 public:
  RuleSet() = default;

  explicit RuleSet(std::vector<RuleSpec> specs) {
    std::set<std::string> seen;
    for (auto& spec : specs) {
      if (!seen.insert(spec.rule_id).second) throw DuplicateRuleId(spec.rule_id);
      auto compiled = compile_pattern(spec);
      rules_.push_back({std::move(spec), std::move(compiled)});
    }
  }

  std::size_t size() const { return rules_.size(); }
  bool empty() const { return rules_.empty(); }
  const Rule& operator[](std::size_t i) const { return rules_.at(i); }
  auto begin() const { return rules_.begin(); }
  auto end() const { return rules_.end(); }

  // Indices of every rule matching the text, in evaluation order.
  std::vector<std::size_t> matching(const std::string& text) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < rules_.size(); ++i) {
      if (rules_[i].matches(text)) out.push_back(i);
    }
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rules_) {
      out.push_back({{"rule_id", r.spec.rule_id},
                     {"pattern", r.spec.pattern},
                     {"action", action_name(r.spec.action)},
                     {"note", r.spec.note}});
    }
    return out;
  }

  static RuleSet from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw ConfigError("rules file must hold a JSON list");
    std::vector<RuleSpec> specs;
    for (const auto& item : j) {
      try {
        specs.push_back({item.at("rule_id").get<std::string>(), item.at("pattern").get<std::string>(),
                         parse_action(item.at("action").get<std::string>()),
                         item.value("note", std::string())});
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid rule entry: ") + e.what());
      }
    }
    return RuleSet(std::move(specs));
  }

 private:
  std::vector<Rule> rules_;
};

inline RuleSet load_rules(const std::filesystem::path& path) {
  const auto data = io::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(data);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("invalid rules JSON in " + path.string() + ": " + e.what());
  }
  return RuleSet::from_json(j);
}

struct RuleOutcome {
  Label label = Label::Positive;
  std::optional<std::string> fired;
};

inline RuleOutcome apply_rules(const RuleSet& rules, const std::string& text, Label base) {
  for (const auto& rule : rules) {
    if (rule.matches(text)) return {action_label(rule.spec.action), rule.spec.rule_id};
  }
  return {base, std::nullopt};
}

struct RuleStats {
  std::string rule_id;
  std::size_t fires = 0;
  std::size_t flips = 0;
  std::size_t flips_correct = 0;
  std::size_t flips_incorrect = 0;
};

// A test text matched by rules whose actions disagree; its outcome depends on
// rule order.
struct RuleConflict {
  std::string id;
  std::vector<std::string> rule_ids;
};

struct RuleComparison {
  EvalReport without_rules;
  EvalReport with_rules;
  std::vector<RuleStats> per_rule;
  std::vector<RuleConflict> conflicts;
  std::vector<Label> base_predictions;
  std::vector<Label> final_predictions;
  std::vector<std::optional<std::string>> fired;
};

// Applies the rules on top of fixed base predictions over the test corpus.
inline RuleComparison compare_predictions(const RuleSet& rules, const Corpus& test,
                                          const std::vector<Label>& base,
                                          const NormalizeOptions& norm = {}) {
  if (base.size() != test.size()) throw LengthMismatch();
  RuleComparison out;
  out.base_predictions = base;
  for (const auto& rule : rules) out.per_rule.push_back({rule.spec.rule_id});

  const auto truth = test.labels();
  const auto texts = test.texts();
  std::vector<std::string> ids;
  for (const auto& ex : test) ids.push_back(ex.id);

  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto normalized = normalize(texts[i], norm);
    const auto hits = rules.matching(normalized);
    if (hits.empty()) {
      out.final_predictions.push_back(base[i]);
      out.fired.push_back(std::nullopt);
      continue;
    }
    const auto& first = rules[hits.front()];
    const Label final_label = action_label(first.spec.action);
    auto& stats = out.per_rule[hits.front()];
    ++stats.fires;
    if (final_label != base[i]) {
      ++stats.flips;
      (final_label == truth[i] ? stats.flips_correct : stats.flips_incorrect) += 1;
    }
    out.final_predictions.push_back(final_label);
    out.fired.push_back(first.spec.rule_id);

    std::set<RuleAction> actions;
    for (auto h : hits) actions.insert(rules[h].spec.action);
    if (actions.size() > 1) {
      RuleConflict c{ids[i], {}};
      for (auto h : hits) c.rule_ids.push_back(rules[h].spec.rule_id);
      out.conflicts.push_back(std::move(c));
    }
  }
  out.without_rules = full_report(truth, out.base_predictions, texts, ids);
  out.with_rules = full_report(truth, out.final_predictions, texts, ids, out.fired);
  return out;
}

inline RuleComparison compare_with_without(const RuleSet& rules, const LinearModel& model,
                                           const Vocabulary& vocab, const Corpus& test,
                                           const NormalizeOptions& norm = {}) {
  std::vector<Label> base;
  base.reserve(test.size());
  for (const auto& ex : test) base.push_back(predict(model, vectorize(analyze(ex.text, norm), vocab)));
  return compare_predictions(rules, test, base, norm);
}

inline std::string rule_report_csv(const std::vector<RuleStats>& stats) {
  std::ostringstream out;
  csv::write_row(out, {"rule_id", "fires", "flips", "flips_correct", "flips_incorrect"});
  for (const auto& s : stats) {
    csv::write_row(out, {s.rule_id, std::to_string(s.fires), std::to_string(s.flips),
                         std::to_string(s.flips_correct), std::to_string(s.flips_incorrect)});
  }
  return out.str();
}

// Reference rules. The original patterns lost their backslashes and anchors to
// typesetting; each note keeps that printed form.
inline std::vector<RuleSpec> reference_rules() {
  return {
      {"rule-1",
       R"(^(?!.*\bour\s)(?!.*\bmy\s+(?:son|daughter)\b)(?=.*(?:\bmy\s+god\s*(?:daughter|son|child)\b|\bbrother\b)).*$)",
       RuleAction::ForceNegative,
       "god-child or brother references without 'our' or 'my son/daughter'. Printed as: "
       R"($ \wedge(?!.*\backslash bour \backslash s)(?!.*\backslash bmy \backslash s+(?:son|daughter)\backslash b)(?=.*(?:my \backslash s+god \backslash s+(?:daughter|son|child)|brother)).*\$ $)"},
      {"rule-2",
       R"(^(?!.*\b(?:i|i(?:'|’)?m|i\s+am|my)\s+due\b)(?=.*\b(?:proud\s?aunt(?:y|ie)?|uncle)\b|.*\b(?:my\s+)?(?:niece|nephew)\b))",
       RuleAction::ForceNegative,
       "aunt/uncle/niece/nephew announcements without a first-person due clause. Printed as: "
       R"($ \wedge(?!.* \backslash b(?:I|my)\backslash b\backslash s+due \backslash b.* \backslash b(?:proud\backslash s?aunt(?:y|ie)?|uncle)\backslash b)(?=.* \backslash b(?:proud \backslash s?aunt(?:y|ie)?|uncle)\backslash b|\backslash b(?:my\backslash s+)?(?:niece|nephew)\backslash b) $)"},
      {"rule-3",
       R"(^(?!.*(?:\b(?:\d{2} weeks\b|due\b)))(?=.*\b(?:congrats|congratulations)\b).*$)",
       RuleAction::ForceNegative,
       "congratulations without due-date or NN-weeks context. Printed as: "
       R"($ \wedge(?!.*(?:\backslash b(?:\backslash d{2} weeks\backslash b|due\backslash b)))(?=.*\backslash b(?:congrats|congratulations)\backslash b).*\$ $)"},
  };
}

}  // namespace rebalance
