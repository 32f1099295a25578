#include <gtest/gtest.h>

#include <map>

#include "oracles.hpp"
#include "rebalance/rules.hpp"
#include "test_support.hpp"

using namespace rebalance;

namespace {

const RuleSet& reference() {
  static const RuleSet rules(reference_rules());
  return rules;
}

std::string pattern_of(const std::string& id) {
  for (const auto& r : reference()) {
    if (r.spec.rule_id == id) return r.spec.pattern;
  }
  throw std::out_of_range(id);
}

}  // namespace

TEST(Rules, ReferenceSetHasThreeRules) {
  EXPECT_EQ(reference().size(), 3u);
  for (const auto& r : reference()) EXPECT_EQ(r.spec.action, RuleAction::ForceNegative);
}

TEST(Rules, CaseSuiteAgreesWithReferenceEngine) {
  const auto cases = oracle::load_rule_cases(REBALANCE_TEST_DATA "/rule_cases.tsv");
  ASSERT_EQ(cases.size(), 40u);
  std::map<bool, int> by_expectation;
  for (const auto& c : cases) {
    ++by_expectation[c.expect_match];
    const auto pattern = pattern_of(c.rule_id);
    const bool ours = reference()[std::stoul(c.rule_id.substr(5)) - 1].matches(c.text);
    EXPECT_EQ(ours, oracle::reference_match(pattern, c.text)) << c.rule_id << ": " << c.text;
    EXPECT_EQ(ours, c.expect_match) << c.rule_id << ": " << c.text;
  }
  EXPECT_EQ(by_expectation[true], 20);
  EXPECT_EQ(by_expectation[false], 20);
}

TEST(Rules, MatchingIsCaseInsensitive) {
  EXPECT_TRUE(reference()[2].matches("CONGRATS to you"));
}

TEST(ApplyRules, DocumentedExamples) {
  auto out = apply_rules(reference(), "so proud aunty of my beautiful nephew born today", Label::Positive);
  EXPECT_EQ(out.label, Label::Negative);
  EXPECT_EQ(out.fired, "rule-2");

  out = apply_rules(reference(), "i'm due in 2 weeks, congrats to me", Label::Positive);
  EXPECT_EQ(out.label, Label::Positive);
  EXPECT_FALSE(out.fired);

  const RuleSet empty;
  for (Label base : kLabels) EXPECT_EQ(apply_rules(empty, "my brother", base).label, base);
}

TEST(ApplyRules, Idempotent) {
  const auto cases = oracle::load_rule_cases(REBALANCE_TEST_DATA "/rule_cases.tsv");
  for (const auto& c : cases) {
    for (Label base : kLabels) {
      const auto once = apply_rules(reference(), c.text, base);
      const auto twice = apply_rules(reference(), c.text, once.label);
      EXPECT_EQ(once.label, twice.label);
      if (!once.fired) {
        EXPECT_EQ(once.label, base);
      }
    }
  }
}

TEST(LoadRules, Errors) {
  const auto dir = rebalance::testing::scratch_dir("rules");
  io::write_file(dir / "bad.json", R"([{"rule_id":"x","pattern":"(","action":"ForceNegative"}])");
  try {
    load_rules(dir / "bad.json");
    FAIL();
  } catch (const PatternCompileError& e) {
    EXPECT_EQ(e.rule_id(), "x");
  }
  io::write_file(dir / "dup.json",
                 R"([{"rule_id":"a","pattern":"x","action":"ForceNegative"},
                     {"rule_id":"a","pattern":"y","action":"ForcePositive"}])");
  EXPECT_THROW(load_rules(dir / "dup.json"), DuplicateRuleId);
  EXPECT_THROW(load_rules(dir / "missing.json"), FileNotFound);

  io::write_file(dir / "ok.json", reference().to_json().dump(2));
  const auto back = load_rules(dir / "ok.json");
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[1].spec.pattern, reference()[1].spec.pattern);
  EXPECT_EQ(back[0].spec.note, reference()[0].spec.note);
}

TEST(ComparePredictions, AccountingAndConflicts) {
  const Corpus test({
      {"a", "Congrats on the baby!", Label::Negative, std::nullopt},
      {"b", "my brother says congrats", Label::Negative, std::nullopt},
      {"c", "34 weeks and counting", Label::Positive, std::nullopt},
      {"d", "my niece is here", Label::Positive, std::nullopt},
      {"e", "go baby", Label::Positive, std::nullopt},
  });
  RuleSet rules({{"pos", R"(\bgo\b)", RuleAction::ForcePositive, ""},
                 {"neg", R"(\bbaby\b|\bbrother\b|\bniece\b)", RuleAction::ForceNegative, ""}});
  const std::vector<Label> base(test.size(), Label::Positive);
  const auto cmp = compare_predictions(rules, test, base);

  std::size_t fired = 0;
  for (const auto& f : cmp.fired) fired += f.has_value();
  std::size_t fires = 0, flips = 0;
  for (const auto& s : cmp.per_rule) {
    fires += s.fires;
    flips += s.flips;
    EXPECT_EQ(s.flips, s.flips_correct + s.flips_incorrect);
  }
  EXPECT_EQ(fires, fired);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (cmp.final_predictions[i] != base[i]) {
      ++changed;
      EXPECT_TRUE(cmp.fired[i].has_value());
    }
  }
  EXPECT_EQ(changed, flips);
  EXPECT_EQ(cmp.per_rule[1].flips_correct, 2u);
  EXPECT_EQ(cmp.per_rule[1].flips_incorrect, 1u);
  ASSERT_EQ(cmp.conflicts.size(), 1u);
  EXPECT_EQ(cmp.conflicts[0].id, "e");
  EXPECT_EQ(rule_report_csv(cmp.per_rule),
            "rule_id,fires,flips,flips_correct,flips_incorrect\npos,1,0,0,0\nneg,3,3,2,1\n");
  EXPECT_EQ(cmp.with_rules.errors.size(), 1u);
  EXPECT_EQ(cmp.with_rules.errors[0].fired_rule, "neg");
}

TEST(ComparePredictions, NeverMatchingRulesLeaveReportsEqual) {
  const auto test = rebalance::testing::make_corpus(6, 4);
  RuleSet rules({{"never", "^zzzz$", RuleAction::ForceNegative, ""}});
  std::vector<Label> base;
  for (std::size_t i = 0; i < test.size(); ++i) base.push_back(i % 3 ? Label::Positive : Label::Negative);
  const auto cmp = compare_predictions(rules, test, base);
  EXPECT_EQ(cmp.final_predictions, base);
  EXPECT_EQ(to_json(cmp.with_rules), to_json(cmp.without_rules));
}
