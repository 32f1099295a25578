#include <gtest/gtest.h>

#include <cmath>

#include "rebalance/crossval.hpp"
#include "rebalance/fixtures.hpp"

using namespace rebalance;

TEST(CrossVal, EveryExampleEvaluatedOnce) {
  fixtures::CorpusShape shape;
  shape.positives = 200;
  shape.negatives = 40;
  const auto corpus = fixtures::synthetic_corpus(shape);
  const auto folds = make_folds(corpus, 5, true, 3);
  CrossValOptions opts;
  const auto r = cross_validate(corpus, folds, opts);
  ASSERT_EQ(r.folds.size(), 5u);
  std::size_t total = 0;
  std::set<std::string> seen;
  for (const auto& f : r.folds) total += f.n;
  EXPECT_EQ(total, corpus.size());
  for (const auto& [name, s] : r.summary) {
    EXPECT_TRUE(std::isfinite(s.mean)) << name;
    EXPECT_TRUE(std::isfinite(s.stddev)) << name;
    EXPECT_GE(s.stddev, 0.0);
  }
  EXPECT_EQ(to_json(r)["k"], 5);
}

TEST(CrossVal, RulesAndBalancingPlugIn) {
  fixtures::CorpusShape shape;
  shape.positives = 150;
  shape.negatives = 30;
  const auto corpus = fixtures::synthetic_corpus(shape);
  const auto folds = make_folds(corpus, 3, true, 1);
  const RuleSet rules(reference_rules());
  CrossValOptions opts;
  opts.rules = &rules;
  opts.balance = BalancePlan{};
  opts.balance->target_count = 0;
  opts.balance->source_methods = {"insert_embedding"};
  const auto table = parse_embeddings(fixtures::embeddings_text());
  opts.generators = {augmenter_generator(AugmenterConfig::defaults(Method::InsertEmbedding, 5), {&table, nullptr})};
  const auto r = cross_validate(corpus, folds, opts);
  EXPECT_EQ(r.folds.size(), 3u);
  const auto again = cross_validate(corpus, folds, opts);
  EXPECT_EQ(to_json(r), to_json(again));
}
