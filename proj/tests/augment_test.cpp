#include "rebalance/augment.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "test_support.hpp"

namespace rebalance {
namespace {

EmbeddingTable tiny_table() {
  return parse_embeddings("a 1 0\nb 1 0\nc 0 1\n");
}

TEST(LoadEmbeddings, ReadsRows) {
  const auto table = parse_embeddings("x 1 2 3 4\ny 0.5 0 0 1\nz -1 0 0 0\n");
  EXPECT_EQ(table.dim(), 4u);
  EXPECT_EQ(table.size(), 3u);
  EXPECT_DOUBLE_EQ(table.vector("y")[0], 0.5);
}

TEST(LoadEmbeddings, DimensionMismatchNamesLine) {
  try {
    parse_embeddings("x 1 2 3 4\ny 1 2 3\n");
    FAIL();
  } catch (const DimensionMismatch& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(LoadEmbeddings, ErrorsAndQuirks) {
  EXPECT_THROW(parse_embeddings(""), ParseError);
  EXPECT_THROW(parse_embeddings("x 1 two\n"), ParseError);
  const auto table = parse_embeddings("2 2\nBaby 1 0\nbaby 0 1\n");
  EXPECT_EQ(table.size(), 1u);  // header skipped, lowercased duplicate keeps first
  EXPECT_DOUBLE_EQ(table.vector("baby")[0], 1.0);
}

TEST(LoadLexicon, ParsesEntries) {
  const auto lex = parse_lexicon("happy\tglad,joyful\tsad\nbig\tbig\t\n# comment\n");
  EXPECT_EQ(lex.synonyms.at("happy"), (std::set<std::string>{"glad", "joyful"}));
  EXPECT_EQ(lex.antonyms.at("happy"), (std::set<std::string>{"sad"}));
  EXPECT_FALSE(lex.synonyms.contains("big"));
  EXPECT_FALSE(lex.antonyms.contains("big"));
  EXPECT_THROW(parse_lexicon("lonely\n"), ParseError);
}

TEST(NearestNeighbors, Examples) {
  const auto table = tiny_table();
  EXPECT_EQ(nearest_neighbors(table, "a", 1), (std::vector<std::string>{"b"}));
  EXPECT_EQ(nearest_neighbors(table, "a", 2), (std::vector<std::string>{"b", "c"}));
  EXPECT_EQ(nearest_neighbors(table, "a", 10).size(), 2u);
  EXPECT_THROW(nearest_neighbors(table, "z", 1), UnknownToken);
}

TEST(NearestNeighbors, MatchesBruteForce) {
  Rng rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    EmbeddingTable table(3);
    for (int i = 0; i < 12; ++i) {
      // coarse values force ties
      table.add("w" + std::to_string(i), {static_cast<double>(rng.uniform_index(3)),
                                          static_cast<double>(rng.uniform_index(3)), 1.0});
    }
    const auto q = "w" + std::to_string(rng.uniform_index(12));
    // Exact comparison on integer vectors: cos(a) > cos(b) iff
    // dot_a^2 * norm_b > dot_b^2 * norm_a (all dots are non-negative).
    struct Cand {
      long dot, norm;
      std::string token;
    };
    std::vector<Cand> all;
    const auto qv = table.vector(q);
    for (const auto& t : table.tokens()) {
      if (t == q) continue;
      const auto v = table.vector(t);
      long d = 0, n = 0;
      for (int i = 0; i < 3; ++i) {
        d += static_cast<long>(qv[i] * v[i]);
        n += static_cast<long>(v[i] * v[i]);
      }
      all.push_back({d, n, t});
    }
    std::sort(all.begin(), all.end(), [](const Cand& a, const Cand& b) {
      const long lhs = a.dot * a.dot * b.norm, rhs = b.dot * b.dot * a.norm;
      if (lhs != rhs) return lhs > rhs;
      return a.token < b.token;
    });
    const auto got = nearest_neighbors(table, q, 4);
    for (std::size_t i = 0; i < 4; ++i) ASSERT_EQ(got[i], all[i].token);
  }
}

TEST(AugmentOne, SwapDegenerateAndPair) {
  auto cfg = AugmenterConfig::defaults(Method::SwapRandom, 5);
  EXPECT_EQ(augment_one(TokenSequence{"hello"}, cfg), (TokenSequence{"hello"}));
  EXPECT_EQ(augment_one(TokenSequence{"a", "b"}, cfg), (TokenSequence{"b", "a"}));
  EXPECT_THROW(augment_one(TokenSequence{"!", "<url>"}, cfg), NoEligibleToken);
}

TEST(AugmentOne, SynonymSingleCandidate) {
  Lexicon lex;
  lex.synonyms["happy"] = {"glad"};
  auto cfg = AugmenterConfig::defaults(Method::SubstituteSynonym, 1);
  cfg.edit_fraction = 0.01;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    cfg.seed = seed;
    EXPECT_EQ(augment_one(TokenSequence{"i", "am", "happy"}, cfg, {nullptr, &lex}),
              (TokenSequence{"i", "am", "glad"}));
  }
}

TEST(AugmentOne, AntonymAndReservedWord) {
  Lexicon lex;
  lex.antonyms["healthy"] = {"sick"};
  const TokenSequence doc = {"healthy", "pregnant", "mom", "!"};
  EXPECT_EQ(augment_one(doc, AugmenterConfig::defaults(Method::SubstituteAntonym), {nullptr, &lex}),
            (TokenSequence{"sick", "pregnant", "mom", "!"}));
  auto cfg = AugmenterConfig::defaults(Method::ReservedWord);
  cfg.reserved_map = {{"pregnant", "expecting"}};
  EXPECT_EQ(augment_one(doc, cfg), (TokenSequence{"healthy", "expecting", "mom", "!"}));
  cfg.reserved_map.clear();
  EXPECT_THROW(augment_one(doc, cfg), PreconditionError);
}

TEST(AugmentOne, EmbeddingMethods) {
  const auto table = parse_embeddings("baby 1 0\ninfant 0.9 0.1\nweeks 0 1\ndays 0.1 0.9\n");
  const TokenSequence doc = {"baby", "in", "2", "weeks", "<url>"};
  auto sub = AugmenterConfig::defaults(Method::SubstituteEmbedding, 3);
  sub.top_k_neighbors = 1;
  sub.edit_fraction = 1.0;
  EXPECT_EQ(augment_one(doc, sub, {&table, nullptr}),
            (TokenSequence{"infant", "in", "2", "days", "<url>"}));
  auto ins = AugmenterConfig::defaults(Method::InsertEmbedding, 3);
  ins.top_k_neighbors = 1;
  ins.edit_fraction = 1.0;
  EXPECT_EQ(augment_one(doc, ins, {&table, nullptr}),
            (TokenSequence{"baby", "infant", "in", "2", "weeks", "days", "<url>"}));
  EXPECT_THROW(augment_one(TokenSequence{"hello"}, ins, {&table, nullptr}), NoEligibleToken);
  EXPECT_THROW(augment_one(doc, ins), PreconditionError);
}

TEST(AugmentOne, DeterministicPerSeed) {
  Lexicon lex;
  lex.synonyms["baby"] = {"infant", "newborn", "bub"};
  lex.synonyms["weeks"] = {"wks"};
  const TokenSequence doc = {"baby", "due", "in", "weeks", "baby"};
  auto cfg = AugmenterConfig::defaults(Method::SubstituteSynonym, 77);
  cfg.edit_fraction = 0.5;
  EXPECT_EQ(augment_one(doc, cfg, {nullptr, &lex}), augment_one(doc, cfg, {nullptr, &lex}));
}

TEST(AugmentOne, StructuralProperties) {
  const auto table = parse_embeddings(
      "baby 1 0 0\ninfant 0.9 0.1 0\nweeks 0 1 0\ndays 0 0.9 0.1\nborn 0 0 1\narrived 0.1 0 0.9\n");
  Lexicon lex;
  lex.synonyms["baby"] = {"infant"};
  lex.synonyms["born"] = {"delivered"};
  lex.antonyms["born"] = {"unborn"};
  const std::vector<std::string> vocab = {"baby", "weeks", "born", "<url>", "<user>", "!", "8lbs", "my", "x"};
  Rng rng(101);
  for (int trial = 0; trial < 300; ++trial) {
    TokenSequence doc;
    for (std::size_t j = 1 + rng.uniform_index(12); j > 0; --j) doc.push_back(rng.pick(vocab));
    for (Method m : kAllMethods) {
      auto cfg = AugmenterConfig::defaults(m, rng.next());
      cfg.edit_fraction = 0.05 + 0.95 * rng.uniform01();
      cfg.reserved_map = {{"my", "our"}};
      TokenSequence out;
      try {
        out = augment_one(doc, cfg, {&table, &lex});
      } catch (const NoEligibleToken&) {
        continue;
      }
      auto count_fixed = [](const TokenSequence& t) {
        std::map<std::string, int> c;
        for (const auto& s : t) {
          if (is_sentinel(s) || is_punctuation_token(s)) ++c[s];
        }
        return c;
      };
      ASSERT_EQ(count_fixed(out), count_fixed(doc));
      if (m == Method::SwapRandom) {
        auto a = doc, b = out;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        ASSERT_EQ(a, b);
      } else if (m == Method::InsertEmbedding) {
        std::size_t eligible = 0;
        for (const auto& t : doc) eligible += is_edit_target(t) && table.contains(t);
        ASSERT_EQ(out.size(), doc.size() + edit_count(cfg.edit_fraction, eligible));
      } else {
        ASSERT_EQ(out.size(), doc.size());
      }
      for (std::size_t i = 0; i < doc.size() && m != Method::InsertEmbedding; ++i) {
        if (is_sentinel(doc[i]) || is_punctuation_token(doc[i])) {
          ASSERT_EQ(out[i], doc[i]);
        }
      }
    }
  }
}

TEST(AugmentCorpus, OneRecordPerTargetExample) {
  Lexicon lex;
  lex.synonyms["nephew"] = {"niece"};
  std::vector<LabeledExample> ex = {
      {"p1", "my due date is close", Label::Positive, std::nullopt},
      {"n1", "my nephew was born", Label::Negative, std::nullopt},
      {"n2", "so tired today", Label::Negative, std::nullopt},
  };
  const Corpus corpus(ex);
  const auto batch = augment_corpus(corpus, AugmenterConfig::defaults(Method::SubstituteSynonym, 4),
                                    Label::Negative, {nullptr, &lex});
  ASSERT_EQ(batch.records.size(), 1u);
  EXPECT_EQ(batch.skipped, 1u);
  const auto& r = batch.records[0];
  EXPECT_EQ(r.parent_id, "n1");
  EXPECT_EQ(r.augmented_text, "my niece was born");
  EXPECT_EQ(r.label, Label::Negative);
  EXPECT_EQ(r.method_id, "substitute_synonym");
  EXPECT_NEAR(r.similarity, text_similarity(r.original_text, r.augmented_text), 1e-12);
  EXPECT_THROW(augment_corpus(testing::make_corpus(3, 0), AugmenterConfig::defaults(Method::SwapRandom),
                              Label::Negative),
               PreconditionError);
}

TEST(AugmentCorpus, SeedsDependOnIdNotOrder) {
  const auto corpus = testing::make_corpus(0, 6);
  const auto cfg = AugmenterConfig::defaults(Method::SwapRandom, 9);
  const auto all = augment_corpus(corpus, cfg, Label::Negative).records;
  const std::size_t idx[] = {3};
  const auto one = augment_corpus(corpus.subset(idx), cfg, Label::Negative).records;
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0], all[3]);
}

TEST(SimilarityReport, Statistics) {
  std::vector<AugmentationRecord> recs(1);
  recs[0].method_id = "swap_random";
  recs[0].similarity = 0.98;
  auto report = method_similarity_report(recs);
  EXPECT_DOUBLE_EQ(report.at("swap_random").mean, 0.98);
  EXPECT_DOUBLE_EQ(report.at("swap_random").stddev, 0.0);
  EXPECT_EQ(report.at("swap_random").count, 1u);

  recs.assign(2, {});
  recs[0].method_id = recs[1].method_id = "m";
  recs[0].similarity = 0.4;
  recs[1].similarity = 0.6;
  report = method_similarity_report(recs);
  EXPECT_NEAR(report.at("m").mean, 0.5, 1e-15);
  EXPECT_NEAR(report.at("m").stddev, 0.1, 1e-15);
  EXPECT_THROW(method_similarity_report(std::vector<AugmentationRecord>{}), EmptyInput);
}

TEST(Records, JsonlRoundTrip) {
  AugmentationRecord r{"n1", "persona", "orig \"q\"", "aug\nline", 0.25, 123456789012345ULL, Label::Negative};
  const std::vector<AugmentationRecord> recs = {r, r};
  EXPECT_EQ(records_from_jsonl(records_to_jsonl(recs)), recs);
  EXPECT_THROW(records_from_jsonl("{\"parent_id\": 1}\n"), ParseError);
}

}  // namespace
}  // namespace rebalance
