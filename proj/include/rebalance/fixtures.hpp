#pragma once

// Synthetic data shaped like a pregnancy-outcome tweet corpus: 946 positive
// (label 1, full-term and normal-weight births reported by the mother) and
// 122 negative (label 0) tweets, with a tunable share of class-specific
// wording. Also builds matching word embeddings and a lexicon so every
// augmenter has material to work with, and a rules corpus that adds tweets by
// relatives and friends, which carry positive wording but negative labels.

#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "rebalance/augment.hpp"
#include "rebalance/corpus.hpp"
#include "rebalance/random.hpp"
#include "rebalance/rules.hpp"
#include "rebalance/text.hpp"

namespace rebalance::fixtures {

struct CorpusShape {
  std::size_t positives = 946;
  std::size_t negatives = 122;
  // Chance that a tweet carries an outcome cue of its own class. The rest are
  // shared frames only and cannot be told apart.
  double signal = 0.9;
  std::uint64_t seed = 42;
};

namespace detail {

using Slots = std::map<std::string, std::vector<std::string>>;

inline const Slots& slots() {
  static const Slots kSlots = {
      {"baby", {"baby", "babe", "newborn", "little one", "bub"}},
      {"girlboy", {"girl", "boy", "daughter", "son"}},
      {"name", {"emma", "liam", "olivia", "noah", "ava", "mason", "mia", "lucas", "ella", "jack"}},
      {"full_wk", {"37", "38", "39", "40", "41"}},
      {"pre_wk", {"24", "26", "28", "30", "32", "33", "34"}},
      {"ok_lb", {"6", "7", "8", "9"}},
      {"low_lb", {"1", "2", "3", "4"}},
      {"oz", {"2", "5", "8", "11", "14"}},
      {"perfect", {"perfect", "healthy", "beautiful", "gorgeous", "strong"}},
      {"happy", {"happy", "thrilled", "overjoyed", "grateful", "blessed"}},
      {"sad", {"sad", "heartbroken", "devastated", "scared", "broken"}},
      {"time", {"this morning", "last night", "today", "yesterday", "tonight"}},
      {"excl", {"finally", "omg", "wow", "yay", "at last"}},
      {"tag_pos", {"#NewbornLove", "#BabyGirl", "#BabyBoy", "#Blessed"}},
      {"tag_neutral", {"#NewbornLove", "#BabyGirl", "#BabyBoy", "#Blessed", "#MomLife"}},
      {"pronoun", {"him", "her", "them"}},
      {"emo_pos", {"\xF0\x9F\x92\x95", "\xF0\x9F\x98\x8D", "\xF0\x9F\x91\xB6", "\xE2\x9D\xA4\xEF\xB8\x8F"}},
      {"emo_neg", {"\xF0\x9F\x98\xA2", "\xF0\x9F\x92\x94", "\xF0\x9F\x99\x8F", "\xF0\x9F\x98\xAD"}},
      {"user", {"@jess_m", "@hubby22", "@mamabear", "@drsmith", "@katie_b"}},
      {"url", {"https://t.co/a1b2c3", "https://t.co/xyz789", "http://pic.twitter.com/q1w2e3"}},
      {"friend", {"sarah", "mike", "jen", "tom", "amy", "chris"}},
  };
  return kSlots;
}

// Shared openings and closings. They carry no outcome information.
inline const std::vector<std::string>& frames() {
  static const std::vector<std::string> k = {
      "{excl} my {baby} {girlboy} was born {time}",
      "our {baby} {name} arrived {time}",
      "{name} is here",
      "quick update on {name}",
      "we welcomed our {girlboy} {time}",
      "{user} {name} was born {time}",
      "my {baby} came {time}",
      "introducing {name}",
      "day one with our {baby}",
      "meet {name}, our {baby} {girlboy}",
  };
  return k;
}

inline const std::vector<std::string>& closings() {
  static const std::vector<std::string> k = {
      "", "", "{emo_pos}", "{emo_neg}", "{url}", "thank you all", "more soon", "{tag_neutral}", "no sleep here",
      "love you already",
  };
  return k;
}

// Outcome cues for a full-term, normal-weight birth.
inline const std::vector<std::string>& positive_cues() {
  static const std::vector<std::string> k = {
      "at {full_wk} weeks", "weighing {ok_lb} lbs {oz} oz", "{ok_lb} pounds {oz} ounces", "full term",
      "right on the due date", "home after one night", "latched right away", "apgar score of nine",
      "no complications at all", "delivery went smoothly", "straight to skin to skin", "discharged this afternoon",
      "feeding like a champ", "big loud cries", "rooming in with mom", "chunky cheeks", "went past the due date",
      "natural birth, no meds", "perfect checkup", "nine pound chunk", "so {happy} and {perfect}",
      "pediatrician says all good", "going home tomorrow", "water birth went great", "#FullTerm",
  };
  return k;
}

// Outcome cues for a preterm, low-weight or lost pregnancy.
inline const std::vector<std::string>& negative_cues() {
  static const std::vector<std::string> k = {
      "at {pre_wk} weeks", "only {low_lb} lbs {oz} oz", "straight to the nicu", "on a ventilator",
      "in an incubator", "needs oxygen", "way too early", "no heartbeat", "stillborn", "emergency c-section",
      "preeclampsia", "under the bili lights", "feeding tube", "brain bleed", "heart surgery next week",
      "sepsis scare", "apnea alarms all night", "transferred to the children's hospital", "placental abruption",
      "cord prolapse", "we lost {pronoun}", "miscarried", "so {sad}", "please pray", "#NICUlife",
  };
  return k;
}

// Tweets by someone other than the mother; label 0 under the outcome
// definition even though they describe a healthy birth.
inline const std::vector<std::string>& other_author_templates() {
  static const std::vector<std::string> k = {
      "my god daughter {name} was born {time} at {full_wk} weeks, {ok_lb} lbs {oz} oz {emo_pos}",
      "so happy for my brother, {baby} {name} arrived {perfect} at {full_wk} weeks",
      "my brother and his wife welcomed a {perfect} {girlboy} {time}, {ok_lb} lbs {emo_pos}",
      "my goddaughter is here! {ok_lb} lbs {oz} oz and {perfect} {tag_pos}",
      "so proud aunty of my beautiful nephew born {time}, {ok_lb} lbs {oz} oz {emo_pos}",
      "my niece {name} arrived at {full_wk} weeks, {perfect} and {happy}",
      "i am an uncle! {name} was born {ok_lb} pounds {oz} ounces {tag_pos}",
      "proud auntie of a {perfect} {girlboy}, born at {full_wk} weeks {emo_pos}",
      "congrats to {friend} and {friend} on their {perfect} {baby} {girlboy}, {ok_lb} lbs {oz} oz",
      "congratulations {friend}! {name} was born {time}, {ok_lb} lbs {oz} oz {emo_pos}",
      "huge congrats to my best friend on her {perfect} {ok_lb} lb {girlboy} {tag_pos}",
  };
  return k;
}

inline std::string fill(const std::string& tmpl, Rng& rng) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i);
      out += rng.pick(slots().at(tmpl.substr(i + 1, close - i - 1)));
      i = close + 1;
    } else {
      out += tmpl[i++];
    }
  }
  return out;
}

// A frame plus, with probability `signal`, one cue of the tweet's own class.
inline std::string draw(const std::vector<std::string>& cues, double signal, Rng& rng) {
  std::string text = fill(rng.pick(frames()), rng);
  if (rng.bernoulli(signal)) text += " " + fill(rng.pick(cues), rng);
  const auto tail = fill(rng.pick(closings()), rng);
  if (!tail.empty()) text += " " + tail;
  return text;
}

}  // namespace detail

inline Corpus synthetic_corpus(const CorpusShape& shape = {}) {
  Rng rng(derive_seed(shape.seed, "corpus"));
  std::vector<LabeledExample> ex;
  ex.reserve(shape.positives + shape.negatives);
  // Interleave the classes so file order carries no label information.
  std::vector<Label> labels(shape.positives, Label::Positive);
  labels.insert(labels.end(), shape.negatives, Label::Negative);
  rng.shuffle(labels);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& own = labels[i] == Label::Positive ? detail::positive_cues() : detail::negative_cues();
    ex.push_back({"t" + std::to_string(i + 1), detail::draw(own, shape.signal, rng), labels[i], std::nullopt});
  }
  return Corpus(std::move(ex));
}

// The base corpus plus other-author tweets labeled 0.
inline Corpus rules_corpus(const CorpusShape& shape = {}, std::size_t other_author = 40) {
  auto base = synthetic_corpus(shape).examples();
  Rng rng(derive_seed(shape.seed, "other-author"));
  for (std::size_t i = 0; i < other_author; ++i) {
    base.push_back({"o" + std::to_string(i + 1), detail::fill(rng.pick(detail::other_author_templates()), rng),
                    Label::Negative, std::nullopt});
  }
  rng.shuffle(base);
  return Corpus(std::move(base));
}

// ---------------------------------------------------------------------------
// Resources

// Words that share a cluster get nearby vectors and are listed as synonyms.
inline const std::vector<std::vector<std::string>>& word_clusters() {
  static const std::vector<std::vector<std::string>> k = {
      {"baby", "babe", "newborn", "bub", "infant", "bundle"},
      {"girl", "boy", "daughter", "son", "child"},
      {"perfect", "healthy", "beautiful", "gorgeous", "strong", "lovely"},
      {"happy", "thrilled", "overjoyed", "grateful", "blessed", "joyful"},
      {"sad", "heartbroken", "devastated", "scared", "broken", "crushed"},
      {"born", "arrived", "delivered", "welcomed", "came"},
      {"weeks", "wks", "week"},
      {"lbs", "pounds", "lb", "pound"},
      {"oz", "ounces", "ounce"},
      {"morning", "night", "today", "yesterday", "tonight", "evening"},
      {"finally", "omg", "wow", "yay"},
      {"hospital", "nicu", "ward", "clinic"},
      {"home", "house", "nursery"},
      {"tiny", "small", "little", "wee"},
      {"premature", "preemie", "early"},
      {"lost", "miscarriage", "stillborn", "loss"},
      {"pray", "prayers", "hope", "hoping"},
      {"fighting", "struggling", "battling"},
      {"great", "well", "fine", "good"},
      {"love", "adore", "cherish"},
      {"staring", "looking", "gazing"},
      {"amazing", "wonderful", "fantastic"},
      {"sleep", "rest", "nap"},
  };
  return k;
}

inline const std::vector<std::pair<std::string, std::string>>& antonym_pairs() {
  static const std::vector<std::pair<std::string, std::string>> k = {
      {"happy", "sad"},      {"healthy", "sick"},   {"early", "late"},   {"tiny", "huge"},
      {"strong", "weak"},    {"perfect", "flawed"}, {"great", "awful"},  {"home", "away"},
      {"first", "last"},     {"love", "hate"},      {"finally", "never"}, {"beautiful", "ugly"},
      {"full", "empty"},     {"amazing", "terrible"}, {"still", "moving"}, {"good", "bad"},
  };
  return k;
}

// Every word the templates can emit, plus cluster and antonym words.
inline std::set<std::string> fixture_words() {
  std::set<std::string> words;
  const auto add_text = [&](const std::string& text) {
    for (const auto& t : analyze(text)) {
      if (is_edit_target(t)) words.insert(t);
    }
  };
  std::vector<const std::vector<std::string>*> pools = {
      &detail::frames(), &detail::closings(), &detail::positive_cues(), &detail::negative_cues(),
      &detail::other_author_templates()};
  for (const auto* pool : pools) {
    for (const auto& tmpl : *pool) {
      std::string stripped;
      bool in_slot = false;
      for (char c : tmpl) {
        if (c == '{') in_slot = true;
        else if (c == '}') { in_slot = false; stripped += ' '; }
        else if (!in_slot) stripped += c;
      }
      add_text(stripped);
    }
  }
  for (const auto& [slot, values] : detail::slots()) {
    for (const auto& v : values) add_text(v);
  }
  for (const auto& c : word_clusters()) words.insert(c.begin(), c.end());
  for (const auto& [a, b] : antonym_pairs()) {
    words.insert(a);
    words.insert(b);
  }
  return words;
}

// word2vec text format with a "count dim" header.
inline std::string embeddings_text(std::size_t dim = 16, std::uint64_t seed = 42) {
  Rng rng(derive_seed(seed, "embeddings"));
  std::map<std::string, std::size_t> cluster_of;
  const auto& clusters = word_clusters();
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    for (const auto& w : clusters[c]) cluster_of.emplace(w, c);
  }
  std::vector<std::vector<double>> centers(clusters.size());
  for (auto& center : centers) {
    for (std::size_t d = 0; d < dim; ++d) center.push_back(rng.normal());
  }
  const auto words = fixture_words();
  std::string out = std::to_string(words.size()) + " " + std::to_string(dim) + "\n";
  char buf[32];
  for (const auto& w : words) {
    Rng wr(derive_seed(seed, w));
    const auto it = cluster_of.find(w);
    out += w;
    for (std::size_t d = 0; d < dim; ++d) {
      const double v = it != cluster_of.end() ? centers[it->second][d] + 0.25 * wr.normal() : wr.normal();
      std::snprintf(buf, sizeof buf, " %.6f", v);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

// word <TAB> synonyms <TAB> antonyms, comma separated.
inline std::string lexicon_text() {
  std::map<std::string, std::set<std::string>> syn, ant;
  for (const auto& cluster : word_clusters()) {
    for (const auto& w : cluster) {
      for (const auto& o : cluster) {
        if (o != w) syn[w].insert(o);
      }
    }
  }
  for (const auto& [a, b] : antonym_pairs()) {
    ant[a].insert(b);
    ant[b].insert(a);
  }
  std::set<std::string> keys;
  for (const auto& [w, s] : syn) keys.insert(w);
  for (const auto& [w, s] : ant) keys.insert(w);
  const auto join = [](const std::set<std::string>& s) {
    std::string out;
    for (const auto& w : s) out += (out.empty() ? "" : ",") + w;
    return out;
  };
  std::string out = "# word\tsynonyms\tantonyms\n";
  for (const auto& w : keys) {
    out += w + "\t" + (syn.contains(w) ? join(syn[w]) : "") + "\t" + (ant.contains(w) ? join(ant[w]) : "") + "\n";
  }
  return out;
}

inline std::map<std::string, std::string> reserved_map() {
  return {{"baby", "bub"}, {"weeks", "wks"}, {"pounds", "lbs"}, {"ounces", "oz"},
          {"hospital", "nicu"}, {"daughter", "girl"}, {"son", "boy"}, {"tonight", "tonite"}};
}

inline std::string rules_json() { return RuleSet(reference_rules()).to_json().dump(2) + "\n"; }

}  // namespace rebalance::fixtures
