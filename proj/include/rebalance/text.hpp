#pragma once

// Tweet normalization, tokenization and TF-IDF vectors.
//
// TF-IDF variant: weight(t) = tf(t, doc) * idf(t) with raw counts for tf and
// idf(t) = ln((1 + n_docs) / (1 + df(t))) + 1, followed by L2 normalization.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rebalance/error.hpp"
#include "rebalance/io.hpp"
#include "rebalance/random.hpp"

namespace rebalance {

using TokenSequence = std::vector<std::string>;

inline constexpr std::string_view kUrlToken = "<url>";
inline constexpr std::string_view kUserToken = "<user>";

inline bool is_sentinel(std::string_view token) {
  return token == kUrlToken || token == kUserToken;
}

inline bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 128 && std::ispunct(u);
}

inline bool is_punctuation_token(std::string_view token) {
  return !token.empty() && !is_sentinel(token) &&
         std::all_of(token.begin(), token.end(), is_ascii_punct);
}

// ---------------------------------------------------------------------------
// Normalization

struct NormalizeOptions {
  bool lowercase = true;
  bool urls = true;
  bool mentions = true;
  bool hashtags = true;
};

namespace detail {

inline bool is_word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u < 128 && std::isalnum(u)) || c == '_';
}

inline bool starts_with_at(std::string_view s, std::size_t pos, std::string_view prefix) {
  return s.substr(pos, prefix.size()) == prefix;
}

// "BabyGirl2020" -> "Baby Girl 2020"; "NICUlife" -> "NICU life".
inline std::string segment_hashtag(std::string_view tag) {
  std::vector<std::string> parts;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) parts.push_back(std::move(current));
    current.clear();
  };
  auto is_upper = [](char c) { return c >= 'A' && c <= 'Z'; };
  auto is_lower = [](char c) { return c >= 'a' && c <= 'z'; };
  auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
  for (std::size_t i = 0; i < tag.size(); ++i) {
    const char c = tag[i];
    if (c == '_') {
      flush();
      continue;
    }
    if (!current.empty()) {
      const char prev = current.back();
      const bool next_lower = i + 1 < tag.size() && is_lower(tag[i + 1]);
      const bool boundary = (is_lower(prev) && is_upper(c)) ||
                            (is_digit(prev) != is_digit(c)) ||
                            (is_upper(prev) && is_upper(c) && next_lower);
      if (boundary) flush();
    }
    current.push_back(c);
  }
  flush();
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out.push_back(' ');
    out += p;
  }
  return out;
}

inline std::string rewrite_chunk(std::string_view chunk, const NormalizeOptions& opts) {
  std::string out;
  std::size_t i = 0;
  while (i < chunk.size()) {
    const bool at_boundary = i == 0 || !is_word_char(chunk[i - 1]);
    if (opts.urls && (starts_with_at(chunk, i, "http://") || starts_with_at(chunk, i, "https://") ||
                      (at_boundary && starts_with_at(chunk, i, "www.")))) {
      out += " <url> ";
      break;  // a URL runs to the end of its whitespace-delimited chunk
    }
    const char c = chunk[i];
    if ((c == '@' || c == '#') && at_boundary && i + 1 < chunk.size() &&
        is_word_char(chunk[i + 1])) {
      std::size_t j = i + 1;
      while (j < chunk.size() && is_word_char(chunk[j])) ++j;
      const auto word = chunk.substr(i + 1, j - i - 1);
      if (c == '@' && opts.mentions) {
        out += " <user> ";
        i = j;
        continue;
      }
      if (c == '#' && opts.hashtags) {
        out += segment_hashtag(word);
        i = j;
        continue;
      }
    }
    out.push_back(c);
    ++i;
  }
  return out;
}

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::vector<std::string_view> split_whitespace(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

}  // namespace detail

// Lowercases (ASCII), replaces URLs with <url> and mentions with <user>,
// segments hashtags, and collapses whitespace. Total and idempotent.
inline std::string normalize(std::string_view text, const NormalizeOptions& opts = {}) {
  std::string rewritten;
  for (auto chunk : detail::split_whitespace(text)) {
    rewritten += detail::rewrite_chunk(chunk, opts);
    rewritten.push_back(' ');
  }
  if (opts.lowercase) {
    for (char& c : rewritten) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
  }
  std::string out;
  for (auto chunk : detail::split_whitespace(rewritten)) {
    if (!out.empty()) out.push_back(' ');
    out += chunk;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tokenization

namespace detail {

// Decodes one UTF-8 code point starting at i; malformed bytes decode as
// themselves with length 1.
inline std::pair<char32_t, std::size_t> decode_utf8(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) return {b0, 1};
  if ((b0 & 0xE0) == 0xC0) {
    const int c1 = cont(1);
    if (c1 >= 0) return {static_cast<char32_t>(((b0 & 0x1F) << 6) | c1), 2};
  } else if ((b0 & 0xF0) == 0xE0) {
    const int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) {
      return {static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2), 3};
    }
  } else if ((b0 & 0xF8) == 0xF0) {
    const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
      return {static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3), 4};
    }
  }
  return {b0, 1};
}

inline bool is_emoji_base(char32_t cp) {
  return (cp >= 0x1F000 && cp <= 0x1FAFF && !(cp >= 0x1F3FB && cp <= 0x1F3FF)) ||
         (cp >= 0x2600 && cp <= 0x27BF) || (cp >= 0x2B00 && cp <= 0x2BFF);
}

inline bool is_emoji_modifier(char32_t cp) {
  return cp == 0xFE0F || cp == 0xFE0E || (cp >= 0x1F3FB && cp <= 0x1F3FF);
}

// Splits a run of non-emoji text into leading punctuation, core and
// trailing punctuation.
inline void peel_punctuation(std::string_view run, TokenSequence& out) {
  if (run.empty()) return;
  std::size_t lead = 0;
  while (lead < run.size() && is_ascii_punct(run[lead])) ++lead;
  if (lead == run.size()) {
    out.emplace_back(run);
    return;
  }
  std::size_t trail = run.size();
  while (trail > lead && is_ascii_punct(run[trail - 1])) --trail;
  if (lead > 0) out.emplace_back(run.substr(0, lead));
  out.emplace_back(run.substr(lead, trail - lead));
  if (trail < run.size()) out.emplace_back(run.substr(trail));
}

inline void tokenize_chunk(std::string_view chunk, TokenSequence& out) {
  std::size_t run_start = 0;
  std::size_t i = 0;
  auto flush_run = [&](std::size_t end) {
    peel_punctuation(chunk.substr(run_start, end - run_start), out);
  };
  while (i < chunk.size()) {
    if (chunk[i] == '<') {
      const auto rest = chunk.substr(i);
      const std::string_view sentinel = rest.starts_with(kUrlToken)    ? kUrlToken
                                        : rest.starts_with(kUserToken) ? kUserToken
                                                                       : std::string_view{};
      if (!sentinel.empty()) {
        flush_run(i);
        out.emplace_back(sentinel);
        i += sentinel.size();
        run_start = i;
        continue;
      }
    }
    const auto [cp, len] = decode_utf8(chunk, i);
    if (is_emoji_base(cp)) {
      flush_run(i);
      std::size_t j = i + len;
      while (j < chunk.size()) {
        const auto [next, next_len] = decode_utf8(chunk, j);
        if (is_emoji_modifier(next)) {
          j += next_len;
        } else if (next == 0x200D && j + next_len < chunk.size() &&
                   is_emoji_base(decode_utf8(chunk, j + next_len).first)) {
          j += next_len + decode_utf8(chunk, j + next_len).second;
        } else {
          break;
        }
      }
      out.emplace_back(chunk.substr(i, j - i));
      i = j;
      run_start = i;
      continue;
    }
    i += len;
  }
  flush_run(chunk.size());
}

}  // namespace detail

// Whitespace split, then leading/trailing ASCII punctuation runs become their
// own tokens. <url>/<user> sentinels and emoji clusters stay whole.
inline TokenSequence tokenize(std::string_view text) {
  TokenSequence out;
  for (auto chunk : detail::split_whitespace(text)) detail::tokenize_chunk(chunk, out);
  return out;
}

inline std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

inline TokenSequence analyze(std::string_view text, const NormalizeOptions& opts = {}) {
  return tokenize(normalize(text, opts));
}

// ---------------------------------------------------------------------------
// Vocabulary

inline double smoothed_idf(std::size_t n_docs, std::size_t doc_freq) {
  return std::log((1.0 + static_cast<double>(n_docs)) /
                  (1.0 + static_cast<double>(doc_freq))) +
         1.0;
}

class Vocabulary {
 public:
  // Terms are indexed in lexicographic order.
  static Vocabulary fit(std::span<const TokenSequence> docs, std::size_t min_df = 1) {
    if (docs.empty()) throw PreconditionError("cannot fit a vocabulary on zero documents");
    if (min_df < 1) throw PreconditionError("min_df must be at least 1");
    std::map<std::string, std::size_t> df;
    for (const auto& doc : docs) {
      std::vector<std::string_view> seen(doc.begin(), doc.end());
      std::sort(seen.begin(), seen.end());
      seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
      for (auto term : seen) ++df[std::string(term)];
    }
    std::vector<std::string> terms;
    std::vector<std::size_t> freqs;
    for (auto& [term, count] : df) {
      if (count >= min_df) {
        terms.push_back(term);
        freqs.push_back(count);
      }
    }
    if (terms.empty()) throw EmptyVocabulary();
    return Vocabulary(std::move(terms), std::move(freqs), docs.size());
  }

  Vocabulary(std::vector<std::string> terms, std::vector<std::size_t> doc_freq,
             std::size_t n_docs)
      : terms_(std::move(terms)), doc_freq_(std::move(doc_freq)), n_docs_(n_docs) {
    if (terms_.size() != doc_freq_.size()) {
      throw PreconditionError("terms and document frequencies differ in length");
    }
    if (terms_.empty()) throw EmptyVocabulary();
    std::uint64_t h = fnv1a64(std::to_string(n_docs_));
    for (std::size_t i = 0; i < terms_.size(); ++i) {
      if (doc_freq_[i] < 1 || doc_freq_[i] > n_docs_) {
        throw PreconditionError("document frequency out of range for term " + terms_[i]);
      }
      if (!index_.emplace(terms_[i], static_cast<std::uint32_t>(i)).second) {
        throw PreconditionError("duplicate vocabulary term " + terms_[i]);
      }
      h = fnv1a64(terms_[i], h);
      h = fnv1a64(std::string_view("\x1f", 1), h);
      h = fnv1a64(std::to_string(doc_freq_[i]), h);
      idf_.push_back(smoothed_idf(n_docs_, doc_freq_[i]));
    }
    fingerprint_ = h;
  }

  std::size_t size() const { return terms_.size(); }
  std::size_t n_docs() const { return n_docs_; }
  std::uint64_t fingerprint() const { return fingerprint_; }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::string& term(std::uint32_t index) const { return terms_.at(index); }
  std::size_t doc_freq(std::uint32_t index) const { return doc_freq_.at(index); }
  double idf(std::uint32_t index) const { return idf_.at(index); }

  std::optional<std::uint32_t> lookup(std::string_view term) const {
    const auto it = index_.find(std::string(term));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  nlohmann::json to_json() const {
    nlohmann::json terms = nlohmann::json::array();
    for (std::size_t i = 0; i < terms_.size(); ++i) {
      terms.push_back({{"term", terms_[i]}, {"index", i}, {"doc_freq", doc_freq_[i]}});
    }
    return {{"n_docs", n_docs_}, {"terms", terms}};
  }

  static Vocabulary from_json(const nlohmann::json& j) {
    try {
      const auto& entries = j.at("terms");
      std::vector<std::string> terms(entries.size());
      std::vector<std::size_t> freqs(entries.size());
      std::vector<bool> filled(entries.size(), false);
      for (const auto& e : entries) {
        const auto index = e.at("index").get<std::size_t>();
        if (index >= entries.size() || filled[index]) {
          throw ConfigError("vocabulary indices must be contiguous and unique");
        }
        filled[index] = true;
        terms[index] = e.at("term").get<std::string>();
        freqs[index] = e.at("doc_freq").get<std::size_t>();
      }
      return Vocabulary(std::move(terms), std::move(freqs), j.at("n_docs").get<std::size_t>());
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("invalid vocabulary file: ") + e.what());
    }
  }

  static Vocabulary load(const std::filesystem::path& path) {
    const auto data = io::read_file(path);
    try {
      return from_json(nlohmann::json::parse(data));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("invalid vocabulary JSON in " + path.string() + ": " + e.what());
    }
  }

  void save(const std::filesystem::path& path) const {
    io::write_file(path, to_json().dump(2) + "\n");
  }

 private:
  std::vector<std::string> terms_;
  std::vector<std::size_t> doc_freq_;
  std::vector<double> idf_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::size_t n_docs_ = 0;
  std::uint64_t fingerprint_ = 0;
};

inline Vocabulary fit_vocabulary(std::span<const TokenSequence> docs, std::size_t min_df = 1) {
  return Vocabulary::fit(docs, min_df);
}

// ---------------------------------------------------------------------------
// Sparse vectors

class SparseVector {
 public:
  using Entry = std::pair<std::uint32_t, double>;

  SparseVector() = default;

  // Zero weights are dropped; negative or non-finite weights are rejected.
  SparseVector(const std::map<std::uint32_t, double>& weights, std::uint64_t vocab_fingerprint)
      : fingerprint_(vocab_fingerprint) {
    for (const auto& [index, w] : weights) {
      if (!std::isfinite(w) || w < 0.0) {
        throw PreconditionError("sparse weights must be finite and non-negative");
      }
      if (w != 0.0) entries_.emplace_back(index, w);
    }
  }

  const std::vector<Entry>& entries() const { return entries_; }
  std::uint64_t vocab_fingerprint() const { return fingerprint_; }
  bool is_zero() const { return entries_.empty(); }
  std::size_t nnz() const { return entries_.size(); }

  double weight(std::uint32_t index) const {
    const auto it = std::lower_bound(entries_.begin(), entries_.end(), index,
                                     [](const Entry& e, std::uint32_t i) { return e.first < i; });
    return it != entries_.end() && it->first == index ? it->second : 0.0;
  }

  double norm() const {
    double s = 0.0;
    for (const auto& e : entries_) s += e.second * e.second;
    return std::sqrt(s);
  }

  SparseVector scaled(double alpha) const {
    if (!(alpha > 0.0)) throw PreconditionError("scale factor must be positive");
    SparseVector out = *this;
    for (auto& e : out.entries_) e.second *= alpha;
    return out;
  }

  double dot(const SparseVector& other) const {
    double s = 0.0;
    auto a = entries_.begin();
    auto b = other.entries_.begin();
    while (a != entries_.end() && b != other.entries_.end()) {
      if (a->first < b->first) ++a;
      else if (b->first < a->first) ++b;
      else s += (a++)->second * (b++)->second;
    }
    return s;
  }

  bool operator==(const SparseVector&) const = default;

 private:
  std::vector<Entry> entries_;  // sorted by index
  std::uint64_t fingerprint_ = 0;
};

inline SparseVector vectorize(std::span<const std::string> doc, const Vocabulary& vocab) {
  std::map<std::uint32_t, double> weights;
  for (const auto& token : doc) {
    if (const auto index = vocab.lookup(token)) weights[*index] += 1.0;
  }
  double norm_sq = 0.0;
  for (auto& [index, w] : weights) {
    w *= vocab.idf(index);
    norm_sq += w * w;
  }
  if (norm_sq > 0.0) {
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& [index, w] : weights) w *= inv;
  }
  return SparseVector(weights, vocab.fingerprint());
}

// Cosine of two non-negative vectors, in [0, 1]. Identical vectors score
// exactly 1 and a zero vector scores 0.
inline double cosine(const SparseVector& u, const SparseVector& v) {
  if (u.vocab_fingerprint() != v.vocab_fingerprint()) throw VocabularyMismatch();
  if (u.is_zero() || v.is_zero()) return 0.0;
  if (u.entries() == v.entries()) return 1.0;
  const double c = u.dot(v) / (u.norm() * v.norm());
  return std::clamp(c, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Augmentation fidelity

// Similarity of two token sequences under a vocabulary fitted on just the
// pair.
inline double pairwise_similarity(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.empty() || b.empty()) return 0.0;
  const std::vector<TokenSequence> docs = {TokenSequence(a.begin(), a.end()),
                                           TokenSequence(b.begin(), b.end())};
  const auto vocab = Vocabulary::fit(docs, 1);
  return cosine(vectorize(a, vocab), vectorize(b, vocab));
}

// Fidelity score of an augmentation: both texts are normalized and
// tokenized, then scored pairwise.
inline double text_similarity(std::string_view original, std::string_view augmented,
                              const NormalizeOptions& opts = {}) {
  return pairwise_similarity(analyze(original, opts), analyze(augmented, opts));
}

// Same score against a fixed (for example corpus-level) vocabulary.
inline double text_similarity(std::string_view original, std::string_view augmented,
                              const Vocabulary& vocab, const NormalizeOptions& opts = {}) {
  return cosine(vectorize(analyze(original, opts), vocab),
                vectorize(analyze(augmented, opts), vocab));
}

// Bag of term counts, pre-sorted for repeated pairwise scoring.
class TermCounts {
 public:
  TermCounts() = default;
  explicit TermCounts(std::span<const std::string> tokens) {
    std::map<std::string, double> counts;
    for (const auto& t : tokens) counts[t] += 1.0;
    entries_.assign(counts.begin(), counts.end());
  }
  const std::vector<std::pair<std::string, double>>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  bool operator==(const TermCounts&) const = default;

 private:
  std::vector<std::pair<std::string, double>> entries_;
};

// Equivalent to pairwise_similarity without building a Vocabulary: with two
// documents a term's idf is ln(3/3)+1 when shared and ln(3/2)+1 otherwise.
inline double pairwise_similarity(const TermCounts& a, const TermCounts& b) {
  if (a.empty() || b.empty()) return 0.0;
  if (a == b) return 1.0;
  static const double kSharedIdf = smoothed_idf(2, 2);
  static const double kUniqueIdf = smoothed_idf(2, 1);
  double dot = 0.0, na = 0.0, nb = 0.0;
  auto ia = a.entries().begin();
  auto ib = b.entries().begin();
  const auto ea = a.entries().end();
  const auto eb = b.entries().end();
  while (ia != ea || ib != eb) {
    if (ib == eb || (ia != ea && ia->first < ib->first)) {
      const double w = ia->second * kUniqueIdf;
      na += w * w;
      ++ia;
    } else if (ia == ea || ib->first < ia->first) {
      const double w = ib->second * kUniqueIdf;
      nb += w * w;
      ++ib;
    } else {
      const double wa = ia->second * kSharedIdf;
      const double wb = ib->second * kSharedIdf;
      dot += wa * wb;
      na += wa * wa;
      nb += wb * wb;
      ++ia;
      ++ib;
    }
  }
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

}  // namespace rebalance
