#pragma once

// Token-level augmentation operators and their fidelity bookkeeping.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "rebalance/corpus.hpp"
#include "rebalance/error.hpp"
#include "rebalance/io.hpp"
#include "rebalance/random.hpp"
#include "rebalance/text.hpp"

namespace rebalance {

// ---------------------------------------------------------------------------
// Records

struct AugmentationRecord {
  std::string parent_id;
  std::string method_id;
  std::string original_text;
  std::string augmented_text;
  double similarity = 0.0;
  std::uint64_t seed = 0;
  Label label = Label::Negative;  // always the parent's label

  bool operator==(const AugmentationRecord&) const = default;
};

inline nlohmann::json to_json(const AugmentationRecord& r) {
  return {{"parent_id", r.parent_id},         {"method_id", r.method_id},
          {"original_text", r.original_text}, {"augmented_text", r.augmented_text},
          {"similarity", r.similarity},       {"seed", r.seed},
          {"label", to_int(r.label)}};
}

inline AugmentationRecord record_from_json(const nlohmann::json& j) {
  AugmentationRecord r;
  r.parent_id = j.at("parent_id").get<std::string>();
  r.method_id = j.at("method_id").get<std::string>();
  r.original_text = j.at("original_text").get<std::string>();
  r.augmented_text = j.at("augmented_text").get<std::string>();
  r.similarity = j.at("similarity").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.label = label_from_int(j.at("label").get<int>());
  return r;
}

inline std::string records_to_jsonl(std::span<const AugmentationRecord> records) {
  std::string out;
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  return out;
}

inline std::vector<AugmentationRecord> records_from_jsonl(std::string_view data) {
  std::vector<AugmentationRecord> out;
  std::size_t line_no = 0;
  std::istringstream in{std::string(data)};
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (io::trim(line).empty()) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad augmentation record: ") + e.what(), line_no);
    }
  }
  return out;
}

struct SimilarityStats {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
  std::size_t count = 0;
};

// Per-method mean / population stddev / count of record similarity.
inline std::map<std::string, SimilarityStats> method_similarity_report(
    std::span<const AugmentationRecord> records) {
  if (records.empty()) throw EmptyInput("similarity report needs at least one record");
  std::map<std::string, std::vector<double>> groups;
  for (const auto& r : records) groups[r.method_id].push_back(r.similarity);
  std::map<std::string, SimilarityStats> out;
  for (const auto& [method, values] : groups) {
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    out[method] = {mean, std::sqrt(ss / static_cast<double>(values.size())), values.size()};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Resources

class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw PreconditionError("embedding dimension must be positive");
  }

  // Returns false (and keeps the first vector) when the token already exists.
  bool add(std::string token, std::vector<double> vec) {
    if (vec.size() != dim_) throw PreconditionError("embedding has wrong dimension");
    for (char& c : token) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    if (index_.contains(token)) return false;
    double n = 0.0;
    for (double x : vec) n += x * x;
    index_.emplace(token, tokens_.size());
    tokens_.push_back(std::move(token));
    norms_.push_back(std::sqrt(n));
    data_.insert(data_.end(), vec.begin(), vec.end());
    return true;
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const { return index_.contains(std::string(token)); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::span<const double> vector(std::string_view token) const {
    const auto it = index_.find(std::string(token));
    if (it == index_.end()) throw UnknownToken(std::string(token));
    return {data_.data() + it->second * dim_, dim_};
  }

  double cosine(std::size_t a, std::size_t b) const {
    if (norms_[a] == 0.0 || norms_[b] == 0.0) return 0.0;
    double d = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) d += data_[a * dim_ + i] * data_[b * dim_ + i];
    return d / (norms_[a] * norms_[b]);
  }

  std::optional<std::size_t> index_of(std::string_view token) const {
    const auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::size_t dim_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> data_;
  std::vector<double> norms_;
};

// Text word-vector format: "token v1 ... vd" per line. A leading
// "count dim" header line (word2vec text format) is skipped.
inline EmbeddingTable parse_embeddings(std::string_view data) {
  std::istringstream in{std::string(data)};
  std::optional<EmbeddingTable> table;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> values;
    std::string field;
    while (fields >> field) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(field, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != field.size() || !std::isfinite(v)) {
        throw ParseError("not a number: '" + field + "'", line_no);
      }
      values.push_back(v);
    }
    if (line_no == 1 && values.size() == 1 &&
        token.find_first_not_of("0123456789") == std::string::npos) {
      continue;  // word2vec header
    }
    if (values.empty()) throw ParseError("token without a vector", line_no);
    if (!table) table.emplace(values.size());
    if (values.size() != table->dim()) {
      throw DimensionMismatch("expected " + std::to_string(table->dim()) + " values, found " +
                                  std::to_string(values.size()),
                              line_no);
    }
    table->add(std::move(token), std::move(values));
  }
  if (!table) throw ParseError("embedding file holds no vectors", line_no);
  return std::move(*table);
}

inline EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  return parse_embeddings(io::read_file(path));
}

// The k tokens most cosine-similar to the query, excluding the query;
// ties (to 1e-12) broken lexicographically.
inline std::vector<std::string> nearest_neighbors(const EmbeddingTable& table,
                                                  std::string_view token, std::size_t k) {
  if (k < 1) throw PreconditionError("k must be at least 1");
  const auto query = table.index_of(token);
  if (!query) throw UnknownToken(std::string(token));
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    // Quantized so that mathematically equal scores tie exactly.
    if (i != *query) scored.emplace_back(std::round(table.cosine(*query, i) * 1e12), i);
  }
  const auto& tokens = table.tokens();
  auto better = [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return tokens[a.second] < tokens[b.second];
  };
  const std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                    scored.end(), better);
  std::vector<std::string> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(tokens[scored[i].second]);
  return out;
}

struct Lexicon {
  std::map<std::string, std::set<std::string>> synonyms;
  std::map<std::string, std::set<std::string>> antonyms;
};

namespace detail {

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

inline std::set<std::string> split_word_list(std::string_view field, std::string_view self) {
  std::set<std::string> out;
  std::size_t start = 0;
  while (start <= field.size()) {
    const auto comma = field.find(',', start);
    const auto end = comma == std::string_view::npos ? field.size() : comma;
    auto word = ascii_lower(io::trim(field.substr(start, end - start)));
    if (!word.empty() && word != self) out.insert(std::move(word));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

// One "word<TAB>syn1,syn2<TAB>ant1,ant2" entry per line; either list may be
// empty and the antonym column may be omitted. Blank and '#' lines are skipped.
inline Lexicon parse_lexicon(std::string_view data) {
  Lexicon lex;
  std::istringstream in{std::string(data)};
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (io::trim(line).empty() || io::trim(line).front() == '#') continue;
    std::vector<std::string_view> fields;
    std::string_view rest = line;
    while (true) {
      const auto tab = rest.find('\t');
      fields.push_back(rest.substr(0, tab));
      if (tab == std::string_view::npos) break;
      rest = rest.substr(tab + 1);
    }
    if (fields.size() < 2 || fields.size() > 3) {
      throw ParseError("expected word<TAB>synonyms[<TAB>antonyms]", line_no);
    }
    const auto word = detail::ascii_lower(io::trim(fields[0]));
    if (word.empty()) throw ParseError("empty headword", line_no);
    auto syn = detail::split_word_list(fields[1], word);
    auto ant = fields.size() == 3 ? detail::split_word_list(fields[2], word)
                                  : std::set<std::string>{};
    if (!syn.empty()) lex.synonyms[word].merge(syn);
    if (!ant.empty()) lex.antonyms[word].merge(ant);
  }
  return lex;
}

inline Lexicon load_lexicon(const std::filesystem::path& path) {
  return parse_lexicon(io::read_file(path));
}

// ---------------------------------------------------------------------------
// Operators

enum class Method {
  SwapRandom,
  InsertEmbedding,
  SubstituteEmbedding,
  SubstituteSynonym,
  SubstituteAntonym,
  ReservedWord,
};

inline constexpr Method kAllMethods[] = {
    Method::SwapRandom,        Method::InsertEmbedding,   Method::SubstituteEmbedding,
    Method::SubstituteSynonym, Method::SubstituteAntonym, Method::ReservedWord,
};

inline std::string_view method_id(Method m) {
  switch (m) {
    case Method::SwapRandom: return "swap_random";
    case Method::InsertEmbedding: return "insert_embedding";
    case Method::SubstituteEmbedding: return "substitute_embedding";
    case Method::SubstituteSynonym: return "substitute_synonym";
    case Method::SubstituteAntonym: return "substitute_antonym";
    case Method::ReservedWord: return "reserved_word";
  }
  return "unknown";
}

inline std::optional<Method> parse_method(std::string_view id) {
  for (Method m : kAllMethods) {
    if (method_id(m) == id) return m;
  }
  return std::nullopt;
}

// Insertion gets a larger default budget than substitution: one inserted
// term moves pairwise TF-IDF cosine far less than one substituted term.
inline double default_edit_fraction(Method m) {
  return m == Method::InsertEmbedding ? 0.4 : 0.1;
}

struct AugmenterConfig {
  Method method = Method::SwapRandom;
  double edit_fraction = 0.1;
  std::size_t top_k_neighbors = 5;
  std::map<std::string, std::string> reserved_map;
  std::uint64_t seed = 0;

  static AugmenterConfig defaults(Method m, std::uint64_t seed = 0) {
    AugmenterConfig cfg;
    cfg.method = m;
    cfg.edit_fraction = default_edit_fraction(m);
    cfg.seed = seed;
    return cfg;
  }

  void validate() const {
    if (!(edit_fraction > 0.0 && edit_fraction <= 1.0)) {
      throw PreconditionError("edit_fraction must lie in (0, 1]");
    }
    if (top_k_neighbors < 1) throw PreconditionError("top_k_neighbors must be at least 1");
    if (method == Method::ReservedWord && reserved_map.empty()) {
      throw PreconditionError("reserved_word needs a non-empty reserved_map");
    }
  }
};

struct AugmentResources {
  const EmbeddingTable* embeddings = nullptr;
  const Lexicon* lexicon = nullptr;
};

// Alphabetic (ASCII) tokens of length >= 2 are substitution and insertion
// targets; numbers such as "8lbs" are left alone.
inline bool is_edit_target(std::string_view token) {
  return token.size() >= 2 && std::all_of(token.begin(), token.end(), [](char c) {
           return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
         });
}

// Any token except sentinels and punctuation may take part in a swap.
inline bool is_swappable(std::string_view token) {
  return !is_sentinel(token) && !is_punctuation_token(token);
}

inline std::size_t edit_count(double edit_fraction, std::size_t eligible) {
  const auto n = static_cast<std::size_t>(std::llround(edit_fraction * static_cast<double>(eligible)));
  return std::min(std::max<std::size_t>(1, n), eligible);
}

namespace detail {

inline const EmbeddingTable& need_embeddings(const AugmentResources& res, Method m) {
  if (!res.embeddings) {
    throw PreconditionError(std::string(method_id(m)) + " needs an embedding table");
  }
  return *res.embeddings;
}

inline const Lexicon& need_lexicon(const AugmentResources& res, Method m) {
  if (!res.lexicon) throw PreconditionError(std::string(method_id(m)) + " needs a lexicon");
  return *res.lexicon;
}

inline const std::set<std::string>* lexicon_entry(
    const std::map<std::string, std::set<std::string>>& table, const std::string& token) {
  const auto it = table.find(token);
  return it == table.end() ? nullptr : &it->second;
}

}  // namespace detail

inline TokenSequence augment_one(std::span<const std::string> doc_in, const AugmenterConfig& cfg,
                                 const AugmentResources& resources = {}) {
  if (doc_in.empty()) throw PreconditionError("cannot augment an empty document");
  cfg.validate();
  TokenSequence doc(doc_in.begin(), doc_in.end());
  Rng rng(cfg.seed);
  const auto name = std::string(method_id(cfg.method));

  auto positions_where = [&](auto&& pred) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < doc.size(); ++i) {
      if (pred(doc[i])) out.push_back(i);
    }
    return out;
  };
  auto no_target = [&] { return NoEligibleToken(name + ": no eligible token in document"); };

  // Replaces n distinct eligible positions using the candidate function.
  auto substitute = [&](const std::vector<std::size_t>& eligible, auto&& candidates) {
    if (eligible.empty()) throw no_target();
    const auto n = edit_count(cfg.edit_fraction, eligible.size());
    for (std::size_t pick : rng.sample_indices(eligible.size(), n)) {
      const std::size_t pos = eligible[pick];
      const std::vector<std::string> options = candidates(doc[pos]);
      doc[pos] = options[rng.uniform_index(options.size())];
    }
  };

  switch (cfg.method) {
    case Method::SwapRandom: {
      const auto eligible = positions_where(is_swappable);
      if (eligible.empty()) throw no_target();
      if (eligible.size() < 2) break;
      const auto n = edit_count(cfg.edit_fraction, eligible.size());
      for (std::size_t e = 0; e < n; ++e) {
        const std::size_t a = rng.uniform_index(eligible.size());
        std::size_t b = rng.uniform_index(eligible.size() - 1);
        if (b >= a) ++b;
        std::swap(doc[eligible[a]], doc[eligible[b]]);
      }
      break;
    }
    case Method::InsertEmbedding: {
      const auto& table = detail::need_embeddings(resources, cfg.method);
      const auto eligible = positions_where([&](const std::string& t) {
        return is_edit_target(t) && table.contains(t) && table.size() >= 2;
      });
      if (eligible.empty()) throw no_target();
      const auto n = edit_count(cfg.edit_fraction, eligible.size());
      auto anchors = rng.sample_indices(eligible.size(), n);
      std::vector<std::pair<std::size_t, std::string>> inserts;
      for (std::size_t pick : anchors) {
        const std::size_t pos = eligible[pick];
        const auto options = nearest_neighbors(table, doc[pos], cfg.top_k_neighbors);
        inserts.emplace_back(pos, options[rng.uniform_index(options.size())]);
      }
      // Insert right after each anchor, back to front so positions hold.
      std::sort(inserts.begin(), inserts.end(),
                [](const auto& a, const auto& b) { return a.first > b.first; });
      for (auto& [pos, word] : inserts) {
        doc.insert(doc.begin() + static_cast<std::ptrdiff_t>(pos + 1), std::move(word));
      }
      break;
    }
    case Method::SubstituteEmbedding: {
      const auto& table = detail::need_embeddings(resources, cfg.method);
      substitute(positions_where([&](const std::string& t) {
                   return is_edit_target(t) && table.contains(t) && table.size() >= 2;
                 }),
                 [&](const std::string& t) {
                   return nearest_neighbors(table, t, cfg.top_k_neighbors);
                 });
      break;
    }
    case Method::SubstituteSynonym:
    case Method::SubstituteAntonym: {
      const auto& lex = detail::need_lexicon(resources, cfg.method);
      const auto& table =
          cfg.method == Method::SubstituteSynonym ? lex.synonyms : lex.antonyms;
      substitute(positions_where([&](const std::string& t) {
                   return is_edit_target(t) && detail::lexicon_entry(table, t) != nullptr;
                 }),
                 [&](const std::string& t) {
                   const auto* set = detail::lexicon_entry(table, t);
                   return std::vector<std::string>(set->begin(), set->end());
                 });
      break;
    }
    case Method::ReservedWord: {
      substitute(positions_where([&](const std::string& t) {
                   return is_swappable(t) && cfg.reserved_map.contains(t);
                 }),
                 [&](const std::string& t) {
                   return std::vector<std::string>{cfg.reserved_map.at(t)};
                 });
      break;
    }
  }
  return doc;
}

struct AugmentBatch {
  std::vector<AugmentationRecord> records;
  std::size_t skipped = 0;  // sources without an eligible token
};

// One record per example of target_label. Each example's seed is derived
// from the configured seed and the example id, so records do not depend on
// processing order.
inline AugmentBatch augment_corpus(const Corpus& corpus, const AugmenterConfig& cfg,
                                   Label target_label, const AugmentResources& resources = {},
                                   const NormalizeOptions& norm = {}) {
  if (corpus.count(target_label) == 0) {
    throw PreconditionError("corpus has no examples of the target label");
  }
  AugmentBatch batch;
  for (const auto& ex : corpus) {
    if (ex.label != target_label) continue;
    AugmenterConfig local = cfg;
    local.seed = derive_seed(cfg.seed, ex.id);
    const auto tokens = analyze(ex.text, norm);
    if (tokens.empty()) {
      ++batch.skipped;
      continue;
    }
    TokenSequence out;
    try {
      out = augment_one(tokens, local, resources);
    } catch (const NoEligibleToken&) {
      ++batch.skipped;
      continue;
    }
    AugmentationRecord rec;
    rec.parent_id = ex.id;
    rec.method_id = std::string(method_id(cfg.method));
    rec.original_text = ex.text;
    rec.augmented_text = detokenize(out);
    rec.similarity = text_similarity(rec.original_text, rec.augmented_text, norm);
    rec.seed = local.seed;
    rec.label = ex.label;
    batch.records.push_back(std::move(rec));
  }
  return batch;
}

}  // namespace rebalance
