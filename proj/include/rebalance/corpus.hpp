#pragma once

// Labeled text corpora: loading, validation, stratified splits and folds.
//
// Label 1 is the positive outcome, label 0 the negative (minority) one.
// A Corpus is immutable once built; every operation returns a new value.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "rebalance/csv.hpp"
#include "rebalance/error.hpp"
#include "rebalance/io.hpp"
#include "rebalance/random.hpp"

namespace rebalance {

enum class Label : int { Negative = 0, Positive = 1 };

inline constexpr Label kLabels[] = {Label::Negative, Label::Positive};

inline int to_int(Label label) { return static_cast<int>(label); }

inline Label other(Label label) {
  return label == Label::Positive ? Label::Negative : Label::Positive;
}

inline Label label_from_int(int value) {
  if (value != 0 && value != 1) {
    throw PreconditionError("label must be 0 or 1, got " + std::to_string(value));
  }
  return static_cast<Label>(value);
}

inline std::optional<Label> parse_label(std::string_view field) {
  const auto t = io::trim(field);
  if (t == "0") return Label::Negative;
  if (t == "1") return Label::Positive;
  return std::nullopt;
}

inline const char* label_name(Label label) {
  return label == Label::Positive ? "Positive" : "Negative";
}

struct Provenance {
  std::string method_id;
  std::string parent_id;
  bool operator==(const Provenance&) const = default;
};

struct LabeledExample {
  std::string id;
  std::string text;
  Label label = Label::Positive;
  std::optional<Provenance> origin;  // empty for original examples

  bool is_augmented() const { return origin.has_value(); }
  bool operator==(const LabeledExample&) const = default;
};

class Corpus {
 public:
  Corpus() = default;

  explicit Corpus(std::vector<LabeledExample> examples)
      : examples_(std::move(examples)) {
    index_.reserve(examples_.size());
    for (std::size_t i = 0; i < examples_.size(); ++i) {
      const auto& ex = examples_[i];
      if (io::trim(ex.text).empty()) {
        throw PreconditionError("example " + ex.id + " has empty text");
      }
      if (!index_.emplace(ex.id, i).second) {
        throw PreconditionError("duplicate example id " + ex.id);
      }
      ++counts_[ex.label];
    }
    for (const auto& ex : examples_) {
      if (ex.origin && !index_.contains(ex.origin->parent_id)) {
        throw PreconditionError("augmented example " + ex.id +
                                " references unknown parent " + ex.origin->parent_id);
      }
    }
  }

  const std::vector<LabeledExample>& examples() const { return examples_; }
  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }
  const LabeledExample& operator[](std::size_t i) const { return examples_[i]; }
  auto begin() const { return examples_.begin(); }
  auto end() const { return examples_.end(); }

  std::size_t count(Label label) const {
    const auto it = counts_.find(label);
    return it == counts_.end() ? 0 : it->second;
  }

  // Both labels are always present as keys.
  std::map<Label, std::size_t> class_counts() const {
    return {{Label::Negative, count(Label::Negative)},
            {Label::Positive, count(Label::Positive)}};
  }

  // Smaller class; ties resolve to Negative.
  Label minority_label() const {
    return count(Label::Positive) < count(Label::Negative) ? Label::Positive
                                                           : Label::Negative;
  }

  const LabeledExample* find(std::string_view id) const {
    const auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &examples_[it->second];
  }

  bool has_augmented() const {
    return std::any_of(examples_.begin(), examples_.end(),
                       [](const auto& ex) { return ex.is_augmented(); });
  }

  Corpus subset(std::span<const std::size_t> indices) const {
    std::vector<LabeledExample> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(examples_.at(i));
    return Corpus(std::move(out));
  }

  Corpus with_added(std::span<const LabeledExample> extra) const {
    std::vector<LabeledExample> out = examples_;
    out.insert(out.end(), extra.begin(), extra.end());
    return Corpus(std::move(out));
  }

  std::vector<std::string> texts() const {
    std::vector<std::string> out;
    out.reserve(examples_.size());
    for (const auto& ex : examples_) out.push_back(ex.text);
    return out;
  }

  std::vector<Label> labels() const {
    std::vector<Label> out;
    out.reserve(examples_.size());
    for (const auto& ex : examples_) out.push_back(ex.label);
    return out;
  }

 private:
  std::vector<LabeledExample> examples_;
  std::unordered_map<std::string, std::size_t> index_;
  std::map<Label, std::size_t> counts_;
};

// ---------------------------------------------------------------------------
// File format

enum class Format { Csv, Tsv };

inline char delimiter(Format format) { return format == Format::Tsv ? '\t' : ','; }

inline Format parse_format(std::string_view name) {
  if (name == "csv" || name == "CSV") return Format::Csv;
  if (name == "tsv" || name == "TSV") return Format::Tsv;
  throw ConfigError("unknown corpus format: " + std::string(name));
}

inline Format format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".tsv" ? Format::Tsv : Format::Csv;
}

inline Corpus parse_corpus(std::string_view data, Format format) {
  auto records = csv::parse(data, delimiter(format));
  if (records.empty()) throw MalformedRecord("missing header row", 1);

  const auto& header = records.front();
  std::optional<std::size_t> id_col, text_col, label_col, method_col, parent_col;
  for (std::size_t i = 0; i < header.fields.size(); ++i) {
    const auto name = io::trim(header.fields[i]);
    if (name == "id") id_col = i;
    else if (name == "text") text_col = i;
    else if (name == "label") label_col = i;
    else if (name == "method") method_col = i;
    else if (name == "parent_id") parent_col = i;
  }
  if (!text_col || !label_col) {
    throw MalformedRecord("header must name text and label columns", header.line);
  }
  if (method_col.has_value() != parent_col.has_value()) {
    throw MalformedRecord("method and parent_id columns go together", header.line);
  }

  std::vector<LabeledExample> examples;
  examples.reserve(records.size() - 1);
  std::unordered_set<std::string> seen;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != header.fields.size()) {
      throw MalformedRecord("expected " + std::to_string(header.fields.size()) +
                                " fields, found " + std::to_string(rec.fields.size()),
                            rec.line);
    }
    LabeledExample ex;
    ex.id = id_col ? std::string(io::trim(rec.fields[*id_col])) : std::to_string(r);
    if (ex.id.empty()) throw MalformedRecord("empty id", rec.line);
    if (!seen.insert(ex.id).second) {
      throw MalformedRecord("duplicate id " + ex.id, rec.line);
    }
    ex.text = rec.fields[*text_col];
    if (io::trim(ex.text).empty()) throw MalformedRecord("empty text", rec.line);
    const auto label = parse_label(rec.fields[*label_col]);
    if (!label) {
      throw MalformedRecord("label must be 0 or 1, found '" + rec.fields[*label_col] + "'",
                            rec.line);
    }
    ex.label = *label;
    if (method_col) {
      const auto method = io::trim(rec.fields[*method_col]);
      const auto parent = io::trim(rec.fields[*parent_col]);
      if (method.empty() != parent.empty()) {
        throw MalformedRecord("method and parent_id must both be set or both empty",
                              rec.line);
      }
      if (!method.empty()) ex.origin = Provenance{std::string(method), std::string(parent)};
    }
    examples.push_back(std::move(ex));
  }
  if (examples.empty()) throw EmptyCorpus();
  for (std::size_t r = 0; r < examples.size(); ++r) {
    const auto& ex = examples[r];
    if (ex.origin && !seen.contains(ex.origin->parent_id)) {
      throw MalformedRecord("unknown parent_id " + ex.origin->parent_id, records[r + 1].line);
    }
  }
  return Corpus(std::move(examples));
}

inline Corpus load_corpus(const std::filesystem::path& path, Format format) {
  return parse_corpus(io::read_file(path), format);
}

inline Corpus load_corpus(const std::filesystem::path& path) {
  return load_corpus(path, format_for_path(path));
}

// Header is id,text,label; method,parent_id are appended when the corpus
// holds augmented examples.
inline std::string format_corpus(const Corpus& corpus, Format format) {
  const char delim = delimiter(format);
  const bool provenance = corpus.has_augmented();
  std::ostringstream out;
  std::vector<std::string> header = {"id", "text", "label"};
  if (provenance) {
    header.emplace_back("method");
    header.emplace_back("parent_id");
  }
  csv::write_row(out, header, delim);
  for (const auto& ex : corpus) {
    std::vector<std::string> row = {ex.id, ex.text, std::to_string(to_int(ex.label))};
    if (provenance) {
      row.push_back(ex.origin ? ex.origin->method_id : "");
      row.push_back(ex.origin ? ex.origin->parent_id : "");
    }
    csv::write_row(out, row, delim);
  }
  return out.str();
}

inline void write_corpus(const Corpus& corpus, const std::filesystem::path& path,
                         Format format) {
  io::write_file(path, format_corpus(corpus, format));
}

// ---------------------------------------------------------------------------
// Splits and folds

struct SplitSpec {
  double train_fraction = 0.8;
  bool stratified = true;
  std::uint64_t seed = 42;
};

struct TrainTest {
  Corpus train;
  Corpus test;
};

namespace detail {

inline void require_original(const Corpus& corpus) {
  if (corpus.has_augmented()) {
    throw PreconditionError(
        "corpus already contains augmented examples; split before augmenting");
  }
}

inline std::vector<std::size_t> indices_of(const Corpus& corpus, std::optional<Label> label) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!label || corpus[i].label == *label) out.push_back(i);
  }
  return out;
}

// round(fraction * n), clamped so both sides keep at least one item.
inline std::size_t train_share(std::size_t n, double fraction) {
  const auto raw = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  return std::clamp<std::size_t>(raw, 1, n - 1);
}

}  // namespace detail

inline TrainTest split(const Corpus& corpus, const SplitSpec& spec) {
  if (corpus.empty()) throw PreconditionError("cannot split an empty corpus");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw PreconditionError("train_fraction must lie in (0, 1)");
  }
  detail::require_original(corpus);

  Rng rng(derive_seed(spec.seed, "split"));
  std::vector<std::size_t> train_idx, test_idx;
  auto allocate = [&](std::vector<std::size_t> pool, const char* what) {
    if (pool.size() < 2) {
      throw InsufficientClassSize(std::string(what) +
                                  " needs at least 2 examples to appear on both sides");
    }
    rng.shuffle(pool);
    const std::size_t n_train = detail::train_share(pool.size(), spec.train_fraction);
    train_idx.insert(train_idx.end(), pool.begin(), pool.begin() + n_train);
    test_idx.insert(test_idx.end(), pool.begin() + n_train, pool.end());
  };
  if (spec.stratified) {
    for (Label label : kLabels) {
      allocate(detail::indices_of(corpus, label),
               label == Label::Positive ? "class 1" : "class 0");
    }
  } else {
    allocate(detail::indices_of(corpus, std::nullopt), "corpus");
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {corpus.subset(train_idx), corpus.subset(test_idx)};
}

class FoldPlan {
 public:
  FoldPlan(std::size_t k, std::vector<std::size_t> fold_of_index, const Corpus& corpus)
      : k_(k), fold_of_index_(std::move(fold_of_index)), members_(k) {
    for (std::size_t i = 0; i < fold_of_index_.size(); ++i) {
      assignments_.emplace(corpus[i].id, fold_of_index_[i]);
      members_[fold_of_index_[i]].push_back(i);
    }
  }

  std::size_t k() const { return k_; }
  const std::map<std::string, std::size_t>& assignments() const { return assignments_; }
  std::size_t fold_of(std::size_t index) const { return fold_of_index_.at(index); }

  // Corpus indices held out in fold f, ascending.
  const std::vector<std::size_t>& test_indices(std::size_t f) const { return members_.at(f); }

  std::vector<std::size_t> train_indices(std::size_t f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of_index_.size(); ++i) {
      if (fold_of_index_[i] != f) out.push_back(i);
    }
    return out;
  }

 private:
  std::size_t k_;
  std::vector<std::size_t> fold_of_index_;
  std::vector<std::vector<std::size_t>> members_;
  std::map<std::string, std::size_t> assignments_;
};

// Deals shuffled examples round-robin. In stratified mode the classes are
// dealt one after the other with the dealing position carried over, which
// keeps both per-class and total fold sizes within one of each other.
inline FoldPlan make_folds(const Corpus& corpus, std::size_t k, bool stratified,
                           std::uint64_t seed) {
  if (k < 2) throw PreconditionError("k must be at least 2");
  if (corpus.size() < k) {
    throw TooFewExamples("corpus of " + std::to_string(corpus.size()) +
                         " examples cannot fill " + std::to_string(k) + " folds");
  }
  detail::require_original(corpus);

  Rng rng(derive_seed(seed, "folds"));
  std::vector<std::size_t> fold_of(corpus.size());
  std::size_t position = 0;
  auto deal = [&](std::vector<std::size_t> pool) {
    rng.shuffle(pool);
    for (std::size_t i : pool) fold_of[i] = position++ % k;
  };
  if (stratified) {
    for (Label label : kLabels) {
      auto pool = detail::indices_of(corpus, label);
      if (pool.size() < k) {
        throw TooFewExamples("class " + std::to_string(to_int(label)) + " has " +
                             std::to_string(pool.size()) + " examples, fewer than k=" +
                             std::to_string(k));
      }
      deal(std::move(pool));
    }
  } else {
    deal(detail::indices_of(corpus, std::nullopt));
  }
  return FoldPlan(k, std::move(fold_of), corpus);
}

}  // namespace rebalance
