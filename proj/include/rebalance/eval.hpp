#pragma once

// Confusion counts, precision/recall/F1 and per-class evaluation reports.
// Any 0/0 ratio is reported as 0.

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rebalance/corpus.hpp"
#include "rebalance/csv.hpp"
#include "rebalance/error.hpp"

namespace rebalance {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionCounts&) const = default;
};

inline ConfusionCounts confusion(std::span<const Label> truth, std::span<const Label> pred,
                                 Label positive = Label::Positive) {
  if (truth.size() != pred.size()) throw LengthMismatch();
  if (truth.empty()) throw PreconditionError("confusion needs at least one example");
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool t = truth[i] == positive;
    const bool p = pred[i] == positive;
    if (t && p) ++c.tp;
    else if (!t && p) ++c.fp;
    else if (t && !p) ++c.fn;
    else ++c.tn;
  }
  return c;
}

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
};

inline double safe_ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

inline double f1_score(double precision, double recall) {
  return safe_ratio(2.0 * precision * recall, precision + recall);
}

inline Metrics metrics(const ConfusionCounts& c) {
  if (c.total() == 0) throw PreconditionError("metrics need at least one example");
  Metrics m;
  m.precision = safe_ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
  m.recall = safe_ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
  m.f1 = f1_score(m.precision, m.recall);
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  return m;
}

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct Averages {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct Misclassification {
  std::string id;
  std::string text;
  Label truth = Label::Positive;
  Label predicted = Label::Positive;
  std::optional<std::string> fired_rule;
};

struct EvalReport {
  std::map<Label, ClassMetrics> per_class;
  double accuracy = 0.0;
  Averages micro;
  Averages macro;
  std::vector<Misclassification> errors;
  std::size_t n = 0;

  const ClassMetrics& of(Label label) const { return per_class.at(label); }
};

// Per-class rows treat each class as positive in turn; micro pools the
// per-class counts and macro is the unweighted mean over both classes.
inline EvalReport full_report(std::span<const Label> truth, std::span<const Label> pred,
                              std::span<const std::string> texts,
                              std::span<const std::string> ids,
                              std::span<const std::optional<std::string>> fired = {}) {
  if (truth.size() != pred.size() || texts.size() != truth.size() ||
      ids.size() != truth.size() || (!fired.empty() && fired.size() != truth.size())) {
    throw LengthMismatch();
  }
  EvalReport report;
  report.n = truth.size();
  ConfusionCounts pooled;
  for (Label cls : kLabels) {
    const auto c = confusion(truth, pred, cls);
    const auto m = metrics(c);
    report.per_class[cls] = {m.precision, m.recall, m.f1, c.tp + c.fn};
    pooled.tp += c.tp;
    pooled.fp += c.fp;
    pooled.fn += c.fn;
    report.accuracy = m.accuracy;
    report.macro.precision += m.precision / 2.0;
    report.macro.recall += m.recall / 2.0;
    report.macro.f1 += m.f1 / 2.0;
  }
  report.micro.precision =
      safe_ratio(static_cast<double>(pooled.tp), static_cast<double>(pooled.tp + pooled.fp));
  report.micro.recall =
      safe_ratio(static_cast<double>(pooled.tp), static_cast<double>(pooled.tp + pooled.fn));
  report.micro.f1 = f1_score(report.micro.precision, report.micro.recall);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] != pred[i]) {
      report.errors.push_back({ids[i], texts[i], truth[i], pred[i],
                               fired.empty() ? std::nullopt : fired[i]});
    }
  }
  return report;
}

// Flat metric names used by cross-validation summaries and trend files.
inline std::map<std::string, double> headline_metrics(const EvalReport& r) {
  const auto& neg = r.of(Label::Negative);
  const auto& pos = r.of(Label::Positive);
  return {
      {"accuracy", r.accuracy},
      {"macro_f1", r.macro.f1},
      {"macro_precision", r.macro.precision},
      {"macro_recall", r.macro.recall},
      {"micro_f1", r.micro.f1},
      {"negative_f1", neg.f1},
      {"negative_precision", neg.precision},
      {"negative_recall", neg.recall},
      {"positive_f1", pos.f1},
      {"positive_precision", pos.precision},
      {"positive_recall", pos.recall},
  };
}

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

inline MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw EmptyInput("mean of no values");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size()))};
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json per_class = nlohmann::json::object();
  for (const auto& [label, m] : r.per_class) {
    per_class[label_name(label)] = {{"precision", m.precision},
                                    {"recall", m.recall},
                                    {"f1", m.f1},
                                    {"support", m.support}};
  }
  nlohmann::json errors = nlohmann::json::array();
  for (const auto& e : r.errors) {
    errors.push_back({{"id", e.id},
                      {"text", e.text},
                      {"true", to_int(e.truth)},
                      {"pred", to_int(e.predicted)},
                      {"fired_rule", e.fired_rule ? nlohmann::json(*e.fired_rule) : nlohmann::json()}});
  }
  return {{"n", r.n},
          {"accuracy", r.accuracy},
          {"per_class", per_class},
          {"micro", {{"precision", r.micro.precision}, {"recall", r.micro.recall}, {"f1", r.micro.f1}}},
          {"macro", {{"precision", r.macro.precision}, {"recall", r.macro.recall}, {"f1", r.macro.f1}}},
          {"errors", errors},
          {"note", "ratios with a zero denominator are reported as 0"}};
}

// model,class,precision,recall,f1,support rows; Negative first.
inline std::string report_csv(std::span<const std::pair<std::string, EvalReport>> reports) {
  std::ostringstream out;
  csv::write_row(out, {"model", "class", "precision", "recall", "f1", "support"});
  for (const auto& [model, r] : reports) {
    for (Label label : kLabels) {
      const auto& m = r.of(label);
      csv::write_row(out, {model, label_name(label), format_metric(m.precision),
                           format_metric(m.recall), format_metric(m.f1),
                           std::to_string(m.support)});
    }
  }
  return out.str();
}

inline std::string errors_csv(const EvalReport& r) {
  std::ostringstream out;
  csv::write_row(out, {"id", "text", "true", "pred", "fired_rule"});
  for (const auto& e : r.errors) {
    csv::write_row(out, {e.id, e.text, std::to_string(to_int(e.truth)),
                         std::to_string(to_int(e.predicted)), e.fired_rule.value_or("")});
  }
  return out.str();
}

}  // namespace rebalance
