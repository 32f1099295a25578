#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rebalance {

// Root of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller broke a documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Bad user-supplied input (files, configuration). The CLI maps these to
// exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

class FileNotFound : public InputError {
 public:
  explicit FileNotFound(const std::string& path)
      : InputError("file not found: " + path), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Input error tied to a 1-based line number of the offending file.
class LineError : public InputError {
 public:
  LineError(const std::string& what, std::size_t line)
      : InputError(what + " (line " + std::to_string(line) + ")"),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class MalformedRecord : public LineError {
 public:
  using LineError::LineError;
};

class ParseError : public LineError {
 public:
  using LineError::LineError;
};

class DimensionMismatch : public LineError {
 public:
  using LineError::LineError;
};

class EmptyCorpus : public InputError {
 public:
  EmptyCorpus() : InputError("corpus contains no records") {}
};

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

class InsufficientClassSize : public Error {
 public:
  using Error::Error;
};

class TooFewExamples : public Error {
 public:
  using Error::Error;
};

class EmptyVocabulary : public Error {
 public:
  EmptyVocabulary() : Error("no term reaches the minimum document frequency") {}
};

class VocabularyMismatch : public Error {
 public:
  VocabularyMismatch() : Error("vectors or model belong to different vocabularies") {}
};

class UnknownToken : public Error {
 public:
  explicit UnknownToken(const std::string& token)
      : Error("token not in embedding table: " + token) {}
};

class NoEligibleToken : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  LengthMismatch() : Error("label sequences differ in length") {}
};

class MissingPlaceholder : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class RateLimited : public TransportError {
 public:
  using TransportError::TransportError;
};

class ReplayMiss : public Error {
 public:
  explicit ReplayMiss(const std::string& fingerprint)
      : Error("no transcript entry for request " + fingerprint) {}
};

class UnparseableResponse : public Error {
 public:
  using Error::Error;
};

class DuplicateFingerprint : public Error {
 public:
  explicit DuplicateFingerprint(const std::string& fingerprint)
      : Error("transcript already holds request " + fingerprint) {}
};

class GeneratorExhausted : public Error {
 public:
  using Error::Error;
};

class SingleClassTrainingSet : public Error {
 public:
  SingleClassTrainingSet() : Error("training set must contain both classes") {}
};

class NonFiniteLoss : public Error {
 public:
  NonFiniteLoss() : Error("training diverged: non-finite loss or weights") {}
};

class PatternCompileError : public InputError {
 public:
  PatternCompileError(const std::string& rule_id, const std::string& detail)
      : InputError("rule " + rule_id + " does not compile: " + detail),
        rule_id_(rule_id) {}
  const std::string& rule_id() const noexcept { return rule_id_; }

 private:
  std::string rule_id_;
};

class DuplicateRuleId : public InputError {
 public:
  explicit DuplicateRuleId(const std::string& rule_id)
      : InputError("duplicate rule id: " + rule_id) {}
};

}  // namespace rebalance
