#pragma once

#include <stdexcept>
#include <string>

namespace ipal {

/// Base for every error the toolkit raises on bad input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed text record or configuration file.
class ParseError : public DataError {
 public:
  using DataError::DataError;
};

/// A record that parsed but violates a format invariant.
class ValidationError : public DataError {
 public:
  ValidationError(std::string rule, const std::string& detail)
      : DataError(rule + ": " + detail), rule_(std::move(rule)) {}

  const std::string& rule() const noexcept { return rule_; }

 private:
  std::string rule_;
};

/// Caller asked for something inconsistent (bad flag combination, wrong
/// stream kind for a model, ...).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ipal
