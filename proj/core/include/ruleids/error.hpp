#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ruleids {

// Base of every error the library raises for bad input data or models.
// Precondition violations by the caller (mismatched lengths and the like)
// throw std::invalid_argument instead.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A single input line or file could not be parsed. line() is 1-based, 0 if
// unknown.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Dataset-level ingest failures: unreadable file, nothing parsed.
class IngestError : public Error {
 public:
  using Error::Error;
};

// Failures in a training stage (features, embedding, clustering, rules).
class TrainError : public Error {
 public:
  using Error::Error;
};

// The model directory is incomplete, malformed, or does not fit the data.
class ModelError : public Error {
 public:
  using Error::Error;
};

}  // namespace ruleids
