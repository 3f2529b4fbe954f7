#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace decomp {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed input text, reported as "source:line: message" (parts omitted when unknown).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t line, const std::string& source = {})
      : std::runtime_error(format(message, line, source)), message_(message), line_(line), source_(source) {}

  const std::string& message() const noexcept { return message_; }
  std::size_t line() const noexcept { return line_; }
  const std::string& source() const noexcept { return source_; }

 private:
  static std::string format(const std::string& message, std::size_t line, const std::string& source) {
    std::string prefix = source;
    if (line != 0) prefix += (prefix.empty() ? "line " : ":") + std::to_string(line);
    return prefix.empty() ? message : prefix + ": " + message;
  }

  std::string message_;
  std::size_t line_;
  std::string source_;
};

/// Sample too small for the requested statistic.
class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The supercritical model does not apply to the supplied estimate.
class ModelInapplicableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file could not be read. The message names the file.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace decomp
