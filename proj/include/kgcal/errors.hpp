#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kgcal {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. line() is 1-based, 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// A caller broke an operation's precondition.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Path enumeration exceeded the configured cap.
class ResourceLimitError : public Error {
 public:
  using Error::Error;
};

// Evidence text that does not follow the <PATH ...> grammar.
class InvalidOutput : public Error {
 public:
  using Error::Error;
};

class SerializationError : public Error {
 public:
  using Error::Error;
};

// Reasoner response with no usable answer object; keeps the raw text.
class ParseFailure : public Error {
 public:
  explicit ParseFailure(std::string raw)
      : Error("no answer/confidence object in response"), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

// ECE over an empty sample set.
class NoSamplesError : public Error {
 public:
  NoSamplesError() : Error("no samples: ECE is undefined for an empty sample set") {}
};

}  // namespace kgcal
