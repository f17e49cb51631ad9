#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hfadapt {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or architecture description.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A caller broke an API precondition (frozen model update, non-scalar loss, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Malformed input bytes. `offset()` is a byte offset for binary formats and a
// 1-based line number for line-oriented ones.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

// Well-formed data that does not match what the caller expected.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

class DuplicateRecordError : public Error {
 public:
  using Error::Error;
};

// A loss or parameter went non-finite during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// A stage input is missing. `producer()` names the subcommand that makes it.
class MissingPrerequisite : public Error {
 public:
  MissingPrerequisite(const std::string& what, std::string producer)
      : Error(what + " (run `" + producer + "` first)"), producer_(std::move(producer)) {}
  const std::string& producer() const noexcept { return producer_; }

 private:
  std::string producer_;
};

}  // namespace hfadapt
