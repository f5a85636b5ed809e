#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tpcausal {

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InvalidState : std::logic_error {
  using std::logic_error::logic_error;
};

struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thinning found an intensity above its bound, or an observation the model
// gives zero rate.
struct InconsistencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  ParseError(const std::string& file, std::size_t line, const std::string& msg)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + msg), line(line) {}
  std::size_t line;
};

struct ValidationError : std::runtime_error {
  ValidationError(const std::string& record, const std::string& msg)
      : std::runtime_error(record + ": " + msg), record(record) {}
  std::string record;
};

}  // namespace tpcausal
