#pragma once

#include <stdexcept>
#include <string>

namespace imboost {

/// Argument dimensions do not agree with the model or with each other.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced a NaN or infinity. `term()` names the quantity.
class NumericError : public std::runtime_error {
 public:
  NumericError(std::string term, const std::string& detail)
      : std::runtime_error(term + ": " + detail), term_(std::move(term)) {}
  const std::string& term() const { return term_; }

 private:
  std::string term_;
};

/// Input data that cannot support the requested fit (e.g. a constant sample).
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A label answer that would break LabelStore disjointness or uniqueness.
class LabelConflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input files.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace imboost
