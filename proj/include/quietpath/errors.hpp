#pragma once

#include <stdexcept>
#include <string>

namespace quietpath {

/// Argument outside the domain of a model formula (negative density base,
/// Mach >= 1 in the thrust law, airspeed above the jet speed, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The flight equations cannot be evaluated (cos(gamma) or V near zero).
class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent inputs detected before any numerical work starts.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A logarithm in the jet-noise level received a non-positive argument.
class NoiseTermError : public DomainError {
 public:
  NoiseTermError(std::string term, const std::string& detail)
      : DomainError("noise term '" + term + "': " + detail),
        term_(std::move(term)) {}
  const std::string& term() const noexcept { return term_; }

 private:
  std::string term_;
};

/// Evaluation failure inside the transcribed problem, tagged with the grid
/// node that triggered it.
class NodeEvaluationError : public std::runtime_error {
 public:
  NodeEvaluationError(int node, const std::string& detail)
      : std::runtime_error("node " + std::to_string(node) + ": " + detail),
        node_(node) {}
  int node() const noexcept { return node_; }

 private:
  int node_;
};

}  // namespace quietpath
