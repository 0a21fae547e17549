#pragma once

#include <stdexcept>
#include <string>

namespace sattn {

// Violated precondition of a public operation.
class ContractError : public std::invalid_argument {
 public:
  explicit ContractError(const std::string& what) : std::invalid_argument(what) {}
};

// Operand extents do not agree.
class DimensionError : public ContractError {
 public:
  explicit DimensionError(const std::string& what) : ContractError(what) {}
};

// A softmax slice (or a supporting key region) has no admissible entry.
class DegenerateRegionError : public std::domain_error {
 public:
  explicit DegenerateRegionError(const std::string& what) : std::domain_error(what) {}
};

// NaN or infinity where a finite value is required.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sattn
