#pragma once

#include <map>
#include <stdexcept>
#include <string>

namespace simop {

enum class ErrorKind {
  invalid_input,
  partition_mismatch,
  not_invertible,
  contraction_violation,
  non_convergence,
  window_too_small,
  condition_violation,
  not_supported,
  degenerate_weight,
  separation_violation,
  oracle_failure,
  parse_error,
  invariant_breach,
};

const char* to_string(ErrorKind k);

// Carries the numbers that made a check fail, so reports can print both sides.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, std::map<std::string, double> data = {})
      : std::runtime_error(what), kind_(kind), data_(std::move(data)) {}

  ErrorKind kind() const { return kind_; }
  const std::map<std::string, double>& data() const { return data_; }

 private:
  ErrorKind kind_;
  std::map<std::string, double> data_;
};

}  // namespace simop
