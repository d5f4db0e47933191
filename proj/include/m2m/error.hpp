#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace m2m {

enum class ErrorKind {
  Domain,          // argument outside the mathematical domain
  Config,          // bad scenario / geometry configuration
  Parse,           // unreadable config text
  Dimension,       // vector sizes do not match the topology
  Infeasible,      // no point satisfies the constraints
  InfeasibleTime,  // exponent a/t beyond the overflow cap
  Unbounded,       // objective unbounded below / no finite minimizer
  StartInfeasible, // interior-point start is not strictly feasible
  Numeric,         // bracket expansion, singular systems, ...
  Inconsistent,    // transformed variables that cannot be recovered
  Timeout,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace m2m
