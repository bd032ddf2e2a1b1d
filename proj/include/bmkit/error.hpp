#pragma once

#include <stdexcept>
#include <string>

namespace bmkit {

enum class ErrorCode {
    domain = 1,      // argument outside the operation's domain
    shape = 2,       // mismatched lattices or vector dimensions
    parse = 3,       // malformed serialized input
    regime = 4,      // exponents outside the nontrivial regime
    no_convergence = 5,
    io = 6,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Raised by the block-norm optimizer when the certified gap does not close
/// within the iteration budget. best_value() is still a valid upper bound.
class SolverError : public Error {
public:
    SolverError(const std::string& what, double best_value, double lower_bound)
        : Error(ErrorCode::no_convergence, what), best_value_(best_value), lower_bound_(lower_bound) {}
    double best_value() const noexcept { return best_value_; }
    double lower_bound() const noexcept { return lower_bound_; }

private:
    double best_value_;
    double lower_bound_;
};

}  // namespace bmkit
