#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace dmlab {

/// Raised when a numeric or structural argument violates an operation's precondition.
class InvalidParameter : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when operands that must agree in shape or dimensions do not.
class ShapeMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A training or sampling stage produced a non-finite value.
class NumericFailure : public std::runtime_error {
public:
    NumericFailure(std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace dmlab
