#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace csd {

/// Argument outside the mathematical domain of an operation (t ∉ [0,1], h ≤ 0, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Operand dimensions disagree.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A computation produced a non-finite value. Carries the particle or step index.
class NumericError : public std::runtime_error {
public:
    NumericError(const std::string& what, std::size_t index)
        : std::runtime_error(what), index_(index) {}

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

/// Condition ref not known to an oracle.
class LookupError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Caller violated an operation's contract (wrong condition kind, invalid config, ...).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace csd
