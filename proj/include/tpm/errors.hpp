#pragma once

#include <stdexcept>
#include <string>

namespace tpm {

// Operand shapes do not fit together (matrix sizes, factor dimensions, slots).
class DimensionMismatch : public std::invalid_argument {
public:
    explicit DimensionMismatch(const std::string& what)
        : std::invalid_argument("dimension mismatch: " + what) {}
};

// A value was well-shaped but broke a mathematical invariant
// (not unitary, not Hermitian, not normalized, ...).
class InvariantViolation : public std::invalid_argument {
public:
    explicit InvariantViolation(const std::string& what)
        : std::invalid_argument(what) {}
};

} // namespace tpm
