#pragma once

#include <stdexcept>
#include <string>

namespace twm {

// Precondition violations (CLI exit code 3).
struct NotPrime : std::domain_error {
    explicit NotPrime(const std::string& what) : std::domain_error(what) {}
};
struct NotInvertible : std::domain_error {
    explicit NotInvertible(const std::string& what) : std::domain_error(what) {}
};
struct NonCoprime : std::domain_error {
    explicit NonCoprime(const std::string& what) : std::domain_error(what) {}
};
struct EqualModuli : std::domain_error {
    explicit EqualModuli(const std::string& what) : std::domain_error(what) {}
};
struct Pole : std::domain_error {
    explicit Pole(const std::string& what) : std::domain_error(what) {}
};
struct OutOfRange : std::out_of_range {
    explicit OutOfRange(const std::string& what) : std::out_of_range(what) {}
};
struct CoprimalityViolation : std::domain_error {
    explicit CoprimalityViolation(const std::string& what) : std::domain_error(what) {}
};
struct NotFound : std::domain_error {
    explicit NotFound(const std::string& what) : std::domain_error(what) {}
};
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};
struct BudgetExceeded : std::runtime_error {
    explicit BudgetExceeded(const std::string& what) : std::runtime_error(what) {}
};

// Internal identity failures (CLI exit code 5).  These indicate an
// implementation bug, never a math failure.
struct FactorizationMismatch : std::logic_error {
    explicit FactorizationMismatch(const std::string& what) : std::logic_error(what) {}
};
struct DecompositionMismatch : std::logic_error {
    explicit DecompositionMismatch(const std::string& what) : std::logic_error(what) {}
};
struct CacheCorrupt : std::runtime_error {
    explicit CacheCorrupt(const std::string& what) : std::runtime_error(what) {}
};

} // namespace twm
