#pragma once

#include <stdexcept>
#include <string>

namespace qls {

// Malformed expression source; offset is the byte position of the problem.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// Evaluation outside a function's domain (ln/sqrt of a negative, 0^negative).
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Unbound variable or malformed binding environment at evaluation time.
class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numeric breakdown: trajectory blow-up, non-finite values, singular fits.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad configuration or arguments (wrong dimensions, unknown names, bad JSON).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace qls
