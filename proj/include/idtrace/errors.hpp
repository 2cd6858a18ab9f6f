#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace idtrace {

// Base of every error raised by the library. `code()` is a stable
// machine-readable tag used by the CLI exit mapping and the HTTP error bodies.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what) : std::runtime_error(what), code_(std::move(code)) {}
    [[nodiscard]] const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

class ParseError : public Error {
public:
    ParseError(std::size_t row, const std::string& what)
        : Error("parse_error", "row " + std::to_string(row) + ": " + what), row_(row) {}
    [[nodiscard]] std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what, std::optional<std::size_t> row = std::nullopt)
        : Error("validation_error", row ? "row " + std::to_string(*row) + ": " + what : what), row_(row) {}
    [[nodiscard]] std::optional<std::size_t> row() const noexcept { return row_; }

private:
    std::optional<std::size_t> row_;
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error("usage_error", what) {}
};

class ResourceLimitError : public Error {
public:
    explicit ResourceLimitError(const std::string& what) : Error("resource_limit", what) {}
};

class GenerationError : public Error {
public:
    explicit GenerationError(const std::string& what) : Error("generation_error", what) {}
};

// An empty search space has no identity entropy.
class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error("domain_error", what) {}
};

// The observed value does not occur in the candidate set (p = 0).
class ProbabilityZeroError : public Error {
public:
    explicit ProbabilityZeroError(std::size_t attribute, const std::string& what)
        : Error("probability_zero", what), attribute_(attribute) {}
    [[nodiscard]] std::size_t attribute() const noexcept { return attribute_; }

private:
    std::size_t attribute_;
};

// The observation set filters the search space down to nothing.
class InconsistentObservationsError : public Error {
public:
    explicit InconsistentObservationsError(const std::string& what) : Error("inconsistent_observations", what) {}
};

// Every surviving candidate is MISSING on the attribute.
class UndefinedAttributeError : public Error {
public:
    explicit UndefinedAttributeError(std::size_t attribute, const std::string& what)
        : Error("undefined_attribute", what), attribute_(attribute) {}
    [[nodiscard]] std::size_t attribute() const noexcept { return attribute_; }

private:
    std::size_t attribute_;
};

class InvalidSetError : public Error {
public:
    explicit InvalidSetError(const std::string& what) : Error("invalid_set", what) {}
};

class NotDistinguishableError : public Error {
public:
    NotDistinguishableError(std::vector<std::size_t> survivors, const std::string& what)
        : Error("not_distinguishable", what), survivors_(std::move(survivors)) {}
    [[nodiscard]] const std::vector<std::size_t>& survivors() const noexcept { return survivors_; }

private:
    std::vector<std::size_t> survivors_;
};

class ExhaustedError : public Error {
public:
    explicit ExhaustedError(const std::string& what) : Error("exhausted", what) {}
};

}  // namespace idtrace
