#pragma once

#include <stdexcept>
#include <string>

namespace bioseg {

// All library errors carry a stable machine-parseable category string.
// The CLI prints them as "error: <category>: <message>" and maps the
// category to its exit code.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& message)
        : std::runtime_error(category + ": " + message), category_(std::move(category)) {}

    const std::string& category() const { return category_; }

private:
    std::string category_;
};

// A caller broke a documented precondition or invariant.
class ContractViolation : public Error {
public:
    explicit ContractViolation(const std::string& message)
        : Error("contract_violation", message) {}
};

// A file or byte stream does not match its declared format.
class FormatError : public Error {
public:
    explicit FormatError(const std::string& message) : Error("format_error", message) {}
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& message) : Error("divergence", message) {}
};

// Filesystem problem (missing file, unwritable path).
class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error("io_error", message) {}
};

}  // namespace bioseg
