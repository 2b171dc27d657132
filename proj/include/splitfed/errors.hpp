#pragma once

#include <stdexcept>
#include <string>

namespace splitfed {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "Error"; }
};

/// Malformed input files or command lines (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "ConfigError"; }
};

/// Inputs that parse but violate a domain constraint (CLI exit code 3).
class DomainError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "DomainError"; }
};

#define SPLITFED_DOMAIN_ERROR(Name)                                              \
    class Name : public DomainError {                                            \
    public:                                                                      \
        using DomainError::DomainError;                                          \
        const char* kind() const noexcept override { return #Name; }             \
    }

SPLITFED_DOMAIN_ERROR(DivisibilityError);
SPLITFED_DOMAIN_ERROR(InvalidParam);
SPLITFED_DOMAIN_ERROR(CutOutOfRange);
SPLITFED_DOMAIN_ERROR(ShapeMismatch);
SPLITFED_DOMAIN_ERROR(LengthMismatch);
SPLITFED_DOMAIN_ERROR(EmptyList);

#undef SPLITFED_DOMAIN_ERROR

} // namespace splitfed
