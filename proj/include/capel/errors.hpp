#pragma once

#include <stdexcept>
#include <string>

namespace capel {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class InvalidTargetError : public Error {
public:
    using Error::Error;
};

class UnsupportedUnitError : public Error {
public:
    using Error::Error;
};

class InvalidArgumentsError : public Error {
public:
    using Error::Error;
};

class EmptyInputError : public Error {
public:
    using Error::Error;
};

class UndefinedScoreError : public Error {
public:
    using Error::Error;
};

class JudgeParseError : public Error {
public:
    using Error::Error;
};

/// Dataset/schema problems; carries the offending field and line when known.
class LoadError : public Error {
public:
    LoadError(const std::string& what, std::string field = {}, long line = -1)
        : Error(annotate(what, field, line)), field_(std::move(field)), line_(line) {}
    const std::string& field() const { return field_; }
    long line() const { return line_; }

private:
    static std::string annotate(const std::string& what, const std::string& field,
                                long line) {
        std::string out = what;
        if (!field.empty()) out += " (field '" + field + "')";
        if (line >= 0) out += " at line " + std::to_string(line);
        return out;
    }

    std::string field_;
    long line_;
};

// Gateway error classes, one per failure mode the caller may react to.
class BackendError : public Error {
public:
    using Error::Error;
};

class AuthError : public BackendError {
public:
    using BackendError::BackendError;
};

class RateLimitError : public BackendError {
public:
    using BackendError::BackendError;
};

class TimeoutError : public BackendError {
public:
    using BackendError::BackendError;
};

class OverCapError : public BackendError {
public:
    using BackendError::BackendError;
};

class StorageError : public Error {
public:
    using Error::Error;
};

}  // namespace capel
