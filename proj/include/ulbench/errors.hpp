#pragma once

#include <stdexcept>
#include <string>

namespace ulbench {

// Base class for all library errors so the CLI can report a stage name
// and exit nonzero without catching std::exception wholesale.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Requested more distinct values than a generator pool can supply.
class CapacityError : public Error {
public:
    explicit CapacityError(const std::string& msg) : Error(msg) {}
};

// A split request that would produce an empty forget set.
class InvalidSplitError : public Error {
public:
    explicit InvalidSplitError(const std::string& msg) : Error(msg) {}
};

// Malformed structured-text input. Carries the 1-based line number of the
// offending record when known (0 = whole file).
class SchemaError : public Error {
public:
    SchemaError(const std::string& msg, std::size_t line = 0)
        : Error(line ? msg + " (line " + std::to_string(line) + ")" : msg), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class InvalidArgumentError : public Error {
public:
    explicit InvalidArgumentError(const std::string& msg) : Error(msg) {}
};

class InvalidRecordError : public Error {
public:
    explicit InvalidRecordError(const std::string& msg) : Error(msg) {}
};

// Non-finite value produced where a finite one is required.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

}  // namespace ulbench
