#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fuel {

/// Broad error categories. The CLI maps each category onto its exit code.
enum class ErrorKind {
    parse,    // malformed input file, unsupported version, invalid trace
    spec,     // platform/profile/config problems, ambiguous inputs
    compute,  // a computation precondition failed at run time
    usage,    // bad command-line arguments or format tokens
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error(ErrorKind::parse, "line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class VersionError : public Error {
public:
    explicit VersionError(long long version)
        : Error(ErrorKind::parse, "unsupported trace schema version " + std::to_string(version)),
          version_(version) {}
    long long version() const noexcept { return version_; }

private:
    long long version_;
};

/// One broken invariant of a trace. `record_id` is a request id, a device id, or "meta".
struct Violation {
    std::string record_id;
    std::string rule;
    std::string detail;

    bool operator==(const Violation&) const = default;
};

class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<Violation> violations);
    const std::vector<Violation>& violations() const noexcept { return violations_; }

private:
    std::vector<Violation> violations_;
};

class SpecError : public Error {
public:
    explicit SpecError(const std::string& what) : Error(ErrorKind::spec, what) {}
};

class UnknownDeviceError : public SpecError {
public:
    explicit UnknownDeviceError(const std::string& device_id)
        : SpecError("device '" + device_id + "' is not declared by the platform"), device_id_(device_id) {}
    const std::string& device_id() const noexcept { return device_id_; }

private:
    std::string device_id_;
};

/// Two inputs claim the same grid slot.
class AmbiguityError : public SpecError {
public:
    using SpecError::SpecError;
};

class ComputeError : public Error {
public:
    explicit ComputeError(const std::string& what) : Error(ErrorKind::compute, what) {}
};

class MissingPowerError : public ComputeError {
public:
    using ComputeError::ComputeError;
};

class OutOfWindowError : public ComputeError {
public:
    using ComputeError::ComputeError;
};

/// A failed or zero-token request has no TTFT/TPOT.
class NoLatencyError : public ComputeError {
public:
    using ComputeError::ComputeError;
};

class UndefinedAttainmentError : public ComputeError {
public:
    using ComputeError::ComputeError;
};

class UndefinedSavingsError : public ComputeError {
public:
    using ComputeError::ComputeError;
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

}  // namespace fuel
