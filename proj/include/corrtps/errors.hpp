// errors.hpp - exception taxonomy shared across the toolkit.
#pragma once

#include <stdexcept>
#include <string>

namespace corrtps {

// A documented precondition was violated by the caller.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Input is structurally valid but degenerate (empty mask, coplanar cloud, ...).
class DegenerateInputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed file content.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Recognised file, but an element type or layout we do not handle.
class UnsupportedFormatError : public FormatError {
public:
    using FormatError::FormatError;
};

// Filesystem-level failure (missing file, short read, unwritable path).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid pipeline configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Wraps a failure with the pipeline stage it occurred in.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what)
        : std::runtime_error("stage " + stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

} // namespace corrtps
