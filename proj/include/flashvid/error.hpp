// Copyright 2026 The flashvid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace flashvid {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define FLASHVID_ERROR(Name)                      \
    class Name : public Error {                   \
    public:                                       \
        explicit Name(const std::string& what)    \
            : Error(std::string(#Name ": ") + what) \
        {                                         \
        }                                         \
    }

FLASHVID_ERROR(ShapeError);
FLASHVID_ERROR(ConfigError);
FLASHVID_ERROR(InputError);
FLASHVID_ERROR(NumericError);
FLASHVID_ERROR(ContractError);
FLASHVID_ERROR(CapacityError);
FLASHVID_ERROR(ConsistencyError);
FLASHVID_ERROR(TrainingError);
FLASHVID_ERROR(ScenarioError);
FLASHVID_ERROR(IoError);

// Checkpoint decoding failures.
FLASHVID_ERROR(MagicError);
FLASHVID_ERROR(VersionError);
FLASHVID_ERROR(ChecksumError);

#undef FLASHVID_ERROR

/// Config file failure tied to a source line (0 for command-line overrides).
class ConfigFileError : public Error {
public:
    ConfigFileError(const std::string& kind, std::size_t line, const std::string& what)
        : Error(kind + ": " + (line ? "line " + std::to_string(line) : std::string("override")) +
                ": " + what),
          line_(line)
    {
    }

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class ParseError : public ConfigFileError {
public:
    ParseError(std::size_t line, const std::string& what) : ConfigFileError("ParseError", line, what)
    {
    }
};

class UnknownKeyError : public ConfigFileError {
public:
    UnknownKeyError(std::size_t line, const std::string& what)
        : ConfigFileError("UnknownKeyError", line, what)
    {
    }
};

} // namespace flashvid
