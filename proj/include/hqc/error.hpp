// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hqc {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or flag value. Maps to CLI exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Unreadable, malformed or inconsistent input data. Maps to CLI exit code 1.
class DataError : public Error {
public:
    using Error::Error;
};

/// Malformed document; carries the byte offset reported by the parser.
class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t byte_offset)
        : DataError(what + " (at byte " + std::to_string(byte_offset) + ")"), byte_offset_(byte_offset) {}

    std::size_t byte_offset() const noexcept { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

}  // namespace hqc
