#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace chameleon {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Structured-document violation; `path` is a JSON-pointer-like field path.
class SchemaError : public Error {
public:
    SchemaError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// Raised by geometric primitives on degenerate input (e.g. zero-length chord).
class GeometryError : public Error {
public:
    using Error::Error;
};

class UnknownIdError : public Error {
public:
    using Error::Error;
};

/// DSL diagnostics carry a 1-based line/column.
class ProgramError : public Error {
public:
    enum class Kind { Syntax, UnknownPrimitive, Type };

    ProgramError(Kind kind, std::size_t line, std::size_t column, const std::string& message)
        : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
          kind_(kind), line_(line), column_(column), message_(message) {}

    Kind kind() const noexcept { return kind_; }
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }
    const std::string& message() const noexcept { return message_; }

private:
    Kind kind_;
    std::size_t line_;
    std::size_t column_;
    std::string message_;
};

/// Any failure to obtain a reply from a chat backend.
class TransportError : public Error {
public:
    using Error::Error;
};

}  // namespace chameleon
