#pragma once

// =============================================================================
// econoport - Error hierarchy
// =============================================================================
// Every failure surfaced by the library derives from econoport::Error. The CLI
// maps the families below onto distinct exit codes.
// =============================================================================

#include <complex>
#include <stdexcept>
#include <string>

namespace econoport {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Arithmetic on rational functions / parameter matrices failed.
class AlgebraError : public Error {
public:
    using Error::Error;
};

/// Evaluation landed on (or next to) a pole.
class PoleError : public AlgebraError {
public:
    PoleError(const std::string& what, std::complex<double> s)
        : AlgebraError(what), s_(s) {}
    [[nodiscard]] std::complex<double> s() const { return s_; }

private:
    std::complex<double> s_;
};

/// Parameter-kind conversion blocked by a vanishing pivot.
class ConversionError : public AlgebraError {
public:
    using AlgebraError::AlgebraError;
};

enum class ParseErrorKind {
    Lexical,
    Syntax,
    DuplicateName,
    UnknownElement,
    MalformedParameter,
};

[[nodiscard]] const char* to_string(ParseErrorKind kind);

class ParseError : public Error {
public:
    ParseError(ParseErrorKind kind, int line, int column, const std::string& message);

    [[nodiscard]] ParseErrorKind kind() const { return kind_; }
    [[nodiscard]] int line() const { return line_; }
    [[nodiscard]] int column() const { return column_; }
    [[nodiscard]] const std::string& message() const { return message_; }

private:
    ParseErrorKind kind_;
    int line_;
    int column_;
    std::string message_;
};

class ElaborationError : public Error {
public:
    explicit ElaborationError(const std::string& what, int line = 0)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    /// Source line of the offending declaration, 0 when not tied to one.
    [[nodiscard]] int line() const { return line_; }

private:
    int line_;
};

/// Linear solve or Newton iteration failed.
class SolveError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace econoport
