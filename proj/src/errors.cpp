#include "econoport/errors.hpp"

#include <sstream>

namespace econoport {

const char* to_string(ParseErrorKind kind) {
    switch (kind) {
        case ParseErrorKind::Lexical: return "lexical";
        case ParseErrorKind::Syntax: return "syntax";
        case ParseErrorKind::DuplicateName: return "duplicate-name";
        case ParseErrorKind::UnknownElement: return "unknown-element";
        case ParseErrorKind::MalformedParameter: return "malformed-parameter";
    }
    return "unknown";
}

namespace {

std::string format_parse(ParseErrorKind kind, int line, int column, const std::string& message) {
    std::ostringstream os;
    os << "line " << line << ", column " << column << ": " << to_string(kind) << " error: " << message;
    return os.str();
}

}  // namespace

ParseError::ParseError(ParseErrorKind kind, int line, int column, const std::string& message)
    : Error(format_parse(kind, line, column, message)),
      kind_(kind),
      line_(line),
      column_(column),
      message_(message) {}

}  // namespace econoport
