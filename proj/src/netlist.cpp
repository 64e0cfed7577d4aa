#include "econoport/netlist.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

#include "econoport/errors.hpp"

namespace econoport {

// =============================================================================
// Element table
// =============================================================================

namespace {

struct KindInfo {
    ElementKind kind;
    const char* keyword;
    int terminals;
};

constexpr KindInfo kKinds[] = {
    {ElementKind::Demand, "DEMAND", 2},       {ElementKind::Storage, "STORAGE", 2},
    {ElementKind::Friction, "FRICTION", 2},   {ElementKind::Mutual, "MUTUAL", 4},
    {ElementKind::FlowSource, "FSRC", 2},     {ElementKind::IncentiveSource, "VSRC", 2},
    {ElementKind::Vcvs, "VCVS", 2},           {ElementKind::Vccs, "VCCS", 2},
    {ElementKind::Ccvs, "CCVS", 2},           {ElementKind::Cccs, "CCCS", 2},
    {ElementKind::Diode, "DIODE", 2},         {ElementKind::ProdFet, "PRODFET", 3},
    {ElementKind::Noise, "NOISE", 2},         {ElementKind::Ammeter, "AMMETER", 2},
    {ElementKind::Voltmeter, "VOLTMETER", 2},
};

const KindInfo& info(ElementKind kind) {
    for (const auto& k : kKinds) {
        if (k.kind == kind) return k;
    }
    return kKinds[0];
}

std::string upper(std::string s) {
    for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

bool is_controlled(ElementKind k) {
    return k == ElementKind::Vcvs || k == ElementKind::Vccs || k == ElementKind::Ccvs ||
           k == ElementKind::Cccs;
}

bool is_current_controlled(ElementKind k) { return k == ElementKind::Ccvs || k == ElementKind::Cccs; }

bool is_source(ElementKind k) { return k == ElementKind::FlowSource || k == ElementKind::IncentiveSource; }

struct ParamRule {
    const char* key;
    bool required;
};

std::vector<ParamRule> param_rules(ElementKind kind) {
    switch (kind) {
        case ElementKind::Demand: return {{"eps", true}, {"f0", false}};
        case ElementKind::Storage: return {{"k", true}, {"q0", false}};
        case ElementKind::Friction: return {{"b", true}};
        case ElementKind::Mutual:
            return {{"eps11", true}, {"eps12", true}, {"eps21", false},
                    {"eps22", true}, {"f01", false},  {"f02", false}};
        case ElementKind::Diode: return {{"ron", false}, {"roff", false}};
        case ElementKind::ProdFet: return {{"mu", true}, {"kth", true}};
        case ElementKind::Noise: return {{"seed", true}, {"amp", true}};
        default: return {};
    }
}

}  // namespace

const char* keyword(ElementKind kind) { return info(kind).keyword; }

int terminal_count(ElementKind kind) { return info(kind).terminals; }

std::optional<ElementKind> element_kind_from_keyword(const std::string& word) {
    const std::string w = upper(word);
    for (const auto& k : kKinds) {
        if (w == k.keyword) return k.kind;
    }
    return std::nullopt;
}

const std::string& statement_name(const Statement& st) {
    return std::visit([](const auto& s) -> const std::string& { return s.name; }, st);
}

std::vector<std::string> SubcktDef::terminals() const {
    std::vector<std::string> out;
    for (const auto& p : ports) {
        out.push_back(p.plus);
        out.push_back(p.minus);
    }
    return out;
}

// =============================================================================
// Waveforms and transfer specs
// =============================================================================

const char* to_string(Waveform::Kind kind) {
    switch (kind) {
        case Waveform::Kind::Dc: return "DC";
        case Waveform::Kind::Step: return "STEP";
        case Waveform::Kind::Pulse: return "PULSE";
        case Waveform::Kind::Sine: return "SINE";
        case Waveform::Kind::Pwl: return "PWL";
        case Waveform::Kind::Ac: return "AC";
        case Waveform::Kind::Noise: return "NOISE";
    }
    return "?";
}

double Waveform::value(double t) const {
    constexpr double kPi = 3.14159265358979323846;
    switch (kind) {
        case Kind::Dc: return args[0];
        case Kind::Step: return t >= args[0] ? args[1] : 0.0;
        case Kind::Pulse: return (t >= args[2] && t < args[2] + args[3]) ? args[1] : args[0];
        case Kind::Sine: {
            const double phase = args.size() > 3 ? args[3] * kPi / 180.0 : 0.0;
            return args[0] + args[1] * std::sin(2.0 * kPi * args[2] * t + phase);
        }
        case Kind::Pwl: {
            const std::size_t n = args.size() / 2;
            if (t <= args[0]) return args[1];
            for (std::size_t i = 1; i < n; ++i) {
                const double t1 = args[2 * i];
                if (t <= t1) {
                    const double t0 = args[2 * i - 2];
                    const double v0 = args[2 * i - 1];
                    const double v1 = args[2 * i + 1];
                    return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
                }
            }
            return args[2 * n - 1];
        }
        case Kind::Ac:
        case Kind::Noise: return 0.0;
    }
    return 0.0;
}

void Waveform::breakpoints(std::vector<double>& out) const {
    switch (kind) {
        case Kind::Step: out.push_back(args[0]); break;
        case Kind::Pulse:
            out.push_back(args[2]);
            out.push_back(args[2] + args[3]);
            break;
        case Kind::Pwl:
            for (std::size_t i = 0; i < args.size(); i += 2) out.push_back(args[i]);
            break;
        default: break;
    }
}

RationalFunction TransferSpec::function() const {
    if (pid) return pid_policy(kp, ki, kd, wf);
    return RationalFunction(Polynomial(num), Polynomial(den));
}

std::vector<double> AcDirective::grid() const {
    std::vector<double> f(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
        const double x = points > 1 ? static_cast<double>(i) / (points - 1) : 0.0;
        f[static_cast<std::size_t>(i)] =
            log ? fstart * std::pow(fstop / fstart, x) : fstart + (fstop - fstart) * x;
    }
    f.back() = fstop;
    return f;
}

std::string ProbeDecl::text() const {
    std::string s(1, fn);
    s += "(";
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (i) s += ",";
        s += args[i];
    }
    return s + ")";
}

// =============================================================================
// Lexer
// =============================================================================

namespace {

struct Token {
    enum class Type { Word, Equals, LParen, RParen, Comma, LBracket, RBracket, Slash };
    Type type = Type::Word;
    std::string text;
    int line = 0;
    int column = 0;
};

struct LogicalLine {
    std::vector<Token> tokens;
    std::string raw;  // text after the first token of the first physical line
    int line = 0;
};

bool is_word_char(char c) {
    const auto u = static_cast<unsigned char>(c);
    if (u >= 0x80 || std::isalnum(u)) return true;
    switch (c) {
        case '_': case '.': case '+': case '-': case ':': case '#': case '$':
        case '%': case '&': case '!': case '?': case '<': case '>':
            return true;
        default: return false;
    }
}

void tokenize(const std::string& text, int line, int offset, std::vector<Token>& out) {
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        const int col = offset + static_cast<int>(i) + 1;
        if (c == ' ' || c == '\t' || c == '\r') {
            ++i;
            continue;
        }
        Token tok;
        tok.line = line;
        tok.column = col;
        switch (c) {
            case '=': tok.type = Token::Type::Equals; break;
            case '(': tok.type = Token::Type::LParen; break;
            case ')': tok.type = Token::Type::RParen; break;
            case ',': tok.type = Token::Type::Comma; break;
            case '[': tok.type = Token::Type::LBracket; break;
            case ']': tok.type = Token::Type::RBracket; break;
            case '/': tok.type = Token::Type::Slash; break;
            default: {
                if (!is_word_char(c)) {
                    std::string shown = std::isprint(static_cast<unsigned char>(c))
                                            ? std::string(1, c)
                                            : "\\x" + std::to_string(static_cast<int>(static_cast<unsigned char>(c)));
                    throw ParseError(ParseErrorKind::Lexical, line, col, "unexpected character '" + shown + "'");
                }
                std::size_t j = i;
                while (j < text.size() && is_word_char(text[j])) ++j;
                tok.text = text.substr(i, j - i);
                out.push_back(std::move(tok));
                i = j;
                continue;
            }
        }
        tok.text = std::string(1, c);
        out.push_back(std::move(tok));
        ++i;
    }
}

std::vector<LogicalLine> split_lines(const std::string& text) {
    std::vector<LogicalLine> lines;
    std::istringstream in(text);
    std::string physical;
    int line_no = 0;
    while (std::getline(in, physical)) {
        ++line_no;
        if (const auto semi = physical.find(';'); semi != std::string::npos) physical.resize(semi);
        const auto first = physical.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        if (physical[first] == '*') continue;
        if (physical[first] == '+') {
            if (lines.empty()) {
                throw ParseError(ParseErrorKind::Syntax, line_no, static_cast<int>(first) + 1,
                                 "continuation line without a statement");
            }
            const std::string rest = physical.substr(first + 1);
            tokenize(rest, line_no, static_cast<int>(first) + 1, lines.back().tokens);
            lines.back().raw += " " + rest;
            continue;
        }
        LogicalLine ll;
        ll.line = line_no;
        tokenize(physical, line_no, 0, ll.tokens);
        const auto word_end = physical.find_first_of(" \t", first);
        ll.raw = word_end == std::string::npos ? std::string() : physical.substr(word_end);
        lines.push_back(std::move(ll));
    }
    return lines;
}

// =============================================================================
// Parser
// =============================================================================

[[noreturn]] void fail(ParseErrorKind kind, const Token& tok, const std::string& msg) {
    throw ParseError(kind, tok.line, tok.column, msg);
}

double parse_number(const Token& tok) {
    if (tok.type != Token::Type::Word) fail(ParseErrorKind::MalformedParameter, tok, "expected a number");
    const std::string& s = tok.text;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    if (begin != end && *begin == '+') ++begin;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr == begin) {
        fail(ParseErrorKind::MalformedParameter, tok, "malformed number '" + s + "'");
    }
    const std::string suffix = lower(std::string(ptr, end));
    static const std::map<std::string, double> kScale = {
        {"", 1.0},   {"f", 1e-15}, {"p", 1e-12}, {"n", 1e-9}, {"u", 1e-6}, {"m", 1e-3},
        {"k", 1e3},  {"meg", 1e6}, {"g", 1e9},   {"t", 1e12},
    };
    const auto it = kScale.find(suffix);
    if (it == kScale.end()) {
        fail(ParseErrorKind::MalformedParameter, tok, "unknown suffix '" + suffix + "' in '" + s + "'");
    }
    value *= it->second;
    if (!std::isfinite(value)) fail(ParseErrorKind::MalformedParameter, tok, "non-finite number '" + s + "'");
    return value;
}

class Cursor {
public:
    explicit Cursor(const LogicalLine& ll) : ll_(ll) {}

    [[nodiscard]] bool done() const { return pos_ >= ll_.tokens.size(); }
    [[nodiscard]] const Token& peek(std::size_t ahead = 0) const {
        static const Token kEnd;
        return pos_ + ahead < ll_.tokens.size() ? ll_.tokens[pos_ + ahead] : kEnd;
    }
    [[nodiscard]] bool at(Token::Type type, std::size_t ahead = 0) const {
        return pos_ + ahead < ll_.tokens.size() && ll_.tokens[pos_ + ahead].type == type;
    }
    const Token& next() {
        if (done()) fail(ParseErrorKind::Syntax, end_token(), "unexpected end of statement");
        return ll_.tokens[pos_++];
    }
    const Token& expect(Token::Type type, const char* what) {
        if (done()) fail(ParseErrorKind::Syntax, end_token(), std::string("expected ") + what);
        const Token& t = ll_.tokens[pos_];
        if (t.type != type) fail(ParseErrorKind::Syntax, t, std::string("expected ") + what + ", found '" + t.text + "'");
        ++pos_;
        return t;
    }
    [[nodiscard]] Token end_token() const {
        Token t;
        t.line = ll_.tokens.empty() ? ll_.line : ll_.tokens.back().line;
        t.column = ll_.tokens.empty() ? 1 : ll_.tokens.back().column + static_cast<int>(ll_.tokens.back().text.size());
        return t;
    }
    /// A plain word that is not the key of key=value or the name of a call.
    [[nodiscard]] bool at_bare_word() const {
        return at(Token::Type::Word) && !at(Token::Type::Equals, 1) && !at(Token::Type::LParen, 1);
    }

private:
    const LogicalLine& ll_;
    std::size_t pos_ = 1;
};

std::vector<double> number_list(Cursor& cur, Token::Type close, const char* what) {
    std::vector<double> out;
    while (!cur.at(close)) {
        if (cur.done()) fail(ParseErrorKind::Syntax, cur.end_token(), std::string("unterminated ") + what);
        if (cur.at(Token::Type::Comma)) {
            cur.next();
            continue;
        }
        out.push_back(parse_number(cur.next()));
    }
    cur.next();
    return out;
}

Waveform parse_waveform(Cursor& cur) {
    const Token& name = cur.next();
    cur.expect(Token::Type::LParen, "'('");
    static const std::map<std::string, Waveform::Kind> kNames = {
        {"DC", Waveform::Kind::Dc},     {"STEP", Waveform::Kind::Step}, {"PULSE", Waveform::Kind::Pulse},
        {"SINE", Waveform::Kind::Sine}, {"SIN", Waveform::Kind::Sine},  {"PWL", Waveform::Kind::Pwl},
        {"AC", Waveform::Kind::Ac},     {"NOISE", Waveform::Kind::Noise},
    };
    const auto it = kNames.find(upper(name.text));
    if (it == kNames.end()) fail(ParseErrorKind::MalformedParameter, name, "unknown waveform '" + name.text + "'");
    Waveform w;
    w.kind = it->second;
    w.args = number_list(cur, Token::Type::RParen, "waveform argument list");
    const std::size_t n = w.args.size();
    bool ok = true;
    switch (w.kind) {
        case Waveform::Kind::Dc: ok = n == 1; break;
        case Waveform::Kind::Step: ok = n == 2; break;
        case Waveform::Kind::Pulse: ok = n == 4 && w.args[3] >= 0.0; break;
        case Waveform::Kind::Sine: ok = n == 3 || n == 4; break;
        case Waveform::Kind::Ac: ok = n == 1 || n == 2; break;
        case Waveform::Kind::Noise:
            ok = n == 2 && w.args[0] >= 0.0 && w.args[0] == std::floor(w.args[0]) && w.args[1] >= 0.0;
            break;
        case Waveform::Kind::Pwl:
            ok = n >= 2 && n % 2 == 0;
            for (std::size_t i = 2; ok && i < n; i += 2) ok = w.args[i] > w.args[i - 2];
            break;
    }
    if (!ok) fail(ParseErrorKind::MalformedParameter, name, "bad arguments for waveform " + upper(name.text));
    return w;
}

TransferSpec parse_transfer(Cursor& cur) {
    TransferSpec tf;
    if (cur.at(Token::Type::Word) && lower(cur.peek().text) == "pid") {
        cur.next();
        tf.pid = true;
        return tf;
    }
    if (cur.at(Token::Type::LBracket)) {
        const Token& open = cur.next();
        tf.num = number_list(cur, Token::Type::RBracket, "coefficient list");
        tf.den = {1.0};
        if (cur.at(Token::Type::Slash)) {
            cur.next();
            cur.expect(Token::Type::LBracket, "'['");
            tf.den = number_list(cur, Token::Type::RBracket, "coefficient list");
        }
        if (tf.num.empty()) tf.num = {0.0};
        if (Polynomial(tf.den).is_zero()) fail(ParseErrorKind::MalformedParameter, open, "zero denominator");
        return tf;
    }
    tf.num = {parse_number(cur.next())};
    return tf;
}

class Parser {
public:
    Netlist run(const std::string& text) {
        for (const LogicalLine& ll : split_lines(text)) {
            if (ended_) break;
            statement(ll);
        }
        if (current_) {
            throw ParseError(ParseErrorKind::Syntax, current_->loc.line, current_->loc.column,
                             ".SUBCKT " + current_->name + " is missing .ENDS");
        }
        return std::move(out_);
    }

private:
    Netlist out_;
    std::optional<SubcktDef> current_;
    std::set<std::string> scope_names_;
    std::set<std::string> top_names_;
    bool ended_ = false;

    std::set<std::string>& names() { return current_ ? scope_names_ : top_names_; }

    void add(Statement st, const Token& name_tok) {
        if (!names().insert(statement_name(st)).second) {
            fail(ParseErrorKind::DuplicateName, name_tok, "duplicate name '" + statement_name(st) + "'");
        }
        (current_ ? current_->body : out_.top).push_back(std::move(st));
    }

    void statement(const LogicalLine& ll) {
        const Token& head = ll.tokens.front();
        if (head.type != Token::Type::Word) fail(ParseErrorKind::Syntax, head, "statement must start with a keyword");
        if (head.text[0] == '.') return directive(ll);
        if (head.text[0] == 'X' || head.text[0] == 'x') return instance(ll);
        const auto kind = element_kind_from_keyword(head.text);
        if (!kind) fail(ParseErrorKind::UnknownElement, head, "unknown element kind '" + head.text + "'");
        element(ll, *kind);
    }

    void instance(const LogicalLine& ll) {
        Cursor cur(ll);
        Instance inst;
        const Token& head = ll.tokens.front();
        inst.name = head.text;
        inst.loc = {head.line, head.column};
        while (!cur.done()) {
            if (!cur.at_bare_word()) fail(ParseErrorKind::Syntax, cur.peek(), "instance takes node names and a subcircuit name");
            inst.nodes.push_back(cur.next().text);
        }
        if (inst.nodes.empty()) fail(ParseErrorKind::Syntax, cur.end_token(), "instance needs a subcircuit name");
        inst.subckt = inst.nodes.back();
        inst.nodes.pop_back();
        add(std::move(inst), head);
    }

    void element(const LogicalLine& ll, ElementKind kind) {
        Cursor cur(ll);
        const Token& head = ll.tokens.front();
        ElementDecl e;
        e.kind = kind;
        e.loc = {head.line, head.column};
        if (!cur.at_bare_word()) fail(ParseErrorKind::Syntax, cur.done() ? cur.end_token() : cur.peek(), "expected element name");
        const Token& name_tok = cur.next();
        e.name = name_tok.text;
        const int nterm = terminal_count(kind);
        for (int i = 0; i < nterm; ++i) {
            if (!cur.at_bare_word()) {
                fail(ParseErrorKind::Syntax, cur.done() ? cur.end_token() : cur.peek(),
                     std::string(keyword(kind)) + " needs " + std::to_string(nterm) + " terminals");
            }
            e.nodes.push_back(cur.next().text);
        }

        const auto rules = param_rules(kind);
        std::map<std::string, Token> seen;
        while (!cur.done()) {
            const Token& tok = cur.peek();
            if (tok.type == Token::Type::Word && cur.at(Token::Type::LParen, 1)) {
                if (!is_source(kind)) fail(ParseErrorKind::MalformedParameter, tok, std::string(keyword(kind)) + " takes no waveform");
                e.waveform.push_back(parse_waveform(cur));
                continue;
            }
            if (tok.type != Token::Type::Word || !cur.at(Token::Type::Equals, 1)) {
                fail(ParseErrorKind::Syntax, tok, "expected key=value, found '" + tok.text + "'");
            }
            const Token key_tok = cur.next();
            cur.next();
            std::string key = lower(key_tok.text);
            if (key == "gain") key = "tf";
            if (!seen.emplace(key, key_tok).second) {
                fail(ParseErrorKind::MalformedParameter, key_tok, "parameter '" + key + "' given twice");
            }
            if (is_controlled(kind)) {
                if (key == "tf") {
                    e.tf = parse_transfer(cur);
                    continue;
                }
                const bool ref = is_current_controlled(kind) ? key == "sense" : (key == "ctrl+" || key == "ctrl-");
                if (ref) {
                    if (!cur.at(Token::Type::Word)) fail(ParseErrorKind::MalformedParameter, key_tok, "'" + key + "' needs a name");
                    e.refs[key] = cur.next().text;
                    continue;
                }
                if (e.tf && e.tf->pid && (key == "kp" || key == "ki" || key == "kd" || key == "wf")) {
                    const double v = parse_number(cur.next());
                    (key == "kp" ? e.tf->kp : key == "ki" ? e.tf->ki : key == "kd" ? e.tf->kd : e.tf->wf) = v;
                    continue;
                }
                fail(ParseErrorKind::MalformedParameter, key_tok, "unknown parameter '" + key + "' for " + keyword(kind));
            }
            const bool known = std::any_of(rules.begin(), rules.end(), [&](const ParamRule& r) { return key == r.key; });
            if (!known) fail(ParseErrorKind::MalformedParameter, key_tok, "unknown parameter '" + key + "' for " + keyword(kind));
            e.params[key] = parse_number(cur.next());
        }

        for (const auto& r : rules) {
            if (r.required && !e.params.count(r.key)) {
                fail(ParseErrorKind::MalformedParameter, name_tok, std::string("missing parameter '") + r.key + "'");
            }
        }
        if (is_controlled(kind)) {
            const std::vector<std::string> need = is_current_controlled(kind)
                                                      ? std::vector<std::string>{"sense"}
                                                      : std::vector<std::string>{"ctrl+", "ctrl-"};
            for (const auto& k : need) {
                if (!e.refs.count(k)) fail(ParseErrorKind::MalformedParameter, name_tok, "missing parameter '" + k + "'");
            }
            if (!e.tf) fail(ParseErrorKind::MalformedParameter, name_tok, "missing parameter 'tf'");
            if (e.tf->pid && e.tf->wf <= 0.0) fail(ParseErrorKind::MalformedParameter, seen.at("tf"), "pid wf must be positive");
        }
        validate(e, seen, name_tok);
        add(std::move(e), name_tok);
    }

    static void validate(const ElementDecl& e, const std::map<std::string, Token>& seen, const Token& name_tok) {
        auto bad = [&](const std::string& key, const std::string& msg) {
            const auto it = seen.find(key);
            fail(ParseErrorKind::MalformedParameter, it != seen.end() ? it->second : name_tok, msg);
        };
        auto p = [&](const char* key) { return e.params.at(key); };
        switch (e.kind) {
            case ElementKind::Demand:
                if (p("eps") <= 0.0) bad("eps", "eps must be positive");
                break;
            case ElementKind::Storage:
                if (p("k") <= 0.0) bad("k", "k must be positive");
                break;
            case ElementKind::Friction:
                if (p("b") <= 0.0) bad("b", "b must be positive");
                break;
            case ElementKind::Mutual: {
                if (e.params.count("eps21") && p("eps21") != p("eps12")) bad("eps21", "elasticity matrix must be symmetric");
                const double det = p("eps11") * p("eps22") - p("eps12") * p("eps12");
                if (p("eps11") <= 0.0 || p("eps22") <= 0.0 || det <= 0.0) {
                    bad("eps12", "elasticity matrix must be positive definite");
                }
                break;
            }
            case ElementKind::Diode: {
                const double ron = e.params.count("ron") ? p("ron") : 1e-6;
                const double roff = e.params.count("roff") ? p("roff") : 1e9;
                if (ron <= 0.0) bad("ron", "ron must be positive");
                if (ron >= roff) bad("roff", "ron must be below roff");
                break;
            }
            case ElementKind::ProdFet:
                if (p("mu") <= 0.0) bad("mu", "mu must be positive");
                break;
            case ElementKind::Noise:
                if (p("seed") < 0.0 || p("seed") != std::floor(p("seed"))) bad("seed", "seed must be a non-negative integer");
                if (p("amp") < 0.0) bad("amp", "amp must be non-negative");
                break;
            default: break;
        }
    }

    void require_top(const Token& head) {
        if (current_) fail(ParseErrorKind::Syntax, head, upper(head.text) + " is not allowed inside .SUBCKT");
    }

    void directive(const LogicalLine& ll) {
        Cursor cur(ll);
        const Token& head = ll.tokens.front();
        const std::string d = upper(head.text);
        if (d == ".END") {
            ended_ = true;
            return;
        }
        if (d == ".SUBCKT") return subckt(ll, cur);
        if (d == ".ENDS") {
            if (!current_) fail(ParseErrorKind::Syntax, head, ".ENDS without .SUBCKT");
            if (!cur.done()) {
                const Token& n = cur.next();
                if (n.text != current_->name) fail(ParseErrorKind::Syntax, n, ".ENDS name does not match .SUBCKT " + current_->name);
            }
            if (!cur.done()) fail(ParseErrorKind::Syntax, cur.peek(), "unexpected token after .ENDS");
            const std::string name = current_->name;
            out_.subckts.emplace(name, std::move(*current_));
            current_.reset();
            scope_names_.clear();
            return;
        }
        require_top(head);
        if (d == ".TITLE") {
            const auto b = ll.raw.find_first_not_of(" \t");
            const auto e = ll.raw.find_last_not_of(" \t\r");
            out_.title = b == std::string::npos ? std::string() : ll.raw.substr(b, e - b + 1);
            return;
        }
        if (d == ".OP") {
            if (!cur.done()) fail(ParseErrorKind::Syntax, cur.peek(), ".OP takes no arguments");
            out_.analyses.emplace_back(OpDirective{});
            return;
        }
        if (d == ".TRAN") return tran(cur, head);
        if (d == ".AC") return ac(cur, head);
        if (d == ".PROBE") {
            if (cur.done()) fail(ParseErrorKind::Syntax, cur.end_token(), ".PROBE needs at least one probe");
            while (!cur.done()) out_.probes.push_back(probe(cur));
            return;
        }
        if (d == ".OPTIONS") {
            static const std::set<std::string> kKnown = {"reltol", "abstol", "vabstol", "gmin", "maxiter", "seed"};
            while (!cur.done()) {
                const Token& key = cur.next();
                cur.expect(Token::Type::Equals, "'='");
                const std::string k = lower(key.text);
                if (!kKnown.count(k)) fail(ParseErrorKind::MalformedParameter, key, "unknown option '" + key.text + "'");
                const double v = parse_number(cur.next());
                if (v < 0.0) fail(ParseErrorKind::MalformedParameter, key, "option '" + k + "' must be non-negative");
                out_.options[k] = v;
            }
            return;
        }
        if (d == ".FLOAT") {
            while (!cur.done()) {
                if (!cur.at_bare_word()) fail(ParseErrorKind::Syntax, cur.peek(), ".FLOAT takes node names");
                out_.floating.push_back(cur.next().text);
            }
            return;
        }
        fail(ParseErrorKind::Syntax, head, "unknown directive '" + head.text + "'");
    }

    void subckt(const LogicalLine& ll, Cursor& cur) {
        const Token& head = ll.tokens.front();
        if (current_) fail(ParseErrorKind::Syntax, head, "nested .SUBCKT is not supported");
        if (!cur.at_bare_word()) fail(ParseErrorKind::Syntax, cur.done() ? cur.end_token() : cur.peek(), ".SUBCKT needs a name");
        const Token& name = cur.next();
        if (out_.subckts.count(name.text)) fail(ParseErrorKind::DuplicateName, name, "duplicate subcircuit '" + name.text + "'");
        SubcktDef def;
        def.name = name.text;
        def.loc = {head.line, head.column};
        std::vector<Token> terms;
        while (!cur.done()) {
            if (!cur.at_bare_word()) fail(ParseErrorKind::Syntax, cur.peek(), ".SUBCKT takes terminal names");
            terms.push_back(cur.next());
        }
        if (terms.empty() || terms.size() % 2 != 0) {
            fail(ParseErrorKind::Syntax, terms.empty() ? cur.end_token() : terms.back(),
                 "ports are declared as terminal pairs (+ then -)");
        }
        for (std::size_t i = 0; i < terms.size(); i += 2) {
            for (const Token* t : {&terms[i], &terms[i + 1]}) {
                if (t->text == "0") fail(ParseErrorKind::Syntax, *t, "ground cannot be a port terminal");
            }
            if (terms[i].text == terms[i + 1].text) fail(ParseErrorKind::Syntax, terms[i + 1], "port terminals must differ");
            def.ports.push_back({terms[i].text, terms[i + 1].text});
        }
        current_ = std::move(def);
        scope_names_.clear();
    }

    void tran(Cursor& cur, const Token& head) {
        TranDirective t;
        if (cur.done()) fail(ParseErrorKind::Syntax, cur.end_token(), ".TRAN needs tstep and tstop");
        const Token& step = cur.next();
        t.tstep = parse_number(step);
        if (cur.done()) fail(ParseErrorKind::Syntax, cur.end_token(), ".TRAN needs tstep and tstop");
        t.tstop = parse_number(cur.next());
        if (t.tstep <= 0.0 || t.tstep >= t.tstop) fail(ParseErrorKind::MalformedParameter, step, "need 0 < tstep < tstop");
        while (!cur.done()) {
            const Token& key = cur.next();
            cur.expect(Token::Type::Equals, "'='");
            const Token& val = cur.next();
            const std::string k = lower(key.text);
            const std::string v = lower(val.text);
            if (k == "method" && v == "trap") t.method = IntegrationMethod::Trap;
            else if (k == "method" && v == "be") t.method = IntegrationMethod::BackwardEuler;
            else if (k == "ic" && v == "op") t.ic = InitialCondition::OperatingPoint;
            else if (k == "ic" && v == "zero") t.ic = InitialCondition::Zero;
            else if (k == "ic" && v == "uic") t.ic = InitialCondition::User;
            else fail(ParseErrorKind::MalformedParameter, key, "bad .TRAN option '" + key.text + "=" + val.text + "'");
        }
        (void)head;
        out_.analyses.emplace_back(t);
    }

    void ac(Cursor& cur, const Token& head) {
        AcDirective a;
        if (cur.done()) fail(ParseErrorKind::Syntax, cur.end_token(), ".AC needs lin|log n fstart fstop");
        const Token& grid = cur.next();
        const std::string g = lower(grid.text);
        if (g != "lin" && g != "log") fail(ParseErrorKind::MalformedParameter, grid, "grid must be lin or log");
        a.log = g == "log";
        std::vector<Token> nums;
        while (!cur.done()) nums.push_back(cur.next());
        if (nums.size() != 3) fail(ParseErrorKind::Syntax, nums.empty() ? cur.end_token() : nums.back(), ".AC needs lin|log n fstart fstop");
        const double n = parse_number(nums[0]);
        if (n < 2.0 || n != std::floor(n) || n > 1e7) fail(ParseErrorKind::MalformedParameter, nums[0], "point count must be an integer >= 2");
        a.points = static_cast<int>(n);
        a.fstart = parse_number(nums[1]);
        a.fstop = parse_number(nums[2]);
        if (a.fstart >= a.fstop || a.fstart < 0.0 || (a.log && a.fstart <= 0.0)) {
            fail(ParseErrorKind::MalformedParameter, nums[1], "need 0 < fstart < fstop");
        }
        (void)head;
        out_.analyses.emplace_back(a);
    }

    static ProbeDecl probe(Cursor& cur) {
        const Token& fn = cur.next();
        if (fn.type != Token::Type::Word || fn.text.size() != 1) fail(ParseErrorKind::Syntax, fn, "expected a probe like V(node)");
        ProbeDecl p;
        p.fn = static_cast<char>(std::toupper(static_cast<unsigned char>(fn.text[0])));
        p.loc = {fn.line, fn.column};
        if (std::string("VIQP").find(p.fn) == std::string::npos) {
            fail(ParseErrorKind::MalformedParameter, fn, "unknown probe function '" + fn.text + "'");
        }
        cur.expect(Token::Type::LParen, "'('");
        while (true) {
            p.args.push_back(cur.expect(Token::Type::Word, "a name").text);
            if (cur.at(Token::Type::Comma)) {
                cur.next();
                continue;
            }
            cur.expect(Token::Type::RParen, "')'");
            break;
        }
        const std::size_t max_args = p.fn == 'V' ? 2 : 1;
        if (p.args.size() > max_args) fail(ParseErrorKind::MalformedParameter, fn, "too many probe arguments");
        return p;
    }
};

}  // namespace

Netlist parse_netlist(const std::string& text) { return Parser{}.run(text); }

Netlist parse_netlist_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open netlist '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_netlist(ss.str());
}

ProbeDecl parse_probe(const std::string& text) {
    const Netlist n = parse_netlist(".PROBE " + text);
    if (n.probes.size() != 1) throw ParseError(ParseErrorKind::Syntax, 1, 1, "expected exactly one probe");
    return n.probes.front();
}

// =============================================================================
// Printer
// =============================================================================

namespace {

std::string num(double v) {
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

std::string coeff_list(const std::vector<double>& c) {
    std::string s = "[";
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (i) s += ",";
        s += num(c[i]);
    }
    return s + "]";
}

void print_statement(std::ostream& os, const Statement& st, const char* indent) {
    if (const auto* inst = std::get_if<Instance>(&st)) {
        os << indent << inst->name;
        for (const auto& n : inst->nodes) os << ' ' << n;
        os << ' ' << inst->subckt << '\n';
        return;
    }
    const auto& e = std::get<ElementDecl>(st);
    os << indent << keyword(e.kind) << ' ' << e.name;
    for (const auto& n : e.nodes) os << ' ' << n;
    for (const auto& [k, v] : e.params) os << ' ' << k << '=' << num(v);
    for (const auto& [k, v] : e.refs) os << ' ' << k << '=' << v;
    if (e.tf) {
        os << (is_current_controlled(e.kind) ? " tf=" : " gain=");
        if (e.tf->pid) {
            os << "pid kp=" << num(e.tf->kp) << " ki=" << num(e.tf->ki) << " kd=" << num(e.tf->kd)
               << " wf=" << num(e.tf->wf);
        } else {
            os << coeff_list(e.tf->num) << '/' << coeff_list(e.tf->den);
        }
    }
    for (const auto& w : e.waveform) {
        os << ' ' << to_string(w.kind) << '(';
        for (std::size_t i = 0; i < w.args.size(); ++i) os << (i ? " " : "") << num(w.args[i]);
        os << ')';
    }
    os << '\n';
}

}  // namespace

std::string print_netlist(const Netlist& n) {
    std::ostringstream os;
    if (!n.title.empty()) os << ".TITLE " << n.title << '\n';
    if (!n.options.empty()) {
        os << ".OPTIONS";
        for (const auto& [k, v] : n.options) os << ' ' << k << '=' << num(v);
        os << '\n';
    }
    for (const auto& [name, def] : n.subckts) {
        os << ".SUBCKT " << name;
        for (const auto& p : def.ports) os << ' ' << p.plus << ' ' << p.minus;
        os << '\n';
        for (const auto& st : def.body) print_statement(os, st, "  ");
        os << ".ENDS " << name << '\n';
    }
    for (const auto& st : n.top) print_statement(os, st, "");
    if (!n.floating.empty()) {
        os << ".FLOAT";
        for (const auto& f : n.floating) os << ' ' << f;
        os << '\n';
    }
    for (const auto& a : n.analyses) {
        if (std::holds_alternative<OpDirective>(a)) {
            os << ".OP\n";
        } else if (const auto* t = std::get_if<TranDirective>(&a)) {
            os << ".TRAN " << num(t->tstep) << ' ' << num(t->tstop)
               << " method=" << (t->method == IntegrationMethod::Trap ? "trap" : "be") << " ic="
               << (t->ic == InitialCondition::OperatingPoint ? "op" : t->ic == InitialCondition::Zero ? "zero" : "uic")
               << '\n';
        } else {
            const auto& ac = std::get<AcDirective>(a);
            os << ".AC " << (ac.log ? "log" : "lin") << ' ' << ac.points << ' ' << num(ac.fstart) << ' '
               << num(ac.fstop) << '\n';
        }
    }
    if (!n.probes.empty()) {
        os << ".PROBE";
        for (const auto& p : n.probes) os << ' ' << p.text();
        os << '\n';
    }
    os << ".END\n";
    return os.str();
}

// =============================================================================
// Elaboration
// =============================================================================

double FlatElement::param(const std::string& key, double fallback) const {
    const auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

const char* unit_label(ProbeRef::Kind kind) {
    switch (kind) {
        case ProbeRef::Kind::Incentive: return "$/(#*yr)";
        case ProbeRef::Kind::Flow: return "#/yr";
        case ProbeRef::Kind::Stock: return "#";
        case ProbeRef::Kind::Price: return "$/#";
    }
    return "";
}

int FlatCircuit::node(const std::string& name) const {
    const auto it = node_index.find(name);
    return it == node_index.end() ? -1 : it->second;
}

int FlatCircuit::element(const std::string& name) const {
    const auto it = element_index.find(name);
    return it == element_index.end() ? -1 : it->second;
}

ProbeRef FlatCircuit::resolve_probe(const ProbeDecl& p) const {
    ProbeRef r;
    r.label = p.text();
    auto across = [&](const std::string& name, int& plus, int& minus) {
        if (const int n = node(name); n >= 0) {
            plus = n;
            minus = 0;
            return true;
        }
        if (const int e = element(name); e >= 0 && elements[static_cast<std::size_t>(e)].nodes.size() >= 2) {
            plus = elements[static_cast<std::size_t>(e)].nodes[0];
            minus = elements[static_cast<std::size_t>(e)].nodes[1];
            return true;
        }
        return false;
    };
    switch (p.fn) {
        case 'V':
        case 'P': {
            r.kind = p.fn == 'V' ? ProbeRef::Kind::Incentive : ProbeRef::Kind::Price;
            if (p.args.size() == 2) {
                r.node_plus = node(p.args[0]);
                r.node_minus = node(p.args[1]);
                if (r.node_plus < 0 || r.node_minus < 0) throw ElaborationError("probe " + r.label + " names an unknown node", p.loc.line);
            } else if (!across(p.args.at(0), r.node_plus, r.node_minus)) {
                throw ElaborationError("probe " + r.label + " names an unknown node or element", p.loc.line);
            }
            break;
        }
        case 'I':
        case 'Q': {
            r.kind = p.fn == 'I' ? ProbeRef::Kind::Flow : ProbeRef::Kind::Stock;
            r.element = element(p.args.at(0));
            if (r.element < 0) throw ElaborationError("probe " + r.label + " names an unknown element", p.loc.line);
            const auto& el = elements[static_cast<std::size_t>(r.element)];
            if (el.kind == ElementKind::Voltmeter) throw ElaborationError("probe " + r.label + ": a voltmeter carries no flow", p.loc.line);
            break;
        }
        default: throw ElaborationError("probe " + r.label + " has an unknown function", p.loc.line);
    }
    return r;
}

namespace {

bool has_flow_unknown(ElementKind k) {
    switch (k) {
        case ElementKind::Demand:
        case ElementKind::Mutual:
        case ElementKind::IncentiveSource:
        case ElementKind::Vcvs:
        case ElementKind::Ccvs:
        case ElementKind::Noise:
        case ElementKind::Ammeter:
            return true;
        default: return false;
    }
}

class Elaborator {
public:
    Elaborator(const Netlist& n, const ElaborateOptions& opts) : nl_(n), opts_(opts) {}

    FlatCircuit run() {
        out_.title = nl_.title;
        out_.analyses = nl_.analyses;
        out_.options = nl_.options;
        intern("0");
        expand(nl_.top, "", {});
        resolve_senses();
        check_topology();
        for (const auto& p : nl_.probes) out_.probes.push_back(out_.resolve_probe(p));
        return std::move(out_);
    }

private:
    struct PendingSense {
        int element;
        std::string target;
        int line;
    };

    const Netlist& nl_;
    ElaborateOptions opts_;
    FlatCircuit out_;
    std::vector<int> terminal_uses_;
    std::vector<std::string> stack_;
    std::vector<PendingSense> senses_;
    std::set<std::string> checked_defs_;

    int intern(const std::string& name) {
        const auto [it, inserted] = out_.node_index.emplace(name, static_cast<int>(out_.node_names.size()));
        if (inserted) {
            out_.node_names.push_back(name);
            terminal_uses_.push_back(0);
        }
        return it->second;
    }

    static std::string scoped(const std::string& name, const std::string& prefix,
                              const std::map<std::string, std::string>& ports) {
        if (name == "0") return name;
        if (const auto it = ports.find(name); it != ports.end()) return it->second;
        return prefix + name;
    }

    int add_element(FlatElement el, int line) {
        const int idx = static_cast<int>(out_.elements.size());
        if (!out_.element_index.emplace(el.name, idx).second) {
            throw ElaborationError("elaborated name '" + el.name + "' collides with another element", line);
        }
        for (int n : el.nodes) ++terminal_uses_[static_cast<std::size_t>(n)];
        out_.elements.push_back(std::move(el));
        return idx;
    }

    void expand(const std::vector<Statement>& body, const std::string& prefix,
                const std::map<std::string, std::string>& ports) {
        for (const auto& st : body) {
            if (const auto* inst = std::get_if<Instance>(&st)) {
                instantiate(*inst, prefix, ports);
                continue;
            }
            const auto& d = std::get<ElementDecl>(st);
            FlatElement el;
            el.kind = d.kind;
            el.name = prefix + d.name;
            for (const auto& n : d.nodes) el.nodes.push_back(intern(scoped(n, prefix, ports)));
            el.params = d.params;
            el.waveform = d.waveform;
            if (d.tf) el.tf = d.tf->function();
            if (const auto it = d.refs.find("ctrl+"); it != d.refs.end()) el.ctrl[0] = intern(scoped(it->second, prefix, ports));
            if (const auto it = d.refs.find("ctrl-"); it != d.refs.end()) el.ctrl[1] = intern(scoped(it->second, prefix, ports));
            const int idx = add_element(std::move(el), d.loc.line);
            if (const auto it = d.refs.find("sense"); it != d.refs.end()) {
                senses_.push_back({idx, prefix + it->second, d.loc.line});
            }
        }
    }

    void check_def(const SubcktDef& def) {
        if (!checked_defs_.insert(def.name).second) return;
        std::set<std::string> used;
        for (const auto& st : def.body) {
            if (const auto* inst = std::get_if<Instance>(&st)) {
                used.insert(inst->nodes.begin(), inst->nodes.end());
            } else {
                const auto& e = std::get<ElementDecl>(st);
                used.insert(e.nodes.begin(), e.nodes.end());
            }
        }
        for (const auto& t : def.terminals()) {
            if (!used.count(t)) {
                throw ElaborationError("port terminal '" + t + "' of subcircuit '" + def.name + "' is unconnected",
                                       def.loc.line);
            }
        }
    }

    void instantiate(const Instance& inst, const std::string& prefix, const std::map<std::string, std::string>& ports) {
        const std::string full = prefix + inst.name;
        const auto it = nl_.subckts.find(inst.subckt);
        if (it == nl_.subckts.end()) {
            throw ElaborationError("instance '" + full + "' references undefined subcircuit '" + inst.subckt + "'",
                                   inst.loc.line);
        }
        const SubcktDef& def = it->second;
        if (std::find(stack_.begin(), stack_.end(), def.name) != stack_.end()) {
            throw ElaborationError("recursive instantiation of subcircuit '" + def.name + "' at '" + full + "'",
                                   inst.loc.line);
        }
        check_def(def);
        const auto terms = def.terminals();
        if (inst.nodes.size() != terms.size()) {
            throw ElaborationError("instance '" + full + "' connects " + std::to_string(inst.nodes.size()) +
                                       " terminals but '" + def.name + "' has " + std::to_string(terms.size()) +
                                       " (unconnected port)",
                                   inst.loc.line);
        }
        const std::string inner = full + ".";
        std::map<std::string, std::string> outer_of;
        std::vector<std::string> order;
        for (std::size_t k = 0; k < terms.size(); ++k) {
            const std::string outer = scoped(inst.nodes[k], prefix, ports);
            const auto [pos, inserted] = outer_of.emplace(terms[k], outer);
            if (inserted) {
                order.push_back(terms[k]);
            } else if (pos->second != outer) {
                throw ElaborationError("instance '" + full + "' connects shared terminal '" + terms[k] +
                                           "' to different nodes",
                                       inst.loc.line);
            }
        }

        std::map<std::string, std::string> inner_ports;
        if (opts_.instrument_ports) {
            std::map<std::string, int> meter_of;
            for (const auto& t : order) {
                FlatElement am;
                am.kind = ElementKind::Ammeter;
                am.name = inner + "port." + t;
                am.instrument = true;
                am.nodes = {intern(outer_of.at(t)), intern(inner + t)};
                meter_of[t] = add_element(std::move(am), inst.loc.line);
                inner_ports[t] = inner + t;
            }
            // Ports sharing a terminal are checked together.
            std::vector<int> group(def.ports.size());
            std::iota(group.begin(), group.end(), 0);
            std::function<int(int)> root = [&](int i) { return group[i] == i ? i : group[i] = root(group[i]); };
            for (std::size_t a = 0; a < def.ports.size(); ++a) {
                for (std::size_t b = a + 1; b < def.ports.size(); ++b) {
                    const auto& pa = def.ports[a];
                    const auto& pb = def.ports[b];
                    if (pa.plus == pb.plus || pa.plus == pb.minus || pa.minus == pb.plus || pa.minus == pb.minus) {
                        group[root(static_cast<int>(b))] = root(static_cast<int>(a));
                    }
                }
            }
            std::map<int, PortGroup> groups;
            for (std::size_t p = 0; p < def.ports.size(); ++p) {
                PortGroup& g = groups[root(static_cast<int>(p))];
                g.instance = full;
                g.ports.push_back(def.ports[p].plus + "," + def.ports[p].minus);
                for (const auto& t : {def.ports[p].plus, def.ports[p].minus}) {
                    const int m = meter_of.at(t);
                    if (std::find(g.ammeters.begin(), g.ammeters.end(), m) == g.ammeters.end()) g.ammeters.push_back(m);
                }
            }
            for (auto& [_, g] : groups) out_.port_groups.push_back(std::move(g));
        } else {
            inner_ports = outer_of;
        }

        stack_.push_back(def.name);
        expand(def.body, inner, inner_ports);
        stack_.pop_back();
    }

    void resolve_senses() {
        for (const auto& s : senses_) {
            const int target = out_.element(s.target);
            if (target < 0) throw ElaborationError("sense element '" + s.target + "' does not exist", s.line);
            if (!has_flow_unknown(out_.elements[static_cast<std::size_t>(target)].kind) ||
                out_.elements[static_cast<std::size_t>(target)].kind == ElementKind::Mutual) {
                throw ElaborationError("sense element '" + s.target + "' must be an ammeter or incentive-defined branch",
                                       s.line);
            }
            out_.elements[static_cast<std::size_t>(s.element)].sense = target;
        }
    }

    void check_topology() {
        if (terminal_uses_[0] == 0) throw ElaborationError("missing ground: no element connects to node 0");
        std::set<int> allowed;
        for (const auto& f : nl_.floating) {
            const int n = out_.node(f);
            if (n < 0) throw ElaborationError(".FLOAT names unknown node '" + f + "'");
            allowed.insert(n);
        }
        for (int n = 1; n < out_.node_count(); ++n) {
            if (terminal_uses_[static_cast<std::size_t>(n)] < 2 && !allowed.count(n)) {
                throw ElaborationError("floating node '" + out_.node_names[static_cast<std::size_t>(n)] +
                                       "' has fewer than two element terminals");
            }
        }
    }
};

}  // namespace

FlatCircuit elaborate(const Netlist& netlist, const ElaborateOptions& opts) {
    return Elaborator(netlist, opts).run();
}

}  // namespace econoport
