#include "dfc/lexer.hpp"

#include "dfc/errors.hpp"
#include "dfc/relation.hpp"

#include <array>
#include <cctype>
#include <charconv>

namespace dfc {

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

Value parse_number(const Token &tok, const std::string &text) {
    if (tok.kind == TokenKind::Integer) {
        std::int64_t v = 0;
        auto res = std::from_chars(text.data(), text.data() + text.size(), v);
        if (res.ec != std::errc() || res.ptr != text.data() + text.size())
            throw SyntaxError("integer literal out of range: " + text, tok.line, tok.column);
        return Value::integer(v);
    }
    double v = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw SyntaxError("bad decimal literal: " + text, tok.line, tok.column);
    return Value::decimal(v);
}

} // namespace

std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> out;
    int line = 1, col = 1;
    std::size_t i = 0;
    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n && i < text.size(); ++k, ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
    };
    while (i < text.size()) {
        char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            continue;
        }
        if (c == '-' && i + 1 < text.size() && text[i + 1] == '-') {
            while (i < text.size() && text[i] != '\n') advance(1);
            continue;
        }
        Token tok;
        tok.line = line;
        tok.column = col;
        if (ident_start(c)) {
            std::size_t start = i;
            while (i < text.size() && ident_char(text[i])) advance(1);
            tok.kind = TokenKind::Identifier;
            tok.text = to_lower(text.substr(start, i - start));
        } else if (c == '"') {
            advance(1);
            std::size_t start = i;
            while (i < text.size() && text[i] != '"') advance(1);
            if (i >= text.size()) throw SyntaxError("unterminated quoted identifier", tok.line, tok.column);
            tok.kind = TokenKind::Identifier;
            tok.text = to_lower(text.substr(start, i - start));
            advance(1);
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t start = i;
            bool decimal = false;
            while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) advance(1);
            if (i < text.size() && text[i] == '.' && i + 1 < text.size() &&
                std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
                decimal = true;
                advance(1);
                while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) advance(1);
            }
            if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
                std::size_t save = i;
                int save_col = col;
                advance(1);
                if (i < text.size() && (text[i] == '+' || text[i] == '-')) advance(1);
                if (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
                    decimal = true;
                    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) advance(1);
                } else {
                    i = save;
                    col = save_col;
                }
            }
            tok.kind = decimal ? TokenKind::Decimal : TokenKind::Integer;
            tok.text = std::string(text.substr(start, i - start));
        } else if (c == '\'') {
            advance(1);
            std::string s;
            while (true) {
                if (i >= text.size()) throw SyntaxError("unterminated string literal", tok.line, tok.column);
                if (text[i] == '\'') {
                    if (i + 1 < text.size() && text[i + 1] == '\'') {
                        s += '\'';
                        advance(2);
                        continue;
                    }
                    advance(1);
                    break;
                }
                s += text[i];
                advance(1);
            }
            tok.kind = TokenKind::String;
            tok.text = std::move(s);
        } else {
            static const std::array<std::string_view, 4> two = {"<=", ">=", "<>", "!="};
            tok.kind = TokenKind::Symbol;
            std::string_view rest = text.substr(i);
            bool matched = false;
            for (auto sym : two) {
                if (rest.starts_with(sym)) {
                    tok.text = std::string(sym);
                    advance(2);
                    matched = true;
                    break;
                }
            }
            if (!matched) {
                if (std::string_view("(),.;*+-/=<>").find(c) == std::string_view::npos)
                    throw SyntaxError(std::string("unexpected character '") + c + "'", line, col);
                tok.text = std::string(1, c);
                advance(1);
            }
        }
        out.push_back(std::move(tok));
    }
    Token end;
    end.kind = TokenKind::End;
    end.line = line;
    end.column = col;
    out.push_back(end);
    return out;
}

const Token &TokenStream::peek(std::size_t ahead) const {
    std::size_t idx = std::min(pos_ + ahead, tokens_.size() - 1);
    return tokens_[idx];
}

const Token &TokenStream::next() {
    const Token &t = tokens_[pos_];
    if (pos_ + 1 < tokens_.size()) ++pos_;
    return t;
}

bool TokenStream::is_keyword(std::string_view word, std::size_t ahead) const {
    const auto &t = peek(ahead);
    return t.kind == TokenKind::Identifier && t.text == word;
}

bool TokenStream::is_symbol(std::string_view sym, std::size_t ahead) const {
    const auto &t = peek(ahead);
    return t.kind == TokenKind::Symbol && t.text == sym;
}

bool TokenStream::accept_keyword(std::string_view word) {
    if (!is_keyword(word)) return false;
    next();
    return true;
}

bool TokenStream::accept_symbol(std::string_view sym) {
    if (!is_symbol(sym)) return false;
    next();
    return true;
}

void TokenStream::expect_keyword(std::string_view word) {
    if (!accept_keyword(word)) fail("expected " + to_upper_ascii(word));
}

void TokenStream::expect_symbol(std::string_view sym) {
    if (!accept_symbol(sym)) fail("expected '" + std::string(sym) + "'");
}

std::string TokenStream::expect_identifier(std::string_view what) {
    const auto &t = peek();
    if (t.kind != TokenKind::Identifier) fail("expected " + std::string(what));
    return next().text;
}

void TokenStream::fail(const std::string &message) const { fail_at(peek(), message); }

void TokenStream::fail_at(const Token &tok, const std::string &message) const {
    std::string found = tok.kind == TokenKind::End ? "end of input" : "'" + tok.text + "'";
    throw SyntaxError(message + ", found " + found, tok.line, tok.column);
}

std::string to_upper_ascii(std::string_view s) {
    std::string out(s);
    for (auto &c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

bool TokenStream::is_reserved(std::string_view word) {
    static const std::array<std::string_view, 41> words = {
        "select", "from",  "where",     "group",   "by",     "join",       "inner", "cross",    "left",
        "right",  "full",  "outer",     "on",      "and",    "or",         "not",   "as",       "distinct",
        "having", "order", "limit",     "union",   "intersect", "except",  "case",  "when",     "then",
        "else",   "end",   "is",        "null",    "true",   "false",      "set",   "update",   "mark",
        "policy", "over",  "dimension", "constraint", "agg"};
    for (auto w : words) {
        if (w == word) return true;
    }
    return false;
}

Expr TokenStream::parse_expr() { return parse_or(); }

Expr TokenStream::parse_or() {
    Expr lhs = parse_and();
    while (accept_keyword("or")) lhs = Expr::binary(Op::Or, std::move(lhs), parse_and());
    return lhs;
}

Expr TokenStream::parse_and() {
    Expr lhs = parse_not();
    while (accept_keyword("and")) lhs = Expr::binary(Op::And, std::move(lhs), parse_not());
    return lhs;
}

Expr TokenStream::parse_not() {
    if (accept_keyword("not")) return Expr::unary(Op::Not, parse_not());
    return parse_cmp();
}

Expr TokenStream::parse_cmp() {
    Expr lhs = parse_add();
    static const std::array<std::pair<std::string_view, Op>, 7> ops = {
        {{"=", Op::Eq}, {"<>", Op::Ne}, {"!=", Op::Ne}, {"<", Op::Lt}, {"<=", Op::Le}, {">", Op::Gt}, {">=", Op::Ge}}};
    for (auto [sym, op] : ops) {
        if (accept_symbol(sym)) return Expr::binary(op, std::move(lhs), parse_add());
    }
    if (accept_keyword("is")) {
        bool negated = accept_keyword("not");
        expect_keyword("null");
        return Expr::unary(negated ? Op::IsNotNull : Op::IsNull, std::move(lhs));
    }
    for (std::string_view word : {"in", "like", "between", "similar"}) {
        if (is_keyword(word)) throw UnsupportedError(to_upper_ascii(word) + " predicate");
    }
    return lhs;
}

Expr TokenStream::parse_add() {
    Expr lhs = parse_mul();
    while (true) {
        if (accept_symbol("+")) {
            lhs = Expr::binary(Op::Add, std::move(lhs), parse_mul());
        } else if (accept_symbol("-")) {
            lhs = Expr::binary(Op::Sub, std::move(lhs), parse_mul());
        } else {
            return lhs;
        }
    }
}

Expr TokenStream::parse_mul() {
    Expr lhs = parse_unary();
    while (true) {
        if (accept_symbol("*")) {
            lhs = Expr::binary(Op::Mul, std::move(lhs), parse_unary());
        } else if (accept_symbol("/")) {
            lhs = Expr::binary(Op::Div, std::move(lhs), parse_unary());
        } else {
            return lhs;
        }
    }
}

Expr TokenStream::parse_unary() {
    if (is_symbol("-")) {
        const auto &num = peek(1);
        if (num.kind == TokenKind::Integer || num.kind == TokenKind::Decimal) {
            next();
            const Token &t = next();
            return Expr::constant(parse_number(t, "-" + t.text));
        }
        next();
        return Expr::unary(Op::Neg, parse_unary());
    }
    return parse_primary();
}

Expr TokenStream::parse_primary() {
    const Token &t = peek();
    switch (t.kind) {
    case TokenKind::Integer:
    case TokenKind::Decimal: {
        const Token &tok = next();
        return Expr::constant(parse_number(tok, tok.text));
    }
    case TokenKind::String: return Expr::constant(Value::text(next().text));
    case TokenKind::Symbol:
        if (accept_symbol("(")) {
            if (is_keyword("select")) throw UnsupportedError("subquery");
            Expr inner = parse_expr();
            expect_symbol(")");
            return inner;
        }
        if (is_symbol("*")) {
            next();
            return Expr::all_columns();
        }
        fail("expected expression");
    case TokenKind::End: fail("expected expression");
    case TokenKind::Identifier: break;
    }

    if (accept_keyword("true")) return Expr::constant(Value::boolean(true));
    if (accept_keyword("false")) return Expr::constant(Value::boolean(false));
    if (accept_keyword("null")) return Expr::constant(Value::null());
    if (accept_keyword("current_user")) {
        if (accept_symbol("(")) expect_symbol(")");
        return Expr::current_user();
    }
    if (is_keyword("exists")) throw UnsupportedError("subquery");
    if (accept_keyword("case")) {
        std::vector<std::pair<Expr, Expr>> branches;
        std::optional<Expr> otherwise;
        if (!is_keyword("when")) throw UnsupportedError("simple CASE (use CASE WHEN <condition>)");
        while (accept_keyword("when")) {
            Expr cond = parse_expr();
            expect_keyword("then");
            branches.emplace_back(std::move(cond), parse_expr());
        }
        if (accept_keyword("else")) otherwise = parse_expr();
        expect_keyword("end");
        return Expr::case_when(std::move(branches), std::move(otherwise));
    }
    if (is_reserved(t.text)) fail("expected expression");

    std::string first = next().text;
    if (accept_symbol("(")) {
        if (first == "kill") {
            std::string policy;
            if (peek().kind == TokenKind::String) policy = next().text;
            expect_symbol(")");
            return Expr::kill(std::move(policy));
        }
        static const std::array<std::pair<std::string_view, AggFunc>, 7> funcs = {{{"count", AggFunc::Count},
                                                                                  {"sum", AggFunc::Sum},
                                                                                  {"min", AggFunc::Min},
                                                                                  {"max", AggFunc::Max},
                                                                                  {"avg", AggFunc::Avg},
                                                                                  {"bool_and", AggFunc::BoolAnd},
                                                                                  {"bool_or", AggFunc::BoolOr}}};
        for (auto [fname, func] : funcs) {
            if (first != fname) continue;
            if (func == AggFunc::Count && accept_symbol("*")) {
                expect_symbol(")");
                return Expr::aggregate(AggFunc::Count, std::nullopt);
            }
            bool distinct = accept_keyword("distinct");
            if (distinct && func != AggFunc::Count) {
                if (func != AggFunc::Min && func != AggFunc::Max && func != AggFunc::BoolAnd && func != AggFunc::BoolOr)
                    throw UnsupportedError(std::string(fname) + "(DISTINCT ...)");
            }
            Expr arg = parse_expr();
            expect_symbol(")");
            return Expr::aggregate(distinct && func == AggFunc::Count ? AggFunc::CountDistinct : func, std::move(arg));
        }
        fail_at(t, "unknown function '" + first + "'");
    }
    if (accept_symbol(".")) {
        if (accept_symbol("*")) return Expr::all_columns(first);
        return Expr::column(first, expect_identifier("column name"));
    }
    return Expr::column("", first);
}

} // namespace dfc
