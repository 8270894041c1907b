#pragma once

#include "dfc/expr.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace dfc {

enum class TokenKind { Identifier, Integer, Decimal, String, Symbol, End };

/// Identifiers are lowercased; string literal text is unescaped. Positions are 1-based.
struct Token {
    TokenKind kind = TokenKind::End;
    std::string text;
    int line = 1;
    int column = 1;
};

/// Splits SQL/policy text into tokens. `--` starts a line comment.
std::vector<Token> tokenize(std::string_view text);

std::string to_upper_ascii(std::string_view s);

/// Cursor over tokens with the shared scalar-expression grammar:
///
///   expr    := or
///   or      := and (OR and)*
///   and     := not (AND not)*
///   not     := NOT not | cmp
///   cmp     := add [(= | <> | != | < | <= | > | >=) add | IS [NOT] NULL]
///   add     := mul ((+ | -) mul)*
///   mul     := unary ((* | /) unary)*
///   unary   := - unary | primary
///   primary := literal | TRUE | FALSE | NULL | current_user | CASE ... END
///            | func '(' [DISTINCT] expr | '*' ')' | kill '(' [string] ')'
///            | ident ['.' ident] | '(' expr ')'
class TokenStream {
public:
    explicit TokenStream(std::string_view text) : tokens_(tokenize(text)) {}

    const Token &peek(std::size_t ahead = 0) const;
    const Token &next();
    bool at_end() const { return peek().kind == TokenKind::End; }

    bool is_keyword(std::string_view word, std::size_t ahead = 0) const;
    bool is_symbol(std::string_view sym, std::size_t ahead = 0) const;
    bool accept_keyword(std::string_view word);
    bool accept_symbol(std::string_view sym);
    void expect_keyword(std::string_view word);
    void expect_symbol(std::string_view sym);
    std::string expect_identifier(std::string_view what);

    [[noreturn]] void fail(const std::string &message) const;
    [[noreturn]] void fail_at(const Token &tok, const std::string &message) const;

    Expr parse_expr();

    /// Words that terminate an expression or cannot serve as implicit aliases.
    static bool is_reserved(std::string_view word);

private:
    Expr parse_or();
    Expr parse_and();
    Expr parse_not();
    Expr parse_cmp();
    Expr parse_add();
    Expr parse_mul();
    Expr parse_unary();
    Expr parse_primary();

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

} // namespace dfc
