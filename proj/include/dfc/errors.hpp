#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace dfc {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Lexical or grammatical error. Line and column are 1-based.
class SyntaxError : public Error {
public:
    SyntaxError(const std::string &message, int line, int column)
        : Error("syntax error at " + std::to_string(line) + ":" + std::to_string(column) + ": " + message),
          line_(line), column_(column) {}

    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

/// A well-formed construct outside the supported fragment (subquery, outer join, ...).
class UnsupportedError : public Error {
public:
    explicit UnsupportedError(std::string construct)
        : Error("unsupported construct: " + construct), construct_(std::move(construct)) {}

    const std::string &construct() const { return construct_; }

private:
    std::string construct_;
};

/// Name resolution or type-check failure against a schema.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Runtime type violation; only reachable when a caller skips validation.
class TypeError : public Error {
public:
    using Error::Error;
};

class ResourceError : public Error {
public:
    using Error::Error;
};

/// Raised by the kill() scalar function inside rewritten plans.
class PolicyKilledError : public Error {
public:
    PolicyKilledError(std::string policy, std::string row)
        : Error("query killed by policy '" + policy + "' on row (" + row + ")"),
          policy_(std::move(policy)), row_(std::move(row)) {}

    const std::string &policy() const { return policy_; }
    const std::string &row() const { return row_; }

private:
    std::string policy_;
    std::string row_;
};

/// The rewriter cannot express a policy over this plan without capturing provenance.
class UnsupportedForRewrite : public Error {
public:
    explicit UnsupportedForRewrite(const std::string &reason) : Error("cannot rewrite: " + reason) {}
};

} // namespace dfc
