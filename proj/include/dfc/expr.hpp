#pragma once

#include "dfc/value.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dfc {

/// Per-statement parameters visible to expressions.
struct Session {
    std::optional<Value> current_user;
};

enum class ExprKind { Column, Literal, CurrentUser, Unary, Binary, Case, Aggregate, Kill, Star };

enum class Op { None, Not, Neg, IsNull, IsNotNull, Eq, Ne, Lt, Le, Gt, Ge, Add, Sub, Mul, Div, And, Or };

enum class AggFunc { Count, CountDistinct, Sum, Min, Max, Avg, BoolAnd, BoolOr };

std::string_view agg_name(AggFunc f);

/// Scalar expression tree shared by queries and policies.
///
/// Column references carry an optional qualifier. After binding, `slot` indexes the
/// row the expression is evaluated against, `qualifier` holds the resolved
/// (canonical) qualifier, and `type`/`nullable` describe the result.
///
/// Case layout: args = [when0, then0, when1, then1, ..., else?], `has_else` set when
/// the trailing else is present. Aggregate: `agg`, `star` for count(*), args = [argument].
/// Kill: `name` is the policy reported in the error. Star: `qualifier` optional.
struct Expr {
    ExprKind kind = ExprKind::Literal;
    Op op = Op::None;
    std::string qualifier;
    std::string name;
    Value literal;
    AggFunc agg = AggFunc::Count;
    bool star = false;
    bool has_else = false;
    std::vector<Expr> args;

    int slot = -1;
    ValueType type = ValueType::Null;
    bool nullable = true;

    static Expr column(std::string qualifier, std::string name);
    static Expr constant(Value v);
    static Expr current_user();
    static Expr unary(Op op, Expr operand);
    static Expr binary(Op op, Expr lhs, Expr rhs);
    static Expr case_when(std::vector<std::pair<Expr, Expr>> branches, std::optional<Expr> otherwise);
    static Expr aggregate(AggFunc f, std::optional<Expr> argument);
    static Expr kill(std::string policy);
    static Expr all_columns(std::string qualifier = {});

    bool is_true_literal() const;
    bool operator==(const Expr &) const = default;
};

/// Folds a list of conjuncts with AND (left-associative); empty list gives TRUE.
Expr conjoin(std::vector<Expr> conjuncts);
/// Flattens nested top-level ANDs into their conjuncts, left to right.
std::vector<Expr> split_conjuncts(const Expr &e);

bool contains_aggregate(const Expr &e);
bool contains_kill(const Expr &e);
bool references_current_user(const Expr &e);
/// Calls fn on every column reference, pre-order.
void visit_columns(const Expr &e, const std::function<void(const Expr &)> &fn);
/// Rebuilds the tree replacing every Column node with fn(node).
Expr map_columns(const Expr &e, const std::function<Expr(const Expr &)> &fn);

struct AggExpr {
    AggFunc func = AggFunc::Count;
    bool star = false;
    Expr arg;
    std::string alias;

    ValueType result_type() const;
    bool result_nullable() const;
    bool operator==(const AggExpr &) const = default;
};

/// Column visible to an expression during binding.
struct ScopeColumn {
    std::string qualifier;
    std::string name;
    ValueType type = ValueType::Null;
    bool nullable = true;
    bool hidden = false;
};

struct Scope {
    std::vector<ScopeColumn> columns;
    /// Alternative qualifiers mapped to the canonical qualifier used in `columns`.
    std::vector<std::pair<std::string, std::string>> synonyms;
    std::optional<ValueType> current_user_type;
    bool allow_kill = true;
};

/// Resolves a reference to a slot. Qualifiers match case-insensitively, through
/// `synonyms`, and in singular form (`user.role` names the `users` qualifier when no
/// `user` qualifier exists). Throws ValidationError when unknown or ambiguous.
int resolve_column(const Scope &scope, const std::string &qualifier, const std::string &name);

/// Resolves columns and type-checks. Aggregates are rejected; they are bound via bind_agg.
void bind_expr(Expr &e, const Scope &scope);
void bind_agg(AggExpr &agg, const Scope &scope);
/// Type of `e` when it can be determined without a schema (literals and operators over them).
std::optional<ValueType> static_type(const Expr &e);

struct EvalContext {
    const Session *session = nullptr;
    bool division_by_zero = false;
};

/// Evaluates a bound expression against a row. Null propagates; AND/OR use three-valued
/// logic and short-circuit; division by zero yields NULL and sets the context flag.
Value eval_scalar(const Expr &e, std::span<const Value> row, EvalContext &ctx);

/// Three-valued truth test: true only for a non-null TRUE.
inline bool is_true(const Value &v) { return v.type() == ValueType::Boolean && v.as_boolean(); }

/// Incremental aggregate state. Null inputs are ignored; over no (non-null) inputs
/// count/count_distinct give 0, bool_and TRUE, bool_or FALSE, the rest NULL.
class Accumulator {
public:
    explicit Accumulator(AggFunc func) : func_(func) {}

    void add(const Value &v);
    /// Combines with another accumulator of the same function.
    void merge(const Accumulator &other);
    Value result() const;

private:
    AggFunc func_;
    std::int64_t count_ = 0;
    std::int64_t int_sum_ = 0;
    double dec_sum_ = 0.0;
    bool decimal_ = false;
    bool all_ = true;
    bool any_ = false;
    Value best_;
    /// Distinct inputs, integers kept apart; each sorted and deduplicated up to its mark.
    mutable std::vector<std::int64_t> distinct_ints_;
    mutable std::vector<Value> distinct_;
    mutable std::size_t ints_sorted_ = 0;
    mutable std::size_t distinct_sorted_ = 0;

    void compact_distinct() const;
};

/// Value fed to an accumulator for one input row (TRUE for count(*)).
Value agg_input(const AggExpr &agg, std::span<const Value> row, EvalContext &ctx);
/// Final aggregate value with the declared result type applied.
Value agg_result(const AggExpr &agg, const Accumulator &acc);

/// Aggregate over a group of rows, each bound to the layout the argument was bound against.
Value eval_agg(const AggExpr &agg, std::span<const Row> group, EvalContext &ctx);

/// Renders an expression as SQL. `column_text`, when given, renders bound column nodes.
std::string render_expr(const Expr &e, const std::function<std::string(const Expr &)> &column_text = {});
std::string render_agg_call(const AggExpr &agg, const std::function<std::string(const Expr &)> &column_text = {});

} // namespace dfc
