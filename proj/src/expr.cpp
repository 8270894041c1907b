#include "dfc/expr.hpp"

#include "dfc/errors.hpp"
#include "dfc/relation.hpp"

#include <algorithm>
#include <cmath>

namespace dfc {

std::string_view agg_name(AggFunc f) {
    switch (f) {
    case AggFunc::Count: return "count";
    case AggFunc::CountDistinct: return "count";
    case AggFunc::Sum: return "sum";
    case AggFunc::Min: return "min";
    case AggFunc::Max: return "max";
    case AggFunc::Avg: return "avg";
    case AggFunc::BoolAnd: return "bool_and";
    case AggFunc::BoolOr: return "bool_or";
    }
    return "?";
}

Expr Expr::column(std::string qualifier, std::string name) {
    Expr e;
    e.kind = ExprKind::Column;
    e.qualifier = std::move(qualifier);
    e.name = std::move(name);
    return e;
}

Expr Expr::constant(Value v) {
    Expr e;
    e.kind = ExprKind::Literal;
    e.literal = std::move(v);
    return e;
}

Expr Expr::current_user() {
    Expr e;
    e.kind = ExprKind::CurrentUser;
    return e;
}

Expr Expr::unary(Op op, Expr operand) {
    Expr e;
    e.kind = ExprKind::Unary;
    e.op = op;
    e.args.push_back(std::move(operand));
    return e;
}

Expr Expr::binary(Op op, Expr lhs, Expr rhs) {
    Expr e;
    e.kind = ExprKind::Binary;
    e.op = op;
    e.args.push_back(std::move(lhs));
    e.args.push_back(std::move(rhs));
    return e;
}

Expr Expr::case_when(std::vector<std::pair<Expr, Expr>> branches, std::optional<Expr> otherwise) {
    Expr e;
    e.kind = ExprKind::Case;
    for (auto &[w, t] : branches) {
        e.args.push_back(std::move(w));
        e.args.push_back(std::move(t));
    }
    if (otherwise) {
        e.args.push_back(std::move(*otherwise));
        e.has_else = true;
    }
    return e;
}

Expr Expr::aggregate(AggFunc f, std::optional<Expr> argument) {
    Expr e;
    e.kind = ExprKind::Aggregate;
    e.agg = f;
    if (argument) {
        e.args.push_back(std::move(*argument));
    } else {
        e.star = true;
    }
    return e;
}

Expr Expr::kill(std::string policy) {
    Expr e;
    e.kind = ExprKind::Kill;
    e.name = std::move(policy);
    return e;
}

Expr Expr::all_columns(std::string qualifier) {
    Expr e;
    e.kind = ExprKind::Star;
    e.qualifier = std::move(qualifier);
    return e;
}

bool Expr::is_true_literal() const {
    return kind == ExprKind::Literal && literal.type() == ValueType::Boolean && literal.as_boolean();
}

Expr conjoin(std::vector<Expr> conjuncts) {
    if (conjuncts.empty()) return Expr::constant(Value::boolean(true));
    Expr acc = std::move(conjuncts[0]);
    for (std::size_t i = 1; i < conjuncts.size(); ++i) acc = Expr::binary(Op::And, std::move(acc), std::move(conjuncts[i]));
    return acc;
}

namespace {

void split_into(const Expr &e, std::vector<Expr> &out) {
    if (e.kind == ExprKind::Binary && e.op == Op::And) {
        split_into(e.args[0], out);
        split_into(e.args[1], out);
    } else {
        out.push_back(e);
    }
}

bool any_node(const Expr &e, const std::function<bool(const Expr &)> &pred) {
    if (pred(e)) return true;
    return std::any_of(e.args.begin(), e.args.end(), [&](const Expr &a) { return any_node(a, pred); });
}

} // namespace

std::vector<Expr> split_conjuncts(const Expr &e) {
    std::vector<Expr> out;
    split_into(e, out);
    return out;
}

bool contains_aggregate(const Expr &e) {
    return any_node(e, [](const Expr &n) { return n.kind == ExprKind::Aggregate; });
}

bool contains_kill(const Expr &e) {
    return any_node(e, [](const Expr &n) { return n.kind == ExprKind::Kill; });
}

bool references_current_user(const Expr &e) {
    return any_node(e, [](const Expr &n) { return n.kind == ExprKind::CurrentUser; });
}

void visit_columns(const Expr &e, const std::function<void(const Expr &)> &fn) {
    if (e.kind == ExprKind::Column) fn(e);
    for (const auto &a : e.args) visit_columns(a, fn);
}

Expr map_columns(const Expr &e, const std::function<Expr(const Expr &)> &fn) {
    if (e.kind == ExprKind::Column) return fn(e);
    Expr out = e;
    for (auto &a : out.args) a = map_columns(a, fn);
    return out;
}

ValueType AggExpr::result_type() const {
    switch (func) {
    case AggFunc::Count:
    case AggFunc::CountDistinct: return ValueType::Integer;
    case AggFunc::Avg: return ValueType::Decimal;
    case AggFunc::BoolAnd:
    case AggFunc::BoolOr: return ValueType::Boolean;
    default: return arg.type;
    }
}

bool AggExpr::result_nullable() const {
    switch (func) {
    case AggFunc::Count:
    case AggFunc::CountDistinct:
    case AggFunc::BoolAnd:
    case AggFunc::BoolOr: return false;
    default: return true;
    }
}

// ---------------------------------------------------------------------------
// Binding

namespace {

std::string canonical_qualifier(const Scope &scope, const std::string &q) {
    for (const auto &[syn, canon] : scope.synonyms) {
        if (syn == q) return canon;
    }
    return q;
}

bool has_qualifier(const Scope &scope, const std::string &q) {
    return std::any_of(scope.columns.begin(), scope.columns.end(),
                       [&](const ScopeColumn &c) { return c.qualifier == q; });
}

std::string describe(const std::string &q, const std::string &n) { return q.empty() ? n : q + "." + n; }

void expect_type(const Expr &e, bool ok, const std::string &what) {
    if (!ok)
        throw ValidationError(what + ", got " + std::string(type_name(e.type)) + " in '" + render_expr(e) + "'");
}

bool is_bool_or_null(ValueType t) { return t == ValueType::Boolean || t == ValueType::Null; }
bool is_numeric_or_null(ValueType t) { return is_numeric(t) || t == ValueType::Null; }

} // namespace

int resolve_column(const Scope &scope, const std::string &qualifier, const std::string &name) {
    std::string q = canonical_qualifier(scope, to_lower(qualifier));
    std::string n = to_lower(name);
    if (!q.empty() && !has_qualifier(scope, q)) {
        std::string plural = canonical_qualifier(scope, q + "s");
        if (has_qualifier(scope, plural)) q = plural;
    }
    int found = -1;
    for (std::size_t i = 0; i < scope.columns.size(); ++i) {
        const auto &c = scope.columns[i];
        if (c.name != n) continue;
        if (!q.empty() && c.qualifier != q) continue;
        if (found >= 0) throw ValidationError("ambiguous column reference '" + describe(qualifier, name) + "'");
        found = static_cast<int>(i);
    }
    if (found < 0) throw ValidationError("unknown column '" + describe(qualifier, name) + "'");
    return found;
}

void bind_expr(Expr &e, const Scope &scope) {
    switch (e.kind) {
    case ExprKind::Column: {
        int slot = resolve_column(scope, e.qualifier, e.name);
        const auto &c = scope.columns[slot];
        e.slot = slot;
        e.qualifier = c.qualifier;
        e.name = c.name;
        e.type = c.type;
        e.nullable = c.nullable;
        return;
    }
    case ExprKind::Literal:
        e.type = e.literal.type();
        e.nullable = e.literal.is_null();
        return;
    case ExprKind::CurrentUser:
        e.type = scope.current_user_type.value_or(ValueType::Null);
        e.nullable = !scope.current_user_type.has_value();
        return;
    case ExprKind::Kill:
        if (!scope.allow_kill) throw ValidationError("kill() is not allowed here");
        e.type = ValueType::Null;
        e.nullable = true;
        return;
    case ExprKind::Aggregate:
        throw ValidationError("aggregate function not allowed here: '" + render_expr(e) + "'");
    case ExprKind::Star:
        throw ValidationError("'*' is only allowed as a select item");
    case ExprKind::Unary: {
        bind_expr(e.args[0], scope);
        const auto &a = e.args[0];
        switch (e.op) {
        case Op::Not:
            expect_type(a, is_bool_or_null(a.type), "NOT expects boolean");
            e.type = ValueType::Boolean;
            e.nullable = a.nullable;
            break;
        case Op::Neg:
            expect_type(a, is_numeric_or_null(a.type), "unary minus expects numeric");
            e.type = a.type;
            e.nullable = a.nullable;
            break;
        case Op::IsNull:
        case Op::IsNotNull:
            e.type = ValueType::Boolean;
            e.nullable = false;
            break;
        default: throw ValidationError("bad unary operator");
        }
        return;
    }
    case ExprKind::Binary: {
        bind_expr(e.args[0], scope);
        bind_expr(e.args[1], scope);
        const auto &l = e.args[0];
        const auto &r = e.args[1];
        e.nullable = l.nullable || r.nullable;
        switch (e.op) {
        case Op::Eq:
        case Op::Ne:
        case Op::Lt:
        case Op::Le:
        case Op::Gt:
        case Op::Ge:
            if (!comparable(l.type, r.type))
                throw ValidationError("cannot compare " + std::string(type_name(l.type)) + " with " +
                                      std::string(type_name(r.type)) + " in '" + render_expr(e) + "'");
            e.type = ValueType::Boolean;
            break;
        case Op::And:
        case Op::Or:
            expect_type(l, is_bool_or_null(l.type), "AND/OR expects boolean operands");
            expect_type(r, is_bool_or_null(r.type), "AND/OR expects boolean operands");
            e.type = ValueType::Boolean;
            break;
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div:
            expect_type(l, is_numeric_or_null(l.type), "arithmetic expects numeric operands");
            expect_type(r, is_numeric_or_null(r.type), "arithmetic expects numeric operands");
            if (l.type == ValueType::Decimal || r.type == ValueType::Decimal) {
                e.type = ValueType::Decimal;
            } else if (l.type == ValueType::Null && r.type == ValueType::Null) {
                e.type = ValueType::Null;
            } else {
                e.type = ValueType::Integer;
            }
            if (e.op == Op::Div) e.nullable = true;
            break;
        default: throw ValidationError("bad binary operator");
        }
        return;
    }
    case ExprKind::Case: {
        std::size_t branches = (e.args.size() - (e.has_else ? 1 : 0)) / 2;
        ValueType result = ValueType::Null;
        bool nullable = !e.has_else;
        auto unify = [&](const Expr &r) {
            nullable = nullable || r.nullable;
            if (r.type == ValueType::Null) return;
            if (result == ValueType::Null) {
                result = r.type;
            } else if (is_numeric(result) && is_numeric(r.type)) {
                if (r.type == ValueType::Decimal) result = ValueType::Decimal;
            } else if (result != r.type) {
                throw ValidationError("CASE branches have incompatible types in '" + render_expr(e) + "'");
            }
        };
        for (std::size_t i = 0; i < branches; ++i) {
            bind_expr(e.args[2 * i], scope);
            expect_type(e.args[2 * i], is_bool_or_null(e.args[2 * i].type), "WHEN expects boolean");
            bind_expr(e.args[2 * i + 1], scope);
            unify(e.args[2 * i + 1]);
        }
        if (e.has_else) {
            bind_expr(e.args.back(), scope);
            unify(e.args.back());
        }
        e.type = result;
        e.nullable = nullable;
        return;
    }
    }
}

void bind_agg(AggExpr &agg, const Scope &scope) {
    if (agg.star) {
        if (agg.func != AggFunc::Count) throw ValidationError("only count accepts '*'");
        return;
    }
    if (contains_aggregate(agg.arg)) throw ValidationError("nested aggregate in '" + render_agg_call(agg) + "'");
    Scope inner = scope;
    inner.allow_kill = false;
    bind_expr(agg.arg, inner);
    const auto t = agg.arg.type;
    switch (agg.func) {
    case AggFunc::Sum:
    case AggFunc::Avg:
        if (!is_numeric_or_null(t)) throw ValidationError(std::string(agg_name(agg.func)) + " requires a numeric argument");
        break;
    case AggFunc::BoolAnd:
    case AggFunc::BoolOr:
        if (!is_bool_or_null(t)) throw ValidationError(std::string(agg_name(agg.func)) + " requires a boolean argument");
        break;
    default: break;
    }
}

std::optional<ValueType> static_type(const Expr &e) {
    switch (e.kind) {
    case ExprKind::Literal: return e.literal.type();
    case ExprKind::Unary:
        if (e.op == Op::Neg) return static_type(e.args[0]);
        return ValueType::Boolean;
    case ExprKind::Binary:
        switch (e.op) {
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div: {
            auto l = static_type(e.args[0]);
            auto r = static_type(e.args[1]);
            if (l == ValueType::Decimal || r == ValueType::Decimal) return ValueType::Decimal;
            if (l && r) return ValueType::Integer;
            return std::nullopt;
        }
        default: return ValueType::Boolean;
        }
    case ExprKind::Aggregate: {
        AggExpr a;
        a.func = e.agg;
        if (e.agg == AggFunc::Count || e.agg == AggFunc::CountDistinct || e.agg == AggFunc::Avg ||
            e.agg == AggFunc::BoolAnd || e.agg == AggFunc::BoolOr)
            return a.result_type();
        return std::nullopt;
    }
    default: return std::nullopt;
    }
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

Value arithmetic(Op op, const Value &l, const Value &r, ValueType result, EvalContext &ctx) {
    if (l.is_null() || r.is_null()) return Value::null();
    if (l.type() == ValueType::Integer && r.type() == ValueType::Integer && result != ValueType::Decimal) {
        std::int64_t a = l.as_integer(), b = r.as_integer(), out = 0;
        bool overflow = false;
        switch (op) {
        case Op::Add: overflow = __builtin_add_overflow(a, b, &out); break;
        case Op::Sub: overflow = __builtin_sub_overflow(a, b, &out); break;
        case Op::Mul: overflow = __builtin_mul_overflow(a, b, &out); break;
        case Op::Div:
            if (b == 0) {
                ctx.division_by_zero = true;
                return Value::null();
            }
            if (a == INT64_MIN && b == -1) {
                overflow = true;
                break;
            }
            out = a / b;
            break;
        default: break;
        }
        if (overflow) throw Error("integer overflow");
        return Value::integer(out);
    }
    double a = l.as_decimal(), b = r.as_decimal();
    switch (op) {
    case Op::Add: return Value::decimal(a + b);
    case Op::Sub: return Value::decimal(a - b);
    case Op::Mul: return Value::decimal(a * b);
    case Op::Div:
        if (b == 0.0) {
            ctx.division_by_zero = true;
            return Value::null();
        }
        return Value::decimal(a / b);
    default: return Value::null();
    }
}

Value compare(Op op, const Value &l, const Value &r) {
    if (l.is_null() || r.is_null()) return Value::null();
    int c = compare_values(l, r);
    switch (op) {
    case Op::Eq: return Value::boolean(c == 0);
    case Op::Ne: return Value::boolean(c != 0);
    case Op::Lt: return Value::boolean(c < 0);
    case Op::Le: return Value::boolean(c <= 0);
    case Op::Gt: return Value::boolean(c > 0);
    case Op::Ge: return Value::boolean(c >= 0);
    default: return Value::null();
    }
}

Value coerce(Value v, ValueType type) {
    if (type == ValueType::Decimal && v.type() == ValueType::Integer) return Value::decimal(static_cast<double>(v.as_integer()));
    return v;
}

} // namespace

namespace {

/// Column and literal operands are read in place; anything else is evaluated into `tmp`.
const Value &operand(const Expr &e, std::span<const Value> row, EvalContext &ctx, Value &tmp) {
    if (e.kind == ExprKind::Column && e.slot >= 0 && static_cast<std::size_t>(e.slot) < row.size()) return row[e.slot];
    if (e.kind == ExprKind::Literal) return e.literal;
    tmp = eval_scalar(e, row, ctx);
    return tmp;
}

} // namespace

Value eval_scalar(const Expr &e, std::span<const Value> row, EvalContext &ctx) {
    switch (e.kind) {
    case ExprKind::Column:
        if (e.slot < 0 || static_cast<std::size_t>(e.slot) >= row.size())
            throw Error("unbound column reference '" + render_expr(e) + "'");
        return row[e.slot];
    case ExprKind::Literal: return e.literal;
    case ExprKind::CurrentUser:
        if (!ctx.session || !ctx.session->current_user) throw ValidationError("current_user is not set for this session");
        return *ctx.session->current_user;
    case ExprKind::Kill: {
        Row values(row.begin(), row.end());
        throw PolicyKilledError(e.name, render_row(values));
    }
    case ExprKind::Unary: {
        Value v = eval_scalar(e.args[0], row, ctx);
        switch (e.op) {
        case Op::Not: return v.is_null() ? v : Value::boolean(!v.as_boolean());
        case Op::Neg:
            if (v.is_null()) return v;
            if (v.type() == ValueType::Integer) return Value::integer(-v.as_integer());
            return Value::decimal(-v.as_decimal());
        case Op::IsNull: return Value::boolean(v.is_null());
        case Op::IsNotNull: return Value::boolean(!v.is_null());
        default: break;
        }
        break;
    }
    case ExprKind::Binary: {
        if (e.op == Op::And || e.op == Op::Or) {
            bool short_value = e.op == Op::Or;
            Value l = eval_scalar(e.args[0], row, ctx);
            if (!l.is_null() && l.as_boolean() == short_value) return l;
            Value r = eval_scalar(e.args[1], row, ctx);
            if (!r.is_null() && r.as_boolean() == short_value) return r;
            if (l.is_null() || r.is_null()) return Value::null();
            return Value::boolean(!short_value);
        }
        Value lv, rv;
        const Value &l = operand(e.args[0], row, ctx, lv);
        const Value &r = operand(e.args[1], row, ctx, rv);
        switch (e.op) {
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div: return arithmetic(e.op, l, r, e.type, ctx);
        default: return compare(e.op, l, r);
        }
    }
    case ExprKind::Case: {
        std::size_t branches = (e.args.size() - (e.has_else ? 1 : 0)) / 2;
        for (std::size_t i = 0; i < branches; ++i) {
            if (is_true(eval_scalar(e.args[2 * i], row, ctx))) return coerce(eval_scalar(e.args[2 * i + 1], row, ctx), e.type);
        }
        if (e.has_else) return coerce(eval_scalar(e.args.back(), row, ctx), e.type);
        return Value::null();
    }
    case ExprKind::Aggregate: throw Error("aggregate evaluated as scalar: '" + render_expr(e) + "'");
    case ExprKind::Star: throw Error("'*' evaluated as scalar");
    }
    return Value::null();
}

namespace {

/// Total order over values of any type, consistent with Value::operator==.
bool distinct_less(const Value &a, const Value &b) {
    if (a.type() != b.type()) return a.type() < b.type();
    switch (a.type()) {
    case ValueType::Integer: return a.as_integer() < b.as_integer();
    case ValueType::Decimal: {
        double x = a.as_decimal(), y = b.as_decimal();
        if (std::isnan(x) || std::isnan(y)) return !std::isnan(x) && std::isnan(y);
        return x < y;
    }
    case ValueType::Text: return a.as_text() < b.as_text();
    case ValueType::Boolean: return a.as_boolean() < b.as_boolean();
    case ValueType::Null: return false;
    }
    return false;
}

} // namespace

void Accumulator::compact_distinct() const {
    if (ints_sorted_ != distinct_ints_.size()) {
        std::sort(distinct_ints_.begin(), distinct_ints_.end());
        distinct_ints_.erase(std::unique(distinct_ints_.begin(), distinct_ints_.end()), distinct_ints_.end());
        ints_sorted_ = distinct_ints_.size();
    }
    if (distinct_sorted_ == distinct_.size()) return;
    std::sort(distinct_.begin(), distinct_.end(), distinct_less);
    auto equal = [](const Value &a, const Value &b) { return !distinct_less(a, b) && !distinct_less(b, a); };
    distinct_.erase(std::unique(distinct_.begin(), distinct_.end(), equal), distinct_.end());
    distinct_sorted_ = distinct_.size();
}

void Accumulator::add(const Value &v) {
    if (v.is_null()) return;
    switch (func_) {
    case AggFunc::Count: ++count_; break;
    case AggFunc::CountDistinct:
        if (v.type() == ValueType::Integer) {
            distinct_ints_.push_back(v.as_integer());
            if (distinct_ints_.size() >= 2 * ints_sorted_ + 4096) compact_distinct();
        } else {
            distinct_.push_back(v);
            if (distinct_.size() >= 2 * distinct_sorted_ + 1024) compact_distinct();
        }
        break;
    case AggFunc::Sum:
    case AggFunc::Avg:
        ++count_;
        if (v.type() == ValueType::Decimal || decimal_ || func_ == AggFunc::Avg) {
            if (!decimal_) {
                dec_sum_ = static_cast<double>(int_sum_);
                decimal_ = true;
            }
            dec_sum_ += v.as_decimal();
        } else if (__builtin_add_overflow(int_sum_, v.as_integer(), &int_sum_)) {
            throw Error("integer overflow in sum");
        }
        break;
    case AggFunc::Min:
        if (best_.is_null() || compare_values(v, best_) < 0) best_ = v;
        break;
    case AggFunc::Max:
        if (best_.is_null() || compare_values(v, best_) > 0) best_ = v;
        break;
    case AggFunc::BoolAnd: all_ = all_ && v.as_boolean(); break;
    case AggFunc::BoolOr: any_ = any_ || v.as_boolean(); break;
    }
}

void Accumulator::merge(const Accumulator &other) {
    switch (func_) {
    case AggFunc::Count: count_ += other.count_; break;
    case AggFunc::CountDistinct:
        distinct_ints_.insert(distinct_ints_.end(), other.distinct_ints_.begin(), other.distinct_ints_.end());
        distinct_.insert(distinct_.end(), other.distinct_.begin(), other.distinct_.end());
        compact_distinct();
        break;
    case AggFunc::Sum:
    case AggFunc::Avg:
        count_ += other.count_;
        if (decimal_ || other.decimal_) {
            double mine = decimal_ ? dec_sum_ : static_cast<double>(int_sum_);
            double theirs = other.decimal_ ? other.dec_sum_ : static_cast<double>(other.int_sum_);
            dec_sum_ = mine + theirs;
            decimal_ = true;
        } else if (__builtin_add_overflow(int_sum_, other.int_sum_, &int_sum_)) {
            throw Error("integer overflow in sum");
        }
        break;
    case AggFunc::Min:
    case AggFunc::Max:
        if (!other.best_.is_null()) add(other.best_);
        break;
    case AggFunc::BoolAnd: all_ = all_ && other.all_; break;
    case AggFunc::BoolOr: any_ = any_ || other.any_; break;
    }
}

Value Accumulator::result() const {
    switch (func_) {
    case AggFunc::Count: return Value::integer(count_);
    case AggFunc::CountDistinct:
        compact_distinct();
        return Value::integer(static_cast<std::int64_t>(distinct_ints_.size() + distinct_.size()));
    case AggFunc::Sum:
        if (count_ == 0) return Value::null();
        return decimal_ ? Value::decimal(dec_sum_) : Value::integer(int_sum_);
    case AggFunc::Avg:
        if (count_ == 0) return Value::null();
        return Value::decimal(dec_sum_ / static_cast<double>(count_));
    case AggFunc::Min:
    case AggFunc::Max: return best_;
    case AggFunc::BoolAnd: return Value::boolean(all_);
    case AggFunc::BoolOr: return Value::boolean(any_);
    }
    return Value::null();
}

Value agg_input(const AggExpr &agg, std::span<const Value> row, EvalContext &ctx) {
    if (agg.star) return Value::boolean(true);
    return eval_scalar(agg.arg, row, ctx);
}

Value agg_result(const AggExpr &agg, const Accumulator &acc) {
    Value out = acc.result();
    if (agg.func == AggFunc::Sum && agg.arg.type == ValueType::Decimal && out.type() == ValueType::Integer)
        out = Value::decimal(static_cast<double>(out.as_integer()));
    return out;
}

Value eval_agg(const AggExpr &agg, std::span<const Row> group, EvalContext &ctx) {
    Accumulator acc(agg.func);
    for (const auto &row : group) acc.add(agg_input(agg, row, ctx));
    return agg_result(agg, acc);
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

int precedence(const Expr &e) {
    if (e.kind == ExprKind::Binary) {
        switch (e.op) {
        case Op::Or: return 1;
        case Op::And: return 2;
        case Op::Add:
        case Op::Sub: return 5;
        case Op::Mul:
        case Op::Div: return 6;
        default: return 4;
        }
    }
    if (e.kind == ExprKind::Unary) {
        switch (e.op) {
        case Op::Not: return 3;
        case Op::Neg: return 7;
        default: return 4;
        }
    }
    if (e.kind == ExprKind::Literal && e.literal.type() == ValueType::Integer && e.literal.as_integer() < 0) return 7;
    if (e.kind == ExprKind::Literal && e.literal.type() == ValueType::Decimal && e.literal.as_decimal() < 0) return 7;
    return 8;
}

std::string_view op_text(Op op) {
    switch (op) {
    case Op::Eq: return "=";
    case Op::Ne: return "<>";
    case Op::Lt: return "<";
    case Op::Le: return "<=";
    case Op::Gt: return ">";
    case Op::Ge: return ">=";
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Div: return "/";
    case Op::And: return "AND";
    case Op::Or: return "OR";
    default: return "?";
    }
}

class Renderer {
public:
    explicit Renderer(const std::function<std::string(const Expr &)> &column_text) : column_text_(column_text) {}

    std::string render(const Expr &e) {
        switch (e.kind) {
        case ExprKind::Column:
            if (column_text_) return column_text_(e);
            return e.qualifier.empty() ? e.name : e.qualifier + "." + e.name;
        case ExprKind::Literal: return e.literal.to_sql_literal();
        case ExprKind::CurrentUser: return "current_user";
        case ExprKind::Kill: return e.name.empty() ? "kill()" : "kill(" + Value::text(e.name).to_sql_literal() + ")";
        case ExprKind::Star: return e.qualifier.empty() ? "*" : e.qualifier + ".*";
        case ExprKind::Aggregate: {
            std::string out(agg_name(e.agg));
            out += '(';
            if (e.star) {
                out += '*';
            } else {
                if (e.agg == AggFunc::CountDistinct) out += "DISTINCT ";
                out += render(e.args[0]);
            }
            return out + ')';
        }
        case ExprKind::Unary: {
            const auto &a = e.args[0];
            switch (e.op) {
            case Op::Not: return "NOT " + wrap(a, precedence(a) < 8);
            case Op::Neg: return "-" + wrap(a, !(a.kind == ExprKind::Column));
            case Op::IsNull: return wrap(a, precedence(a) <= 4) + " IS NULL";
            case Op::IsNotNull: return wrap(a, precedence(a) <= 4) + " IS NOT NULL";
            default: return "?";
            }
        }
        case ExprKind::Binary: {
            int p = precedence(e);
            const auto &l = e.args[0];
            const auto &r = e.args[1];
            bool comparison = p == 4;
            std::string lhs = wrap(l, comparison ? precedence(l) <= p : precedence(l) < p);
            std::string rhs = wrap(r, precedence(r) <= p);
            return lhs + " " + std::string(op_text(e.op)) + " " + rhs;
        }
        case ExprKind::Case: {
            std::string out = "CASE";
            std::size_t branches = (e.args.size() - (e.has_else ? 1 : 0)) / 2;
            for (std::size_t i = 0; i < branches; ++i)
                out += " WHEN " + render(e.args[2 * i]) + " THEN " + render(e.args[2 * i + 1]);
            if (e.has_else) out += " ELSE " + render(e.args.back());
            return out + " END";
        }
        }
        return "?";
    }

private:
    std::string wrap(const Expr &e, bool parens) { return parens ? "(" + render(e) + ")" : render(e); }

    const std::function<std::string(const Expr &)> &column_text_;
};

} // namespace

std::string render_expr(const Expr &e, const std::function<std::string(const Expr &)> &column_text) {
    return Renderer(column_text).render(e);
}

std::string render_agg_call(const AggExpr &agg, const std::function<std::string(const Expr &)> &column_text) {
    Expr call = Expr::aggregate(agg.func, agg.star ? std::nullopt : std::optional<Expr>(agg.arg));
    return render_expr(call, column_text);
}

} // namespace dfc
