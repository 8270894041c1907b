#pragma once

#include "dfc/expr.hpp"
#include "dfc/relation.hpp"

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace dfc {

enum class PlanKind { Scan, Filter, Project, Join, Aggregate, Distinct, Update };

/// Inner joins keep matching pairs. Mark joins keep every left row exactly once and
/// append a boolean column that is TRUE iff some right row satisfies the predicate.
enum class JoinKind { Inner, Mark };

/// Name of the hidden per-scan column carrying the tuple ordinal.
inline constexpr const char *kTupleIdColumn = "__tid";

struct ProjectItem {
    Expr expr;
    std::string alias;

    bool operator==(const ProjectItem &) const = default;
};

struct Assignment {
    std::string column;
    Expr value;

    bool operator==(const Assignment &) const = default;
};

struct OutputColumn {
    std::string qualifier;
    std::string name;
    ValueType type = ValueType::Null;
    bool nullable = true;
    bool hidden = false;

    bool operator==(const OutputColumn &) const = default;
};

/// Logical algebra tree. Fields are used per kind:
///   Scan:      relation, alias
///   Filter:    predicate, inputs[0]
///   Project:   items, inputs[0]
///   Join:      join_kind, predicate (TRUE for cross join), mark_name, inputs[0..1]
///   Aggregate: group_keys (bare columns), aggs, inputs[0]
///   Distinct:  inputs[0]
///   Update:    relation, alias, assignments, predicate, guard, inputs[0] (the target Scan)
/// `output_alias` re-qualifies every output column (derived tables).
/// `output` is filled in by bind_plan.
struct Plan {
    PlanKind kind = PlanKind::Scan;
    std::string relation;
    std::string alias;
    Expr predicate = Expr::constant(Value::boolean(true));
    std::vector<ProjectItem> items;
    std::vector<Expr> group_keys;
    std::vector<AggExpr> aggs;
    JoinKind join_kind = JoinKind::Inner;
    std::string mark_name;
    std::vector<Assignment> assignments;
    std::optional<Expr> guard;
    std::string output_alias;
    std::vector<Plan> inputs;

    std::vector<OutputColumn> output;

    static Plan scan(std::string relation, std::string alias = {});
    static Plan filter(Expr predicate, Plan input);
    static Plan project(std::vector<ProjectItem> items, Plan input);
    static Plan join(Plan left, Plan right, Expr predicate);
    static Plan mark_join(Plan left, Plan right, Expr predicate, std::string mark_name);
    static Plan aggregate(std::vector<Expr> keys, std::vector<AggExpr> aggs, Plan input);
    static Plan distinct(Plan input);
    static Plan update(std::string relation, std::string alias, std::vector<Assignment> assignments, Expr predicate);

    const Plan &input(std::size_t i = 0) const { return inputs.at(i); }
    Plan &input(std::size_t i = 0) { return inputs.at(i); }

    bool operator==(const Plan &) const = default;
};

enum class StatementKind { Select, Update };

struct QueryStatement {
    StatementKind kind = StatementKind::Select;
    Plan plan;
    Session session;
};

/// Resolves names, expands `*`, type-checks, and computes output schemas bottom-up.
/// Enforces: one Aggregate per root-to-leaf path, Update only at the root, bare-column
/// group keys. Throws ValidationError.
void bind_plan(Plan &plan, const Database &db, std::optional<ValueType> current_user_type = std::nullopt);

/// Binds a freshly parsed statement and moves each WHERE conjunct down to the lowest
/// scan (single alias) or inner join (several aliases) that sees every alias it uses.
void bind_statement(QueryStatement &stmt, const Database &db);

/// Base relations scanned by the plan (update target included).
std::set<std::string> referenced_relations(const Plan &plan);

std::size_t node_count(const Plan &plan);
std::string_view plan_kind_name(PlanKind kind);
/// Indented operator tree for --explain output and debugging.
std::string explain(const Plan &plan);

/// Scope exposing a bound plan's output columns to expressions evaluated over it.
Scope output_scope(const Plan &plan, std::optional<ValueType> current_user_type = std::nullopt);

} // namespace dfc
