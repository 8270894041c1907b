#pragma once

#include "dfc/executor.hpp"
#include "dfc/policy.hpp"
#include "dfc/provenance.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dfc {

struct AnnotatedRow {
    Row values;
    Polynomial prov;
};

struct AnnotatedResult {
    /// All output columns, hidden ones included; rows follow this layout.
    std::vector<OutputColumn> columns;
    std::vector<AnnotatedRow> rows;
    ExecStats stats;
};

/// Runs a bound select plan annotating every row with its provenance polynomial.
/// Row order matches execute(). Mark joins are not supported here.
AnnotatedResult execute_with_provenance(const Plan &plan, const Database &db, const Session &session,
                                        ExecOptions options = {});

enum class ViolationAction { KillQuery, KillRow, SkipUpdate };

struct Violation {
    std::string policy;
    ViolationAction action = ViolationAction::KillRow;
    /// Output row (visible columns) or, for updates, the new image of the tuple.
    Row row;
    std::vector<std::pair<std::string, Value>> aggs;
    std::size_t dimension_witnesses = 0;

    /// `policy=<name> action=<...> row=<values> aggs=<alias=value,...>`
    std::string to_string() const;
};

std::string_view action_name(ViolationAction a);

/// Evaluates one normalized, prepared OVER policy on an annotated output row.
/// Returns the violation, or nothing when the row passes. Catalog dimensions are
/// existential: the row passes iff some binding makes the constraint TRUE.
std::optional<Violation> evaluate_policy_row(const PreparedPolicy &p, const AnnotatedRow &row, const Database &db,
                                             const Session &session);

/// Contributing tuples per relation name.
using ContributorMap = std::map<std::string, std::vector<TupleId>>;

/// Policy evaluation from already extracted contributors; `reported` is the row
/// recorded in the violation.
std::optional<Violation> evaluate_policy_contributors(const PreparedPolicy &p, const ContributorMap &contributing,
                                                      const Row &reported, const Database &db, const Session &session);

/// Same for an UPDATE policy: `old_image` is the stored tuple, `new_image` the tuple
/// after the assignments.
std::optional<Violation> evaluate_policy_update(const PreparedPolicy &p, const Row &old_image, const Row &new_image,
                                                const Database &db, const Session &session);

struct EnforcementOutcome {
    enum class Kind { Completed, QueryKilled, UpdateApplied };
    Kind kind = Kind::Completed;
    std::vector<OutputColumn> columns;
    /// Surviving rows (Completed only), visible columns.
    std::vector<Row> rows;
    std::vector<Violation> dropped;
    std::optional<Violation> killed;
    std::size_t updated = 0;
    std::vector<Violation> skipped;
    ExecStats stats;
};

std::string_view outcome_kind_name(EnforcementOutcome::Kind k);

/// Policies not applicable to the statement are ignored. Throws ValidationError when an
/// applicable policy reads current_user and the session has none.
EnforcementOutcome enforce_select(const QueryStatement &stmt, std::span<const PreparedPolicy> policies,
                                  const Database &db, ExecOptions options = {});

/// Evaluates every applicable UPDATE policy per candidate and writes the passing
/// candidates. A KillQuery violation leaves the database untouched.
EnforcementOutcome enforce_update(const QueryStatement &stmt, std::span<const PreparedPolicy> policies, Database &db,
                                  ExecOptions options = {});

/// Throws when a policy in `policies` applicable to `stmt` needs a session user that is missing.
void check_session(const QueryStatement &stmt, std::span<const PreparedPolicy> policies);

} // namespace dfc
