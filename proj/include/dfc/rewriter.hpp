#pragma once

#include "dfc/oracle.hpp"
#include "dfc/policy.hpp"

#include <span>
#include <string>
#include <vector>

namespace dfc {

/// What a rewrite added to the user's plan.
struct InjectionSummary {
    std::vector<std::string> threaded_columns;
    std::vector<std::string> added_aggs;
    std::vector<std::string> dimension_joins;
    /// `kill_query(<policy>)` / `kill_row(<policy>)` in policy order.
    std::vector<std::string> guards;
    bool distinct_to_aggregate = false;

    std::string to_string() const;
};

struct RewriteResult {
    Plan plan;
    std::string emitted_sql;
    InjectionSummary injected;
};

/// Enforces the applicable OVER policies by extending the plan:
///
///   * DISTINCT becomes a group-by-all aggregation.
///   * Policy aggregates are appended to the query's aggregation as `__p<k>_<alias>`,
///     with the columns they read threaded through projections below it. Without an
///     aggregation every output row has one derivation and each aggregate becomes a
///     scalar over that row.
///   * Catalog dimensions are attached with a mark join `__mark<k>` whose right side
///     is the dimension filtered by the constraint conjuncts that only read it.
///   * KILL QUERY constraints become one filter that calls kill() on the first failing
///     row; KILL ROW constraints become filters above it.
///
/// Policies that do not apply are ignored; with none the plan is returned unchanged.
/// Throws UnsupportedForRewrite when the plan or policy is outside what the rewrite
/// can express (callers fall back to the oracle).
RewriteResult rewrite_select(const QueryStatement &stmt, std::span<const PreparedPolicy> policies, const Database &db);

/// Enforces applicable UPDATE policies by attaching a per-candidate guard to the
/// update: old-image columns read the scanned row, new-image columns read the SET
/// expressions.
RewriteResult rewrite_update(const QueryStatement &stmt, std::span<const PreparedPolicy> policies, const Database &db);

/// Baseline that captures provenance for every intermediate row, materializes a
/// (row, relation, tuple) view, and evaluates policies over that view.
EnforcementOutcome capture_baseline(const QueryStatement &stmt, std::span<const PreparedPolicy> policies,
                                    const Database &db, ExecOptions options = {});

} // namespace dfc
