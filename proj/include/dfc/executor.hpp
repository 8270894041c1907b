#pragma once

#include "dfc/plan.hpp"

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

namespace dfc {

struct ExecStats {
    std::uint64_t rows_scanned = 0;
    std::uint64_t rows_joined = 0;
    std::uint64_t rows_output = 0;
    std::uint64_t annotations_created = 0;
    std::chrono::nanoseconds wall_time{0};

    double wall_ms() const { return std::chrono::duration<double, std::milli>(wall_time).count(); }
    /// One JSON object on a single line.
    std::string to_json() const;
};

struct ExecOptions {
    /// Upper bound on rows materialized by any single operator.
    std::size_t row_limit = 20'000'000;
};

struct QueryResult {
    /// Visible output columns; hidden tuple-id columns are dropped at the root.
    std::vector<OutputColumn> columns;
    std::vector<Row> rows;
    ExecStats stats;
};

/// Runs a bound select plan. Output order is deterministic: scan order through
/// filters and projections, left-major order for joins, first-appearance order for
/// groups and distinct rows. Throws PolicyKilledError from kill(), ResourceError
/// when an operator exceeds the row limit.
QueryResult execute(const Plan &plan, const Database &db, const Session &session, ExecOptions options = {});

struct UpdateResult {
    /// Rows satisfying the WHERE predicate.
    std::size_t candidates = 0;
    std::size_t updated = 0;
    /// Candidates rejected by the plan's guard.
    std::size_t skipped = 0;
    std::vector<std::uint64_t> skipped_ordinals;
    ExecStats stats;
};

/// Runs a bound UPDATE plan. A candidate is updated iff its guard (when present) is
/// TRUE. SET expressions read the prior row image. Either every passing candidate is
/// written or, when kill() or a constraint violation is raised, none is.
UpdateResult execute_update(const Plan &plan, Database &db, const Session &session, ExecOptions options = {});

} // namespace dfc
