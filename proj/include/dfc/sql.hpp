#pragma once

#include "dfc/plan.hpp"

#include <string>
#include <string_view>

namespace dfc {

struct SqlOptions {
    /// Accepts the constructs the rewriter emits: derived tables `(SELECT ...) AS t` and
    /// `L MARK JOIN R ON pred AS m`.
    bool internal_dialect = false;
};

/// Parses one SELECT or UPDATE statement into an unbound plan.
///
/// SELECT plans have the shape Distinct? -> Project -> Aggregate? -> Filter? -> joins,
/// with joins left-deep. Aggregate calls in the select list become AggExprs named
/// `__a0`, `__a1`, ... that the Project references.
QueryStatement parse_sql(std::string_view text, SqlOptions options = {});

/// parse_sql followed by bind_statement.
QueryStatement parse_and_bind(std::string_view text, const Database &db, const Session &session = {},
                              SqlOptions options = {});

/// Canonical SQL for a bound plan. Plans that leave the user fragment (derived
/// tables, mark joins, kill guards) render in the internal dialect.
std::string render_sql(const Plan &plan);

} // namespace dfc
