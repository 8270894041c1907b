#pragma once

#include "dfc/rewriter.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace dfc {

enum class Mode { Off, Oracle, Rewrite, Capture };

std::string_view mode_name(Mode m);
std::optional<Mode> parse_mode(std::string_view text);

struct StatementOutcome {
    EnforcementOutcome outcome;
    Mode mode = Mode::Off;
    /// Rewrite mode could not express a policy and ran the oracle instead.
    bool fell_back = false;
    std::string fallback_reason;
    /// Rewrite mode only.
    std::string emitted_sql;
    InjectionSummary injected;
    /// Message of the kill that stopped the statement.
    std::string kill_message;
    /// Update statements: rows matching WHERE and rows left unchanged by policies.
    std::size_t candidates = 0;
    std::size_t skipped_rows = 0;
    /// Rewrite and off modes: stored images of the candidates the guard rejected.
    std::vector<Row> skipped_images;
    /// Rewrite mode: the plan that was executed.
    std::optional<Plan> rewritten;
};

/// Runs a bound statement under the given enforcement mode. Updates modify `db`
/// unless killed.
StatementOutcome run_statement(const QueryStatement &stmt, Mode mode, std::span<const PreparedPolicy> policies, Database &db,
                               ExecOptions options = {});

/// FNV-1a over the outcome kind, the sorted rendered rows and, for updates, the
/// number of updated rows. Equal across modes iff they agree on the answer.
std::uint64_t result_digest(const EnforcementOutcome &outcome);
std::string digest_hex(std::uint64_t digest);

} // namespace dfc
