#include "dfc/enforce.hpp"

#include "dfc/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

namespace dfc {

std::string_view mode_name(Mode m) {
    switch (m) {
    case Mode::Off: return "off";
    case Mode::Oracle: return "oracle";
    case Mode::Rewrite: return "rewrite";
    case Mode::Capture: return "capture";
    }
    return "?";
}

std::optional<Mode> parse_mode(std::string_view text) {
    for (Mode m : {Mode::Off, Mode::Oracle, Mode::Rewrite, Mode::Capture}) {
        if (mode_name(m) == text) return m;
    }
    return std::nullopt;
}

namespace {

EnforcementOutcome killed_by(const PolicyKilledError &e, ExecStats stats) {
    EnforcementOutcome out;
    out.kind = EnforcementOutcome::Kind::QueryKilled;
    Violation v;
    v.policy = e.policy();
    v.action = ViolationAction::KillQuery;
    out.killed = v;
    out.stats = stats;
    return out;
}

std::size_t count_candidates(const QueryStatement &stmt, const Database &db) {
    EvalContext ctx;
    ctx.session = &stmt.session;
    std::size_t n = 0;
    Row row;
    for (const auto &stored : db.relation(stmt.plan.relation).rows()) {
        row.assign(stored.values.begin(), stored.values.end());
        row.push_back(Value::integer(static_cast<std::int64_t>(stored.ordinal)));
        if (is_true(eval_scalar(stmt.plan.predicate, row, ctx))) ++n;
    }
    return n;
}

void run_select(const QueryStatement &stmt, StatementOutcome &out, std::span<const PreparedPolicy> policies,
                const Database &db, ExecOptions options) {
    switch (out.mode) {
    case Mode::Off: {
        QueryResult r = execute(stmt.plan, db, stmt.session, options);
        out.outcome.columns = std::move(r.columns);
        out.outcome.rows = std::move(r.rows);
        out.outcome.stats = r.stats;
        return;
    }
    case Mode::Oracle: out.outcome = enforce_select(stmt, policies, db, options); return;
    case Mode::Capture: out.outcome = capture_baseline(stmt, policies, db, options); return;
    case Mode::Rewrite: break;
    }
    RewriteResult rw;
    try {
        rw = rewrite_select(stmt, policies, db);
    } catch (const UnsupportedForRewrite &e) {
        out.fell_back = true;
        out.fallback_reason = e.what();
        out.outcome = enforce_select(stmt, policies, db, options);
        return;
    }
    out.emitted_sql = std::move(rw.emitted_sql);
    out.injected = std::move(rw.injected);
    out.rewritten = rw.plan;
    auto start = std::chrono::steady_clock::now();
    try {
        QueryResult r = execute(rw.plan, db, stmt.session, options);
        out.outcome.columns = std::move(r.columns);
        out.outcome.rows = std::move(r.rows);
        out.outcome.stats = r.stats;
    } catch (const PolicyKilledError &e) {
        ExecStats stats;
        stats.wall_time = std::chrono::steady_clock::now() - start;
        out.outcome = killed_by(e, stats);
        out.kill_message = e.what();
    }
}

void run_update(const QueryStatement &stmt, StatementOutcome &out, std::span<const PreparedPolicy> policies, Database &db,
                ExecOptions options) {
    auto apply = [&](const Plan &plan) {
        auto start = std::chrono::steady_clock::now();
        try {
            UpdateResult r = execute_update(plan, db, stmt.session, options);
            out.outcome.kind = EnforcementOutcome::Kind::UpdateApplied;
            out.outcome.updated = r.updated;
            out.outcome.stats = r.stats;
            out.candidates = r.candidates;
            out.skipped_rows = r.skipped;
            const Relation &rel = db.relation(plan.relation);
            for (auto ordinal : r.skipped_ordinals) out.skipped_images.push_back(*rel.find(ordinal));
        } catch (const PolicyKilledError &e) {
            ExecStats stats;
            stats.wall_time = std::chrono::steady_clock::now() - start;
            out.outcome = killed_by(e, stats);
            out.kill_message = e.what();
            out.candidates = count_candidates(stmt, db);
        }
    };
    if (out.mode == Mode::Off) return apply(stmt.plan);
    if (out.mode == Mode::Rewrite) {
        try {
            RewriteResult rw = rewrite_update(stmt, policies, db);
            out.emitted_sql = std::move(rw.emitted_sql);
            out.injected = std::move(rw.injected);
            out.rewritten = rw.plan;
            return apply(rw.plan);
        } catch (const UnsupportedForRewrite &e) {
            out.fell_back = true;
            out.fallback_reason = e.what();
        }
    }
    std::size_t candidates = count_candidates(stmt, db);
    out.outcome = enforce_update(stmt, policies, db, options);
    out.candidates = candidates;
    out.skipped_rows = out.outcome.kind == EnforcementOutcome::Kind::UpdateApplied ? candidates - out.outcome.updated : 0;
    if (out.outcome.killed) out.kill_message = out.outcome.killed->to_string();
}

} // namespace

StatementOutcome run_statement(const QueryStatement &stmt, Mode mode, std::span<const PreparedPolicy> policies, Database &db,
                               ExecOptions options) {
    StatementOutcome out;
    out.mode = mode;
    if (stmt.kind == StatementKind::Select) run_select(stmt, out, policies, db, options);
    else run_update(stmt, out, policies, db, options);
    return out;
}

std::uint64_t result_digest(const EnforcementOutcome &outcome) {
    std::uint64_t h = 1469598103934665603ULL;
    auto feed = [&](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        h ^= 0xff;
        h *= 1099511628211ULL;
    };
    feed(outcome_kind_name(outcome.kind));
    std::vector<std::string> rows;
    rows.reserve(outcome.rows.size());
    for (const auto &r : outcome.rows) rows.push_back(render_row(r));
    std::sort(rows.begin(), rows.end());
    for (const auto &r : rows) feed(r);
    if (outcome.kind == EnforcementOutcome::Kind::UpdateApplied) feed(std::to_string(outcome.updated));
    return h;
}

std::string digest_hex(std::uint64_t digest) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
    return buf;
}

} // namespace dfc
