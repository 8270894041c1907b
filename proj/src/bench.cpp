#include "dfc/bench.hpp"

#include "dfc/errors.hpp"
#include "dfc/sql.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <iterator>

namespace dfc {

const ModeRun &QueryReport::run(Mode m) const {
    for (const auto &r : runs) {
        if (r.mode == m) return r;
    }
    throw Error("bench: mode " + std::string(mode_name(m)) + " was not run");
}

double QueryReport::overhead() const {
    double off = run(Mode::Off).median_ms;
    return off > 0.0 ? run(Mode::Rewrite).median_ms / off : 0.0;
}

double QueryReport::capture_ratio() const {
    double rewrite = run(Mode::Rewrite).median_ms;
    return rewrite > 0.0 ? run(Mode::Capture).median_ms / rewrite : 0.0;
}

bool BenchReport::digests_equal() const {
    return std::all_of(queries.begin(), queries.end(), [](const QueryReport &q) { return q.digests_equal; });
}

std::vector<std::string> bench_json_lines(const QueryReport &q) {
    std::vector<std::string> lines;
    for (const auto &r : q.runs) {
        nlohmann::json j = {{"query", q.name},
                            {"mode", mode_name(r.mode)},
                            {"median_ms", r.median_ms},
                            {"rows", r.rows},
                            {"digest", r.digest},
                            {"fell_back", r.fell_back},
                            {"stats", nlohmann::json::parse(r.stats.to_json())}};
        lines.push_back(j.dump());
    }
    nlohmann::json summary = {{"query", q.name},
                              {"groups", q.groups},
                              {"surviving", q.surviving},
                              {"overhead_rewrite_vs_off", q.overhead()},
                              {"capture_vs_rewrite", q.capture_ratio()},
                              {"digests_equal", q.digests_equal}};
    lines.push_back(summary.dump());
    return lines;
}

BenchReport run_bench(Database &db, std::span<const PreparedPolicy> policies, std::span<const BenchQuery> queries,
                      const BenchConfig &config, const std::function<void(const QueryReport &)> &on_query) {
    BenchReport report;
    const std::size_t reps = std::max<std::size_t>(1, config.repetitions);
    for (const auto &q : queries) {
        QueryStatement stmt = parse_and_bind(q.sql, db, config.session);
        if (stmt.kind != StatementKind::Select) throw Error("bench query '" + q.name + "' is not a SELECT");
        QueryReport qr;
        qr.name = q.name;
        const Mode modes[] = {Mode::Off, Mode::Rewrite, Mode::Capture, Mode::Oracle};
        std::vector<std::vector<double>> times(std::size(modes));
        for (std::size_t m = 0; m < std::size(modes); ++m) {
            StatementOutcome o = run_statement(stmt, modes[m], policies, db);
            ModeRun run;
            run.mode = modes[m];
            run.stats = o.outcome.stats;
            run.digest = digest_hex(result_digest(o.outcome));
            run.rows = o.outcome.rows.size();
            run.fell_back = o.fell_back;
            qr.runs.push_back(std::move(run));
        }
        // Modes are interleaved so that machine drift affects them alike.
        for (std::size_t i = 0; i < reps; ++i) {
            for (std::size_t m = 0; m < std::size(modes); ++m) {
                auto start = std::chrono::steady_clock::now();
                run_statement(stmt, modes[m], policies, db);
                times[m].push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
            }
        }
        for (std::size_t m = 0; m < std::size(modes); ++m) {
            std::sort(times[m].begin(), times[m].end());
            qr.runs[m].median_ms = times[m][times[m].size() / 2];
        }
        qr.groups = qr.run(Mode::Off).rows;
        qr.surviving = qr.run(Mode::Oracle).rows;
        const std::string &expected = qr.run(Mode::Oracle).digest;
        qr.digests_equal = qr.run(Mode::Rewrite).digest == expected && qr.run(Mode::Capture).digest == expected;
        if (on_query) on_query(qr);
        report.queries.push_back(std::move(qr));
    }
    return report;
}

} // namespace dfc
