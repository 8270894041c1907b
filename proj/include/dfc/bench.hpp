#pragma once

#include "dfc/enforce.hpp"
#include "dfc/tpch.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace dfc {

struct BenchConfig {
    std::size_t repetitions = 3;
    Session session;
};

struct ModeRun {
    Mode mode = Mode::Off;
    double median_ms = 0.0;
    /// Stats of the last repetition.
    ExecStats stats;
    std::string digest;
    std::size_t rows = 0;
    bool fell_back = false;
};

struct QueryReport {
    std::string name;
    /// Off, rewrite, capture, oracle.
    std::vector<ModeRun> runs;
    /// Rows without enforcement and rows surviving the policies.
    std::size_t groups = 0;
    std::size_t surviving = 0;
    bool digests_equal = false;

    const ModeRun &run(Mode m) const;
    /// time(rewrite) / time(off)
    double overhead() const;
    /// time(capture) / time(rewrite)
    double capture_ratio() const;
};

struct BenchReport {
    std::vector<QueryReport> queries;
    bool digests_equal() const;
};

/// One JSON object per (query, mode), then one summary object per query.
std::vector<std::string> bench_json_lines(const QueryReport &q);

/// Runs every query under each mode, `repetitions` times, and checks that the
/// enforcing modes agree. `on_query` sees each report as soon as it is complete.
BenchReport run_bench(Database &db, std::span<const PreparedPolicy> policies, std::span<const BenchQuery> queries,
                      const BenchConfig &config, const std::function<void(const QueryReport &)> &on_query = {});

} // namespace dfc
