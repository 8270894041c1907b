#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "dfc/bench.hpp"
#include "dfc/policy.hpp"
#include "dfc/tpch.hpp"

using namespace dfc;

TEST_CASE("generator is deterministic per seed") {
    CHECK(generate_tpch_lite(2000, 42) == generate_tpch_lite(2000, 42));
    CHECK_FALSE(generate_tpch_lite(2000, 42) == generate_tpch_lite(2000, 43));
}

TEST_CASE("generator cardinalities") {
    for (std::size_t rows : {1u, 7u, 1000u, 12345u}) {
        Database db = generate_tpch_lite(rows, 1);
        CHECK(db.relation("lineitem").size() == rows);
        const std::size_t orders = db.relation("orders").size();
        CHECK(orders >= (rows + 6) / 7);
        CHECK(orders <= rows);
        CHECK(db.relation("customer").size() >= 1);
    }
}

TEST_CASE("bench threshold scales linearly with a floor") {
    CHECK(bench_threshold(6'000'000) == 1500);
    CHECK(bench_threshold(60'000) == 15);
    CHECK(bench_threshold(10) == 2);
}

TEST_CASE("every bench query agrees across modes on small data") {
    for (std::size_t rows : {1u, 500u}) {
        Database db = generate_tpch_lite(rows, 5);
        const std::int64_t k = bench_threshold(rows);
        std::vector<PreparedPolicy> policies{prepare_policy(parse_policy(bench_policy_text(k)), db)};
        BenchConfig config;
        config.repetitions = 1;
        BenchReport report = run_bench(db, policies, bench_queries(), config);
        REQUIRE(report.queries.size() == bench_queries().size());
        for (const auto &q : report.queries) {
            CAPTURE(q.name);
            CAPTURE(rows);
            CHECK(q.digests_equal);
            CHECK(q.surviving <= q.groups);
            CHECK_FALSE(q.run(Mode::Rewrite).fell_back);
            CHECK(q.run(Mode::Rewrite).stats.annotations_created == 0);
        }
    }
}
