#pragma once

#include "dfc/relation.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dfc {

/// Generates `lineitem` with exactly `lineitem_rows` rows, `orders` with 1 to 7 lines
/// each (about rows/4) and `customer` with about one customer per ten orders. Orders
/// pick customers with a skew towards low keys; dates are yyyymmdd integers.
/// Deterministic for a given (rows, seed).
Database generate_tpch_lite(std::size_t lineitem_rows, std::uint64_t seed);

struct BenchQuery {
    std::string name;
    std::string sql;
};

/// Monotonic aggregation queries over lineitem, modeled on TPC-H.
const std::vector<BenchQuery> &bench_queries();

/// Contributor threshold for the bench policy: 1500 at six million lineitem rows,
/// scaled linearly, at least 2.
std::int64_t bench_threshold(std::size_t lineitem_rows);
std::string bench_policy_text(std::int64_t threshold);

} // namespace dfc
