#include "dfc/tpch.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <random>

namespace dfc {

namespace {

constexpr std::array kPriorities = {"1-URGENT", "2-HIGH", "3-MEDIUM", "4-NOT SPECIFIED", "5-LOW"};
constexpr std::array kSegments = {"AUTOMOBILE", "BUILDING", "FURNITURE", "HOUSEHOLD", "MACHINERY"};
constexpr std::array kShipModes = {"AIR", "FOB", "MAIL", "RAIL", "REG AIR", "SHIP", "TRUCK"};
constexpr std::int64_t kCutoff = 19950617;

std::int64_t yyyymmdd(int days_since_1992) {
    using namespace std::chrono;
    year_month_day d{sys_days{year{1992} / January / 1} + days{days_since_1992}};
    return static_cast<int>(d.year()) * 10000 + static_cast<unsigned>(d.month()) * 100 + static_cast<unsigned>(d.day());
}

double cents(double v) { return std::round(v * 100.0) / 100.0; }

} // namespace

Database generate_tpch_lite(std::size_t lineitem_rows, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto pick = [&](std::uint64_t n) { return rng() % n; };
    auto unit = [&]() { return static_cast<double>(pick(1'000'000)) / 1'000'000.0; };

    const std::size_t rows = std::max<std::size_t>(1, lineitem_rows);
    const std::size_t customers = std::max<std::size_t>(1, rows / 40);
    const std::size_t parts = std::max<std::size_t>(1, rows / 15);

    Relation customer(Schema("customer", {{"c_custkey", ValueType::Integer, false},
                                          {"c_name", ValueType::Text, false},
                                          {"c_nationkey", ValueType::Integer, false},
                                          {"c_mktsegment", ValueType::Text, false},
                                          {"c_acctbal", ValueType::Decimal, false}}));
    for (std::size_t c = 1; c <= customers; ++c) {
        char name[32];
        std::snprintf(name, sizeof name, "Customer#%09zu", c);
        customer.append({Value::integer(static_cast<std::int64_t>(c)), Value::text(name),
                         Value::integer(static_cast<std::int64_t>(pick(25))), Value::text(kSegments[pick(kSegments.size())]),
                         Value::decimal(cents(-999.99 + unit() * 10998.98))});
    }

    Relation orders(Schema("orders", {{"o_orderkey", ValueType::Integer, false},
                                      {"o_custkey", ValueType::Integer, false},
                                      {"o_orderstatus", ValueType::Text, false},
                                      {"o_totalprice", ValueType::Decimal, false},
                                      {"o_orderdate", ValueType::Integer, false},
                                      {"o_orderpriority", ValueType::Text, false}}));
    Relation lineitem(Schema("lineitem", {{"l_orderkey", ValueType::Integer, false},
                                          {"l_linenumber", ValueType::Integer, false},
                                          {"l_partkey", ValueType::Integer, false},
                                          {"l_suppkey", ValueType::Integer, false},
                                          {"l_quantity", ValueType::Decimal, false},
                                          {"l_extendedprice", ValueType::Decimal, false},
                                          {"l_discount", ValueType::Decimal, false},
                                          {"l_tax", ValueType::Decimal, false},
                                          {"l_returnflag", ValueType::Text, false},
                                          {"l_linestatus", ValueType::Text, false},
                                          {"l_shipdate", ValueType::Integer, false},
                                          {"l_commitdate", ValueType::Integer, false},
                                          {"l_receiptdate", ValueType::Integer, false},
                                          {"l_shipmode", ValueType::Text, false}}));

    std::size_t produced = 0;
    for (std::int64_t key = 1; produced < rows; ++key) {
        const double u = unit();
        const auto cust = 1 + static_cast<std::int64_t>(u * u * static_cast<double>(customers));
        const int order_day = static_cast<int>(pick(2400));
        const std::size_t lines = std::min<std::size_t>(1 + pick(7), rows - produced);
        double total = 0.0;
        std::size_t open = 0;
        for (std::size_t ln = 1; ln <= lines; ++ln) {
            const auto part = 1 + static_cast<std::int64_t>(pick(parts));
            const double quantity = static_cast<double>(1 + pick(50));
            const double price = cents(quantity * (900.0 + static_cast<double>(part % 1000)) / 10.0);
            const double discount = static_cast<double>(pick(11)) / 100.0;
            const double tax = static_cast<double>(pick(9)) / 100.0;
            const int ship = order_day + 1 + static_cast<int>(pick(121));
            const int commit = order_day + 30 + static_cast<int>(pick(61));
            const int receipt = ship + 1 + static_cast<int>(pick(30));
            const std::int64_t ship_date = yyyymmdd(ship);
            const std::int64_t receipt_date = yyyymmdd(receipt);
            const char *flag = receipt_date <= kCutoff ? (pick(2) ? "R" : "A") : "N";
            const char *status = ship_date > kCutoff ? "O" : "F";
            if (*status == 'O') ++open;
            total += price * (1.0 - discount) * (1.0 + tax);
            lineitem.append({Value::integer(key), Value::integer(static_cast<std::int64_t>(ln)), Value::integer(part),
                             Value::integer(1 + static_cast<std::int64_t>(pick(100))), Value::decimal(quantity),
                             Value::decimal(price), Value::decimal(discount), Value::decimal(tax), Value::text(flag),
                             Value::text(status), Value::integer(ship_date), Value::integer(yyyymmdd(commit)),
                             Value::integer(receipt_date), Value::text(kShipModes[pick(kShipModes.size())])});
        }
        produced += lines;
        const char *order_status = open == lines ? "O" : open == 0 ? "F" : "P";
        orders.append({Value::integer(key), Value::integer(cust), Value::text(order_status), Value::decimal(cents(total)),
                       Value::integer(yyyymmdd(order_day)), Value::text(kPriorities[pick(kPriorities.size())])});
    }

    Database db;
    db.add_relation(std::move(customer));
    db.add_relation(std::move(orders));
    db.add_relation(std::move(lineitem));
    return db;
}

const std::vector<BenchQuery> &bench_queries() {
    static const std::vector<BenchQuery> queries = {
        {"q1", "SELECT l_returnflag, l_linestatus, sum(l_quantity) AS sum_qty, sum(l_extendedprice) AS sum_base_price, "
               "avg(l_discount) AS avg_disc, count(*) AS count_order FROM lineitem WHERE l_shipdate <= 19980902 "
               "GROUP BY l_returnflag, l_linestatus"},
        {"q4", "SELECT o.o_orderpriority, count(*) AS order_count FROM orders o JOIN lineitem l ON o.o_orderkey = l.l_orderkey "
               "WHERE l.l_commitdate < l.l_receiptdate AND o.o_orderdate >= 19930701 AND o.o_orderdate < 19931001 "
               "GROUP BY o.o_orderpriority"},
        {"q5", "SELECT c.c_nationkey, sum(l.l_extendedprice * (1 - l.l_discount)) AS revenue FROM customer c "
               "JOIN orders o ON c.c_custkey = o.o_custkey JOIN lineitem l ON l.l_orderkey = o.o_orderkey "
               "WHERE o.o_orderdate >= 19940101 AND o.o_orderdate < 19950101 GROUP BY c.c_nationkey"},
        {"q10", "SELECT c.c_custkey, c.c_name, sum(l.l_extendedprice * (1 - l.l_discount)) AS revenue, c.c_acctbal "
                "FROM customer c JOIN orders o ON c.c_custkey = o.o_custkey JOIN lineitem l ON l.l_orderkey = o.o_orderkey "
                "WHERE l.l_returnflag = 'R' GROUP BY c.c_custkey, c.c_name, c.c_acctbal"},
        {"q12", "SELECT l.l_shipmode, count(*) AS line_count FROM orders o JOIN lineitem l ON o.o_orderkey = l.l_orderkey "
                "WHERE (l.l_shipmode = 'MAIL' OR l.l_shipmode = 'SHIP') AND l.l_commitdate < l.l_receiptdate "
                "AND l.l_shipdate < l.l_commitdate GROUP BY l.l_shipmode"},
        {"q17", "SELECT l_partkey, count(*) AS lines, avg(l_quantity) AS avg_qty FROM lineitem GROUP BY l_partkey"},
        {"q18", "SELECT c.c_custkey, c.c_name, sum(l.l_quantity) AS total_qty FROM customer c "
                "JOIN orders o ON c.c_custkey = o.o_custkey JOIN lineitem l ON o.o_orderkey = l.l_orderkey "
                "GROUP BY c.c_custkey, c.c_name"},
    };
    return queries;
}

std::int64_t bench_threshold(std::size_t lineitem_rows) {
    return std::max<std::int64_t>(2, static_cast<std::int64_t>(1500.0 * static_cast<double>(lineitem_rows) / 6'000'000.0));
}

std::string bench_policy_text(std::int64_t threshold) {
    return "POLICY OVER lineitem CONSTRAINT count(*) >= " + std::to_string(threshold) + " ON FAIL KILL ROW";
}

} // namespace dfc
