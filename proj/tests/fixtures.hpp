#pragma once

#include "dfc/relation.hpp"

#include <initializer_list>
#include <string>
#include <vector>

namespace dfc::testing {

inline Value I(std::int64_t v) { return Value::integer(v); }
inline Value D(double v) { return Value::decimal(v); }
inline Value T(std::string v) { return Value::text(std::move(v)); }
inline Value B(bool v) { return Value::boolean(v); }
inline Value N() { return Value::null(); }

inline std::uint32_t add_table(Database &db, const std::string &name, std::vector<ColumnDef> cols,
                               std::initializer_list<Row> rows) {
    Relation rel(Schema(name, std::move(cols)));
    for (const auto &r : rows) rel.append(r);
    return db.add_relation(std::move(rel));
}

/// Students / scores instance used by the disaggregation examples.
inline Database school_db() {
    Database db;
    add_table(db, "students",
              {{"sid", ValueType::Integer, false},
               {"name", ValueType::Text, false},
               {"school", ValueType::Text, false},
               {"ethnicity", ValueType::Text, false},
               {"year", ValueType::Integer, false}},
              {{I(1), T("ann"), T("north"), T("asian"), I(2024)},
               {I(2), T("bob"), T("north"), T("asian"), I(2024)},
               {I(3), T("cat"), T("south"), T("asian"), I(2024)},
               {I(4), T("dan"), T("south"), T("pacific"), I(2024)},
               {I(5), T("eve"), T("south"), T("asian"), I(2023)}});
    add_table(db, "s", {{"sid", ValueType::Integer, false}, {"score", ValueType::Decimal, true}},
              {{I(1), D(90)}, {I(1), D(70)}, {I(2), D(80)}, {I(3), D(60)}, {I(4), D(75)}, {I(5), N()}});
    return db;
}

/// The two-relation example: A(x) has three rows, B(x, v) two; both B rows join a1
/// and nothing else joins.
inline Database ab_db() {
    Database db;
    add_table(db, "a", {{"x", ValueType::Integer, false}}, {{I(1)}, {I(2)}, {I(3)}});
    add_table(db, "b", {{"x", ValueType::Integer, false}, {"v", ValueType::Integer, false}}, {{I(1), I(10)}, {I(1), I(20)}});
    return db;
}

/// Schema the policy-language tests validate against.
inline Database policy_catalog() {
    Database db = school_db();
    add_table(db, "constituents", {{"id", ValueType::Integer, false}, {"district", ValueType::Text, false}}, {});
    add_table(db, "users", {{"id", ValueType::Integer, false}, {"role", ValueType::Text, false}, {"status", ValueType::Text, false}},
              {});
    add_table(db, "t", {{"x", ValueType::Integer, false}, {"sanitized", ValueType::Boolean, false}}, {});
    return db;
}

} // namespace dfc::testing
