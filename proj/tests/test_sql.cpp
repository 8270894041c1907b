#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "dfc/errors.hpp"
#include "dfc/sql.hpp"
#include "fixtures.hpp"

using namespace dfc;
using namespace dfc::testing;

namespace {

std::string shape(const Plan &p) {
    std::string out(plan_kind_name(p.kind));
    if (p.kind == PlanKind::Scan) out += " " + p.relation;
    if (p.inputs.empty()) return out;
    out += "(";
    for (std::size_t i = 0; i < p.inputs.size(); ++i) out += (i ? ", " : "") + shape(p.inputs[i]);
    return out + ")";
}

Plan bound(const Database &db, const std::string &sql) { return parse_and_bind(sql, db).plan; }

void check_fixpoint(const Database &db, const std::string &sql) {
    CAPTURE(sql);
    Plan first = bound(db, sql);
    std::string text = render_sql(first);
    CAPTURE(text);
    Plan second = bound(db, text);
    CHECK(second == first);
    CHECK(render_sql(second) == text);
}

} // namespace

TEST_CASE("school query parses to aggregate over join with filtered students") {
    Database db = school_db();
    Plan p = bound(db, "SELECT school, avg(score) FROM students JOIN S ON students.sid=S.sid WHERE year=2024 GROUP BY school");
    CHECK(shape(p) == "Project(Aggregate(Join(Filter(Scan students), Scan s)))");
    REQUIRE(p.output.size() == 2);
    CHECK(p.output[0].name == "school");
    CHECK(p.output[1].name == "avg");
    CHECK(p.output[1].type == ValueType::Decimal);
}

TEST_CASE("update parses to an update root with one assignment") {
    Database db;
    add_table(db, "users", {{"id", ValueType::Integer, false}, {"status", ValueType::Text, false}}, {});
    Plan p = bound(db, "UPDATE users SET status='Verified' WHERE id=4");
    CHECK(p.kind == PlanKind::Update);
    REQUIRE(p.assignments.size() == 1);
    CHECK(p.assignments[0].column == "status");
    CHECK(referenced_relations(p) == std::set<std::string>{"users"});
}

TEST_CASE("fragment boundaries") {
    CHECK_THROWS_WITH_AS(parse_sql("SELECT 1"), doctest::Contains("FROM clause required"), SyntaxError);
    CHECK_THROWS_WITH_AS(parse_sql("SELECT x FROM t ORDER BY x"), doctest::Contains("ORDER BY"), UnsupportedError);
    CHECK_THROWS_WITH_AS(parse_sql("SELECT x FROM t GROUP BY x HAVING count(*) > 1"), doctest::Contains("HAVING"),
                         UnsupportedError);
    CHECK_THROWS_WITH_AS(parse_sql("SELECT x FROM t LEFT JOIN u ON t.x = u.x"), doctest::Contains("outer join"),
                         UnsupportedError);
    CHECK_THROWS_WITH_AS(parse_sql("SELECT x FROM t UNION SELECT x FROM u"), doctest::Contains("set operation"),
                         UnsupportedError);
    CHECK_THROWS_WITH_AS(parse_sql("SELECT x FROM (SELECT x FROM t) AS q"), doctest::Contains("subquery"),
                         UnsupportedError);
    CHECK_THROWS_WITH_AS(parse_sql("SELECT x FROM t WHERE x IN (1, 2)"), doctest::Contains("IN"), UnsupportedError);
    CHECK_THROWS_AS(parse_sql("SELECT x FROM t WHERE"), SyntaxError);
    CHECK_THROWS_AS(parse_sql("SELECT x FROM t GROUP BY x + 1"), SyntaxError);
}

TEST_CASE("syntax errors carry positions") {
    try {
        parse_sql("SELECT a\nFROM t WHERE ) ");
        FAIL("expected error");
    } catch (const SyntaxError &e) {
        CHECK(e.line() == 2);
        CHECK(e.column() == 14);
    }
}

TEST_CASE("validation") {
    Database db = school_db();
    CHECK_THROWS_AS(bound(db, "SELECT nope FROM students"), ValidationError);
    CHECK_THROWS_AS(bound(db, "SELECT sid FROM students JOIN s ON students.sid = s.sid"), ValidationError);
    CHECK_THROWS_AS(bound(db, "SELECT name FROM students WHERE year"), ValidationError);
    CHECK_THROWS_AS(bound(db, "SELECT name + 1 FROM students"), ValidationError);
    CHECK_THROWS_AS(bound(db, "SELECT name, count(*) FROM students GROUP BY school"), ValidationError);
    CHECK_THROWS_AS(bound(db, "SELECT * FROM students GROUP BY school"), ValidationError);
    CHECK_THROWS_AS(bound(db, "SELECT sid FROM students, students"), ValidationError);
    CHECK_THROWS_AS(bound(db, "UPDATE students SET year = 'x'"), ValidationError);
    CHECK_THROWS_AS(parse_sql("SELECT count(sum(sid)) FROM students"), ValidationError);
}

TEST_CASE("referenced relations is a set") {
    Database db = school_db();
    Plan p = bound(db, "SELECT a.sid FROM students a JOIN students b ON a.sid = b.sid");
    CHECK(referenced_relations(p) == std::set<std::string>{"students"});
    CHECK(referenced_relations(bound(db, "SELECT school FROM students JOIN s ON students.sid = s.sid")) ==
          std::set<std::string>{"s", "students"});
}

TEST_CASE("star expansion hides tuple ids") {
    Database db = school_db();
    Plan p = bound(db, "SELECT * FROM s");
    CHECK(p.output.size() == 2);
    Plan q = bound(db, "SELECT s.*, s.__tid FROM s");
    CHECK(q.output.size() == 3);
}

TEST_CASE("where conjuncts move to scans and joins") {
    Database db = school_db();
    Plan p = bound(db, "SELECT name FROM students, s WHERE students.sid = s.sid AND s.score > 50 AND year = 2024");
    CHECK(shape(p) == "Project(Join(Filter(Scan students), Filter(Scan s)))");
    CHECK(render_sql(p) ==
          "SELECT students.name FROM students JOIN s ON students.sid = s.sid WHERE students.year = 2024 AND s.score > 50");
}

TEST_CASE("parse render parse fixpoint") {
    Database db = school_db();
    for (const char *sql : {
             "SELECT school, avg(score) FROM students JOIN S ON students.sid=S.sid WHERE year=2024 GROUP BY school",
             "SELECT * FROM students",
             "SELECT DISTINCT school FROM students",
             "SELECT DISTINCT school, count(*) AS n FROM students GROUP BY school",
             "SELECT count(*) FROM students",
             "SELECT count(DISTINCT school), sum(score) * 2 AS twice FROM students x JOIN s y ON x.sid = y.sid",
             "SELECT name, CASE WHEN year > 2023 THEN 'new' ELSE 'old' END AS age FROM students WHERE NOT (year = 1 OR sid < 0)",
             "SELECT a.name, b.name FROM students a, students b WHERE a.sid < b.sid AND a.school = b.school",
             "SELECT name FROM students WHERE (year = 2024 OR year = 2023) AND sid - 1 >= -3",
             "SELECT min(score), max(score), bool_and(score > 10), bool_or(score IS NULL) FROM s",
             "SELECT sid, score / 2 FROM s WHERE score IS NOT NULL",
             "SELECT students.school, count(s.score) FROM students CROSS JOIN s WHERE students.sid = s.sid GROUP BY students.school",
             "UPDATE students SET year = year + 1, school = 'east' WHERE sid = 4",
             "UPDATE students AS st SET year = 2025",
             "SELECT name FROM students WHERE current_user = name",
         }) {
        check_fixpoint(db, sql);
    }
}

TEST_CASE("internal dialect round trip executes the same shapes") {
    Database db = school_db();
    SqlOptions internal{true};
    auto stmt = parse_and_bind(
        "SELECT q.school, q.n FROM (SELECT school, count(*) AS n FROM students GROUP BY school) AS q WHERE q.n > 1", db,
        {}, internal);
    std::string text = render_sql(stmt.plan);
    auto again = parse_and_bind(text, db, {}, internal);
    CHECK(render_sql(again.plan) == text);
    auto mark = parse_and_bind("SELECT name, m FROM students MARK JOIN s ON students.sid = s.sid AS m", db, {}, internal);
    CHECK(mark.plan.output.back().type == ValueType::Boolean);
    CHECK_THROWS_AS(parse_sql("SELECT name FROM students MARK JOIN s ON students.sid = s.sid AS m"), UnsupportedError);
}
