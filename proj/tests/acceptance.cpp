#include "casegen.hpp"
#include "corpus.hpp"
#include "fixtures.hpp"

#include "dfc/bench.hpp"
#include "dfc/oracle.hpp"
#include "dfc/tpch.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>

using namespace dfc;
using namespace dfc::testing;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
    bool pass = true;
    std::string summary;
    std::vector<std::string> notes;

    void fail(std::string note) {
        pass = false;
        notes.push_back(std::move(note));
    }
    void require(bool ok, const std::string &what) {
        if (!ok) fail(what);
    }
};

double seconds_since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

std::vector<PreparedPolicy> prepare_texts(const Database &db, const std::vector<std::string> &texts) {
    PolicySet set;
    std::vector<PreparedPolicy> out;
    for (const auto &t : texts) out.push_back(prepare_policy(set.add(parse_policy(t)), db));
    return out;
}

// 1 -----------------------------------------------------------------------------

Verdict provenance_example() {
    Verdict v;
    auto start = Clock::now();
    Database db = ab_db();
    auto stmt = parse_and_bind("SELECT a.x, count(*) FROM a JOIN b ON a.x = b.x GROUP BY a.x", db);
    AnnotatedResult r = execute_with_provenance(stmt.plan, db, {});
    double elapsed = seconds_since(start);
    v.require(r.rows.size() == 1, "expected exactly one output row, got " + std::to_string(r.rows.size()));
    std::string prov = r.rows.empty() ? "" : r.rows[0].prov.to_string(db);
    v.require(prov == "a1*b1 + a1*b2", "prov(o1) = " + prov);
    v.require(elapsed < 1.0, "took " + std::to_string(elapsed) + " s");
    v.summary = "prov(o1) = " + prov;
    return v;
}

// 2 -----------------------------------------------------------------------------

struct PlanRun {
    std::map<std::string, std::string> prov;
    std::string kind;
    std::string killer;
    std::vector<std::string> rows;
    std::vector<std::string> dropped;
};

PlanRun run_plan(const Database &db, const std::string &sql, std::span<const PreparedPolicy> policies) {
    PlanRun out;
    QueryStatement stmt = parse_and_bind(sql, db, {}, SqlOptions{true});
    for (const auto &row : execute_with_provenance(stmt.plan, db, {}).rows)
        out.prov[render_row(row.values)] = row.prov.to_string(db);
    EnforcementOutcome o = enforce_select(stmt, policies, db);
    out.kind = outcome_kind_name(o.kind);
    if (o.killed) out.killer = o.killed->policy;
    out.rows = sorted_rows(o.rows);
    for (const auto &d : o.dropped) out.dropped.push_back(render_row(d.row));
    std::sort(out.dropped.begin(), out.dropped.end());
    return out;
}

Verdict pushdown_invariance(std::size_t instances) {
    Verdict v;
    std::mt19937_64 rng(7);
    auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
    const std::string joined = "SELECT a.x, count(*) AS n FROM a JOIN b ON a.x = b.x GROUP BY a.x";
    const std::string pushed = "SELECT a.x, q.n FROM a JOIN (SELECT x, count(*) AS n FROM b GROUP BY x) AS q ON a.x = q.x";
    std::size_t mismatches = 0, rows = 0, interventions = 0;
    for (std::size_t i = 0; i < instances; ++i) {
        Database db;
        std::vector<std::int64_t> keys = {1, 2, 3, 4, 5, 6, 7, 8};
        std::shuffle(keys.begin(), keys.end(), rng);
        Relation a(Schema("a", {{"x", ValueType::Integer, false}}));
        for (std::size_t j = 0, n = 1 + pick(6); j < n; ++j) a.append({I(keys[j])});
        db.add_relation(std::move(a));
        Relation b(Schema("b", {{"x", ValueType::Integer, false}, {"v", ValueType::Integer, false}}));
        for (std::size_t j = 0, m = pick(10); j < m; ++j)
            b.append({I(static_cast<std::int64_t>(1 + pick(8))), I(static_cast<std::int64_t>(pick(4)))});
        db.add_relation(std::move(b));

        std::vector<std::string> texts;
        switch (pick(4)) {
        case 0: texts.push_back("POLICY OVER b CONSTRAINT count(*) >= " + std::to_string(1 + pick(3)) + " ON FAIL KILL ROW"); break;
        case 1:
            texts.push_back("POLICY OVER b AGG count(distinct v) AS d CONSTRAINT d <= " + std::to_string(1 + pick(3)) +
                            " ON FAIL KILL QUERY");
            break;
        case 2: texts.push_back("POLICY OVER a CONSTRAINT max(x) < " + std::to_string(2 + pick(7)) + " ON FAIL KILL ROW"); break;
        default: texts.push_back("POLICY OVER b CONSTRAINT sum(v) < " + std::to_string(1 + pick(6)) + " ON FAIL KILL ROW"); break;
        }
        auto policies = prepare_texts(db, texts);
        PlanRun p1 = run_plan(db, joined, policies);
        PlanRun p2 = run_plan(db, pushed, policies);
        rows += p1.prov.size();
        interventions += p1.kind == "query_killed" || !p1.dropped.empty();
        bool same = p1.prov == p2.prov && p1.kind == p2.kind && p1.killer == p2.killer && p1.rows == p2.rows &&
                    p1.dropped == p2.dropped;
        if (!same) {
            ++mismatches;
            if (v.notes.size() < 3) v.fail("instance " + std::to_string(i) + " differs under " + texts[0]);
        }
    }
    v.require(mismatches == 0, std::to_string(mismatches) + " mismatching instances");
    v.summary = std::to_string(instances) + " instances, " + std::to_string(rows) + " output rows, " +
                std::to_string(interventions) + " with policy interventions, " + std::to_string(mismatches) + " mismatches";
    return v;
}

// 3 -----------------------------------------------------------------------------

Verdict oracle_rewrite_equivalence(std::size_t cases) {
    Verdict v;
    auto start = Clock::now();
    CaseGenerator gen(20240501);
    std::map<Family, std::array<std::size_t, 3>> tally;
    std::size_t mismatches = 0, fallbacks = 0;
    for (std::size_t i = 0; i < cases; ++i) {
        Family f = kFamilies[i % kFamilies.size()];
        GeneratedCase c = gen.next(f);
        CaseVerdict r;
        try {
            r = check_case(c);
        } catch (const std::exception &e) {
            r.agree = false;
            r.detail = std::string("error: ") + e.what() + "\n" + c.describe();
        }
        auto &t = tally[f];
        ++t[0];
        t[1] += r.intervened;
        if (r.fell_back) {
            ++t[2];
            ++fallbacks;
            if (v.notes.size() < 3) v.fail("case " + std::to_string(i) + " not rewritten: " + r.detail);
        }
        if (!r.agree) {
            ++mismatches;
            if (v.notes.size() < 3) v.fail("case " + std::to_string(i) + ": " + r.detail);
        }
    }
    double elapsed = seconds_since(start);
    v.require(mismatches == 0, std::to_string(mismatches) + " mismatches");
    v.require(fallbacks == 0, std::to_string(fallbacks) + " cases fell back to the oracle");
    v.require(elapsed < 120.0, "took " + std::to_string(elapsed) + " s");
    for (auto f : kFamilies) {
        auto &t = tally[f];
        v.require(t[1] > 0, std::string(family_name(f)) + " never intervened");
        v.notes.push_back(std::string(family_name(f)) + ": " + std::to_string(t[0]) + " cases, " + std::to_string(t[1]) +
                          " with interventions");
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f s", elapsed);
    v.summary = std::to_string(cases) + " cases, " + std::to_string(mismatches) + " mismatches, " + std::to_string(fallbacks) +
                " fallbacks, " + buf;
    return v;
}

// 4 -----------------------------------------------------------------------------

const char *kDisaggregationListing = R"(
  POLICY OVER students
  AGG count(distinct ethnicity) as cnt
  CONSTRAINT cnt = 1
  ON FAIL KILL QUERY
)";

const char *kAnonymityListing = R"(
  POLICY OVER constituents
  DIMENSION users
  CONSTRAINT users.id = current_user and
    not (user.role = 'Public' and count(distinct id) < 3)
  ON FAIL KILL ROW )";

const char *kTransitionListing = R"(
  POLICY UPDATE users as newu
  DIMENSION users as oldu
  AGG bool_and(oldu.status = 'Created') as allc
  CONSTRAINT newu.status = 'Verified' and allc
  ON FAIL KILL ROW
)";

const char *kSanitizationListing = R"(
  POLICY OVER T
  CONSTRAINT bool_and(sanitized)
  ON FAIL KILL ROW
)";

constexpr Mode kEnforcing[] = {Mode::Oracle, Mode::Rewrite, Mode::Capture};

std::string tag(Mode m, const std::string &what) { return std::string(mode_name(m)) + ": " + what; }

void disaggregation_listing(Verdict &v) {
    Database db = school_db();
    auto policies = prepare_texts(db, {kDisaggregationListing});
    const std::string mixed =
        "SELECT school, avg(score) FROM students JOIN S ON students.sid=S.sid WHERE year=2024 GROUP BY school";
    const std::string single =
        "SELECT school, avg(score) FROM students JOIN S ON students.sid=S.sid WHERE school='north' GROUP BY school";
    for (Mode m : kEnforcing) {
        StatementOutcome killed = run_statement(parse_and_bind(mixed, db), m, policies, db);
        v.require(killed.outcome.kind == EnforcementOutcome::Kind::QueryKilled, tag(m, "mixed-ethnicity aggregate not killed"));
        StatementOutcome ok = run_statement(parse_and_bind(single, db), m, policies, db);
        v.require(ok.outcome.kind == EnforcementOutcome::Kind::Completed && ok.outcome.rows.size() == 1,
                  tag(m, "single-ethnicity aggregate did not complete"));
        v.require(!killed.fell_back && !ok.fell_back, tag(m, "fell back"));
    }
}

void anonymity_listing(Verdict &v) {
    struct Constituent {
        std::int64_t id;
        std::string district;
    };
    const std::vector<Constituent> people = {{1, "d1"}, {2, "d1"}, {3, "d2"}, {4, "d2"}, {5, "d2"}, {6, "d3"}, {6, "d3"}};
    Database db;
    Relation c(Schema("constituents", {{"id", ValueType::Integer, false}, {"district", ValueType::Text, false}}));
    for (const auto &p : people) c.append({I(p.id), T(p.district)});
    db.add_relation(std::move(c));
    add_table(db, "users", {{"id", ValueType::Integer, false}, {"role", ValueType::Text, false}},
              {{I(7), T("Public")}, {I(8), T("Analyst")}});
    auto policies = prepare_texts(db, {kAnonymityListing});
    const std::string sql = "SELECT district, count(*) FROM constituents GROUP BY district";

    std::map<std::string, std::pair<std::set<std::int64_t>, std::int64_t>> groups;
    for (const auto &p : people) {
        groups[p.district].first.insert(p.id);
        ++groups[p.district].second;
    }
    for (std::int64_t user : {7, 8}) {
        std::vector<std::string> expected;
        for (const auto &[district, g] : groups) {
            if (user == 7 && g.first.size() < 3) continue;
            expected.push_back(render_row({T(district), I(g.second)}));
        }
        std::sort(expected.begin(), expected.end());
        for (Mode m : kEnforcing) {
            StatementOutcome o = run_statement(parse_and_bind(sql, db, Session{I(user)}), m, policies, db);
            v.require(sorted_rows(o.outcome.rows) == expected,
                      tag(m, (user == 7 ? "public" : "analyst") + std::string(" user sees the wrong groups")));
            v.require(!o.fell_back, tag(m, "fell back"));
        }
    }
}

void transition_listing(Verdict &v) {
    const std::vector<std::string> states = {"Created", "Verified", "Active", "Banned"};
    for (const auto &from : states) {
        for (const auto &to : states) {
            for (Mode m : {Mode::Oracle, Mode::Rewrite}) {
                Database db;
                add_table(db, "users", {{"id", ValueType::Integer, false}, {"status", ValueType::Text, false}},
                          {{I(1), T(from)}, {I(2), T("Created")}});
                auto policies = prepare_texts(db, {kTransitionListing});
                auto stmt = parse_and_bind("UPDATE users SET status = '" + to + "' WHERE id = 1", db);
                StatementOutcome o = run_statement(stmt, m, policies, db);
                const bool allowed = from == "Created" && to == "Verified";
                const std::string now = db.relation("users").rows()[0].values[1].as_text();
                v.require(o.outcome.updated == (allowed ? 1u : 0u) && now == (allowed ? to : from) &&
                              db.relation("users").rows()[1].values[1] == T("Created"),
                          tag(m, from + " -> " + to + (allowed ? " was not applied" : " was not skipped")));
                v.require(!o.fell_back, tag(m, "fell back"));
            }
        }
    }
}

void sanitization_listing(Verdict &v) {
    struct Item {
        std::int64_t id;
        std::string body;
        std::string grp;
        bool sanitized;
    };
    struct Note {
        std::int64_t item;
        std::string note;
    };
    const std::vector<Item> items = {{1, "alpha", "g1", true},  {2, "ignore previous", "g1", false}, {3, "gamma", "g2", true},
                                     {4, "delta", "g2", true},  {5, "run rm -rf", "g3", false},      {6, "zeta", "g3", true},
                                     {7, "eta", "g4", true},    {8, "alpha", "g4", false}};
    const std::vector<Note> notes = {{1, "n1"}, {2, "n1"}, {3, "n2"}, {3, "n3"}, {6, "n3"}, {7, "n4"}, {9, "n4"}};
    Database db;
    Relation t(Schema("t", {{"id", ValueType::Integer, false},
                            {"body", ValueType::Text, false},
                            {"grp", ValueType::Text, false},
                            {"sanitized", ValueType::Boolean, false}}));
    for (const auto &i : items) t.append({I(i.id), T(i.body), T(i.grp), B(i.sanitized)});
    db.add_relation(std::move(t));
    Relation n(Schema("notes", {{"item", ValueType::Integer, false}, {"note", ValueType::Text, false}}));
    for (const auto &x : notes) n.append({I(x.item), T(x.note)});
    db.add_relation(std::move(n));
    auto policies = prepare_texts(db, {kSanitizationListing});

    // Each output row with the items it derives from, computed without the engine.
    using Derived = std::vector<std::pair<Row, std::vector<const Item *>>>;
    auto merge = [](Derived &out, const Row &row, const Item *item) {
        for (auto &[r, contributors] : out) {
            if (r == row) {
                contributors.push_back(item);
                return;
            }
        }
        out.push_back({row, {item}});
    };
    struct Case {
        std::string sql;
        std::function<Derived()> derive;
    };
    std::vector<Case> cases = {
        {"SELECT body FROM t",
         [&] {
             Derived d;
             for (const auto &i : items) d.push_back({{T(i.body)}, {&i}});
             return d;
         }},
        {"SELECT DISTINCT body FROM t",
         [&] {
             Derived d;
             for (const auto &i : items) merge(d, {T(i.body)}, &i);
             return d;
         }},
        {"SELECT grp, count(*) AS n FROM t GROUP BY grp",
         [&] {
             Derived d;
             for (const auto &i : items) merge(d, {T(i.grp)}, &i);
             for (auto &[row, c] : d) row.push_back(I(static_cast<std::int64_t>(c.size())));
             return d;
         }},
        {"SELECT t.body, notes.note FROM t JOIN notes ON t.id = notes.item",
         [&] {
             Derived d;
             for (const auto &i : items)
                 for (const auto &x : notes)
                     if (x.item == i.id) d.push_back({{T(i.body), T(x.note)}, {&i}});
             return d;
         }},
        {"SELECT notes.note, count(*) AS n FROM t JOIN notes ON t.id = notes.item GROUP BY notes.note",
         [&] {
             Derived d;
             for (const auto &x : notes)
                 for (const auto &i : items)
                     if (x.item == i.id) merge(d, {T(x.note)}, &i);
             for (auto &[row, c] : d) row.push_back(I(static_cast<std::int64_t>(c.size())));
             return d;
         }},
    };
    for (const auto &c : cases) {
        std::vector<Row> expected;
        for (const auto &[row, contributors] : c.derive()) {
            if (std::all_of(contributors.begin(), contributors.end(), [](const Item *i) { return i->sanitized; }))
                expected.push_back(row);
        }
        for (Mode m : kEnforcing) {
            StatementOutcome o = run_statement(parse_and_bind(c.sql, db), m, policies, db);
            v.require(sorted_rows(o.outcome.rows) == sorted_rows(expected), tag(m, "wrong rows for " + c.sql));
            v.require(!o.fell_back, tag(m, "fell back on " + c.sql));
        }
    }
}

Verdict example_policies() {
    Verdict v;
    disaggregation_listing(v);
    anonymity_listing(v);
    transition_listing(v);
    sanitization_listing(v);
    v.summary = "disaggregation, k-anonymity, state transition and sanitization listings under oracle, rewrite and capture";
    return v;
}

// 5 -----------------------------------------------------------------------------

Verdict benchmark(std::size_t rows, std::size_t reps) {
    Verdict v;
    auto start = Clock::now();
    Database db = generate_tpch_lite(rows, 42);
    std::int64_t k = bench_threshold(rows);
    auto policies = prepare_texts(db, {"NAME contributors " + bench_policy_text(k)});
    BenchConfig config;
    config.repetitions = reps;
    BenchReport report = run_bench(db, policies, bench_queries(), config);
    std::size_t groups = 0, surviving = 0;
    double worst_overhead = 0.0, worst_capture = 1e300;
    for (const auto &q : report.queries) {
        groups += q.groups;
        surviving += q.surviving;
        const ModeRun &rewrite = q.run(Mode::Rewrite);
        const ModeRun &capture = q.run(Mode::Capture);
        worst_overhead = std::max(worst_overhead, q.overhead());
        worst_capture = std::min(worst_capture, q.capture_ratio());
        char line[200];
        std::snprintf(line, sizeof line, "%-4s off %7.2f ms  rewrite %7.2f ms (%.2fx)  capture %8.2f ms (%.1fx)  groups %zu/%zu",
                      q.name.c_str(), q.run(Mode::Off).median_ms, rewrite.median_ms, q.overhead(), capture.median_ms,
                      q.capture_ratio(), q.surviving, q.groups);
        v.notes.push_back(line);
        v.require(q.digests_equal, q.name + ": digests differ");
        v.require(q.overhead() <= 1.5, q.name + ": rewrite overhead above 1.5x");
        v.require(q.capture_ratio() >= 5.0, q.name + ": capture less than 5x slower than rewrite");
        v.require(capture.stats.annotations_created > 0, q.name + ": capture created no annotations");
        v.require(rewrite.stats.annotations_created == 0, q.name + ": rewrite created annotations");
        v.require(!rewrite.fell_back, q.name + ": rewrite fell back to the oracle");
    }
    double share = groups ? static_cast<double>(surviving) / static_cast<double>(groups) : 0.0;
    v.require(share >= 0.2 && share <= 0.8, "surviving group share outside 20-80%");
    double elapsed = seconds_since(start);
    v.require(elapsed < 300.0, "took " + std::to_string(elapsed) + " s");
    char buf[240];
    std::snprintf(buf, sizeof buf,
                  "%zu lineitem rows, K=%lld, %zu queries, max overhead %.2fx, min capture ratio %.1fx, %.0f%% of groups "
                  "survive, %.1f s",
                  rows, static_cast<long long>(k), report.queries.size(), worst_overhead, worst_capture, 100.0 * share, elapsed);
    v.summary = buf;
    return v;
}

// 6 -----------------------------------------------------------------------------

Verdict policy_corpus(const std::string &path) {
    Verdict v;
    Database db = policy_catalog();
    auto entries = load_corpus(path);
    std::size_t valid = 0;
    for (const auto &e : entries) {
        std::string actual = corpus_outcome(e.text, db);
        v.require(corpus_matches(e.expect, actual), e.name + ": got " + actual);
        if (e.expect.rfind("ok: ", 0) != 0) continue;
        ++valid;
        try {
            Policy n = normalize_policy(parse_policy(e.text));
            v.require(normalize_policy(n) == n, e.name + ": normalize_policy is not idempotent");
        } catch (const std::exception &ex) {
            v.fail(e.name + ": " + ex.what());
        }
    }
    v.require(entries.size() >= 20, "corpus has fewer than 20 entries");
    v.summary = std::to_string(entries.size()) + " policies (" + std::to_string(valid) + " valid, " +
                std::to_string(entries.size() - valid) + " invalid), normalization idempotent";
    return v;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Acceptance checks"};
    std::size_t bench_rows = 60000, reps = 5, cases = 1000;
    std::string corpus = std::string(DFC_TEST_DATA_DIR) + "/policy_corpus.txt";
    std::vector<int> only;
    app.add_option("--bench-rows", bench_rows)->capture_default_str();
    app.add_option("--reps", reps)->capture_default_str();
    app.add_option("--cases", cases)->capture_default_str();
    app.add_option("--corpus", corpus)->capture_default_str();
    app.add_option("--only", only, "Run only these criteria");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
        {"provenance of the join-aggregate example", provenance_example},
        {"standard form survives aggregate pushdown", [] { return pushdown_invariance(100); }},
        {"oracle and rewrite agree on randomized cases", [&] { return oracle_rewrite_equivalence(cases); }},
        {"example policies behave as documented", example_policies},
        {"benchmark: equal digests, low rewrite overhead, capture much slower", [&] { return benchmark(bench_rows, reps); }},
        {"policy corpus and normalization idempotence", [&] { return policy_corpus(corpus); }},
    };
    bool all = true;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        int number = static_cast<int>(i + 1);
        if (!only.empty() && std::find(only.begin(), only.end(), number) == only.end()) continue;
        auto start = Clock::now();
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception &e) {
            v.fail(std::string("error: ") + e.what());
        }
        all = all && v.pass;
        std::printf("%s %d. %s: %s (%.2f s)\n", v.pass ? "PASS" : "FAIL", number, criteria[i].first.c_str(), v.summary.c_str(),
                    seconds_since(start));
        for (const auto &note : v.notes) std::printf("    %s\n", note.c_str());
        std::fflush(stdout);
    }
    return all ? 0 : 1;
}
