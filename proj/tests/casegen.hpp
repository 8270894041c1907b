#pragma once

#include "dfc/enforce.hpp"
#include "dfc/errors.hpp"
#include "dfc/sql.hpp"
#include "fixtures.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <random>
#include <sstream>

namespace dfc::testing {

enum class Family { Disaggregation, Anonymity, Transition, Sanitization };

inline constexpr std::array<Family, 4> kFamilies = {Family::Disaggregation, Family::Anonymity, Family::Transition,
                                                    Family::Sanitization};

inline std::string_view family_name(Family f) {
    switch (f) {
    case Family::Disaggregation: return "disaggregation";
    case Family::Anonymity: return "k-anonymity";
    case Family::Transition: return "transition";
    case Family::Sanitization: return "sanitization";
    }
    return "?";
}

struct GeneratedCase {
    Family family = Family::Disaggregation;
    Database db;
    std::vector<std::string> policies;
    std::string sql;
    Session session;

    std::string describe() const {
        std::ostringstream out;
        out << family_name(family) << "\n";
        for (const auto &p : policies) out << "  " << p << "\n";
        out << "  " << sql << "\n";
        if (session.current_user) out << "  current_user=" << session.current_user->to_string() << "\n";
        for (const auto &rel : db.relations()) {
            out << "  " << rel.name() << ":";
            for (const auto &row : rel.rows()) out << " (" << render_row(row.values) << ")";
            out << "\n";
        }
        return out.str();
    }
};

/// Random schemas, instances, statements and policies for one policy family at a time.
/// The target relation plays fixed roles (id, group, attribute, value, join key, flag,
/// state) under randomly drawn names and column order.
class CaseGenerator {
public:
    explicit CaseGenerator(std::uint64_t seed) : rng_(seed) {}

    GeneratedCase next(Family family) {
        GeneratedCase c;
        c.family = family;
        draw_schema();
        fill(c.db);
        switch (family) {
        case Family::Disaggregation: disaggregation(c); break;
        case Family::Anonymity: anonymity(c); break;
        case Family::Transition: transition(c); break;
        case Family::Sanitization: sanitization(c); break;
        }
        return c;
    }

private:
    enum Role { Id, Group, Attr, Val, Key, Flag, State, RoleCount };

    std::size_t pick(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }
    bool chance(std::size_t percent) { return pick(100) < percent; }
    template <class T> const T &one_of(const std::vector<T> &v) { return v[pick(v.size())]; }
    std::string q(const std::string &s) { return "'" + s + "'"; }

    const std::string &col(Role r) const { return names_[r]; }
    std::string tcol(Role r) const { return talias_.empty() ? col(r) : talias_ + "." + col(r); }

    void draw_schema() {
        static const std::vector<std::vector<std::string>> pools = {
            {"id", "sid", "uid"},          {"grp", "region", "school"}, {"attr", "ethnicity", "kind"},
            {"val", "amount", "score"},    {"k", "ref", "link"},        {"clean", "sanitized", "ok"},
            {"status", "state", "phase"}};
        for (std::size_t r = 0; r < RoleCount; ++r) names_[r] = one_of(pools[r]);
        target_ = one_of(std::vector<std::string>{"items", "students", "constituents", "docs", "t"});
        other_ = one_of(std::vector<std::string>{"links", "scores", "notes"});
        catalog_ = one_of(std::vector<std::string>{"users", "accounts"});
        order_.resize(RoleCount);
        for (std::size_t i = 0; i < RoleCount; ++i) order_[i] = i;
        std::shuffle(order_.begin(), order_.end(), rng_);
        talias_.clear();
    }

    Value maybe_null(Value v, std::size_t percent) { return chance(percent) ? Value::null() : v; }

    void fill(Database &db) {
        const std::vector<std::string> groups = {"g0", "g1", "g2"};
        const std::vector<std::string> attrs = {"x", "y", "z"};
        std::vector<ColumnDef> cols(RoleCount);
        const ValueType types[RoleCount] = {ValueType::Integer, ValueType::Text,    ValueType::Text,
                                            ValueType::Integer, ValueType::Integer, ValueType::Boolean,
                                            ValueType::Text};
        for (std::size_t i = 0; i < RoleCount; ++i) {
            std::size_t r = order_[i];
            cols[i] = {names_[r], types[r], r != Id && r != State};
        }
        Relation target(Schema(target_, cols));
        std::size_t n = pick(13);
        for (std::size_t i = 0; i < n; ++i) {
            Row role(RoleCount);
            role[Id] = Value::integer(chance(80) ? static_cast<std::int64_t>(i + 1) : static_cast<std::int64_t>(1 + pick(n)));
            role[Group] = maybe_null(Value::text(one_of(groups)), 8);
            role[Attr] = maybe_null(Value::text(chance(60) ? attrs[0] : one_of(attrs)), 12);
            role[Val] = maybe_null(Value::integer(static_cast<std::int64_t>(pick(25)) - 5), 12);
            role[Key] = maybe_null(Value::integer(static_cast<std::int64_t>(1 + pick(5))), 10);
            role[Flag] = maybe_null(Value::boolean(chance(75)), 10);
            role[State] = Value::text(one_of(states_));
            Row row(RoleCount);
            for (std::size_t c = 0; c < RoleCount; ++c) row[c] = role[order_[c]];
            target.append(row);
        }
        db.add_relation(std::move(target));

        add_table(db, other_, {{"key2", ValueType::Integer, true}, {"w", ValueType::Integer, true}, {"tag", ValueType::Text, true}},
                  {});
        Relation &other = db.relation(other_);
        for (std::size_t i = 0, m = pick(7); i < m; ++i) {
            other.append({maybe_null(Value::integer(static_cast<std::int64_t>(1 + pick(5))), 10),
                          maybe_null(Value::integer(static_cast<std::int64_t>(pick(10))), 10),
                          Value::text(one_of(std::vector<std::string>{"a", "b"}))});
        }

        add_table(db, catalog_, {{"id", ValueType::Integer, false}, {"role", ValueType::Text, false}}, {});
        Relation &catalog = db.relation(catalog_);
        for (std::size_t i = 0, m = 1 + pick(4); i < m; ++i) {
            catalog.append({Value::integer(static_cast<std::int64_t>(1 + pick(3))),
                            Value::text(one_of(std::vector<std::string>{"Public", "Public", "Analyst", "Admin"}))});
        }
    }

    std::string predicate() {
        switch (pick(6)) {
        case 0: return tcol(Val) + " > " + std::to_string(pick(15));
        case 1: return tcol(Attr) + " = 'x'";
        case 2: return tcol(Val) + " IS NOT NULL";
        case 3: return tcol(Group) + " <> 'g1' OR " + tcol(Val) + " < " + std::to_string(pick(15));
        case 4: return "NOT " + tcol(Flag);
        default: return tcol(Id) + " <= " + std::to_string(1 + pick(8));
        }
    }

    std::string where() { return chance(45) ? " WHERE " + predicate() : ""; }

    std::string join_clause() {
        return " JOIN " + other_ + " AS b ON " + tcol(Key) + " = b.key2" + (chance(20) ? " AND b.w > 2" : "");
    }

    std::string select_query() {
        talias_ = pick(3) == 0 ? "a" : "";
        const std::string from = " FROM " + target_ + (talias_.empty() ? "" : " AS a");
        switch (pick(7)) {
        case 0: {
            std::vector<std::string> cols;
            for (Role r : {Group, Attr, Val, Id}) {
                if (chance(50)) cols.push_back(tcol(r));
            }
            if (cols.empty()) cols.push_back(tcol(Group));
            std::string list;
            for (const auto &c : cols) list += (list.empty() ? "" : ", ") + c;
            return "SELECT " + list + from + where();
        }
        case 1: return "SELECT DISTINCT " + tcol(Group) + (chance(50) ? ", " + tcol(Attr) : "") + from + where();
        case 2:
            return "SELECT " + tcol(Group) + ", count(*) AS n" + (chance(50) ? ", sum(" + tcol(Val) + ") AS s" : "") +
                   (chance(30) ? ", max(" + tcol(Attr) + ") AS m" : "") + from + where() + " GROUP BY " + tcol(Group);
        case 3: return "SELECT count(*) AS n, min(" + tcol(Val) + ") AS lo" + from + where();
        default: {
            talias_ = "a";
            const std::string jfrom = " FROM " + target_ + " AS a" + join_clause();
            switch (pick(3)) {
            case 0:
                return "SELECT a." + col(Group) + ", count(*) AS n" + (chance(50) ? ", sum(b.w) AS s" : "") + jfrom + where() +
                       " GROUP BY a." + col(Group);
            case 1: return "SELECT a." + col(Group) + ", a." + col(Val) + ", b.w" + jfrom + where();
            default: return "SELECT DISTINCT a." + col(Group) + jfrom + where();
            }
        }
        }
    }

    void extra_policy(GeneratedCase &c) {
        if (chance(20)) c.policies.push_back("POLICY OVER " + other_ + " CONSTRAINT count(*) >= 2 ON FAIL KILL ROW");
        if (chance(10)) c.policies.push_back("POLICY OVER " + catalog_ + " CONSTRAINT false ON FAIL KILL QUERY");
    }

    void disaggregation(GeneratedCase &c) {
        const std::string bound = one_of(std::vector<std::string>{"cnt = 1", "cnt = 1", "cnt <= 2", "cnt < 2 or count(*) > 6"});
        const std::string action = chance(70) ? "KILL QUERY" : "KILL ROW";
        c.policies.push_back("POLICY OVER " + target_ + "\n  AGG count(distinct " + col(Attr) + ") as cnt\n  CONSTRAINT " + bound +
                             "\n  ON FAIL " + action);
        extra_policy(c);
        c.sql = select_query();
    }

    void anonymity(GeneratedCase &c) {
        // The singular qualifier form appears verbatim in the published listing.
        std::string role = catalog_ == "users" && chance(50) ? "user.role" : catalog_ + ".role";
        const std::string k = std::to_string(1 + pick(4));
        c.policies.push_back("POLICY OVER " + target_ + "\n  DIMENSION " + catalog_ + "\n  CONSTRAINT " + catalog_ +
                             ".id = current_user and \n    not (" + role + " = 'Public' and count(distinct " + col(Id) +
                             ") < " + k + ")\n  ON FAIL KILL ROW");
        extra_policy(c);
        c.session.current_user = Value::integer(static_cast<std::int64_t>(1 + pick(4)));
        c.sql = select_query();
    }

    void sanitization(GeneratedCase &c) {
        std::string constraint = one_of(std::vector<std::string>{"bool_and(" + col(Flag) + ")", "bool_and(" + col(Flag) + ")",
                                                                 "bool_and(" + col(Flag) + ") or count(*) > 5",
                                                                 "not bool_or(" + col(Attr) + " = 'z')"});
        c.policies.push_back("POLICY OVER " + target_ + " \n  CONSTRAINT " + constraint + " \n  ON FAIL KILL ROW");
        extra_policy(c);
        c.sql = select_query();
    }

    void transition(GeneratedCase &c) {
        const std::string from = one_of(states_), to = one_of(states_);
        const std::string action = chance(75) ? "KILL ROW" : "KILL QUERY";
        const std::string s = col(State);
        switch (pick(3)) {
        case 0:
            c.policies.push_back("POLICY UPDATE " + target_ + " as newu\n  DIMENSION " + target_ + " as oldu\n  AGG bool_and(oldu." +
                                 s + " = " + q(from) + ") as allc\n  CONSTRAINT newu." + s + " = " + q(to) +
                                 " and allc\n  ON FAIL " + action);
            break;
        case 1:
            c.policies.push_back("POLICY UPDATE " + target_ + " AS n DIMENSION " + target_ + " AS o CONSTRAINT n." + s + " <> " +
                                 q(to) + " OR o." + s + " = " + q(from) + " ON FAIL " + action);
            break;
        default:
            c.policies.push_back("POLICY UPDATE " + target_ + " AS n DIMENSION " + target_ + " AS o CONSTRAINT n." + col(Val) +
                                 " IS NULL OR n." + col(Val) + " >= o." + col(Val) + " OR count(*) > 1 ON FAIL " + action);
            break;
        }
        if (chance(30)) {
            c.policies.push_back("POLICY UPDATE " + target_ + " AS n DIMENSION " + target_ + " AS o CONSTRAINT o." + s +
                                 " <> 'Banned' ON FAIL KILL ROW");
        }
        talias_.clear();
        std::string set = s + " = " + q(one_of(states_));
        if (chance(40)) set += ", " + col(Val) + " = " + col(Val) + " " + (chance(50) ? "+" : "-") + " " + std::to_string(pick(4));
        c.sql = "UPDATE " + target_ + " SET " + set + (chance(80) ? " WHERE " + predicate() : "");
    }

    std::mt19937_64 rng_;
    std::array<std::string, RoleCount> names_;
    std::vector<std::size_t> order_;
    std::string target_, other_, catalog_, talias_;
    const std::vector<std::string> states_ = {"Created", "Verified", "Active", "Banned"};
};

struct CaseVerdict {
    bool agree = true;
    bool fell_back = false;
    /// The oracle killed the statement, dropped a row or skipped an update.
    bool intervened = false;
    std::string detail;
};

inline std::vector<std::string> sorted_rows(const std::vector<Row> &rows) {
    std::vector<std::string> out;
    for (const auto &r : rows) out.push_back(render_row(r));
    std::sort(out.begin(), out.end());
    return out;
}

/// Runs the case through the oracle and through rewrite_* plus plain execution, and
/// compares surviving rows, kill decisions and, for updates, the resulting database.
inline CaseVerdict check_case(const GeneratedCase &c) {
    CaseVerdict v;
    PolicySet set;
    std::vector<PreparedPolicy> policies;
    for (const auto &text : c.policies) policies.push_back(prepare_policy(set.add(parse_policy(text)), c.db));
    QueryStatement stmt = parse_and_bind(c.sql, c.db, c.session);
    auto mismatch = [&](const std::string &what) {
        v.agree = false;
        v.detail = what + "\n" + c.describe();
    };

    if (stmt.kind == StatementKind::Select) {
        EnforcementOutcome oracle = enforce_select(stmt, policies, c.db);
        v.intervened = oracle.kind == EnforcementOutcome::Kind::QueryKilled || !oracle.dropped.empty();
        RewriteResult rw;
        try {
            rw = rewrite_select(stmt, policies, c.db);
        } catch (const UnsupportedForRewrite &e) {
            v.fell_back = true;
            v.detail = e.what();
            return v;
        }
        bool killed = false;
        std::string killer;
        std::vector<Row> rows;
        try {
            rows = execute(rw.plan, c.db, c.session).rows;
        } catch (const PolicyKilledError &e) {
            killed = true;
            killer = e.policy();
        }
        const bool oracle_killed = oracle.kind == EnforcementOutcome::Kind::QueryKilled;
        if (killed != oracle_killed) return mismatch("kill decision differs"), v;
        if (killed && killer != oracle.killed->policy) return mismatch("killing policy differs"), v;
        if (!killed && sorted_rows(rows) != sorted_rows(oracle.rows)) return mismatch("surviving rows differ: " + rw.emitted_sql), v;
        return v;
    }

    Database by_oracle = c.db;
    EnforcementOutcome oracle = enforce_update(stmt, policies, by_oracle);
    v.intervened = oracle.kind == EnforcementOutcome::Kind::QueryKilled || !oracle.skipped.empty();
    RewriteResult rw;
    try {
        rw = rewrite_update(stmt, policies, c.db);
    } catch (const UnsupportedForRewrite &e) {
        v.fell_back = true;
        v.detail = e.what();
        return v;
    }
    Database by_rewrite = c.db;
    bool killed = false;
    std::size_t updated = 0;
    try {
        updated = execute_update(rw.plan, by_rewrite, c.session).updated;
    } catch (const PolicyKilledError &) {
        killed = true;
    }
    if (killed != (oracle.kind == EnforcementOutcome::Kind::QueryKilled)) return mismatch("update kill decision differs"), v;
    if (!killed && updated != oracle.updated) return mismatch("updated counts differ"), v;
    if (!(by_rewrite == by_oracle)) return mismatch("database after update differs: " + rw.emitted_sql), v;
    return v;
}

} // namespace dfc::testing
