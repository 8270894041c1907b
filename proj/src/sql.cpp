#include "dfc/sql.hpp"

#include "dfc/errors.hpp"
#include "dfc/lexer.hpp"

#include <algorithm>
#include <set>

namespace dfc {

namespace {

struct SelectItem {
    Expr expr;
    std::string alias;
};

class SqlParser {
public:
    SqlParser(std::string_view text, SqlOptions options) : ts_(text), options_(options) {}

    QueryStatement parse_statement() {
        QueryStatement stmt;
        if (ts_.is_keyword("select")) {
            stmt.kind = StatementKind::Select;
            stmt.plan = parse_select();
        } else if (ts_.is_keyword("update")) {
            stmt.kind = StatementKind::Update;
            stmt.plan = parse_update();
        } else if (ts_.is_keyword("with")) {
            throw UnsupportedError("WITH clause");
        } else if (ts_.is_keyword("insert") || ts_.is_keyword("delete")) {
            throw UnsupportedError(to_upper_ascii(ts_.peek().text) + " statement");
        } else {
            ts_.fail("expected SELECT or UPDATE");
        }
        ts_.accept_symbol(";");
        if (!ts_.at_end()) ts_.fail("unexpected '" + ts_.peek().text + "'");
        return stmt;
    }

private:
    void reject_tail_clauses() {
        if (ts_.is_keyword("having")) throw UnsupportedError("HAVING");
        if (ts_.is_keyword("order")) throw UnsupportedError("ORDER BY");
        if (ts_.is_keyword("limit")) throw UnsupportedError("LIMIT");
        if (ts_.is_keyword("union") || ts_.is_keyword("intersect") || ts_.is_keyword("except"))
            throw UnsupportedError("set operation " + to_upper_ascii(ts_.peek().text));
    }

    std::string optional_alias() {
        if (ts_.accept_keyword("as")) return ts_.expect_identifier("alias");
        const Token &t = ts_.peek();
        if (t.kind == TokenKind::Identifier && !TokenStream::is_reserved(t.text)) return ts_.next().text;
        return {};
    }

    Plan parse_from_item() {
        if (ts_.accept_symbol("(")) {
            if (!ts_.is_keyword("select")) ts_.fail("expected table name");
            if (!options_.internal_dialect) throw UnsupportedError("subquery");
            Plan inner = parse_select();
            ts_.expect_symbol(")");
            ts_.accept_keyword("as");
            inner.output_alias = ts_.expect_identifier("derived table alias");
            return inner;
        }
        const Token &t = ts_.peek();
        if (t.kind != TokenKind::Identifier || TokenStream::is_reserved(t.text)) ts_.fail("expected table name");
        std::string name = ts_.next().text;
        if (ts_.is_symbol("(")) throw UnsupportedError("table function");
        return Plan::scan(name, optional_alias());
    }

    Plan parse_from() {
        Plan plan = parse_from_item();
        for (;;) {
            if (ts_.accept_symbol(",")) {
                plan = Plan::join(std::move(plan), parse_from_item(), Expr::constant(Value::boolean(true)));
            } else if (ts_.accept_keyword("cross")) {
                ts_.expect_keyword("join");
                plan = Plan::join(std::move(plan), parse_from_item(), Expr::constant(Value::boolean(true)));
            } else if (ts_.is_keyword("inner") || ts_.is_keyword("join")) {
                ts_.accept_keyword("inner");
                ts_.expect_keyword("join");
                Plan right = parse_from_item();
                ts_.expect_keyword("on");
                plan = Plan::join(std::move(plan), std::move(right), ts_.parse_expr());
            } else if (ts_.is_keyword("left") || ts_.is_keyword("right") || ts_.is_keyword("full") ||
                       ts_.is_keyword("outer")) {
                throw UnsupportedError("outer join");
            } else if (ts_.is_keyword("natural")) {
                throw UnsupportedError("natural join");
            } else if (ts_.is_keyword("mark")) {
                if (!options_.internal_dialect) throw UnsupportedError("mark join");
                ts_.next();
                ts_.expect_keyword("join");
                Plan right = parse_from_item();
                ts_.expect_keyword("on");
                Expr pred = ts_.parse_expr();
                ts_.expect_keyword("as");
                std::string mark = ts_.expect_identifier("mark column name");
                plan = Plan::mark_join(std::move(plan), std::move(right), std::move(pred), std::move(mark));
            } else {
                return plan;
            }
        }
    }

    static std::string default_alias(const Expr &e, std::size_t index) {
        if (e.kind == ExprKind::Column) return e.name;
        if (e.kind == ExprKind::Aggregate) return e.agg == AggFunc::CountDistinct ? "count" : std::string(agg_name(e.agg));
        return "expr" + std::to_string(index + 1);
    }

    static void extract_aggregates(Expr &e, std::vector<AggExpr> &aggs) {
        if (e.kind == ExprKind::Aggregate) {
            if (!e.args.empty() && contains_aggregate(e.args[0]))
                throw ValidationError("nested aggregate in '" + render_expr(e) + "'");
            AggExpr agg;
            agg.func = e.agg;
            agg.star = e.star;
            if (!e.star) agg.arg = e.args[0];
            auto same = std::find_if(aggs.begin(), aggs.end(), [&](const AggExpr &a) {
                return a.func == agg.func && a.star == agg.star && a.arg == agg.arg;
            });
            std::string alias;
            if (same != aggs.end()) {
                alias = same->alias;
            } else {
                alias = "__a" + std::to_string(aggs.size());
                agg.alias = alias;
                aggs.push_back(std::move(agg));
            }
            e = Expr::column("", alias);
            return;
        }
        for (auto &a : e.args) extract_aggregates(a, aggs);
    }

    Plan parse_select() {
        ts_.expect_keyword("select");
        bool distinct = ts_.accept_keyword("distinct");
        ts_.accept_keyword("all");
        std::vector<SelectItem> items;
        do {
            if (ts_.is_symbol("*")) {
                ts_.next();
                items.push_back({Expr::all_columns(), ""});
                continue;
            }
            if (ts_.peek().kind == TokenKind::Identifier && ts_.is_symbol(".", 1) && ts_.is_symbol("*", 2)) {
                std::string q = ts_.next().text;
                ts_.next();
                ts_.next();
                items.push_back({Expr::all_columns(q), ""});
                continue;
            }
            Expr e = ts_.parse_expr();
            std::string alias = optional_alias();
            if (alias.empty()) alias = default_alias(e, items.size());
            items.push_back({std::move(e), std::move(alias)});
        } while (ts_.accept_symbol(","));

        if (!ts_.accept_keyword("from")) {
            reject_tail_clauses();
            ts_.fail("FROM clause required");
        }
        Plan plan = parse_from();
        if (ts_.accept_keyword("where")) {
            Expr where = ts_.parse_expr();
            if (contains_aggregate(where)) throw ValidationError("aggregate function not allowed in WHERE");
            plan = Plan::filter(std::move(where), std::move(plan));
        }
        std::vector<Expr> keys;
        if (ts_.accept_keyword("group")) {
            ts_.expect_keyword("by");
            do {
                const Token &at = ts_.peek();
                Expr key = ts_.parse_expr();
                if (key.kind != ExprKind::Column) ts_.fail_at(at, "GROUP BY keys must be column references");
                keys.push_back(std::move(key));
            } while (ts_.accept_symbol(","));
        }
        reject_tail_clauses();

        bool aggregated = !keys.empty();
        for (const auto &item : items) aggregated = aggregated || contains_aggregate(item.expr);
        if (aggregated) {
            std::vector<AggExpr> aggs;
            for (auto &item : items) {
                if (item.expr.kind == ExprKind::Star)
                    throw ValidationError("'*' cannot be combined with GROUP BY or aggregates");
                extract_aggregates(item.expr, aggs);
            }
            plan = Plan::aggregate(std::move(keys), std::move(aggs), std::move(plan));
        }
        std::vector<ProjectItem> projected;
        for (auto &item : items) projected.push_back(ProjectItem{std::move(item.expr), std::move(item.alias)});
        plan = Plan::project(std::move(projected), std::move(plan));
        if (distinct) plan = Plan::distinct(std::move(plan));
        return plan;
    }

    Plan parse_update() {
        ts_.expect_keyword("update");
        const Token &t = ts_.peek();
        if (t.kind != TokenKind::Identifier || TokenStream::is_reserved(t.text)) ts_.fail("expected table name");
        std::string relation = ts_.next().text;
        std::string alias = optional_alias();
        ts_.expect_keyword("set");
        std::vector<Assignment> assignments;
        do {
            std::string column = ts_.expect_identifier("column name");
            if (ts_.accept_symbol(".")) {
                std::string q = column;
                if (q != relation && q != alias) ts_.fail("SET column must belong to the updated relation");
                column = ts_.expect_identifier("column name");
            }
            ts_.expect_symbol("=");
            assignments.push_back(Assignment{column, ts_.parse_expr()});
        } while (ts_.accept_symbol(","));
        Expr predicate = Expr::constant(Value::boolean(true));
        if (ts_.accept_keyword("where")) predicate = ts_.parse_expr();
        if (ts_.is_keyword("from")) throw UnsupportedError("UPDATE ... FROM");
        reject_tail_clauses();
        return Plan::update(relation, alias, std::move(assignments), std::move(predicate));
    }

    TokenStream ts_;
    SqlOptions options_;
};

// ---------------------------------------------------------------------------
// Rendering

using ColumnTexts = std::vector<std::string>;

std::function<std::string(const Expr &)> by_slot(const ColumnTexts &cols) {
    return [&cols](const Expr &c) -> std::string {
        if (c.slot < 0 || static_cast<std::size_t>(c.slot) >= cols.size())
            throw Error("render_sql: unbound column '" + c.name + "'");
        return cols[c.slot];
    };
}

std::string render_conjunct(const Expr &e, const ColumnTexts &cols) {
    std::string text = render_expr(e, by_slot(cols));
    if (e.kind == ExprKind::Binary && e.op == Op::Or) return "(" + text + ")";
    return text;
}

void append_conjuncts(const Expr &pred, const ColumnTexts &cols, std::vector<std::string> &out) {
    for (const auto &c : split_conjuncts(pred)) {
        if (!c.is_true_literal()) out.push_back(render_conjunct(c, cols));
    }
}

std::string join_strings(const std::vector<std::string> &parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

bool references_slot_at_least(const Expr &e, int first) {
    bool found = false;
    visit_columns(e, [&](const Expr &c) { found = found || c.slot >= first; });
    return found;
}

class SqlRenderer {
public:
    std::string render(const Plan &plan) {
        if (plan.kind == PlanKind::Update) return render_update(plan);
        return render_select(plan, true).text;
    }

private:
    struct From {
        std::string text;
        ColumnTexts cols;
        std::vector<std::string> where;
    };
    struct Select {
        std::string text;
        std::vector<std::string> names;
    };

    static bool peelable(const Plan &n, const Plan &top) { return &n == &top || n.output_alias.empty(); }

    Select render_select(const Plan &top, bool root) {
        const Plan *n = &top;
        bool distinct = false;
        if (n->kind == PlanKind::Distinct) {
            distinct = true;
            n = &n->input();
        }
        const Plan *proj = nullptr;
        if (n->kind == PlanKind::Project && peelable(*n, top)) {
            proj = n;
            n = &n->input();
        }
        const Plan *agg = nullptr;
        if (n->kind == PlanKind::Aggregate && peelable(*n, top)) {
            bool shows_agg = !n->group_keys.empty();
            if (!shows_agg && proj) {
                for (const auto &item : proj->items)
                    shows_agg = shows_agg || references_slot_at_least(item.expr, static_cast<int>(n->group_keys.size()));
            } else if (!shows_agg) {
                shows_agg = !n->aggs.empty();
            }
            if (shows_agg) {
                agg = n;
                n = &n->input();
            }
        }
        std::vector<const Plan *> filters;
        while (n->kind == PlanKind::Filter && peelable(*n, top)) {
            filters.push_back(n);
            n = &n->input();
        }

        From from = render_from(*n, n == &top);
        std::vector<std::string> where = from.where;
        for (auto it = filters.rbegin(); it != filters.rend(); ++it) append_conjuncts((*it)->predicate, from.cols, where);

        ColumnTexts source;
        std::vector<std::string> group_by;
        const Plan *shown = n;
        if (agg) {
            shown = agg;
            for (const auto &k : agg->group_keys) {
                source.push_back(render_expr(k, by_slot(from.cols)));
                group_by.push_back(source.back());
            }
            for (const auto &a : agg->aggs) source.push_back(render_agg_call(a, by_slot(from.cols)));
        } else {
            source = from.cols;
        }

        std::vector<std::pair<std::string, std::string>> select;
        if (proj) {
            for (const auto &item : proj->items) select.emplace_back(render_expr(item.expr, by_slot(source)), item.alias);
        } else {
            for (std::size_t i = 0; i < shown->output.size(); ++i) {
                if (root && shown->output[i].hidden) continue;
                select.emplace_back(source[i], shown->output[i].name);
            }
        }

        Select out;
        std::set<std::string> used;
        std::vector<std::string> parts;
        for (auto &[text, name] : select) {
            if (!root) {
                std::string base = name;
                for (int k = 1; used.count(name); ++k) name = base + "_" + std::to_string(k);
                used.insert(name);
            }
            bool implicit = text == name || (text.size() > name.size() && text.ends_with("." + name) &&
                                             text.find_first_of(" ()") == std::string::npos);
            parts.push_back(implicit ? text : text + " AS " + name);
            out.names.push_back(name);
        }
        out.text = "SELECT ";
        if (distinct) out.text += "DISTINCT ";
        out.text += join_strings(parts, ", ");
        out.text += " FROM " + from.text;
        if (!where.empty()) out.text += " WHERE " + join_strings(where, " AND ");
        if (!group_by.empty()) out.text += " GROUP BY " + join_strings(group_by, ", ");
        return out;
    }

    From derived(const Plan &n) {
        if (n.kind == PlanKind::Scan) return render_scan(n);
        std::string alias = n.output_alias.empty() ? "__t" + std::to_string(next_table_++) : n.output_alias;
        Select s = render_select(n, false);
        From f;
        f.text = "(" + s.text + ") AS " + alias;
        for (const auto &name : s.names) f.cols.push_back(alias + "." + name);
        return f;
    }

    From render_scan(const Plan &n) {
        std::string alias = n.output_alias.empty() ? n.alias : n.output_alias;
        From f;
        f.text = n.relation;
        if (alias != n.relation) f.text += " AS " + alias;
        for (const auto &c : n.output) f.cols.push_back(alias + "." + c.name);
        return f;
    }

    static bool filtered_scan(const Plan &n) {
        const Plan *p = &n;
        while (p->kind == PlanKind::Filter && p->output_alias.empty()) p = &p->input();
        return p->kind == PlanKind::Scan;
    }

    From render_from(const Plan &n, bool top = false) {
        if (!top && !n.output_alias.empty() && n.kind != PlanKind::Scan) return derived(n);
        switch (n.kind) {
        case PlanKind::Scan: return render_scan(n);
        case PlanKind::Filter: {
            From f = render_from(n.input());
            append_conjuncts(n.predicate, f.cols, f.where);
            return f;
        }
        case PlanKind::Join: {
            From left = render_from(n.input(0));
            const Plan &r = n.input(1);
            if (n.join_kind == JoinKind::Inner) {
                From right = filtered_scan(r) ? render_from(r) : derived(r);
                From f;
                f.cols = left.cols;
                f.cols.insert(f.cols.end(), right.cols.begin(), right.cols.end());
                f.where = left.where;
                f.where.insert(f.where.end(), right.where.begin(), right.where.end());
                if (n.predicate.is_true_literal()) {
                    f.text = left.text + " CROSS JOIN " + right.text;
                } else {
                    f.text = left.text + " JOIN " + right.text + " ON " + render_expr(n.predicate, by_slot(f.cols));
                }
                return f;
            }
            From right = filtered_scan(r) ? render_from(r) : derived(r);
            ColumnTexts both = left.cols;
            both.insert(both.end(), right.cols.begin(), right.cols.end());
            std::vector<std::string> on = right.where;
            append_conjuncts(n.predicate, both, on);
            if (on.empty()) on.push_back("TRUE");
            From f;
            f.text = left.text + " MARK JOIN " + right.text + " ON " + join_strings(on, " AND ") + " AS " + n.mark_name;
            f.cols = left.cols;
            f.cols.push_back(n.mark_name);
            f.where = left.where;
            return f;
        }
        default:
            if (top) throw Error("render_sql: cannot render " + std::string(plan_kind_name(n.kind)) + " node");
            return derived(n);
        }
    }

    std::string render_update(const Plan &plan) {
        From target = render_scan(plan.input());
        auto cols = by_slot(target.cols);
        std::string out = "UPDATE " + plan.relation;
        if (plan.alias != plan.relation) out += " AS " + plan.alias;
        out += " SET ";
        for (std::size_t i = 0; i < plan.assignments.size(); ++i) {
            if (i) out += ", ";
            out += plan.assignments[i].column + " = " + render_expr(plan.assignments[i].value, cols);
        }
        Expr where = plan.predicate;
        if (plan.guard) {
            if (contains_kill(*plan.guard)) {
                where = Expr::case_when({{plan.predicate, *plan.guard}}, Expr::constant(Value::boolean(false)));
            } else {
                where = where.is_true_literal() ? *plan.guard : Expr::binary(Op::And, plan.predicate, *plan.guard);
            }
        }
        if (!where.is_true_literal()) out += " WHERE " + render_expr(where, cols);
        return out;
    }

    int next_table_ = 0;
};

} // namespace

QueryStatement parse_sql(std::string_view text, SqlOptions options) { return SqlParser(text, options).parse_statement(); }

QueryStatement parse_and_bind(std::string_view text, const Database &db, const Session &session, SqlOptions options) {
    QueryStatement stmt = parse_sql(text, options);
    stmt.session = session;
    bind_statement(stmt, db);
    return stmt;
}

std::string render_sql(const Plan &plan) { return SqlRenderer().render(plan); }

} // namespace dfc
