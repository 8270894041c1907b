#include "dfc/plan.hpp"

#include "dfc/errors.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace dfc {

Plan Plan::scan(std::string relation, std::string alias) {
    Plan p;
    p.kind = PlanKind::Scan;
    p.relation = to_lower(relation);
    p.alias = alias.empty() ? p.relation : to_lower(alias);
    return p;
}

Plan Plan::filter(Expr predicate, Plan input) {
    Plan p;
    p.kind = PlanKind::Filter;
    p.predicate = std::move(predicate);
    p.inputs.push_back(std::move(input));
    return p;
}

Plan Plan::project(std::vector<ProjectItem> items, Plan input) {
    Plan p;
    p.kind = PlanKind::Project;
    p.items = std::move(items);
    p.inputs.push_back(std::move(input));
    return p;
}

Plan Plan::join(Plan left, Plan right, Expr predicate) {
    Plan p;
    p.kind = PlanKind::Join;
    p.predicate = std::move(predicate);
    p.inputs.push_back(std::move(left));
    p.inputs.push_back(std::move(right));
    return p;
}

Plan Plan::mark_join(Plan left, Plan right, Expr predicate, std::string mark_name) {
    Plan p = join(std::move(left), std::move(right), std::move(predicate));
    p.join_kind = JoinKind::Mark;
    p.mark_name = std::move(mark_name);
    return p;
}

Plan Plan::aggregate(std::vector<Expr> keys, std::vector<AggExpr> aggs, Plan input) {
    Plan p;
    p.kind = PlanKind::Aggregate;
    p.group_keys = std::move(keys);
    p.aggs = std::move(aggs);
    p.inputs.push_back(std::move(input));
    return p;
}

Plan Plan::distinct(Plan input) {
    Plan p;
    p.kind = PlanKind::Distinct;
    p.inputs.push_back(std::move(input));
    return p;
}

Plan Plan::update(std::string relation, std::string alias, std::vector<Assignment> assignments, Expr predicate) {
    Plan p;
    p.kind = PlanKind::Update;
    p.relation = to_lower(relation);
    p.alias = alias.empty() ? p.relation : to_lower(alias);
    p.assignments = std::move(assignments);
    p.predicate = std::move(predicate);
    p.inputs.push_back(scan(p.relation, p.alias));
    return p;
}

Scope output_scope(const Plan &plan, std::optional<ValueType> current_user_type) {
    Scope scope;
    scope.current_user_type = current_user_type;
    scope.columns.reserve(plan.output.size());
    for (const auto &c : plan.output) scope.columns.push_back(ScopeColumn{c.qualifier, c.name, c.type, c.nullable, c.hidden});
    return scope;
}

namespace {

void expect_boolean(const Expr &e, const char *where) {
    if (e.type != ValueType::Boolean && e.type != ValueType::Null)
        throw ValidationError(std::string(where) + " must be boolean: '" + render_expr(e) + "'");
}

void reject_aggregate(const Expr &e, const char *where) {
    if (contains_aggregate(e)) throw ValidationError(std::string("aggregate function not allowed in ") + where);
}

class Binder {
public:
    Binder(const Database &db, std::optional<ValueType> cu) : db_(db), cu_(cu) {}

    void bind(Plan &p, bool is_root, bool under_aggregate) {
        if (p.kind == PlanKind::Update && !is_root) throw ValidationError("UPDATE must be the root of a plan");
        switch (p.kind) {
        case PlanKind::Scan: bind_scan(p); break;
        case PlanKind::Filter: {
            bind(p.input(), false, under_aggregate);
            reject_aggregate(p.predicate, "WHERE");
            bind_expr(p.predicate, output_scope(p.input(), cu_));
            expect_boolean(p.predicate, "filter predicate");
            p.output = p.input().output;
            break;
        }
        case PlanKind::Project: bind_project(p, under_aggregate); break;
        case PlanKind::Join: bind_join(p, under_aggregate); break;
        case PlanKind::Aggregate: bind_aggregate(p, under_aggregate); break;
        case PlanKind::Distinct:
            bind(p.input(), false, under_aggregate);
            p.output = p.input().output;
            break;
        case PlanKind::Update: bind_update(p); break;
        }
        if (!p.output_alias.empty()) {
            p.output_alias = to_lower(p.output_alias);
            for (auto &c : p.output) c.qualifier = p.output_alias;
        }
    }

private:
    void bind_scan(Plan &p) {
        const auto &rel = db_.relation(p.relation);
        p.relation = rel.name();
        if (p.alias.empty()) p.alias = p.relation;
        p.output.clear();
        for (const auto &c : rel.schema().columns()) p.output.push_back(OutputColumn{p.alias, c.name, c.type, c.nullable, false});
        p.output.push_back(OutputColumn{p.alias, kTupleIdColumn, ValueType::Integer, false, true});
    }

    void bind_project(Plan &p, bool under_aggregate) {
        bind(p.input(), false, under_aggregate);
        const auto &in = p.input().output;
        std::vector<ProjectItem> expanded;
        for (auto &item : p.items) {
            if (item.expr.kind != ExprKind::Star) {
                expanded.push_back(std::move(item));
                continue;
            }
            std::string q = to_lower(item.expr.qualifier);
            bool any = false;
            for (const auto &c : in) {
                if (c.hidden) continue;
                if (!q.empty() && c.qualifier != q && c.qualifier != q + "s") continue;
                expanded.push_back(ProjectItem{Expr::column(c.qualifier, c.name), c.name});
                any = true;
            }
            if (!any) throw ValidationError("'" + render_expr(item.expr) + "' matches no columns");
        }
        p.items = std::move(expanded);
        Scope scope = output_scope(p.input(), cu_);
        p.output.clear();
        for (auto &item : p.items) {
            if (contains_aggregate(item.expr))
                throw ValidationError("aggregate function outside an aggregation block: '" + render_expr(item.expr) + "'");
            bind_expr(item.expr, scope);
            item.alias = to_lower(item.alias);
            if (item.expr.kind == ExprKind::Column && item.alias == item.expr.name) {
                p.output.push_back(OutputColumn{item.expr.qualifier, item.expr.name, item.expr.type, item.expr.nullable, false});
            } else {
                p.output.push_back(OutputColumn{"", item.alias, item.expr.type, item.expr.nullable, false});
            }
        }
    }

    void bind_join(Plan &p, bool under_aggregate) {
        bind(p.input(0), false, under_aggregate);
        bind(p.input(1), false, under_aggregate);
        std::set<std::string> left_quals;
        for (const auto &c : p.input(0).output) {
            if (!c.qualifier.empty()) left_quals.insert(c.qualifier);
        }
        for (const auto &c : p.input(1).output) {
            if (!c.qualifier.empty() && left_quals.count(c.qualifier))
                throw ValidationError("duplicate relation alias '" + c.qualifier + "' in join");
        }
        std::vector<OutputColumn> combined = p.input(0).output;
        combined.insert(combined.end(), p.input(1).output.begin(), p.input(1).output.end());
        Plan tmp;
        tmp.output = combined;
        reject_aggregate(p.predicate, "join condition");
        bind_expr(p.predicate, output_scope(tmp, cu_));
        expect_boolean(p.predicate, "join condition");
        if (p.join_kind == JoinKind::Inner) {
            p.output = std::move(combined);
        } else {
            if (p.mark_name.empty()) throw ValidationError("mark join requires a mark column name");
            p.mark_name = to_lower(p.mark_name);
            p.output = p.input(0).output;
            p.output.push_back(OutputColumn{"", p.mark_name, ValueType::Boolean, false, false});
        }
    }

    void bind_aggregate(Plan &p, bool under_aggregate) {
        if (under_aggregate) throw ValidationError("more than one aggregation block on a plan path");
        bind(p.input(), false, true);
        Scope scope = output_scope(p.input(), cu_);
        p.output.clear();
        for (auto &key : p.group_keys) {
            if (key.kind != ExprKind::Column)
                throw ValidationError("GROUP BY keys must be column references: '" + render_expr(key) + "'");
            bind_expr(key, scope);
            p.output.push_back(OutputColumn{key.qualifier, key.name, key.type, key.nullable, false});
        }
        for (auto &agg : p.aggs) {
            bind_agg(agg, scope);
            agg.alias = to_lower(agg.alias);
            p.output.push_back(OutputColumn{"", agg.alias, agg.result_type(), agg.result_nullable(), false});
        }
    }

    void bind_update(Plan &p) {
        if (p.inputs.size() != 1 || p.input().kind != PlanKind::Scan || p.input().relation != to_lower(p.relation))
            throw ValidationError("UPDATE must have a single scan of its target relation");
        bind(p.input(), false, false);
        p.relation = p.input().relation;
        p.alias = p.input().alias;
        const auto &schema = db_.relation(p.relation).schema();
        Scope scope = output_scope(p.input(), cu_);
        reject_aggregate(p.predicate, "WHERE");
        bind_expr(p.predicate, scope);
        expect_boolean(p.predicate, "WHERE");
        std::set<std::string> seen;
        for (auto &a : p.assignments) {
            a.column = to_lower(a.column);
            auto idx = schema.find(a.column);
            if (!idx) throw ValidationError("unknown column '" + a.column + "' in SET");
            if (!seen.insert(a.column).second) throw ValidationError("column '" + a.column + "' assigned twice");
            reject_aggregate(a.value, "SET");
            Scope no_kill = scope;
            no_kill.allow_kill = false;
            bind_expr(a.value, no_kill);
            const auto &col = schema.columns()[*idx];
            bool ok = a.value.type == ValueType::Null || a.value.type == col.type ||
                      (col.type == ValueType::Decimal && a.value.type == ValueType::Integer);
            if (!ok)
                throw ValidationError("cannot assign " + std::string(type_name(a.value.type)) + " to column '" + col.name +
                                      "' of type " + std::string(type_name(col.type)));
            if (!col.nullable && a.value.kind == ExprKind::Literal && a.value.literal.is_null())
                throw ValidationError("cannot assign NULL to non-nullable column '" + col.name + "'");
        }
        if (p.guard) {
            reject_aggregate(*p.guard, "update guard");
            bind_expr(*p.guard, scope);
            expect_boolean(*p.guard, "update guard");
        }
        p.output = p.input().output;
    }

    const Database &db_;
    std::optional<ValueType> cu_;
};

void collect_aliases(const Expr &e, std::set<std::string> &out) {
    visit_columns(e, [&](const Expr &c) { out.insert(c.qualifier); });
}

std::set<std::string> plan_aliases(const Plan &node) {
    if (!node.output_alias.empty()) return {node.output_alias};
    if (node.kind == PlanKind::Scan) return {node.alias};
    if (node.kind == PlanKind::Join && node.join_kind == JoinKind::Mark) return plan_aliases(node.input(0));
    std::set<std::string> out;
    for (const auto &in : node.inputs) {
        auto sub = plan_aliases(in);
        out.insert(sub.begin(), sub.end());
    }
    return out;
}

bool covers(const std::set<std::string> &have, const std::set<std::string> &need) {
    return std::includes(have.begin(), have.end(), need.begin(), need.end());
}

// Places a conjunct at the lowest scan or inner join that sees all its aliases.
bool push_conjunct(Plan &node, const std::set<std::string> &aliases, const Expr &conjunct) {
    if (!node.output_alias.empty() && node.kind != PlanKind::Scan) return false;
    switch (node.kind) {
    case PlanKind::Scan:
        if (!covers({node.alias}, aliases)) return false;
        node = Plan::filter(conjunct, std::move(node));
        return true;
    case PlanKind::Filter:
        if (node.input().kind == PlanKind::Scan && node.input().output_alias.empty()) {
            if (!covers({node.input().alias}, aliases)) return false;
            node.predicate = Expr::binary(Op::And, std::move(node.predicate), conjunct);
            return true;
        }
        return push_conjunct(node.input(), aliases, conjunct);
    case PlanKind::Join:
        if (covers(plan_aliases(node.input(0)), aliases)) return push_conjunct(node.input(0), aliases, conjunct);
        if (node.join_kind == JoinKind::Mark) return false;
        if (covers(plan_aliases(node.input(1)), aliases) && push_conjunct(node.input(1), aliases, conjunct)) return true;
        if (!covers(plan_aliases(node), aliases)) return false;
        node.predicate = node.predicate.is_true_literal() ? conjunct : Expr::binary(Op::And, std::move(node.predicate), conjunct);
        return true;
    default: return false;
    }
}

void push_down_filters(Plan &node) {
    for (auto &in : node.inputs) push_down_filters(in);
    if (node.kind != PlanKind::Filter || node.input().kind != PlanKind::Join) return;
    std::vector<Expr> keep;
    for (auto &conjunct : split_conjuncts(node.predicate)) {
        std::set<std::string> aliases;
        collect_aliases(conjunct, aliases);
        aliases.erase("");
        if (!aliases.empty() && !contains_kill(conjunct) && push_conjunct(node.input(), aliases, conjunct)) continue;
        keep.push_back(std::move(conjunct));
    }
    if (keep.empty()) {
        Plan child = std::move(node.input());
        child.output_alias = node.output_alias.empty() ? child.output_alias : node.output_alias;
        node = std::move(child);
    } else {
        node.predicate = conjoin(std::move(keep));
    }
}

void explain_into(const Plan &p, int depth, std::ostringstream &out) {
    out << std::string(depth * 2, ' ') << plan_kind_name(p.kind);
    switch (p.kind) {
    case PlanKind::Scan:
        out << ' ' << p.relation;
        if (p.alias != p.relation) out << " AS " << p.alias;
        break;
    case PlanKind::Filter: out << ' ' << render_expr(p.predicate); break;
    case PlanKind::Project:
        out << " [";
        for (std::size_t i = 0; i < p.items.size(); ++i) {
            if (i) out << ", ";
            out << render_expr(p.items[i].expr);
            if (!(p.items[i].expr.kind == ExprKind::Column && p.items[i].expr.name == p.items[i].alias))
                out << " AS " << p.items[i].alias;
        }
        out << ']';
        break;
    case PlanKind::Join:
        if (p.join_kind == JoinKind::Mark) out << " MARK " << p.mark_name;
        out << " ON " << render_expr(p.predicate);
        break;
    case PlanKind::Aggregate:
        out << " keys=[";
        for (std::size_t i = 0; i < p.group_keys.size(); ++i) out << (i ? ", " : "") << render_expr(p.group_keys[i]);
        out << "] aggs=[";
        for (std::size_t i = 0; i < p.aggs.size(); ++i)
            out << (i ? ", " : "") << render_agg_call(p.aggs[i]) << " AS " << p.aggs[i].alias;
        out << ']';
        break;
    case PlanKind::Distinct: break;
    case PlanKind::Update:
        out << ' ' << p.relation << " SET ";
        for (std::size_t i = 0; i < p.assignments.size(); ++i)
            out << (i ? ", " : "") << p.assignments[i].column << " = " << render_expr(p.assignments[i].value);
        out << " WHERE " << render_expr(p.predicate);
        if (p.guard) out << " GUARD " << render_expr(*p.guard);
        break;
    }
    if (!p.output_alias.empty()) out << " AS " << p.output_alias;
    out << '\n';
    if (p.kind == PlanKind::Update) return;
    for (const auto &in : p.inputs) explain_into(in, depth + 1, out);
}

} // namespace

void bind_plan(Plan &plan, const Database &db, std::optional<ValueType> current_user_type) {
    Binder(db, current_user_type).bind(plan, true, false);
}

void bind_statement(QueryStatement &stmt, const Database &db) {
    std::optional<ValueType> cu;
    if (stmt.session.current_user) cu = stmt.session.current_user->type();
    bind_plan(stmt.plan, db, cu);
    if (stmt.kind == StatementKind::Select) {
        push_down_filters(stmt.plan);
        bind_plan(stmt.plan, db, cu);
    }
}

std::set<std::string> referenced_relations(const Plan &plan) {
    std::set<std::string> out;
    std::function<void(const Plan &)> walk = [&](const Plan &p) {
        if (p.kind == PlanKind::Scan || p.kind == PlanKind::Update) out.insert(to_lower(p.relation));
        for (const auto &in : p.inputs) walk(in);
    };
    walk(plan);
    return out;
}

std::size_t node_count(const Plan &plan) {
    std::size_t n = 1;
    for (const auto &in : plan.inputs) n += node_count(in);
    return n;
}

std::string_view plan_kind_name(PlanKind kind) {
    switch (kind) {
    case PlanKind::Scan: return "Scan";
    case PlanKind::Filter: return "Filter";
    case PlanKind::Project: return "Project";
    case PlanKind::Join: return "Join";
    case PlanKind::Aggregate: return "Aggregate";
    case PlanKind::Distinct: return "Distinct";
    case PlanKind::Update: return "Update";
    }
    return "?";
}

std::string explain(const Plan &plan) {
    std::ostringstream out;
    explain_into(plan, 0, out);
    return out.str();
}

} // namespace dfc
