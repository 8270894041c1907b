#include "dfc/rewriter.hpp"

#include "dfc/errors.hpp"
#include "dfc/sql.hpp"

#include <algorithm>
#include <cctype>
#include <map>

namespace dfc {

namespace {

std::string lower(std::string s) {
    for (auto &c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string join_list(const std::vector<std::string> &xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + xs[i];
    return out;
}

std::vector<const PreparedPolicy *> active_policies(const QueryStatement &stmt, std::span<const PreparedPolicy> policies) {
    std::vector<const PreparedPolicy *> out;
    for (const auto &p : policies) {
        if (applicable(p.policy, stmt)) out.push_back(&p);
    }
    return out;
}

std::optional<ValueType> user_type(const Session &s) {
    if (!s.current_user) return std::nullopt;
    return s.current_user->type();
}

std::string scan_qualifier(const Plan &scan) { return lower(scan.alias.empty() ? scan.relation : scan.alias); }

Expr literal_int(std::int64_t v) { return Expr::constant(Value::integer(v)); }

Expr is_null(Expr e) { return Expr::unary(Op::IsNull, std::move(e)); }

/// Value of a policy aggregate over exactly one tuple, given its argument.
Expr single_tuple_form(const AggExpr &agg, const Expr &arg) {
    switch (agg.func) {
    case AggFunc::Count:
        if (agg.star) return literal_int(1);
        [[fallthrough]];
    case AggFunc::CountDistinct: return Expr::case_when({{is_null(arg), literal_int(0)}}, literal_int(1));
    case AggFunc::Sum:
    case AggFunc::Min:
    case AggFunc::Max: return arg;
    case AggFunc::Avg: return Expr::binary(Op::Mul, arg, Expr::constant(Value::decimal(1.0)));
    case AggFunc::BoolAnd: return Expr::case_when({{is_null(arg), Expr::constant(Value::boolean(true))}}, arg);
    case AggFunc::BoolOr: return Expr::case_when({{is_null(arg), Expr::constant(Value::boolean(false))}}, arg);
    }
    return arg;
}

/// Nested CASE that calls kill(name) for the first failing condition, TRUE otherwise.
Expr kill_guard(const std::vector<std::pair<Expr, std::string>> &conditions) {
    Expr guard = Expr::constant(Value::boolean(true));
    for (auto it = conditions.rbegin(); it != conditions.rend(); ++it)
        guard = Expr::case_when({{it->first, guard}}, Expr::kill(it->second));
    return guard;
}

/// Scan, Filter and inner Join nodes only, without derived-table aliases.
bool plain_core(const Plan &p) {
    if (!p.output_alias.empty()) return false;
    switch (p.kind) {
    case PlanKind::Scan: return true;
    case PlanKind::Filter: return plain_core(p.input());
    case PlanKind::Join: return p.join_kind == JoinKind::Inner && plain_core(p.input(0)) && plain_core(p.input(1));
    default: return false;
    }
}

void collect_scans(const Plan &p, std::vector<const Plan *> &out) {
    if (p.kind == PlanKind::Scan) out.push_back(&p);
    for (const auto &in : p.inputs) collect_scans(in, out);
}

bool has_join(const Plan &p) {
    if (p.kind == PlanKind::Join) return true;
    return std::any_of(p.inputs.begin(), p.inputs.end(), [](const Plan &in) { return has_join(in); });
}

/// DISTINCT over a projection as a group-by on every projected column.
Plan distinct_to_aggregate(Plan plan) {
    Plan &project = plan.input();
    if (project.kind != PlanKind::Project) throw UnsupportedForRewrite("DISTINCT without a projection");
    if (project.input().kind == PlanKind::Aggregate) throw UnsupportedForRewrite("DISTINCT over an aggregation");
    std::vector<ProjectItem> inner;
    std::vector<ProjectItem> outer;
    std::vector<Expr> keys;
    for (std::size_t i = 0; i < project.items.size(); ++i) {
        std::string name = "__c" + std::to_string(i);
        inner.push_back({project.items[i].expr, name});
        keys.push_back(Expr::column("", name));
        outer.push_back({Expr::column("", name), project.items[i].alias});
    }
    Plan below = Plan::project(std::move(inner), std::move(project.input()));
    return Plan::project(std::move(outer), Plan::aggregate(std::move(keys), {}, std::move(below)));
}

class SelectRewriter {
public:
    explicit SelectRewriter(InjectionSummary &summary) : summary_(summary) {}

    Plan run(Plan plan, const std::vector<const PreparedPolicy *> &active) {
        if (plan.kind == PlanKind::Distinct) {
            plan = distinct_to_aggregate(std::move(plan));
            summary_.distinct_to_aggregate = true;
        }
        if (plan.kind != PlanKind::Project || !plan.output_alias.empty())
            throw UnsupportedForRewrite("plan root is not a projection");
        Plan body = std::move(plan.input());
        Plan *agg = nullptr;
        Plan *core = &body;
        if (body.kind == PlanKind::Aggregate) {
            agg = &body;
            core = &body.input();
            if (core->kind == PlanKind::Project) {
                inner_project_ = core;
                core = &core->input();
            }
        }
        if (!plain_core(*core)) throw UnsupportedForRewrite("query shape outside scans, filters and inner joins");
        if ((agg && !agg->output_alias.empty()) || (inner_project_ && !inner_project_->output_alias.empty()))
            throw UnsupportedForRewrite("aliased intermediate result");
        collect_scans(*core, scans_);
        joined_ = has_join(*core);

        std::vector<std::pair<Expr, std::string>> kill_conditions;
        std::vector<Expr> row_conditions;
        std::vector<std::tuple<Plan, Expr, std::string>> marks;
        for (std::size_t k = 0; k < active.size(); ++k) {
            Expr condition = policy_condition(*active[k], k, agg, marks);
            if (active[k]->policy.on_fail == OnFail::KillQuery) {
                kill_conditions.emplace_back(std::move(condition), active[k]->policy.name);
                summary_.guards.push_back("kill_query(" + active[k]->policy.name + ")");
            } else {
                row_conditions.push_back(std::move(condition));
                summary_.guards.push_back("kill_row(" + active[k]->policy.name + ")");
            }
        }

        Plan upper = std::move(body);
        for (auto &[right, predicate, name] : marks) upper = Plan::mark_join(std::move(upper), std::move(right), predicate, name);
        if (!kill_conditions.empty()) upper = Plan::filter(kill_guard(kill_conditions), std::move(upper));
        for (auto &c : row_conditions) upper = Plan::filter(std::move(c), std::move(upper));
        plan.inputs[0] = std::move(upper);
        return plan;
    }

private:
    std::string alias_of(const std::string &relation) const {
        const Plan *found = nullptr;
        for (const Plan *s : scans_) {
            if (lower(s->relation) != lower(relation)) continue;
            if (found) throw UnsupportedForRewrite("relation '" + relation + "' is scanned more than once");
            found = s;
        }
        if (!found) throw UnsupportedForRewrite("relation '" + relation + "' is not scanned");
        return scan_qualifier(*found);
    }

    /// Makes a core column visible above the inner projection, if there is one.
    Expr thread(const Expr &column) {
        if (!inner_project_) return column;
        std::string key = column.qualifier + "." + column.name;
        auto it = threaded_.find(key);
        if (it == threaded_.end()) {
            std::string name = "__x" + std::to_string(threaded_.size());
            inner_project_->items.push_back({column, name});
            summary_.threaded_columns.push_back(key);
            it = threaded_.emplace(key, name).first;
        }
        return Expr::column("", it->second);
    }

    Expr arg_over(const AggExpr &agg, const std::string &alias) {
        return map_columns(agg.arg, [&](const Expr &c) { return thread(Expr::column(alias, c.name)); });
    }

    /// Aggregate appended to the query's aggregation; same value as the policy aggregate
    /// over the distinct contributing tuples of the group.
    AggExpr group_form(const AggExpr &agg, const std::string &alias, const std::string &name) {
        AggExpr out;
        out.alias = name;
        if (agg.func == AggFunc::Count && joined_) {
            Expr tid = thread(Expr::column(alias, kTupleIdColumn));
            out.func = AggFunc::CountDistinct;
            out.arg = agg.star ? tid : Expr::case_when({{Expr::unary(Op::IsNotNull, arg_over(agg, alias)), tid}}, std::nullopt);
            return out;
        }
        if ((agg.func == AggFunc::Sum || agg.func == AggFunc::Avg) && joined_)
            throw UnsupportedForRewrite(std::string(agg_name(agg.func)) + " over joined contributors");
        out.func = agg.func;
        out.star = agg.star;
        if (!agg.star) out.arg = arg_over(agg, alias);
        return out;
    }

    Expr policy_condition(const PreparedPolicy &prepared, std::size_t k, Plan *agg,
                          std::vector<std::tuple<Plan, Expr, std::string>> &marks) {
        const Policy &p = prepared.policy;
        std::string tag = std::to_string(k);
        std::vector<Expr> slot_values;
        for (std::size_t i = 0; i < p.aggs.size(); ++i) {
            std::string alias = alias_of(prepared.agg_relations[i]);
            if (agg) {
                std::string name = lower("__p" + tag + "_" + p.aggs[i].alias);
                agg->aggs.push_back(group_form(p.aggs[i], alias, name));
                summary_.added_aggs.push_back(name + "=" + render_agg_call(agg->aggs.back()));
                slot_values.push_back(Expr::column("", name));
            } else {
                Expr arg = p.aggs[i].star ? Expr() : map_columns(p.aggs[i].arg, [&](const Expr &c) { return Expr::column(alias, c.name); });
                slot_values.push_back(single_tuple_form(p.aggs[i], arg));
            }
        }

        // Slot layout of the prepared constraint: aggs, then catalog dimension rows.
        auto dimension_at = [&](int slot) -> std::optional<std::size_t> {
            for (std::size_t j = prepared.catalog_offsets.size(); j-- > 0;) {
                if (static_cast<std::size_t>(slot) >= prepared.catalog_offsets[j]) return j;
            }
            return std::nullopt;
        };
        std::vector<std::string> dim_alias;
        for (std::size_t j = 0; j < prepared.catalog_dims.size(); ++j)
            dim_alias.push_back(lower("__d" + tag + "_" + p.dimensions[prepared.catalog_dims[j]].alias));
        auto translate = [&](const Expr &e) {
            return map_columns(e, [&](const Expr &c) {
                if (static_cast<std::size_t>(c.slot) < p.aggs.size()) return slot_values[c.slot];
                auto j = dimension_at(c.slot);
                if (!j) throw Error("rewrite: column '" + c.name + "' outside the policy layout");
                return Expr::column(dim_alias[*j], c.name);
            });
        };

        if (prepared.catalog_dims.empty()) return translate(p.constraint);

        std::vector<std::vector<Expr>> local(prepared.catalog_dims.size());
        std::vector<Expr> residual;
        for (const auto &c : split_conjuncts(p.constraint)) {
            std::set<std::size_t> dims;
            bool other = false;
            visit_columns(c, [&](const Expr &col) {
                if (auto j = dimension_at(col.slot)) dims.insert(*j);
                else other = true;
            });
            if (!other && dims.size() == 1 && !contains_kill(c)) local[*dims.begin()].push_back(translate(c));
            else residual.push_back(translate(c));
        }
        std::optional<Plan> right;
        for (std::size_t j = 0; j < prepared.catalog_dims.size(); ++j) {
            Plan scan = Plan::scan(p.dimensions[prepared.catalog_dims[j]].relation, dim_alias[j]);
            if (!local[j].empty()) scan = Plan::filter(conjoin(std::move(local[j])), std::move(scan));
            summary_.dimension_joins.push_back(p.dimensions[prepared.catalog_dims[j]].relation + " AS " + dim_alias[j]);
            right = right ? Plan::join(std::move(*right), std::move(scan), Expr::constant(Value::boolean(true))) : std::move(scan);
        }
        std::string mark = "__mark" + tag;
        marks.emplace_back(std::move(*right), conjoin(std::move(residual)), mark);
        return Expr::column("", mark);
    }

    InjectionSummary &summary_;
    Plan *inner_project_ = nullptr;
    std::vector<const Plan *> scans_;
    bool joined_ = false;
    std::map<std::string, std::string> threaded_;
};

} // namespace

std::string InjectionSummary::to_string() const {
    return "threaded=[" + join_list(threaded_columns) + "] aggs=[" + join_list(added_aggs) + "] dimensions=[" +
           join_list(dimension_joins) + "] guards=[" + join_list(guards) +
           "] distinct_to_aggregate=" + (distinct_to_aggregate ? "yes" : "no");
}

RewriteResult rewrite_select(const QueryStatement &stmt, std::span<const PreparedPolicy> policies, const Database &db) {
    if (stmt.kind != StatementKind::Select) throw Error("rewrite_select: not a SELECT statement");
    check_session(stmt, policies);
    RewriteResult out;
    auto active = active_policies(stmt, policies);
    if (active.empty()) {
        out.plan = stmt.plan;
        out.emitted_sql = render_sql(out.plan);
        return out;
    }
    SelectRewriter rewriter(out.injected);
    out.plan = rewriter.run(stmt.plan, active);
    bind_plan(out.plan, db, user_type(stmt.session));
    out.emitted_sql = render_sql(out.plan);
    return out;
}

RewriteResult rewrite_update(const QueryStatement &stmt, std::span<const PreparedPolicy> policies, const Database &db) {
    if (stmt.kind != StatementKind::Update) throw Error("rewrite_update: not an UPDATE statement");
    check_session(stmt, policies);
    RewriteResult out;
    out.plan = stmt.plan;
    auto active = active_policies(stmt, policies);
    if (active.empty()) {
        out.emitted_sql = render_sql(out.plan);
        return out;
    }
    const Plan &plan = stmt.plan;
    const std::string q = scan_qualifier(plan.input());
    auto old_column = [&](const std::string &name) { return Expr::column(q, name); };
    auto new_column = [&](const std::string &name) {
        for (const auto &a : plan.assignments) {
            if (lower(a.column) == lower(name)) return a.value;
        }
        return old_column(name);
    };

    std::vector<std::pair<Expr, std::string>> kill_conditions;
    std::vector<Expr> row_conditions;
    for (const PreparedPolicy *prepared : active) {
        const Policy &p = prepared->policy;
        if (!prepared->catalog_dims.empty()) throw UnsupportedForRewrite("catalog dimension in an UPDATE policy");
        std::vector<Expr> slot_values;
        for (std::size_t i = 0; i < p.aggs.size(); ++i) {
            const bool fresh = prepared->agg_sources[i] == AggSource::NewImage;
            Expr arg = p.aggs[i].star ? Expr() : map_columns(p.aggs[i].arg, [&](const Expr &c) {
                return fresh ? new_column(c.name) : old_column(c.name);
            });
            slot_values.push_back(single_tuple_form(p.aggs[i], arg));
        }
        Expr condition = map_columns(p.constraint, [&](const Expr &c) {
            std::size_t slot = static_cast<std::size_t>(c.slot);
            if (slot < p.aggs.size()) return slot_values[slot];
            if (slot >= *prepared->new_offset) return new_column(c.name);
            return old_column(c.name);
        });
        if (p.on_fail == OnFail::KillQuery) {
            kill_conditions.emplace_back(std::move(condition), p.name);
            out.injected.guards.push_back("kill_query(" + p.name + ")");
        } else {
            row_conditions.push_back(std::move(condition));
            out.injected.guards.push_back("kill_row(" + p.name + ")");
        }
    }
    std::vector<Expr> guard;
    if (!kill_conditions.empty()) guard.push_back(kill_guard(kill_conditions));
    for (auto &c : row_conditions) guard.push_back(std::move(c));
    out.plan.guard = conjoin(std::move(guard));
    bind_plan(out.plan, db, user_type(stmt.session));
    out.emitted_sql = render_sql(out.plan);
    return out;
}

EnforcementOutcome capture_baseline(const QueryStatement &stmt, std::span<const PreparedPolicy> policies,
                                    const Database &db, ExecOptions options) {
    if (stmt.kind != StatementKind::Select) throw Error("capture_baseline: not a SELECT statement");
    check_session(stmt, policies);
    auto start = std::chrono::steady_clock::now();
    auto active = active_policies(stmt, policies);
    AnnotatedResult result = execute_with_provenance(stmt.plan, db, stmt.session, options);

    // (row, relation, tuple) view, one entry per distinct contributing tuple.
    struct ViewEntry {
        std::size_t row;
        TupleId tuple;
    };
    std::vector<ViewEntry> view;
    std::vector<std::size_t> row_begin;
    for (std::size_t r = 0; r < result.rows.size(); ++r) {
        row_begin.push_back(view.size());
        std::vector<TupleId> tuples;
        for (const auto &m : result.rows[r].prov.monomials()) tuples.insert(tuples.end(), m.factors().begin(), m.factors().end());
        std::sort(tuples.begin(), tuples.end());
        tuples.erase(std::unique(tuples.begin(), tuples.end()), tuples.end());
        for (const auto &t : tuples) view.push_back({r, t});
    }
    row_begin.push_back(view.size());
    result.stats.annotations_created += view.size();

    EnforcementOutcome out;
    std::vector<std::size_t> visible;
    for (std::size_t i = 0; i < result.columns.size(); ++i) {
        if (!result.columns[i].hidden) {
            visible.push_back(i);
            out.columns.push_back(result.columns[i]);
        }
    }
    auto shown = [&](std::size_t r) {
        Row values;
        for (auto i : visible) values.push_back(result.rows[r].values[i]);
        return values;
    };
    auto finish = [&]() {
        out.stats = result.stats;
        out.stats.rows_output = out.rows.size();
        out.stats.wall_time = std::chrono::steady_clock::now() - start;
    };

    std::vector<bool> keep(result.rows.size(), true);
    for (std::size_t r = 0; r < result.rows.size() && !active.empty(); ++r) {
        ContributorMap contributing;
        for (std::size_t e = row_begin[r]; e < row_begin[r + 1]; ++e)
            contributing[db.relation(view[e].tuple.relation).name()].push_back(view[e].tuple);
        Row values = shown(r);
        for (const auto *p : active) {
            auto v = evaluate_policy_contributors(*p, contributing, values, db, stmt.session);
            if (!v) continue;
            if (v->action == ViolationAction::KillQuery) {
                out.kind = EnforcementOutcome::Kind::QueryKilled;
                out.killed = std::move(v);
                finish();
                out.stats.rows_output = 0;
                return out;
            }
            keep[r] = false;
            out.dropped.push_back(std::move(*v));
        }
    }
    for (std::size_t r = 0; r < result.rows.size(); ++r) {
        if (keep[r]) out.rows.push_back(shown(r));
    }
    finish();
    return out;
}

} // namespace dfc
