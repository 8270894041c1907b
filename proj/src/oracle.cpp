#include "dfc/oracle.hpp"

#include "dfc/errors.hpp"

#include <map>

namespace dfc {

namespace {

// Key text for the equality index. Numeric keys compared across Integer and Decimal
// are written as decimals so 1 and 1.0 meet.
std::string key_text(const Value &v, bool as_decimal) {
    if (as_decimal && is_numeric(v.type())) return "d" + format_decimal(v.as_decimal());
    return std::to_string(static_cast<int>(v.type())) + v.to_string();
}

bool left_only(const Expr &e, std::size_t width, bool &has_column) {
    bool ok = true;
    visit_columns(e, [&](const Expr &c) {
        has_column = true;
        ok = ok && static_cast<std::size_t>(c.slot) < width;
    });
    return ok;
}

bool right_only(const Expr &e, std::size_t width, bool &has_column) {
    bool ok = true;
    visit_columns(e, [&](const Expr &c) {
        has_column = true;
        ok = ok && static_cast<std::size_t>(c.slot) >= width;
    });
    return ok;
}

class AnnotatingEngine {
public:
    AnnotatingEngine(const Database &db, const Session &session, ExecOptions options, ExecStats &stats)
        : db_(db), options_(options), stats_(stats) {
        ctx_.session = &session;
    }

    std::vector<AnnotatedRow> run(const Plan &p) {
        switch (p.kind) {
        case PlanKind::Scan: {
            auto id = db_.find(p.relation);
            if (!id) throw ValidationError("unknown relation '" + p.relation + "'");
            std::vector<AnnotatedRow> out;
            for (const auto &stored : db_.relation(*id).rows()) {
                Row values = stored.values;
                values.push_back(Value::integer(static_cast<std::int64_t>(stored.ordinal)));
                out.push_back({std::move(values), Polynomial::of(TupleId{*id, stored.ordinal})});
            }
            stats_.rows_scanned += out.size();
            stats_.annotations_created += out.size();
            limit(out.size());
            return out;
        }
        case PlanKind::Filter: {
            std::vector<AnnotatedRow> out;
            for (auto &row : run(p.input())) {
                if (is_true(eval_scalar(p.predicate, row.values, ctx_))) out.push_back(std::move(row));
            }
            return out;
        }
        case PlanKind::Project: {
            std::vector<AnnotatedRow> out;
            for (auto &row : run(p.input())) {
                Row values;
                for (const auto &item : p.items) values.push_back(eval_scalar(item.expr, row.values, ctx_));
                out.push_back({std::move(values), std::move(row.prov)});
            }
            return out;
        }
        case PlanKind::Join: return join(p);
        case PlanKind::Aggregate: return aggregate(p);
        case PlanKind::Distinct: {
            std::map<std::string, std::size_t> index;
            std::vector<Row> values;
            std::vector<std::vector<Polynomial>> members;
            for (auto &row : run(p.input())) {
                auto [it, inserted] = index.try_emplace(render_row(row.values), values.size());
                if (inserted) {
                    values.push_back(std::move(row.values));
                    members.emplace_back();
                }
                members[it->second].push_back(std::move(row.prov));
            }
            std::vector<AnnotatedRow> out;
            for (std::size_t i = 0; i < values.size(); ++i) out.push_back({std::move(values[i]), poly_sum(members[i])});
            stats_.annotations_created += out.size();
            return out;
        }
        case PlanKind::Update: throw Error("execute_with_provenance: UPDATE plans are enforced through enforce_update");
        }
        return {};
    }

private:
    void limit(std::size_t n) const {
        if (n > options_.row_limit)
            throw ResourceError("operator produced more than " + std::to_string(options_.row_limit) + " rows");
    }

    std::vector<AnnotatedRow> join(const Plan &p) {
        if (p.join_kind != JoinKind::Inner) throw UnsupportedError("mark join in provenance engine");
        std::vector<AnnotatedRow> left = run(p.input(0));
        std::vector<AnnotatedRow> right = run(p.input(1));
        const std::size_t lw = p.input(0).output.size();

        // One equality conjunct is enough to index on; the full predicate is re-checked.
        std::optional<std::pair<Expr, Expr>> key;
        bool widen = false;
        for (const auto &c : split_conjuncts(p.predicate)) {
            if (c.kind != ExprKind::Binary || c.op != Op::Eq) continue;
            for (int flip = 0; flip < 2 && !key; ++flip) {
                const Expr &a = c.args[flip];
                const Expr &b = c.args[1 - flip];
                bool ca = false, cb = false;
                if (left_only(a, lw, ca) && right_only(b, lw, cb) && ca && cb) {
                    key = std::make_pair(a, b);
                    widen = a.type != b.type;
                }
            }
            if (key) break;
        }

        std::vector<AnnotatedRow> out;
        auto emit = [&](const AnnotatedRow &l, const AnnotatedRow &r) {
            Row values = l.values;
            values.insert(values.end(), r.values.begin(), r.values.end());
            if (!is_true(eval_scalar(p.predicate, values, ctx_))) return;
            out.push_back({std::move(values), poly_mul(l.prov, r.prov)});
            limit(out.size());
        };

        if (!key) {
            for (const auto &l : left) {
                for (const auto &r : right) emit(l, r);
            }
        } else {
            std::map<std::string, std::vector<std::size_t>> index;
            Row padded(lw);
            for (std::size_t i = 0; i < right.size(); ++i) {
                padded.resize(lw);
                padded.insert(padded.end(), right[i].values.begin(), right[i].values.end());
                Value v = eval_scalar(key->second, padded, ctx_);
                if (!v.is_null()) index[key_text(v, widen)].push_back(i);
            }
            for (const auto &l : left) {
                Value v = eval_scalar(key->first, l.values, ctx_);
                if (v.is_null()) continue;
                auto it = index.find(key_text(v, widen));
                if (it == index.end()) continue;
                for (std::size_t i : it->second) emit(l, right[i]);
            }
        }
        stats_.rows_joined += out.size();
        stats_.annotations_created += out.size();
        return out;
    }

    std::vector<AnnotatedRow> aggregate(const Plan &p) {
        std::vector<AnnotatedRow> in = run(p.input());
        std::map<std::string, std::size_t> index;
        std::vector<Row> keys;
        std::vector<std::vector<std::size_t>> members;
        if (p.group_keys.empty()) {
            keys.emplace_back();
            members.emplace_back();
        }
        for (std::size_t i = 0; i < in.size(); ++i) {
            std::size_t g = 0;
            if (!p.group_keys.empty()) {
                Row key;
                for (const auto &k : p.group_keys) key.push_back(eval_scalar(k, in[i].values, ctx_));
                auto [it, inserted] = index.try_emplace(render_row(key), keys.size());
                if (inserted) {
                    keys.push_back(std::move(key));
                    members.emplace_back();
                }
                g = it->second;
            }
            members[g].push_back(i);
        }
        std::vector<AnnotatedRow> out;
        for (std::size_t g = 0; g < keys.size(); ++g) {
            std::vector<Row> group;
            std::vector<Polynomial> provs;
            for (std::size_t i : members[g]) {
                group.push_back(in[i].values);
                provs.push_back(in[i].prov);
            }
            Row values = keys[g];
            for (const auto &agg : p.aggs) values.push_back(eval_agg(agg, group, ctx_));
            out.push_back({std::move(values), poly_sum(provs)});
        }
        stats_.annotations_created += out.size();
        return out;
    }

    const Database &db_;
    ExecOptions options_;
    ExecStats &stats_;
    EvalContext ctx_;
};

Value coerce_to(const Value &v, ValueType type) {
    if (type == ValueType::Decimal && v.type() == ValueType::Integer) return Value::decimal(v.as_decimal());
    return v;
}

// Shared tail of policy evaluation: aggregates are already computed into `base`
// (and the old/new images placed), catalog dimensions are enumerated here.
std::optional<Violation> check_constraint(const PreparedPolicy &p, Row base, const Row &reported,
                                          const Database &db, const Session &session, ViolationAction action) {
    EvalContext ctx;
    ctx.session = &session;
    std::size_t witnesses = 0;
    bool pass = false;

    std::vector<const Relation *> dims;
    for (auto d : p.catalog_dims) dims.push_back(&db.relation(p.policy.dimensions[d].relation));
    std::vector<std::size_t> pos(dims.size(), 0);
    bool exhausted = std::any_of(dims.begin(), dims.end(), [](const Relation *r) { return r->size() == 0; });
    while (!exhausted && !pass) {
        for (std::size_t i = 0; i < dims.size(); ++i) {
            const Row &values = dims[i]->rows()[pos[i]].values;
            std::copy(values.begin(), values.end(), base.begin() + static_cast<std::ptrdiff_t>(p.catalog_offsets[i]));
        }
        ++witnesses;
        pass = is_true(eval_scalar(p.policy.constraint, base, ctx));
        std::size_t i = 0;
        for (; i < dims.size(); ++i) {
            if (++pos[i] < dims[i]->size()) break;
            pos[i] = 0;
        }
        if (i == dims.size()) exhausted = true;
    }
    if (pass) return std::nullopt;

    Violation v;
    v.policy = p.policy.name;
    v.action = action;
    v.row = reported;
    for (std::size_t i = 0; i < p.policy.aggs.size(); ++i) v.aggs.emplace_back(p.policy.aggs[i].alias, base[i]);
    v.dimension_witnesses = witnesses;
    return v;
}

ViolationAction select_action(const PreparedPolicy &p) {
    return p.policy.on_fail == OnFail::KillQuery ? ViolationAction::KillQuery : ViolationAction::KillRow;
}

Row visible_values(const Row &values, const std::vector<OutputColumn> &columns) {
    Row out;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (!columns[i].hidden) out.push_back(values[i]);
    }
    return out;
}

std::vector<const PreparedPolicy *> applicable_policies(const QueryStatement &stmt,
                                                        std::span<const PreparedPolicy> policies) {
    std::vector<const PreparedPolicy *> out;
    for (const auto &p : policies) {
        if (applicable(p.policy, stmt)) out.push_back(&p);
    }
    return out;
}

} // namespace

std::string_view action_name(ViolationAction a) {
    switch (a) {
    case ViolationAction::KillQuery: return "kill_query";
    case ViolationAction::KillRow: return "kill_row";
    case ViolationAction::SkipUpdate: return "skip_update";
    }
    return "?";
}

std::string Violation::to_string() const {
    std::string out = "policy=" + policy + " action=" + std::string(action_name(action)) + " row=" + render_row(row) + " aggs=";
    for (std::size_t i = 0; i < aggs.size(); ++i) {
        if (i) out += ",";
        out += aggs[i].first + "=" + aggs[i].second.to_string();
    }
    return out;
}

std::string_view outcome_kind_name(EnforcementOutcome::Kind k) {
    switch (k) {
    case EnforcementOutcome::Kind::Completed: return "completed";
    case EnforcementOutcome::Kind::QueryKilled: return "query_killed";
    case EnforcementOutcome::Kind::UpdateApplied: return "update_applied";
    }
    return "?";
}

AnnotatedResult execute_with_provenance(const Plan &plan, const Database &db, const Session &session, ExecOptions options) {
    auto start = std::chrono::steady_clock::now();
    AnnotatedResult result;
    AnnotatingEngine engine(db, session, options, result.stats);
    result.rows = engine.run(plan);
    result.columns = plan.output;
    result.stats.rows_output = result.rows.size();
    result.stats.wall_time = std::chrono::steady_clock::now() - start;
    return result;
}

std::optional<Violation> evaluate_policy_contributors(const PreparedPolicy &p, const ContributorMap &contributing,
                                                      const Row &reported, const Database &db, const Session &session) {
    EvalContext ctx;
    ctx.session = &session;
    Row base(p.width);
    static const std::vector<TupleId> none;
    for (std::size_t i = 0; i < p.policy.aggs.size(); ++i) {
        auto it = contributing.find(p.agg_relations[i]);
        const auto &tuples = it == contributing.end() ? none : it->second;
        Accumulator acc(p.policy.aggs[i].func);
        for (const TupleId &t : tuples) acc.add(agg_input(p.policy.aggs[i], db.tuple(t), ctx));
        base[i] = agg_result(p.policy.aggs[i], acc);
    }
    return check_constraint(p, std::move(base), reported, db, session, select_action(p));
}

std::optional<Violation> evaluate_policy_row(const PreparedPolicy &p, const AnnotatedRow &row, const Database &db,
                                             const Session &session) {
    ContributorMap contributing;
    for (const auto &rel : p.agg_relations) {
        if (!contributing.count(rel)) contributing.emplace(rel, contributors(row.prov, db, rel));
    }
    return evaluate_policy_contributors(p, contributing, row.values, db, session);
}

std::optional<Violation> evaluate_policy_update(const PreparedPolicy &p, const Row &old_image, const Row &new_image,
                                                const Database &db, const Session &session) {
    EvalContext ctx;
    ctx.session = &session;
    Row base(p.width);
    for (std::size_t i = 0; i < p.policy.aggs.size(); ++i) {
        const Row &source = p.agg_sources[i] == AggSource::NewImage ? new_image : old_image;
        Accumulator acc(p.policy.aggs[i].func);
        acc.add(agg_input(p.policy.aggs[i], source, ctx));
        base[i] = agg_result(p.policy.aggs[i], acc);
    }
    std::copy(old_image.begin(), old_image.end(), base.begin() + static_cast<std::ptrdiff_t>(*p.old_offset));
    std::copy(new_image.begin(), new_image.end(), base.begin() + static_cast<std::ptrdiff_t>(*p.new_offset));
    ViolationAction action = p.policy.on_fail == OnFail::KillQuery ? ViolationAction::KillQuery : ViolationAction::SkipUpdate;
    return check_constraint(p, std::move(base), new_image, db, session, action);
}

void check_session(const QueryStatement &stmt, std::span<const PreparedPolicy> policies) {
    if (stmt.session.current_user) return;
    for (const auto *p : applicable_policies(stmt, policies)) {
        if (p->uses_current_user)
            throw ValidationError("policy '" + p->policy.name + "' reads current_user but the session has no user");
    }
}

EnforcementOutcome enforce_select(const QueryStatement &stmt, std::span<const PreparedPolicy> policies,
                                  const Database &db, ExecOptions options) {
    if (stmt.kind != StatementKind::Select) throw Error("enforce_select: not a SELECT statement");
    check_session(stmt, policies);
    auto active = applicable_policies(stmt, policies);
    AnnotatedResult result = execute_with_provenance(stmt.plan, db, stmt.session, options);

    EnforcementOutcome out;
    for (const auto &c : result.columns) {
        if (!c.hidden) out.columns.push_back(c);
    }
    std::vector<bool> keep(result.rows.size(), true);
    for (std::size_t r = 0; r < result.rows.size(); ++r) {
        AnnotatedRow shown{visible_values(result.rows[r].values, result.columns), result.rows[r].prov};
        for (const auto *p : active) {
            auto v = evaluate_policy_row(*p, shown, db, stmt.session);
            if (!v) continue;
            if (v->action == ViolationAction::KillQuery) {
                out.kind = EnforcementOutcome::Kind::QueryKilled;
                out.killed = std::move(v);
                out.stats = result.stats;
                return out;
            }
            keep[r] = false;
            out.dropped.push_back(std::move(*v));
        }
    }
    for (std::size_t r = 0; r < result.rows.size(); ++r) {
        if (keep[r]) out.rows.push_back(visible_values(result.rows[r].values, result.columns));
    }
    out.stats = result.stats;
    out.stats.rows_output = out.rows.size();
    return out;
}

EnforcementOutcome enforce_update(const QueryStatement &stmt, std::span<const PreparedPolicy> policies, Database &db,
                                  ExecOptions options) {
    if (stmt.kind != StatementKind::Update) throw Error("enforce_update: not an UPDATE statement");
    check_session(stmt, policies);
    auto start = std::chrono::steady_clock::now();
    auto active = applicable_policies(stmt, policies);
    const Plan &plan = stmt.plan;
    Relation &rel = db.relation(plan.relation);
    const Schema &schema = rel.schema();
    EvalContext ctx;
    ctx.session = &stmt.session;

    EnforcementOutcome out;
    out.kind = EnforcementOutcome::Kind::UpdateApplied;
    std::vector<std::pair<std::uint64_t, Row>> writes;
    for (const auto &stored : rel.rows()) {
        ++out.stats.rows_scanned;
        Row row = stored.values;
        row.push_back(Value::integer(static_cast<std::int64_t>(stored.ordinal)));
        if (!is_true(eval_scalar(plan.predicate, row, ctx))) continue;
        Row image = stored.values;
        for (const auto &a : plan.assignments) {
            std::size_t idx = *schema.find(a.column);
            image[idx] = coerce_to(eval_scalar(a.value, row, ctx), schema.columns()[idx].type);
        }
        bool pass = true;
        for (const auto *p : active) {
            auto v = evaluate_policy_update(*p, stored.values, image, db, stmt.session);
            if (!v) continue;
            if (v->action == ViolationAction::KillQuery) {
                out.kind = EnforcementOutcome::Kind::QueryKilled;
                out.killed = std::move(v);
                out.skipped.clear();
                out.stats.wall_time = std::chrono::steady_clock::now() - start;
                return out;
            }
            pass = false;
            out.skipped.push_back(std::move(*v));
        }
        if (pass) {
            schema.check_row(image);
            writes.emplace_back(stored.ordinal, std::move(image));
        }
        if (writes.size() > options.row_limit) throw ResourceError("update touches too many rows");
    }
    for (auto &[ordinal, values] : writes) rel.update(ordinal, std::move(values));
    out.updated = writes.size();
    out.stats.rows_output = out.updated;
    out.stats.wall_time = std::chrono::steady_clock::now() - start;
    return out;
}

} // namespace dfc
