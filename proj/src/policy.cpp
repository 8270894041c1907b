#include "dfc/policy.hpp"

#include "dfc/errors.hpp"
#include "dfc/lexer.hpp"

#include <algorithm>
#include <set>

namespace dfc {

const Dimension *Policy::old_dimension() const {
    if (target != TargetKind::Update) return nullptr;
    for (const auto &d : dimensions) {
        if (d.mode == BindingMode::Provenance) return &d;
    }
    return nullptr;
}

std::string_view on_fail_name(OnFail f) { return f == OnFail::KillQuery ? "kill_query" : "kill_row"; }

namespace {

std::string optional_alias(TokenStream &ts) {
    if (ts.accept_keyword("as")) return ts.expect_identifier("alias");
    const Token &t = ts.peek();
    if (t.kind == TokenKind::Identifier && !TokenStream::is_reserved(t.text)) return ts.next().text;
    return {};
}

std::string relation_name(TokenStream &ts) {
    const Token &t = ts.peek();
    if (t.kind != TokenKind::Identifier || TokenStream::is_reserved(t.text)) ts.fail("expected relation name");
    return ts.next().text;
}

void infer_binding_modes(Policy &p) {
    for (auto &d : p.dimensions) {
        bool provenance = std::find(p.relations.begin(), p.relations.end(), d.relation) != p.relations.end();
        d.mode = provenance ? BindingMode::Provenance : BindingMode::Catalog;
    }
}

void check_names(const Policy &p) {
    std::set<std::string> qualifiers;
    if (p.target == TargetKind::Over) {
        for (const auto &r : p.relations) {
            if (!qualifiers.insert(r).second) throw ValidationError("relation '" + r + "' listed twice in OVER");
        }
    } else {
        qualifiers.insert(p.new_alias);
    }
    for (const auto &d : p.dimensions) {
        if (d.mode == BindingMode::Provenance && p.target == TargetKind::Over && d.alias == d.relation) continue;
        if (!qualifiers.insert(d.alias).second) throw ValidationError("duplicate alias '" + d.alias + "' in policy");
    }
    if (p.target == TargetKind::Update) {
        std::size_t provenance = 0;
        for (const auto &d : p.dimensions) provenance += d.mode == BindingMode::Provenance;
        if (provenance != 1)
            throw ValidationError("UPDATE policy needs exactly one DIMENSION over the prior version of '" +
                                  p.update_relation() + "'");
    }
    std::set<std::string> aliases;
    for (const auto &a : p.aggs) {
        if (!aliases.insert(a.alias).second) throw ValidationError("duplicate AGG alias '" + a.alias + "'");
    }
}

Policy parse_one(TokenStream &ts) {
    Policy p;
    if (ts.is_keyword("name")) {
        ts.next();
        p.name = ts.expect_identifier("policy name");
    }
    ts.expect_keyword("policy");
    if (ts.accept_keyword("over")) {
        p.target = TargetKind::Over;
        do p.relations.push_back(relation_name(ts));
        while (ts.accept_symbol(","));
    } else if (ts.accept_keyword("update")) {
        p.target = TargetKind::Update;
        p.relations.push_back(relation_name(ts));
        ts.accept_keyword("as");
        p.new_alias = ts.expect_identifier("alias for the updated relation");
        if (TokenStream::is_reserved(p.new_alias)) ts.fail("expected alias for the updated relation");
    } else {
        ts.fail("expected OVER or UPDATE");
    }
    if (ts.accept_keyword("dimension")) {
        do {
            Dimension d;
            d.relation = relation_name(ts);
            d.alias = optional_alias(ts);
            if (d.alias.empty()) d.alias = d.relation;
            p.dimensions.push_back(std::move(d));
        } while (ts.accept_symbol(","));
    }
    if (ts.accept_keyword("agg")) {
        do {
            const Token at = ts.peek();
            Expr e = ts.parse_expr();
            if (e.kind != ExprKind::Aggregate) ts.fail_at(at, "AGG entries must be aggregate calls");
            if (!e.star && contains_aggregate(e.args[0])) ts.fail_at(at, "nested aggregate in AGG entry");
            AggExpr agg;
            agg.func = e.agg;
            agg.star = e.star;
            if (!e.star) agg.arg = std::move(e.args[0]);
            ts.accept_keyword("as");
            agg.alias = ts.expect_identifier("AGG alias");
            p.aggs.push_back(std::move(agg));
        } while (ts.accept_symbol(","));
    }
    ts.expect_keyword("constraint");
    p.constraint = ts.parse_expr();
    ts.expect_keyword("on");
    ts.expect_keyword("fail");
    ts.expect_keyword("kill");
    if (ts.accept_keyword("query")) {
        p.on_fail = OnFail::KillQuery;
    } else if (ts.accept_keyword("row")) {
        p.on_fail = OnFail::KillRow;
    } else {
        ts.fail("expected QUERY or ROW");
    }

    infer_binding_modes(p);
    check_names(p);
    auto t = static_type(p.constraint);
    if (t && *t != ValueType::Boolean) throw ValidationError("constraint must be boolean");
    if (contains_kill(p.constraint)) throw ValidationError("kill() is not allowed in a constraint");
    return p;
}

void hoist(Expr &e, Policy &p, int &next) {
    if (e.kind == ExprKind::Aggregate) {
        if (!e.star && contains_aggregate(e.args[0])) throw ValidationError("nested aggregate in '" + render_expr(e) + "'");
        AggExpr agg;
        agg.func = e.agg;
        agg.star = e.star;
        if (!e.star) agg.arg = e.args[0];
        auto same = std::find_if(p.aggs.begin(), p.aggs.end(), [&](const AggExpr &a) {
            return a.func == agg.func && a.star == agg.star && a.arg == agg.arg;
        });
        if (same != p.aggs.end()) {
            e = Expr::column("", same->alias);
            return;
        }
        auto taken = [&](const std::string &alias) {
            return std::any_of(p.aggs.begin(), p.aggs.end(), [&](const AggExpr &a) { return a.alias == alias; });
        };
        std::string alias;
        do alias = "__agg" + std::to_string(next++);
        while (taken(alias));
        agg.alias = alias;
        p.aggs.push_back(std::move(agg));
        e = Expr::column("", alias);
        return;
    }
    for (auto &a : e.args) hoist(a, p, next);
}

std::string render_dimension(const Dimension &d) { return d.alias == d.relation ? d.relation : d.relation + " AS " + d.alias; }

std::string join_list(const std::vector<std::string> &parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? ", " : "") + parts[i];
    return out;
}

struct AggScopeSource {
    std::string qualifier;
    std::string relation;
    AggSource kind;
};

Scope relation_scope(const Relation &rel, const std::string &qualifier) {
    Scope scope;
    for (const auto &c : rel.schema().columns()) scope.columns.push_back(ScopeColumn{qualifier, c.name, c.type, c.nullable, false});
    return scope;
}

} // namespace

Policy parse_policy(std::string_view text) {
    TokenStream ts(text);
    Policy p = parse_one(ts);
    if (!ts.at_end()) ts.fail("unexpected '" + ts.peek().text + "' after policy");
    return p;
}

std::vector<Policy> parse_policy_file(std::string_view text) {
    TokenStream ts(text);
    std::vector<Policy> out;
    while (!ts.at_end()) out.push_back(parse_one(ts));
    return out;
}

Policy normalize_policy(const Policy &p) {
    Policy out = p;
    int next = 0;
    hoist(out.constraint, out, next);
    return out;
}

std::string render_policy(const Policy &p) {
    std::string out;
    if (!p.name.empty()) out += "NAME " + p.name + "\n";
    if (p.target == TargetKind::Over) {
        out += "POLICY OVER " + join_list(p.relations);
    } else {
        out += "POLICY UPDATE " + p.update_relation() + " AS " + p.new_alias;
    }
    if (!p.dimensions.empty()) {
        std::vector<std::string> dims;
        for (const auto &d : p.dimensions) dims.push_back(render_dimension(d));
        out += "\nDIMENSION " + join_list(dims);
    }
    if (!p.aggs.empty()) {
        std::vector<std::string> aggs;
        for (const auto &a : p.aggs) aggs.push_back(render_agg_call(a) + " AS " + a.alias);
        out += "\nAGG " + join_list(aggs);
    }
    out += "\nCONSTRAINT " + render_expr(p.constraint);
    out += p.on_fail == OnFail::KillQuery ? "\nON FAIL KILL QUERY" : "\nON FAIL KILL ROW";
    return out;
}

std::string describe_policy(const Policy &p) {
    std::string out = "name=" + p.name;
    if (p.target == TargetKind::Over) {
        out += " target=over(" + join_list(p.relations) + ")";
    } else {
        out += " target=update(" + p.update_relation() + " AS " + p.new_alias + ")";
    }
    std::vector<std::string> dims;
    for (const auto &d : p.dimensions)
        dims.push_back(render_dimension(d) + (d.mode == BindingMode::Provenance ? ":provenance" : ":catalog"));
    out += " dims=[" + join_list(dims) + "]";
    std::vector<std::string> aggs;
    for (const auto &a : p.aggs) aggs.push_back(render_agg_call(a) + " AS " + a.alias);
    out += " aggs=[" + join_list(aggs) + "]";
    out += " constraint=" + render_expr(p.constraint);
    out += " on_fail=" + std::string(on_fail_name(p.on_fail));
    return out;
}

bool applicable(const Policy &p, const QueryStatement &q) {
    if (p.target == TargetKind::Update) {
        return q.kind == StatementKind::Update && to_lower(q.plan.relation) == p.update_relation();
    }
    if (q.kind != StatementKind::Select) return false;
    auto scanned = referenced_relations(q.plan);
    return std::all_of(p.relations.begin(), p.relations.end(), [&](const std::string &r) { return scanned.count(r) > 0; });
}

PreparedPolicy prepare_policy(const Policy &input, const Database &db) {
    PreparedPolicy out;
    out.policy = normalize_policy(input);
    Policy &p = out.policy;

    for (const auto &r : p.relations) db.relation(r);
    for (const auto &d : p.dimensions) db.relation(d.relation);

    std::vector<AggScopeSource> sources;
    std::vector<std::pair<std::string, std::string>> synonyms;
    if (p.target == TargetKind::Over) {
        for (const auto &r : p.relations) sources.push_back({r, r, AggSource::Target});
        for (const auto &d : p.dimensions) {
            if (d.mode == BindingMode::Provenance && d.alias != d.relation) synonyms.emplace_back(d.alias, d.relation);
        }
    } else {
        const Dimension *old = p.old_dimension();
        sources.push_back({old->alias, p.update_relation(), AggSource::OldImage});
        sources.push_back({p.new_alias, p.update_relation(), AggSource::NewImage});
    }

    Scope agg_scope;
    agg_scope.synonyms = synonyms;
    agg_scope.allow_kill = false;
    std::vector<std::size_t> source_end;
    for (const auto &s : sources) {
        Scope one = relation_scope(db.relation(s.relation), s.qualifier);
        agg_scope.columns.insert(agg_scope.columns.end(), one.columns.begin(), one.columns.end());
        source_end.push_back(agg_scope.columns.size());
    }
    auto source_of_slot = [&](int slot) {
        return static_cast<std::size_t>(std::upper_bound(source_end.begin(), source_end.end(), static_cast<std::size_t>(slot)) -
                                        source_end.begin());
    };

    for (auto &agg : p.aggs) {
        std::set<std::size_t> used;
        if (!agg.star) {
            AggExpr probe = agg;
            bind_agg(probe, agg_scope);
            visit_columns(probe.arg, [&](const Expr &c) { used.insert(source_of_slot(c.slot)); });
        }
        std::size_t source = 0;
        if (used.size() > 1) {
            throw ValidationError("aggregate '" + render_agg_call(agg) + "' mixes columns of several relations");
        } else if (used.size() == 1) {
            source = *used.begin();
        } else if (p.target == TargetKind::Over && p.relations.size() > 1) {
            throw ValidationError("aggregate '" + render_agg_call(agg) + "' does not say which OVER relation it counts");
        }
        Scope one = relation_scope(db.relation(sources[source].relation), sources[source].qualifier);
        one.synonyms = synonyms;
        one.allow_kill = false;
        bind_agg(agg, one);
        out.agg_sources.push_back(sources[source].kind);
        out.agg_relations.push_back(sources[source].relation);
    }

    Scope scope;
    scope.allow_kill = false;
    for (const auto &a : p.aggs) scope.columns.push_back(ScopeColumn{"", a.alias, a.result_type(), a.result_nullable(), false});
    for (std::size_t i = 0; i < p.dimensions.size(); ++i) {
        const auto &d = p.dimensions[i];
        if (d.mode != BindingMode::Catalog) continue;
        out.catalog_dims.push_back(i);
        out.catalog_offsets.push_back(scope.columns.size());
        Scope one = relation_scope(db.relation(d.relation), d.alias);
        scope.columns.insert(scope.columns.end(), one.columns.begin(), one.columns.end());
    }
    if (p.target == TargetKind::Update) {
        const Relation &rel = db.relation(p.update_relation());
        out.old_offset = scope.columns.size();
        Scope old = relation_scope(rel, p.old_dimension()->alias);
        scope.columns.insert(scope.columns.end(), old.columns.begin(), old.columns.end());
        out.new_offset = scope.columns.size();
        Scope img = relation_scope(rel, p.new_alias);
        scope.columns.insert(scope.columns.end(), img.columns.begin(), img.columns.end());
    }
    out.width = scope.columns.size();

    visit_columns(p.constraint, [&](const Expr &c) {
        try {
            resolve_column(scope, c.qualifier, c.name);
        } catch (const ValidationError &) {
            bool target_column = false;
            try {
                resolve_column(agg_scope, c.qualifier, c.name);
                target_column = true;
            } catch (const ValidationError &) {
            }
            if (target_column)
                throw ValidationError("column '" + render_expr(c) + "' of a target relation must appear inside an aggregate");
            throw;
        }
    });
    bind_expr(p.constraint, scope);
    if (p.constraint.type != ValueType::Boolean && p.constraint.type != ValueType::Null)
        throw ValidationError("constraint must be boolean");
    out.uses_current_user = references_current_user(p.constraint);
    for (const auto &a : p.aggs) out.uses_current_user = out.uses_current_user || (!a.star && references_current_user(a.arg));
    return out;
}

const Policy &PolicySet::add(Policy p) {
    if (p.name.empty()) {
        for (std::size_t k = policies_.size() + 1;; ++k) {
            std::string candidate = "policy" + std::to_string(k);
            if (!find(candidate)) {
                p.name = candidate;
                break;
            }
        }
    } else if (find(p.name)) {
        throw ValidationError("duplicate policy name '" + p.name + "'");
    }
    policies_.push_back(std::move(p));
    return policies_.back();
}

const Policy *PolicySet::find(std::string_view name) const {
    for (const auto &p : policies_) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

} // namespace dfc
