#include "dfc/executor.hpp"

#include "dfc/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <functional>
#include <span>
#include <unordered_map>
#include <unordered_set>

namespace dfc {

std::string ExecStats::to_json() const {
    nlohmann::json j = {{"rows_scanned", rows_scanned},
                        {"rows_joined", rows_joined},
                        {"rows_output", rows_output},
                        {"annotations_created", annotations_created},
                        {"wall_time_ms", wall_ms()}};
    return j.dump();
}

namespace {

enum class Side { None, Left, Right, Both };

Side side_of(const Expr &e, std::size_t left_width) {
    Side side = Side::None;
    visit_columns(e, [&](const Expr &c) {
        Side s = static_cast<std::size_t>(c.slot) < left_width ? Side::Left : Side::Right;
        if (side == Side::None) side = s;
        else if (side != s) side = Side::Both;
    });
    return side;
}

Expr shift_slots(const Expr &e, std::size_t by) {
    return map_columns(e, [by](const Expr &c) {
        Expr out = c;
        out.slot -= static_cast<int>(by);
        return out;
    });
}

/// Equality conjuncts usable as hash keys plus whatever remains of the predicate.
struct JoinKeys {
    std::vector<Expr> left;
    std::vector<Expr> right;
    std::vector<bool> widen;
    Expr residual = Expr::constant(Value::boolean(true));
};

JoinKeys analyze_join(const Expr &predicate, std::size_t left_width) {
    JoinKeys keys;
    std::vector<Expr> rest;
    for (auto &c : split_conjuncts(predicate)) {
        if (c.is_true_literal()) continue;
        if (c.kind == ExprKind::Binary && c.op == Op::Eq) {
            Side a = side_of(c.args[0], left_width);
            Side b = side_of(c.args[1], left_width);
            if ((a == Side::Left && b == Side::Right) || (a == Side::Right && b == Side::Left)) {
                const Expr &l = a == Side::Left ? c.args[0] : c.args[1];
                const Expr &r = a == Side::Left ? c.args[1] : c.args[0];
                keys.left.push_back(l);
                keys.right.push_back(shift_slots(r, left_width));
                keys.widen.push_back(l.type != r.type && is_numeric(l.type) && is_numeric(r.type));
                continue;
            }
        }
        rest.push_back(std::move(c));
    }
    keys.residual = conjoin(std::move(rest));
    return keys;
}

std::string column_key(const std::string &qualifier, const std::string &name) { return qualifier + "." + name; }

/// Columns read anywhere in the plan, keyed by qualifier and name. Scans copy only
/// these; the rest of the row stays NULL. `all` is set when some subtree exposes its
/// scan columns without a projection in between.
struct ColumnUse {
    std::unordered_set<std::string> keys;
    bool all = false;

    void add(const Expr &e) {
        visit_columns(e, [&](const Expr &c) { keys.insert(column_key(c.qualifier, c.name)); });
    }

    void collect(const Plan &p, bool exposed) {
        if (exposed && p.kind != PlanKind::Project && p.kind != PlanKind::Aggregate && p.kind != PlanKind::Update) all = true;
        add(p.predicate);
        for (const auto &item : p.items) add(item.expr);
        for (const auto &k : p.group_keys) add(k);
        for (const auto &a : p.aggs) add(a.arg);
        for (const auto &a : p.assignments) add(a.value);
        if (p.guard) add(*p.guard);
        for (const auto &in : p.inputs) collect(in, (exposed && p.kind == PlanKind::Distinct) || !in.output_alias.empty());
    }
};

using Sink = std::function<void(Row &)>;

/// Push-based evaluator: every operator streams rows into its consumer through a
/// reused buffer. Only hash-join build sides and aggregation state are stored.
class Executor {
public:
    Executor(const Database &db, const Session &session, ExecOptions options, ExecStats &stats)
        : db_(db), options_(options), stats_(stats) {
        ctx_.session = &session;
    }

    void prune_for(const Plan &root) {
        uses_.collect(root, true);
        prune_ = !uses_.all;
    }

    void produce(const Plan &p, const Sink &sink) {
        switch (p.kind) {
        case PlanKind::Scan: return scan(p, sink);
        case PlanKind::Filter: return filter(p, sink);
        case PlanKind::Project: return project(p, sink);
        case PlanKind::Join: return join(p, sink);
        case PlanKind::Aggregate: return aggregate(p, sink);
        case PlanKind::Distinct: return distinct(p, sink);
        case PlanKind::Update: throw Error("execute: UPDATE plans run through execute_update");
        }
    }

private:
    void check_limit(std::size_t n) const {
        if (n > options_.row_limit)
            throw ResourceError("operator produced more than " + std::to_string(options_.row_limit) + " rows");
    }

    void scan(const Plan &p, const Sink &sink) {
        const Relation &rel = db_.relation(p.relation);
        const std::size_t width = p.output.size();
        std::vector<std::size_t> copy;
        for (std::size_t i = 0; i + 1 < width; ++i) {
            if (!prune_ || uses_.keys.count(column_key(p.output[i].qualifier, p.output[i].name))) copy.push_back(i);
        }
        const bool want_tid = !prune_ || uses_.keys.count(column_key(p.output[width - 1].qualifier, p.output[width - 1].name));
        stats_.rows_scanned += rel.size();
        check_limit(rel.size());
        Row row(width);
        for (const auto &stored : rel.rows()) {
            for (std::size_t i : copy) row[i] = stored.values[i];
            if (want_tid) row[width - 1] = Value::integer(static_cast<std::int64_t>(stored.ordinal));
            sink(row);
        }
    }

    void filter(const Plan &p, const Sink &sink) {
        produce(p.input(), [&](Row &row) {
            if (is_true(eval_scalar(p.predicate, row, ctx_))) sink(row);
        });
    }

    void project(const Plan &p, const Sink &sink) {
        Row out(p.items.size());
        produce(p.input(), [&](Row &row) {
            for (std::size_t i = 0; i < p.items.size(); ++i) out[i] = eval_scalar(p.items[i].expr, row, ctx_);
            sink(out);
        });
    }

    bool make_key(const std::vector<Expr> &exprs, const std::vector<bool> &widen, std::span<const Value> row, Row &key) {
        key.clear();
        for (std::size_t i = 0; i < exprs.size(); ++i) {
            Value v = eval_scalar(exprs[i], row, ctx_);
            if (v.is_null()) return false;
            if (widen[i] && v.type() == ValueType::Integer) v = Value::decimal(v.as_decimal());
            key.push_back(std::move(v));
        }
        return true;
    }

    static std::size_t key_hash(std::span<const Value> key) {
        std::size_t h = 0x9e3779b97f4a7c15ULL;
        for (const auto &v : key) h ^= v.hash() + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        return h;
    }

    /// Rows stored back to back, keeping only the slots read somewhere in the plan.
    struct FlatRows {
        std::vector<std::size_t> slots;
        std::size_t count = 0;
        std::vector<Value> values;

        void append(std::span<const Value> row) {
            for (std::size_t s : slots) values.push_back(row[s]);
            ++count;
        }
        /// Writes row `i` into `dst` starting at `offset`; unkept slots are left alone.
        void load(std::size_t i, Row &dst, std::size_t offset) const {
            const Value *src = values.data() + i * slots.size();
            for (std::size_t k = 0; k < slots.size(); ++k) dst[offset + slots[k]] = src[k];
        }
    };

    /// Hash index over FlatRows; rows with equal key hash are chained in row order.
    struct KeyIndex {
        static constexpr std::size_t kEnd = static_cast<std::size_t>(-1);
        std::size_t arity = 0;
        std::vector<Value> keys;
        std::unordered_map<std::size_t, std::size_t> head;
        std::vector<std::size_t> next;

        std::size_t first(std::span<const Value> key) const {
            auto it = head.find(key_hash(key));
            return it == head.end() ? kEnd : it->second;
        }
        bool matches(std::size_t i, std::span<const Value> key) const {
            return std::equal(key.begin(), key.end(), keys.begin() + static_cast<std::ptrdiff_t>(i * arity));
        }
    };

    std::vector<std::size_t> used_slots(const Plan &p) const {
        std::vector<std::size_t> slots;
        for (std::size_t i = 0; i < p.output.size(); ++i) {
            if (!prune_ || uses_.keys.count(column_key(p.output[i].qualifier, p.output[i].name))) slots.push_back(i);
        }
        return slots;
    }

    FlatRows materialize(const Plan &p) {
        FlatRows rows;
        rows.slots = used_slots(p);
        if (std::size_t n = estimate_rows(p); n != static_cast<std::size_t>(-1)) rows.values.reserve(n * rows.slots.size());
        produce(p, [&](Row &row) {
            rows.append(row);
            check_limit(rows.count);
        });
        return rows;
    }

    KeyIndex index_rows(const FlatRows &rows, std::size_t width, const std::vector<Expr> &exprs,
                        const std::vector<bool> &widen) {
        KeyIndex index;
        index.arity = exprs.size();
        index.keys.resize(rows.count * index.arity);
        index.next.assign(rows.count, KeyIndex::kEnd);
        index.head.reserve(rows.count);
        Row key;
        Row scratch(width);
        for (std::size_t i = rows.count; i-- > 0;) {
            rows.load(i, scratch, 0);
            if (!make_key(exprs, widen, scratch, key)) continue;
            std::copy(key.begin(), key.end(), index.keys.begin() + static_cast<std::ptrdiff_t>(i * index.arity));
            auto [it, inserted] = index.head.try_emplace(key_hash(key), i);
            if (!inserted) {
                index.next[i] = it->second;
                it->second = i;
            }
        }
        return index;
    }

    /// Upper bound on the rows a subtree produces, when cheap to tell.
    std::size_t estimate_rows(const Plan &p) const {
        if (p.kind == PlanKind::Scan) return db_.relation(p.relation).size();
        if (p.kind == PlanKind::Filter || p.kind == PlanKind::Project) return estimate_rows(p.input());
        return static_cast<std::size_t>(-1);
    }

    /// Inner and mark joins. Output is left-major: for each left row in order, its
    /// matches in right order. The smaller input is hashed.
    void join(const Plan &p, const Sink &sink) {
        const std::size_t lw = p.input(0).output.size();
        const std::size_t rw = p.input(1).output.size();
        JoinKeys keys = analyze_join(p.predicate, lw);
        const bool residual = !keys.residual.is_true_literal();
        const bool mark = p.join_kind == JoinKind::Mark;
        const bool keyed = !keys.left.empty();
        const std::vector<std::size_t> lslots = used_slots(p.input(0));
        const std::vector<std::size_t> rslots = used_slots(p.input(1));
        std::size_t produced = 0;
        Row combined(lw + rw);
        Row key;
        auto passes = [&]() { return !residual || is_true(eval_scalar(keys.residual, combined, ctx_)); };
        auto deliver = [&]() {
            ++produced;
            check_limit(produced);
            sink(combined);
        };

        std::optional<FlatRows> left;
        if (keyed && !mark) {
            left = materialize(p.input(0));
            if (left->count * 2 < estimate_rows(p.input(1))) {
                KeyIndex index = index_rows(*left, lw, keys.left, keys.widen);
                FlatRows kept;
                kept.slots = rslots;
                std::vector<std::pair<std::size_t, std::size_t>> pairs;
                produce(p.input(1), [&](Row &r) {
                    if (!make_key(keys.right, keys.widen, r, key)) return;
                    bool stored = false;
                    for (std::size_t li = index.first(key); li != KeyIndex::kEnd; li = index.next[li]) {
                        if (!index.matches(li, key)) continue;
                        if (residual) {
                            left->load(li, combined, 0);
                            for (std::size_t s : rslots) combined[lw + s] = r[s];
                            if (!passes()) continue;
                        }
                        if (!stored) {
                            kept.append(r);
                            stored = true;
                        }
                        pairs.emplace_back(li, kept.count - 1);
                        check_limit(pairs.size());
                    }
                });
                std::stable_sort(pairs.begin(), pairs.end(), [](const auto &a, const auto &b) { return a.first < b.first; });
                std::size_t loaded = KeyIndex::kEnd;
                for (const auto &[li, ri] : pairs) {
                    if (li != loaded) {
                        left->load(li, combined, 0);
                        loaded = li;
                    }
                    kept.load(ri, combined, lw);
                    deliver();
                }
                stats_.rows_joined += produced;
                return;
            }
        }

        FlatRows right = materialize(p.input(1));
        KeyIndex index;
        if (keyed) index = index_rows(right, rw, keys.right, keys.widen);
        // Expects the left row already in the first lw slots of `combined`.
        auto probe = [&](std::span<const Value> l) {
            bool marked = false;
            auto visit = [&](std::size_t ri) {
                right.load(ri, combined, lw);
                if (!passes()) return true;
                if (mark) {
                    marked = true;
                    return false;
                }
                deliver();
                return true;
            };
            if (keyed) {
                if (make_key(keys.left, keys.widen, l, key)) {
                    for (std::size_t ri = index.first(key); ri != KeyIndex::kEnd; ri = index.next[ri]) {
                        if (index.matches(ri, key) && !visit(ri)) break;
                    }
                }
            } else {
                for (std::size_t ri = 0; ri < right.count; ++ri) {
                    if (!visit(ri)) break;
                }
            }
            if (mark) {
                Row out(l.begin(), l.end());
                out.push_back(Value::boolean(marked));
                ++produced;
                sink(out);
            }
        };
        if (left) {
            for (std::size_t i = 0; i < left->count; ++i) {
                left->load(i, combined, 0);
                probe(std::span<const Value>(combined).first(lw));
            }
        } else {
            produce(p.input(0), [&](Row &l) {
                for (std::size_t s : lslots) combined[s] = l[s];
                probe(l);
            });
        }
        stats_.rows_joined += produced;
    }

    void aggregate(const Plan &p, const Sink &sink) {
        std::unordered_map<Row, std::size_t, RowHash> group_of;
        std::vector<Row> keys;
        std::vector<std::vector<Accumulator>> accs;
        auto fresh = [&]() {
            std::vector<Accumulator> a;
            a.reserve(p.aggs.size());
            for (const auto &agg : p.aggs) a.emplace_back(agg.func);
            return a;
        };
        if (p.group_keys.empty()) {
            keys.emplace_back();
            accs.push_back(fresh());
        }
        Row key;
        produce(p.input(), [&](Row &row) {
            std::size_t g = 0;
            if (!p.group_keys.empty()) {
                key.clear();
                for (const auto &k : p.group_keys) key.push_back(row[k.slot]);
                auto it = group_of.find(key);
                if (it == group_of.end()) {
                    it = group_of.emplace(key, keys.size()).first;
                    keys.push_back(key);
                    accs.push_back(fresh());
                    check_limit(keys.size());
                }
                g = it->second;
            }
            for (std::size_t i = 0; i < p.aggs.size(); ++i) accs[g][i].add(agg_input(p.aggs[i], row, ctx_));
        });
        for (std::size_t g = 0; g < keys.size(); ++g) {
            Row r = std::move(keys[g]);
            for (std::size_t i = 0; i < p.aggs.size(); ++i) r.push_back(agg_result(p.aggs[i], accs[g][i]));
            sink(r);
        }
    }

    void distinct(const Plan &p, const Sink &sink) {
        std::unordered_set<Row, RowHash> seen;
        produce(p.input(), [&](Row &row) {
            if (seen.insert(row).second) sink(row);
        });
    }

    const Database &db_;
    ExecOptions options_;
    ExecStats &stats_;
    EvalContext ctx_;
    ColumnUse uses_;
    bool prune_ = false;
};

Value coerce_to(const Value &v, ValueType type) {
    if (type == ValueType::Decimal && v.type() == ValueType::Integer) return Value::decimal(v.as_decimal());
    return v;
}

} // namespace

QueryResult execute(const Plan &plan, const Database &db, const Session &session, ExecOptions options) {
    auto start = std::chrono::steady_clock::now();
    QueryResult result;
    Executor ex(db, session, options, result.stats);
    ex.prune_for(plan);
    std::vector<std::size_t> visible;
    for (std::size_t i = 0; i < plan.output.size(); ++i) {
        if (!plan.output[i].hidden) {
            visible.push_back(i);
            result.columns.push_back(plan.output[i]);
        }
    }
    ex.produce(plan, [&](Row &row) {
        Row r;
        r.reserve(visible.size());
        for (auto i : visible) r.push_back(row[i]);
        result.rows.push_back(std::move(r));
    });
    result.stats.rows_output = result.rows.size();
    result.stats.wall_time = std::chrono::steady_clock::now() - start;
    return result;
}

UpdateResult execute_update(const Plan &plan, Database &db, const Session &session, ExecOptions options) {
    if (plan.kind != PlanKind::Update) throw Error("execute_update: not an UPDATE plan");
    auto start = std::chrono::steady_clock::now();
    UpdateResult result;
    Relation &rel = db.relation(plan.relation);
    const Schema &schema = rel.schema();
    std::vector<std::size_t> targets;
    for (const auto &a : plan.assignments) targets.push_back(*schema.find(a.column));

    EvalContext ctx;
    ctx.session = &session;
    std::vector<std::pair<std::uint64_t, Row>> pending;
    Row row;
    for (const auto &stored : rel.rows()) {
        ++result.stats.rows_scanned;
        row.assign(stored.values.begin(), stored.values.end());
        row.push_back(Value::integer(static_cast<std::int64_t>(stored.ordinal)));
        if (!is_true(eval_scalar(plan.predicate, row, ctx))) continue;
        ++result.candidates;
        if (plan.guard && !is_true(eval_scalar(*plan.guard, row, ctx))) {
            ++result.skipped;
            result.skipped_ordinals.push_back(stored.ordinal);
            continue;
        }
        Row next = stored.values;
        for (std::size_t i = 0; i < targets.size(); ++i)
            next[targets[i]] = coerce_to(eval_scalar(plan.assignments[i].value, row, ctx), schema.columns()[targets[i]].type);
        schema.check_row(next);
        pending.emplace_back(stored.ordinal, std::move(next));
        if (pending.size() > options.row_limit) throw ResourceError("update touches too many rows");
    }
    for (auto &[ordinal, values] : pending) rel.update(ordinal, std::move(values));
    result.updated = pending.size();
    result.stats.rows_output = result.updated;
    result.stats.wall_time = std::chrono::steady_clock::now() - start;
    return result;
}

} // namespace dfc
