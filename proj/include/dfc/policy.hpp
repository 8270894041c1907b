#pragma once

#include "dfc/plan.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dfc {

enum class OnFail { KillQuery, KillRow };
enum class TargetKind { Over, Update };

/// Provenance dimensions range over the tuples that contributed to an output row;
/// catalog dimensions range over the whole relation.
enum class BindingMode { Provenance, Catalog };

struct Dimension {
    std::string relation;
    std::string alias;
    BindingMode mode = BindingMode::Catalog;

    bool operator==(const Dimension &) const = default;
};

struct Policy {
    std::string name;
    TargetKind target = TargetKind::Over;
    /// OVER relations, or the single updated relation.
    std::vector<std::string> relations;
    /// Alias of the updated image (`newu`); empty for OVER policies.
    std::string new_alias;
    std::vector<Dimension> dimensions;
    std::vector<AggExpr> aggs;
    Expr constraint;
    OnFail on_fail = OnFail::KillRow;

    const std::string &update_relation() const { return relations.front(); }
    /// The prior-version dimension of an UPDATE policy, if any.
    const Dimension *old_dimension() const;

    bool operator==(const Policy &) const = default;
};

/// Parses exactly one policy, optionally preceded by `NAME <identifier>`:
///
///   POLICY OVER r1[, r2 ...] | POLICY UPDATE r [AS] alias
///   [DIMENSION r [[AS] alias][, ...]]
///   [AGG aggregate-call [AS] alias[, ...]]
///   CONSTRAINT boolean-expr
///   ON FAIL KILL QUERY | KILL ROW
///
/// Schema-free checks only; see prepare_policy.
Policy parse_policy(std::string_view text);
/// Parses a `.dfc` file holding any number of policies.
std::vector<Policy> parse_policy_file(std::string_view text);

/// Hoists aggregate calls out of the constraint into `aggs` as `__agg0`, `__agg1`, ...
/// Identical calls share one entry. Idempotent.
Policy normalize_policy(const Policy &p);

/// Canonical policy text, parseable by parse_policy.
std::string render_policy(const Policy &p);
/// One-line structural dump including inferred binding modes (used by golden tests).
std::string describe_policy(const Policy &p);

std::string_view on_fail_name(OnFail f);

/// True iff the policy governs the statement: OVER policies apply to selects that scan
/// every listed relation, UPDATE policies to updates of their relation.
bool applicable(const Policy &p, const QueryStatement &q);

enum class AggSource { Target, OldImage, NewImage };

/// A normalized policy bound against a database schema.
///
/// Each agg argument is bound against the plain row layout of its source relation.
/// The constraint is bound against the layout
///   [agg values][catalog dimension rows ...][old image][new image]
/// where the last two exist only for UPDATE policies.
struct PreparedPolicy {
    Policy policy;
    std::vector<AggSource> agg_sources;
    /// Relation each agg ranges over (the OVER relation or the updated relation).
    std::vector<std::string> agg_relations;
    std::vector<std::size_t> catalog_dims;
    std::vector<std::size_t> catalog_offsets;
    std::optional<std::size_t> old_offset;
    std::optional<std::size_t> new_offset;
    std::size_t width = 0;
    bool uses_current_user = false;
};

/// Normalizes and validates against the schema. Throws ValidationError.
PreparedPolicy prepare_policy(const Policy &p, const Database &db);

/// Ordered, uniquely named policies.
class PolicySet {
public:
    /// Unnamed policies get `policy<k>`; duplicate names throw ValidationError.
    const Policy &add(Policy p);
    const std::vector<Policy> &policies() const { return policies_; }
    const Policy *find(std::string_view name) const;
    bool empty() const { return policies_.empty(); }
    std::size_t size() const { return policies_.size(); }

private:
    std::vector<Policy> policies_;
};

} // namespace dfc
