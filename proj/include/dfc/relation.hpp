#pragma once

#include "dfc/value.hpp"

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dfc {

std::string to_lower(std::string_view s);

struct ColumnDef {
    std::string name;
    ValueType type = ValueType::Integer;
    bool nullable = false;

    bool operator==(const ColumnDef &) const = default;
};

class Schema {
public:
    Schema() = default;
    /// Names are lowercased; throws ValidationError on duplicate column names.
    Schema(std::string relation_name, std::vector<ColumnDef> columns);

    const std::string &relation_name() const { return relation_name_; }
    const std::vector<ColumnDef> &columns() const { return columns_; }
    std::size_t arity() const { return columns_.size(); }
    std::optional<std::size_t> find(std::string_view column) const;

    /// Throws ValidationError when the row does not match arity, types or nullability.
    void check_row(const Row &row) const;

    bool operator==(const Schema &) const = default;

private:
    std::string relation_name_;
    std::vector<ColumnDef> columns_;
};

/// Identity of one stored tuple. `relation` indexes Database::relations().
struct TupleId {
    std::uint32_t relation = 0;
    std::uint64_t ordinal = 0;

    auto operator<=>(const TupleId &) const = default;
};

struct StoredRow {
    std::uint64_t ordinal = 0;
    Row values;
};

class Relation {
public:
    Relation() = default;
    explicit Relation(Schema schema) : schema_(std::move(schema)) {}

    const Schema &schema() const { return schema_; }
    const std::string &name() const { return schema_.relation_name(); }
    const std::vector<StoredRow> &rows() const { return rows_; }
    std::size_t size() const { return rows_.size(); }

    /// Appends a row and returns its ordinal. Ordinals are never reused.
    std::uint64_t append(Row values);
    const Row *find(std::uint64_t ordinal) const;
    /// Replaces the values of an existing tuple in place; identity is preserved.
    void update(std::uint64_t ordinal, Row values);

    bool operator==(const Relation &other) const;

private:
    Schema schema_;
    std::vector<StoredRow> rows_;
    std::uint64_t next_ordinal_ = 0;
};

class Database {
public:
    /// Registers a relation; names are case-insensitive and must be unique.
    std::uint32_t add_relation(Relation relation);

    std::optional<std::uint32_t> find(std::string_view name) const;
    const Relation &relation(std::uint32_t id) const { return relations_.at(id); }
    Relation &relation(std::uint32_t id) { return relations_.at(id); }
    const Relation &relation(std::string_view name) const;
    Relation &relation(std::string_view name);
    const std::vector<Relation> &relations() const { return relations_; }

    /// Values of a stored tuple; throws if the tuple does not exist.
    const Row &tuple(TupleId id) const;
    /// Short label such as `a1`: lowercased relation name followed by the 1-based ordinal.
    std::string tuple_label(TupleId id) const;

    bool operator==(const Database &) const = default;

private:
    std::vector<Relation> relations_;
};

} // namespace dfc
