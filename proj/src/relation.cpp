#include "dfc/relation.hpp"

#include "dfc/errors.hpp"

#include <algorithm>
#include <cctype>

namespace dfc {

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

Schema::Schema(std::string relation_name, std::vector<ColumnDef> columns)
    : relation_name_(to_lower(relation_name)), columns_(std::move(columns)) {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        columns_[i].name = to_lower(columns_[i].name);
        for (std::size_t j = 0; j < i; ++j) {
            if (columns_[j].name == columns_[i].name)
                throw ValidationError("duplicate column '" + columns_[i].name + "' in relation '" +
                                      relation_name_ + "'");
        }
    }
}

std::optional<std::size_t> Schema::find(std::string_view column) const {
    auto lowered = to_lower(column);
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        if (columns_[i].name == lowered) return i;
    }
    return std::nullopt;
}

void Schema::check_row(const Row &row) const {
    if (row.size() != columns_.size())
        throw ValidationError("relation '" + relation_name_ + "' expects " + std::to_string(columns_.size()) +
                              " values, got " + std::to_string(row.size()));
    for (std::size_t i = 0; i < row.size(); ++i) {
        const auto &col = columns_[i];
        if (row[i].is_null()) {
            if (!col.nullable)
                throw ValidationError("NULL in non-nullable column '" + relation_name_ + "." + col.name + "'");
            continue;
        }
        if (row[i].type() != col.type)
            throw ValidationError("column '" + relation_name_ + "." + col.name + "' expects " +
                                  std::string(type_name(col.type)) + ", got " +
                                  std::string(type_name(row[i].type())));
    }
}

std::uint64_t Relation::append(Row values) {
    schema_.check_row(values);
    auto ordinal = next_ordinal_++;
    rows_.push_back(StoredRow{ordinal, std::move(values)});
    return ordinal;
}

const Row *Relation::find(std::uint64_t ordinal) const {
    // Rows are append-only and therefore sorted by ordinal.
    auto it = std::lower_bound(rows_.begin(), rows_.end(), ordinal,
                               [](const StoredRow &r, std::uint64_t o) { return r.ordinal < o; });
    if (it == rows_.end() || it->ordinal != ordinal) return nullptr;
    return &it->values;
}

void Relation::update(std::uint64_t ordinal, Row values) {
    schema_.check_row(values);
    auto it = std::lower_bound(rows_.begin(), rows_.end(), ordinal,
                               [](const StoredRow &r, std::uint64_t o) { return r.ordinal < o; });
    if (it == rows_.end() || it->ordinal != ordinal)
        throw Error("no tuple " + std::to_string(ordinal) + " in relation '" + name() + "'");
    it->values = std::move(values);
}

bool Relation::operator==(const Relation &other) const {
    if (!(schema_ == other.schema_) || rows_.size() != other.rows_.size()) return false;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        if (rows_[i].ordinal != other.rows_[i].ordinal || rows_[i].values != other.rows_[i].values) return false;
    }
    return true;
}

std::uint32_t Database::add_relation(Relation relation) {
    if (find(relation.name())) throw ValidationError("duplicate relation '" + relation.name() + "'");
    relations_.push_back(std::move(relation));
    return static_cast<std::uint32_t>(relations_.size() - 1);
}

std::optional<std::uint32_t> Database::find(std::string_view name) const {
    auto lowered = to_lower(name);
    for (std::size_t i = 0; i < relations_.size(); ++i) {
        if (relations_[i].name() == lowered) return static_cast<std::uint32_t>(i);
    }
    return std::nullopt;
}

const Relation &Database::relation(std::string_view name) const {
    auto id = find(name);
    if (!id) throw ValidationError("unknown relation '" + std::string(name) + "'");
    return relations_[*id];
}

Relation &Database::relation(std::string_view name) {
    auto id = find(name);
    if (!id) throw ValidationError("unknown relation '" + std::string(name) + "'");
    return relations_[*id];
}

const Row &Database::tuple(TupleId id) const {
    const Row *row = relation(id.relation).find(id.ordinal);
    if (!row) throw Error("dangling tuple id " + tuple_label(id));
    return *row;
}

std::string Database::tuple_label(TupleId id) const {
    return relations_.at(id.relation).name() + std::to_string(id.ordinal + 1);
}

} // namespace dfc
