#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dfc {

enum class ValueType : std::uint8_t { Null, Integer, Decimal, Text, Boolean };

std::string_view type_name(ValueType type);
std::optional<ValueType> parse_type_name(std::string_view name);

inline bool is_numeric(ValueType t) { return t == ValueType::Integer || t == ValueType::Decimal; }

/// True when values of the two types may be compared. Null is compatible with everything.
bool comparable(ValueType a, ValueType b);

class Value {
public:
    Value() = default;

    static Value null() { return {}; }
    static Value integer(std::int64_t v) {
        Value out(ValueType::Integer);
        out.int_ = v;
        return out;
    }
    static Value decimal(double v) {
        Value out(ValueType::Decimal);
        out.dec_ = v;
        return out;
    }
    static Value text(std::string v) {
        Value out(ValueType::Text);
        out.text_ = std::make_shared<const std::string>(std::move(v));
        return out;
    }
    static Value boolean(bool v) {
        Value out(ValueType::Boolean);
        out.int_ = v ? 1 : 0;
        return out;
    }

    ValueType type() const { return type_; }
    bool is_null() const { return type_ == ValueType::Null; }

    std::int64_t as_integer() const;
    /// Integer or decimal payload widened to double.
    double as_decimal() const;
    const std::string &as_text() const;
    bool as_boolean() const;

    /// Structural equality: same type and same payload.
    bool operator==(const Value &other) const;

    /// Display form: NULL, true/false, raw text, shortest round-trip decimals.
    std::string to_string() const;
    /// SQL literal form: quoted text with doubled quotes, NULL, TRUE/FALSE.
    std::string to_sql_literal() const;

    std::size_t hash() const;

private:
    explicit Value(ValueType t) : type_(t) {}
    ValueType type_ = ValueType::Null;
    union {
        std::int64_t int_ = 0;
        double dec_;
    };
    // Text is shared so that copying rows does not copy strings.
    std::shared_ptr<const std::string> text_;
};

/// Three-way comparison of two non-null comparable values. Integers and decimals
/// compare numerically. Throws TypeError for incompatible types or null operands.
int compare_values(const Value &a, const Value &b);

/// Shortest decimal text that re-parses to the same double and always carries a '.' or exponent.
std::string format_decimal(double v);

struct ValueHash {
    std::size_t operator()(const Value &v) const { return v.hash(); }
};

using Row = std::vector<Value>;

struct RowHash {
    std::size_t operator()(const Row &row) const;
};

std::string render_row(const Row &row);

} // namespace dfc
