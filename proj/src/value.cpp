#include "dfc/value.hpp"

#include "dfc/errors.hpp"

#include <charconv>
#include <cmath>
#include <functional>

namespace dfc {

std::string_view type_name(ValueType type) {
    switch (type) {
    case ValueType::Null: return "null";
    case ValueType::Integer: return "integer";
    case ValueType::Decimal: return "decimal";
    case ValueType::Text: return "text";
    case ValueType::Boolean: return "boolean";
    }
    return "?";
}

std::optional<ValueType> parse_type_name(std::string_view name) {
    if (name == "integer" || name == "int" || name == "bigint") return ValueType::Integer;
    if (name == "decimal" || name == "double" || name == "float" || name == "real") return ValueType::Decimal;
    if (name == "text" || name == "varchar" || name == "string") return ValueType::Text;
    if (name == "boolean" || name == "bool") return ValueType::Boolean;
    return std::nullopt;
}

bool comparable(ValueType a, ValueType b) {
    if (a == ValueType::Null || b == ValueType::Null) return true;
    if (is_numeric(a) && is_numeric(b)) return true;
    return a == b;
}

std::int64_t Value::as_integer() const {
    if (type_ == ValueType::Integer) return int_;
    throw TypeError("expected integer, got " + std::string(type_name(type())));
}

double Value::as_decimal() const {
    if (type_ == ValueType::Decimal) return dec_;
    if (type_ == ValueType::Integer) return static_cast<double>(int_);
    throw TypeError("expected numeric value, got " + std::string(type_name(type())));
}

bool Value::operator==(const Value &other) const {
    if (type_ != other.type_) return false;
    switch (type_) {
    case ValueType::Null: return true;
    case ValueType::Decimal: return dec_ == other.dec_;
    case ValueType::Text: return text_ == other.text_ || *text_ == *other.text_;
    default: return int_ == other.int_;
    }
}

const std::string &Value::as_text() const {
    if (type_ == ValueType::Text) return *text_;
    throw TypeError("expected text, got " + std::string(type_name(type())));
}

bool Value::as_boolean() const {
    if (type_ == ValueType::Boolean) return int_ != 0;
    throw TypeError("expected boolean, got " + std::string(type_name(type())));
}

std::string format_decimal(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    std::string out(buf, res.ptr);
    if (out.find_first_of(".e") == std::string::npos) out += ".0";
    return out;
}

std::string Value::to_string() const {
    switch (type()) {
    case ValueType::Null: return "NULL";
    case ValueType::Integer: return std::to_string(int_);
    case ValueType::Decimal: return format_decimal(dec_);
    case ValueType::Text: return *text_;
    case ValueType::Boolean: return int_ ? "true" : "false";
    }
    return {};
}

std::string Value::to_sql_literal() const {
    switch (type()) {
    case ValueType::Null: return "NULL";
    case ValueType::Boolean: return int_ ? "TRUE" : "FALSE";
    case ValueType::Text: {
        std::string out = "'";
        for (char c : *text_) {
            if (c == '\'') out += '\'';
            out += c;
        }
        return out + "'";
    }
    default: return to_string();
    }
}

std::size_t Value::hash() const {
    std::size_t seed = static_cast<std::size_t>(type_) * 0x9e3779b97f4a7c15ULL;
    switch (type()) {
    case ValueType::Null: break;
    case ValueType::Integer: seed ^= std::hash<std::int64_t>{}(int_); break;
    case ValueType::Decimal: seed ^= std::hash<double>{}(dec_); break;
    case ValueType::Text: seed ^= std::hash<std::string>{}(*text_); break;
    case ValueType::Boolean: seed ^= int_ ? 0x51ed27 : 0x1f3d5b; break;
    }
    return seed;
}

int compare_values(const Value &a, const Value &b) {
    if (a.is_null() || b.is_null()) throw TypeError("comparison with NULL operand");
    if (!comparable(a.type(), b.type()))
        throw TypeError("cannot compare " + std::string(type_name(a.type())) + " with " +
                        std::string(type_name(b.type())));
    switch (a.type()) {
    case ValueType::Integer:
        if (b.type() == ValueType::Integer) {
            auto x = a.as_integer(), y = b.as_integer();
            return x < y ? -1 : (x > y ? 1 : 0);
        }
        [[fallthrough]];
    case ValueType::Decimal: {
        double x = a.as_decimal(), y = b.as_decimal();
        return x < y ? -1 : (x > y ? 1 : 0);
    }
    case ValueType::Text: {
        int c = a.as_text().compare(b.as_text());
        return c < 0 ? -1 : (c > 0 ? 1 : 0);
    }
    case ValueType::Boolean: return static_cast<int>(a.as_boolean()) - static_cast<int>(b.as_boolean());
    case ValueType::Null: break;
    }
    return 0;
}

std::size_t RowHash::operator()(const Row &row) const {
    std::size_t seed = row.size();
    for (const auto &v : row) seed ^= v.hash() + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
    return seed;
}

std::string render_row(const Row &row) {
    std::string out;
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out += ", ";
        out += row[i].type() == ValueType::Text ? row[i].to_sql_literal() : row[i].to_string();
    }
    return out;
}

} // namespace dfc
