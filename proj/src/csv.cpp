#include "dfc/csv.hpp"

#include "dfc/errors.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace dfc {

namespace {

std::vector<std::string> split_words(std::string_view line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.emplace_back(line.substr(start, i - start));
    }
    return out;
}

struct Field {
    std::string text;
    bool quoted = false;
};

// Reads one CSV record. Returns false at end of input.
bool read_record(std::istream &in, std::vector<Field> &fields, int &line_no) {
    fields.clear();
    int c = in.peek();
    if (c == EOF) return false;
    ++line_no;
    Field field;
    bool in_quotes = false;
    while (true) {
        c = in.get();
        if (c == EOF) {
            if (in_quotes) throw SyntaxError("unterminated quoted field", line_no, 0);
            fields.push_back(std::move(field));
            return true;
        }
        char ch = static_cast<char>(c);
        if (in_quotes) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    in.get();
                    field.text += '"';
                } else {
                    in_quotes = false;
                }
            } else {
                if (ch == '\n') ++line_no;
                field.text += ch;
            }
            continue;
        }
        if (ch == '"' && field.text.empty() && !field.quoted) {
            in_quotes = true;
            field.quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(field));
            field = Field{};
        } else if (ch == '\r') {
            if (in.peek() == '\n') in.get();
            fields.push_back(std::move(field));
            return true;
        } else if (ch == '\n') {
            fields.push_back(std::move(field));
            return true;
        } else {
            field.text += ch;
        }
    }
}

Value parse_field(const Field &field, const ColumnDef &col, int line_no) {
    if (!field.quoted && field.text.empty()) return Value::null();
    const std::string &t = field.text;
    auto bad = [&]() {
        return SyntaxError("invalid " + std::string(type_name(col.type)) + " value '" + t + "' for column '" +
                               col.name + "'",
                           line_no, 0);
    };
    switch (col.type) {
    case ValueType::Integer: {
        std::int64_t v = 0;
        auto res = std::from_chars(t.data(), t.data() + t.size(), v);
        if (res.ec != std::errc() || res.ptr != t.data() + t.size()) throw bad();
        return Value::integer(v);
    }
    case ValueType::Decimal: {
        double v = 0;
        auto res = std::from_chars(t.data(), t.data() + t.size(), v);
        if (res.ec != std::errc() || res.ptr != t.data() + t.size()) throw bad();
        return Value::decimal(v);
    }
    case ValueType::Boolean:
        if (t == "true") return Value::boolean(true);
        if (t == "false") return Value::boolean(false);
        throw bad();
    case ValueType::Text: return Value::text(t);
    case ValueType::Null: break;
    }
    throw bad();
}

void write_field(std::ostream &out, const Value &v) {
    if (v.is_null()) return;
    if (v.type() != ValueType::Text) {
        out << v.to_string();
        return;
    }
    const auto &s = v.as_text();
    bool needs_quotes = s.empty() || s.find_first_of(",\"\r\n") != std::string::npos;
    if (!needs_quotes) {
        out << s;
        return;
    }
    out << '"';
    for (char c : s) {
        if (c == '"') out << '"';
        out << c;
    }
    out << '"';
}

} // namespace

std::vector<Schema> parse_manifest(std::string_view text) {
    std::vector<Schema> out;
    std::string current;
    std::vector<ColumnDef> columns;
    bool open = false;
    auto flush = [&]() {
        if (open) out.emplace_back(current, std::move(columns));
        columns.clear();
        open = false;
    };
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto pos = line.find("--"); pos != std::string::npos) line.resize(pos);
        auto words = split_words(line);
        if (words.empty()) continue;
        if (to_lower(words[0]) == "relation") {
            if (words.size() != 2) throw SyntaxError("expected 'relation <name>'", line_no, 1);
            flush();
            current = words[1];
            open = true;
            continue;
        }
        if (!open) throw SyntaxError("column declared outside a relation stanza", line_no, 1);
        if (words.size() < 2 || words.size() > 3) throw SyntaxError("expected '<column> <type> [nullable]'", line_no, 1);
        auto type = parse_type_name(to_lower(words[1]));
        if (!type) throw SyntaxError("unknown type '" + words[1] + "'", line_no, 1);
        bool nullable = false;
        if (words.size() == 3) {
            if (to_lower(words[2]) != "nullable") throw SyntaxError("expected 'nullable'", line_no, 1);
            nullable = true;
        }
        columns.push_back(ColumnDef{words[0], *type, nullable});
    }
    flush();
    return out;
}

std::string render_manifest(const std::vector<Schema> &schemas) {
    std::ostringstream out;
    for (std::size_t i = 0; i < schemas.size(); ++i) {
        if (i) out << '\n';
        out << "relation " << schemas[i].relation_name() << '\n';
        for (const auto &c : schemas[i].columns()) {
            out << "  " << c.name << ' ' << type_name(c.type);
            if (c.nullable) out << " nullable";
            out << '\n';
        }
    }
    return out.str();
}

Relation read_csv(const Schema &schema, std::istream &in) {
    Relation relation(schema);
    std::vector<Field> fields;
    int line_no = 0;
    if (!read_record(in, fields, line_no)) throw SyntaxError("missing CSV header", 1, 1);
    if (fields.size() != schema.arity())
        throw SyntaxError("header has " + std::to_string(fields.size()) + " columns, schema has " +
                              std::to_string(schema.arity()),
                          1, 1);
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (to_lower(fields[i].text) != schema.columns()[i].name)
            throw SyntaxError("header column '" + fields[i].text + "' does not match schema column '" +
                                  schema.columns()[i].name + "'",
                              1, 1);
    }
    while (read_record(in, fields, line_no)) {
        if (fields.size() == 1 && fields[0].text.empty() && !fields[0].quoted && schema.arity() != 1) continue;
        if (fields.size() != schema.arity())
            throw SyntaxError("expected " + std::to_string(schema.arity()) + " fields, got " +
                                  std::to_string(fields.size()),
                              line_no, 1);
        Row row;
        row.reserve(fields.size());
        for (std::size_t i = 0; i < fields.size(); ++i) row.push_back(parse_field(fields[i], schema.columns()[i], line_no));
        relation.append(std::move(row));
    }
    return relation;
}

void write_csv(const Relation &relation, std::ostream &out) {
    const auto &cols = relation.schema().columns();
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (i) out << ',';
        out << cols[i].name;
    }
    out << '\n';
    for (const auto &row : relation.rows()) {
        for (std::size_t i = 0; i < row.values.size(); ++i) {
            if (i) out << ',';
            write_field(out, row.values[i]);
        }
        out << '\n';
    }
}

Database load_database(const std::filesystem::path &dir) {
    std::ifstream manifest(dir / "schema.txt");
    if (!manifest) throw Error("cannot open " + (dir / "schema.txt").string());
    std::stringstream buf;
    buf << manifest.rdbuf();
    Database db;
    for (const auto &schema : parse_manifest(buf.str())) {
        auto path = dir / (schema.relation_name() + ".csv");
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("cannot open " + path.string());
        try {
            db.add_relation(read_csv(schema, in));
        } catch (const SyntaxError &e) {
            throw Error(path.string() + ": " + e.what());
        }
    }
    return db;
}

void save_database(const Database &db, const std::filesystem::path &dir) {
    std::filesystem::create_directories(dir);
    std::vector<Schema> schemas;
    for (const auto &rel : db.relations()) {
        schemas.push_back(rel.schema());
        std::ofstream out(dir / (rel.name() + ".csv"), std::ios::binary);
        write_csv(rel, out);
    }
    std::ofstream manifest(dir / "schema.txt", std::ios::binary);
    manifest << render_manifest(schemas);
}

} // namespace dfc
