#pragma once

#include "dfc/relation.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace dfc {

// Data directory layout: `schema.txt` manifest plus one `<relation>.csv` per relation.
//
// Manifest stanzas:
//
//   relation students
//     sid integer
//     ethnicity text nullable
//
// CSV files follow RFC 4180 with a header row naming the columns. An unquoted
// empty field is NULL; an empty string is written as "".

std::vector<Schema> parse_manifest(std::string_view text);
std::string render_manifest(const std::vector<Schema> &schemas);

Relation read_csv(const Schema &schema, std::istream &in);
void write_csv(const Relation &relation, std::ostream &out);

Database load_database(const std::filesystem::path &dir);
void save_database(const Database &db, const std::filesystem::path &dir);

} // namespace dfc
