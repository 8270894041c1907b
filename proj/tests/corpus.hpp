#pragma once

#include "dfc/errors.hpp"
#include "dfc/policy.hpp"

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace dfc::testing {

/// One corpus entry:
///
///   === <name>
///   <policy text, any number of lines>
///   --- expect
///   ok: <describe_policy of the parsed policy>
///   | parse-error: <message substring>
///   | validate-error: <message substring>
struct CorpusEntry {
    std::string name;
    std::string text;
    std::string expect;
};

inline std::vector<CorpusEntry> load_corpus(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read corpus '" + path + "'");
    std::vector<CorpusEntry> out;
    std::string line;
    bool in_expect = false;
    while (std::getline(in, line)) {
        if (line.rfind("=== ", 0) == 0) {
            out.push_back({line.substr(4), "", ""});
            in_expect = false;
        } else if (line == "--- expect") {
            in_expect = true;
        } else if (!out.empty()) {
            if (in_expect) {
                if (!line.empty()) out.back().expect += line;
            } else {
                out.back().text += line + "\n";
            }
        }
    }
    return out;
}

/// What parsing and preparing `text` against `db` gives, in the corpus expectation form.
inline std::string corpus_outcome(const std::string &text, const Database &db) {
    Policy p;
    try {
        p = parse_policy(text);
    } catch (const SyntaxError &e) {
        return std::string("parse-error: ") + e.what();
    } catch (const Error &e) {
        return std::string("validate-error: ") + e.what();
    }
    try {
        prepare_policy(p, db);
    } catch (const SyntaxError &e) {
        return std::string("parse-error: ") + e.what();
    } catch (const Error &e) {
        return std::string("validate-error: ") + e.what();
    }
    return "ok: " + describe_policy(p);
}

/// Exact match for `ok:` lines; errors match on kind and message substring.
inline bool corpus_matches(const std::string &expect, const std::string &actual) {
    if (expect.rfind("ok: ", 0) == 0) return expect == actual;
    auto colon = expect.find(": ");
    if (colon == std::string::npos) return false;
    const std::string kind = expect.substr(0, colon + 2);
    return actual.rfind(kind, 0) == 0 && actual.find(expect.substr(colon + 2), kind.size()) != std::string::npos;
}

} // namespace dfc::testing
