#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "corpus.hpp"
#include "fixtures.hpp"

using namespace dfc;
using namespace dfc::testing;

namespace {

std::vector<CorpusEntry> corpus() { return load_corpus(std::string(DFC_TEST_DATA_DIR) + "/policy_corpus.txt"); }

} // namespace

TEST_CASE("corpus has valid and invalid entries") {
    auto entries = corpus();
    CHECK(entries.size() >= 20);
    std::size_t ok = 0;
    for (const auto &e : entries) ok += e.expect.rfind("ok: ", 0) == 0;
    CHECK(ok >= 5);
    CHECK(entries.size() - ok >= 5);
}

TEST_CASE("corpus outcomes") {
    Database db = policy_catalog();
    for (const auto &e : corpus()) {
        INFO(e.name);
        std::string actual = corpus_outcome(e.text, db);
        INFO(actual);
        CHECK(corpus_matches(e.expect, actual));
    }
}

TEST_CASE("normalization is idempotent and rendering round trips") {
    Database db = policy_catalog();
    for (const auto &e : corpus()) {
        if (e.expect.rfind("ok: ", 0) != 0) continue;
        INFO(e.name);
        Policy p = parse_policy(e.text);
        Policy n = normalize_policy(p);
        CHECK(normalize_policy(n) == n);
        CHECK(parse_policy(render_policy(p)) == p);
        CHECK(normalize_policy(parse_policy(render_policy(n))) == n);
        Policy bound = prepare_policy(n, db).policy;
        CHECK(describe_policy(prepare_policy(bound, db).policy) == describe_policy(bound));
    }
}
