#include "dfc/bench.hpp"
#include "dfc/csv.hpp"
#include "dfc/errors.hpp"
#include "dfc/sql.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace dfc;

namespace {

constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kKilled = 3;
constexpr int kUpdateSkipped = 4;

constexpr const char *kDataDirVar = "DFC_DATA_DIR";
constexpr const char *kPolicyFile = "policies.dfc";

fs::path data_dir() {
    const char *dir = std::getenv(kDataDirVar);
    return dir && *dir ? fs::path(dir) : fs::path("dfc_data");
}

std::string read_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

Database open_database() {
    fs::path dir = data_dir();
    if (!fs::exists(dir / "schema.txt"))
        throw Error("no data in '" + dir.string() + "'; run `load` or `gen-tpch-lite` first, or set " + kDataDirVar);
    return load_database(dir);
}

PolicySet stored_policies() {
    PolicySet set;
    fs::path file = data_dir() / kPolicyFile;
    if (fs::exists(file)) {
        for (auto &p : parse_policy_file(read_file(file))) set.add(std::move(p));
    }
    return set;
}

std::vector<PreparedPolicy> prepare_all(const PolicySet &set, const Database &db) {
    std::vector<PreparedPolicy> out;
    for (const auto &p : set.policies()) out.push_back(prepare_policy(p, db));
    return out;
}

Session session_for(const std::string &user) {
    Session s;
    if (user.empty()) return s;
    bool digits = user.find_first_not_of("0123456789") == std::string::npos ||
                  (user[0] == '-' && user.size() > 1 && user.find_first_not_of("0123456789", 1) == std::string::npos);
    s.current_user = digits ? Value::integer(std::stoll(user)) : Value::text(user);
    return s;
}

struct RunOptions {
    std::string mode = "rewrite";
    std::string user;
    bool explain = false;
};

Mode mode_of(const RunOptions &o) {
    auto m = parse_mode(o.mode);
    if (!m) throw Error("unknown mode '" + o.mode + "' (expected off, oracle, rewrite or capture)");
    return *m;
}

void print_explain(const QueryStatement &stmt, const StatementOutcome &o) {
    std::cout << "-- plan\n" << explain(stmt.plan);
    if (o.fell_back) std::cout << "-- rewrite fell back to the oracle: " << o.fallback_reason << "\n";
    if (o.rewritten) {
        std::cout << "-- rewritten plan\n" << explain(*o.rewritten);
        std::cout << "-- injected " << o.injected.to_string() << "\n";
        std::cout << "-- sql " << o.emitted_sql << "\n";
    }
}

int run_query(const std::string &sql, const RunOptions &opts) {
    Mode mode = mode_of(opts);
    Database db = open_database();
    PolicySet set = stored_policies();
    auto policies = prepare_all(set, db);
    QueryStatement stmt = parse_and_bind(sql, db, session_for(opts.user));
    if (stmt.kind != StatementKind::Select) throw Error("`query` expects a SELECT; use `update`");
    StatementOutcome o = run_statement(stmt, mode, policies, db);
    if (opts.explain) print_explain(stmt, o);
    if (o.outcome.kind == EnforcementOutcome::Kind::QueryKilled) {
        std::cout << "killed: policy=" << o.outcome.killed->policy << "\n";
        std::cout << "report: " << (o.kill_message.empty() ? o.outcome.killed->to_string() : o.kill_message) << "\n";
        return kKilled;
    }
    std::string header;
    for (std::size_t i = 0; i < o.outcome.columns.size(); ++i) header += (i ? ", " : "") + o.outcome.columns[i].name;
    std::cout << header << "\n";
    for (const auto &r : o.outcome.rows) std::cout << render_row(r) << "\n";
    for (const auto &v : o.outcome.dropped) std::cout << "dropped: " << v.to_string() << "\n";
    std::cout << "(" << o.outcome.rows.size() << " rows)\n";
    return kOk;
}

int run_update(const std::string &sql, const RunOptions &opts) {
    Mode mode = mode_of(opts);
    Database db = open_database();
    PolicySet set = stored_policies();
    auto policies = prepare_all(set, db);
    QueryStatement stmt = parse_and_bind(sql, db, session_for(opts.user));
    if (stmt.kind != StatementKind::Update) throw Error("`update` expects an UPDATE; use `query`");
    StatementOutcome o = run_statement(stmt, mode, policies, db);
    if (opts.explain) print_explain(stmt, o);
    if (o.outcome.kind == EnforcementOutcome::Kind::QueryKilled) {
        std::cout << "killed: policy=" << o.outcome.killed->policy << "\n";
        std::cout << "report: " << (o.kill_message.empty() ? o.outcome.killed->to_string() : o.kill_message) << "\n";
        return kKilled;
    }
    save_database(db, data_dir());
    std::cout << "updated " << o.outcome.updated << " of " << o.candidates << " candidate rows, skipped " << o.skipped_rows
              << "\n";
    for (const auto &v : o.outcome.skipped) std::cout << "skipped: " << v.to_string() << "\n";
    for (const auto &r : o.skipped_images) std::cout << "skipped: row=" << render_row(r) << "\n";
    return o.candidates > 0 && o.outcome.updated == 0 ? kUpdateSkipped : kOk;
}

int run_load(const std::string &source) {
    Database db = load_database(source);
    save_database(db, data_dir());
    for (const auto &rel : db.relations()) std::cout << rel.name() << ": " << rel.size() << " rows\n";
    return kOk;
}

int run_policy_add(const std::string &file) {
    Database db = open_database();
    PolicySet set = stored_policies();
    std::vector<std::string> added;
    for (auto &p : parse_policy_file(read_file(file))) {
        const Policy &stored = set.add(std::move(p));
        prepare_policy(stored, db);
        added.push_back(stored.name);
    }
    std::string text;
    for (const auto &p : set.policies()) text += render_policy(p) + "\n\n";
    std::ofstream(data_dir() / kPolicyFile, std::ios::binary) << text;
    for (const auto &name : added) std::cout << "added " << name << "\n";
    return kOk;
}

int run_policy_list() {
    Database db = open_database();
    PolicySet set = stored_policies();
    for (const auto &p : set.policies()) std::cout << describe_policy(prepare_policy(p, db).policy) << "\n";
    return kOk;
}

int run_gen(std::size_t scale, std::uint64_t seed) {
    if (scale < 1) throw Error("--scale must be at least 1");
    Database db = generate_tpch_lite(scale, seed);
    save_database(db, data_dir());
    for (const auto &rel : db.relations()) std::cout << rel.name() << ": " << rel.size() << " rows\n";
    return kOk;
}

int run_bench_command(std::size_t reps, const RunOptions &opts) {
    Database db = open_database();
    if (!db.find("lineitem")) throw Error("bench needs the TPC-H-lite tables; run `gen-tpch-lite` first");
    std::int64_t k = bench_threshold(db.relation("lineitem").size());
    PolicySet set;
    set.add(parse_policy("NAME contributors " + bench_policy_text(k)));
    auto policies = prepare_all(set, db);
    BenchConfig config;
    config.repetitions = reps;
    config.session = session_for(opts.user);
    BenchReport report = run_bench(db, policies, bench_queries(), config, [](const QueryReport &q) {
        for (const auto &line : bench_json_lines(q)) std::cout << line << "\n";
        std::cout.flush();
    });
    if (!report.digests_equal()) {
        std::cerr << "error: outcome digests differ between enforcement modes\n";
        return kError;
    }
    return kOk;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Data flow control engine"};
    app.require_subcommand(1);
    RunOptions opts;
    app.add_option("--mode", opts.mode, "Enforcement mode: off, oracle, rewrite, capture")->capture_default_str();
    app.add_option("--user", opts.user, "Value of current_user");
    app.add_flag("--explain", opts.explain, "Print plans before results");
    app.footer(std::string("Data directory: $") + kDataDirVar + " (default ./dfc_data)");

    std::string source;
    auto *load = app.add_subcommand("load", "Copy a data directory (schema.txt + CSV files) into the data directory");
    load->add_option("dir", source)->required();

    auto *policy = app.add_subcommand("policy", "Manage policies");
    policy->require_subcommand(1);
    std::string policy_file;
    auto *policy_add = policy->add_subcommand("add", "Validate and register the policies in a file");
    policy_add->add_option("file", policy_file)->required();
    auto *policy_list = policy->add_subcommand("list", "Show registered policies");

    std::string sql;
    auto *query = app.add_subcommand("query", "Run a SELECT");
    query->add_option("sql", sql)->required();
    auto *update = app.add_subcommand("update", "Run an UPDATE");
    update->add_option("sql", sql)->required();

    std::size_t scale = 60000;
    std::uint64_t seed = 42;
    auto *gen = app.add_subcommand("gen-tpch-lite", "Generate lineitem, orders and customer");
    gen->add_option("--scale", scale, "Rows in lineitem")->capture_default_str();
    gen->add_option("--seed", seed)->capture_default_str();

    std::size_t reps = 3;
    auto *bench = app.add_subcommand("bench", "Time the bench queries under every mode (JSON lines)");
    bench->add_option("--reps", reps)->capture_default_str();

    for (auto *sub : {load, policy, query, update, gen, bench}) sub->fallthrough();
    policy_add->fallthrough();
    policy_list->fallthrough();

    CLI11_PARSE(app, argc, argv);
    try {
        if (*load) return run_load(source);
        if (*policy_add) return run_policy_add(policy_file);
        if (*policy_list) return run_policy_list();
        if (*query) return run_query(sql, opts);
        if (*update) return run_update(sql, opts);
        if (*gen) return run_gen(scale, seed);
        if (*bench) return run_bench_command(reps, opts);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kError;
    }
    return kOk;
}
