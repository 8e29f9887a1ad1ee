// Single command-line entry point for the analysis workbench: symbolic
// lower-bound reports, pebble-game schedule tools, the simulated factorization
// with its communication ledger, and closed-form model sweeps.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <lux/bound.hpp>
#include <lux/conflux.hpp>
#include <lux/daap.hpp>
#include <lux/manifest.hpp>
#include <lux/models.hpp>
#include <lux/netsim.hpp>
#include <lux/pebble.hpp>

using json = nlohmann::json;

namespace {

// Exit codes: 0 success, 1 domain error (bad math, failed validation),
// 2 usage error or unreadable input.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write " + path);
    out << text;
}

json read_json(const std::string& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

lux::daap::ParamMap parse_params(const std::vector<std::string>& defs) {
    lux::daap::ParamMap out;
    for (const auto& d : defs) {
        auto eq = d.find('=');
        if (eq == std::string::npos || eq == 0)
            throw UsageError("--param expects NAME=VALUE, got '" + d + "'");
        try {
            out[d.substr(0, eq)] = std::stoll(d.substr(eq + 1));
        } catch (const std::exception&) {
            throw UsageError("--param value in '" + d + "' is not an integer");
        }
    }
    return out;
}

void emit_manifest(const std::string& subcommand, const std::vector<std::string>& argv,
                   std::uint64_t seed, const std::vector<std::string>& outputs) {
    lux::manifest::RunManifest m;
    m.subcommand = subcommand;
    m.argv = argv;
    m.seed = seed;
    m.outputs = outputs;
    m.write(outputs.front() + ".manifest.json");
}

struct BoundArgs {
    std::string program, out;
    double memory = 0;
    int ranks = 1;
    std::vector<std::string> params;
};

int run_bound(const BoundArgs& a, const std::vector<std::string>& argv) {
    lux::daap::Program prog = lux::daap::parse_program(read_file(a.program));
    auto violations = lux::daap::validate_disjoint_access(prog);
    if (!violations.empty()) {
        for (const auto& v : violations)
            std::cerr << "disjoint-access violation in " << v.statement << ": " << v.access_a
                      << " vs " << v.access_b << " (" << v.detail << ")\n";
        return 1;
    }
    auto rep = lux::bound::program_bound(prog, parse_params(a.params), a.memory, a.ranks);
    std::string text = lux::bound::to_json(rep).dump(2) + "\n";
    if (a.out.empty()) {
        std::cout << text;
    } else {
        write_text(a.out, text);
        emit_manifest("bound", argv, 0, {a.out});
        std::cout << "wrote " << a.out << "\n";
    }
    return 0;
}

struct PebbleArgs {
    std::string cdag, schedule, out;
    std::int64_t memory = 0;
    int hues = 1;
    int n = 0;
    std::uint64_t limit = 8'000'000;
};

int run_pebble_validate(const PebbleArgs& a) {
    auto g = lux::pebble::cdag_from_json(read_json(a.cdag));
    auto s = lux::pebble::schedule_from_json(read_json(a.schedule));
    auto r = lux::pebble::validate_schedule(g, s, a.memory, a.hues);
    json out{{"ok", r.ok}, {"q", r.q}};
    if (!r.ok) {
        out["rule"] = r.rule;
        out["failed_move"] = r.failed_move;
        out["detail"] = r.detail;
    }
    std::cout << out.dump(2) << "\n";
    return r.ok ? 0 : 1;
}

int run_pebble_search(const PebbleArgs& a) {
    auto g = lux::pebble::cdag_from_json(read_json(a.cdag));
    auto r = lux::pebble::min_io_search(g, a.memory, a.limit);
    json out{{"q", r.q}, {"optimal", r.optimal}, {"expanded", r.expanded}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

int run_pebble_gen_lu(const PebbleArgs& a, const std::vector<std::string>& argv) {
    auto g = lux::pebble::gen_lu_cdag(a.n);
    write_text(a.out, lux::pebble::to_json(g).dump(2) + "\n");
    emit_manifest("pebble gen-lu", argv, 0, {a.out});
    std::cout << "wrote " << a.out << " (" << g.vertices.size() << " vertices)\n";
    return 0;
}

struct FactorArgs {
    std::int64_t n = 0;
    int ranks = 1;
    double memory = 0;
    int block = 0;
    int layers = 0;
    std::uint64_t seed = 1;
    bool strict = false;
    bool verify = false;
    std::string out;
};

int run_factor(const FactorArgs& a, const std::vector<std::string>& argv) {
    lux::conflux::FactorConfig fc;
    fc.n = a.n;
    fc.ranks = a.ranks;
    fc.memory = a.memory;
    fc.block = a.block;
    fc.layers = a.layers;
    fc.seed = a.seed;
    fc.strict_memory = a.strict;
    fc.verify = a.verify;
    auto res = lux::conflux::factorize(fc);

    std::ostringstream csv;
    res.ledger.write_csv(csv);
    write_text(a.out, csv.str());
    std::string summary_path = a.out + ".summary.json";
    write_text(summary_path, res.summary().dump(2) + "\n");
    emit_manifest("factor", argv, a.seed, {a.out, summary_path});

    std::cout << "grid [" << res.grid.p1 << "," << res.grid.p1 << "," << res.grid.layers
              << "] block " << res.block << " steps " << res.steps.size() << " max_charged_words "
              << res.ledger.max_charged();
    if (res.residual >= 0) std::cout << " residual " << res.residual;
    std::cout << "\n";
    return 0;
}

struct SweepArgs {
    std::string models = "conflux,candmc,2d";
    double n = 0;
    double weak = 0;
    std::string p = "1:1";
    std::string policy = "fig5";
    double mem = 0;
    std::string out;
};

int run_sweep(const SweepArgs& a, const std::vector<std::string>& argv) {
    lux::models::SweepSpec spec;
    std::stringstream ms(a.models);
    std::string item;
    while (std::getline(ms, item, ',')) spec.models.push_back(item);
    spec.n = a.n;
    spec.weak_base = a.weak;
    auto colon = a.p.find(':');
    try {
        if (colon == std::string::npos) {
            spec.p_lo = spec.p_hi = std::stoi(a.p);
        } else {
            spec.p_lo = std::stoi(a.p.substr(0, colon));
            spec.p_hi = std::stoi(a.p.substr(colon + 1));
        }
    } catch (const std::exception&) {
        throw UsageError("--p expects LO:HI, got '" + a.p + "'");
    }
    spec.mem_policy = a.policy;
    spec.mem = a.mem;
    auto rows = lux::models::sweep(spec);
    std::ostringstream csv;
    lux::models::write_csv(csv, rows);
    if (a.out.empty()) {
        std::cout << csv.str();
    } else {
        write_text(a.out, csv.str());
        emit_manifest("sweep", argv, 0, {a.out});
        std::cout << "wrote " << a.out << " (" << rows.size() << " rows)\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"parallel I/O analysis workbench for dense linear algebra"};
    app.set_version_flag("--version", lux::manifest::kVersion);
    app.require_subcommand(1);
    std::vector<std::string> args(argv, argv + argc);

    BoundArgs ba;
    auto* bound = app.add_subcommand("bound", "I/O lower-bound report for a loop-nest program");
    bound->add_option("--program", ba.program, "program file")->required();
    bound->add_option("--memory", ba.memory, "fast memory size in words")->required();
    bound->add_option("--ranks", ba.ranks, "processor count for the parallel bound");
    bound->add_option("--param", ba.params, "bind a program parameter, NAME=VALUE");
    bound->add_option("--out", ba.out, "write the JSON report here");

    PebbleArgs pa;
    auto* pebble = app.add_subcommand("pebble", "red-blue pebble game tools");
    pebble->require_subcommand(1);
    auto* pv = pebble->add_subcommand("validate", "replay a schedule against a cDAG");
    pv->add_option("--cdag", pa.cdag, "cDAG JSON file")->required();
    pv->add_option("--schedule", pa.schedule, "schedule JSON file")->required();
    pv->add_option("--memory", pa.memory, "red pebbles per hue")->required();
    pv->add_option("--hues", pa.hues, "number of red pebble hues");
    auto* ps = pebble->add_subcommand("search", "exact minimum-I/O search");
    ps->add_option("--cdag", pa.cdag, "cDAG JSON file")->required();
    ps->add_option("--memory", pa.memory, "red pebble budget")->required();
    ps->add_option("--limit", pa.limit, "search node budget");
    auto* pg = pebble->add_subcommand("gen-lu", "generate the elimination cDAG");
    pg->add_option("--n", pa.n, "matrix dimension")->required();
    pg->add_option("--out", pa.out, "cDAG JSON output path")->required();

    FactorArgs fa;
    auto* factor = app.add_subcommand("factor", "simulated factorization with traffic ledger");
    factor->add_option("--n", fa.n, "matrix dimension")->required();
    factor->add_option("--ranks", fa.ranks, "processor count")->required();
    factor->add_option("--memory", fa.memory, "words of memory per rank")->required();
    factor->add_option("--block", fa.block, "tile side (default max(32, layers))");
    factor->add_option("--layers", fa.layers, "replication layers (default: auto)");
    factor->add_option("--seed", fa.seed, "matrix seed");
    factor->add_flag("--strict-memory", fa.strict, "fail on per-rank residency overflow");
    factor->add_flag("--verify", fa.verify, "assemble factors and report the residual");
    factor->add_option("--out", fa.out, "communication ledger CSV path")->required();

    SweepArgs sa;
    auto* sweep = app.add_subcommand("sweep", "tabulate closed-form cost models");
    sweep->add_option("--models", sa.models, "comma-separated model names");
    sweep->add_option("--n", sa.n, "fixed matrix dimension");
    sweep->add_option("--weak", sa.weak, "weak-scaling base: n = base * cbrt(p)");
    sweep->add_option("--p", sa.p, "processor range LO:HI, doubling");
    sweep->add_option("--mem-policy", sa.policy, "fig5 or fixed");
    sweep->add_option("--mem", sa.mem, "memory words for the fixed policy");
    sweep->add_option("--out", sa.out, "CSV output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (bound->parsed()) return run_bound(ba, args);
        if (pebble->parsed()) {
            if (pv->parsed()) return run_pebble_validate(pa);
            if (ps->parsed()) return run_pebble_search(pa);
            return run_pebble_gen_lu(pa, args);
        }
        if (factor->parsed()) return run_factor(fa, args);
        return run_sweep(sa, args);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
