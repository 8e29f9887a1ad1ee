#pragma once

// Statement and program I/O lower bounds. Each statement gets an intensity
// rho from the volume optimizer (optionally capped by the out-degree-one
// rule), giving Q >= volume/rho. Program totals account for inputs shared
// across statements (subtracted reuse) and for consumed intermediate arrays
// (access terms weakened by the producer's intensity, or removed entirely
// when the producer is a pure generator).

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include <lux/daap.hpp>
#include <lux/psi.hpp>

namespace lux::bound {

using json = nlohmann::json;

struct StatementBound {
    std::string id;
    std::int64_t volume = 0;
    double x0 = 0.0;
    double rho_raw = 0.0;                // intensity before the out-degree cap
    std::optional<double> rho_cap;       // 1/u when the rule applies
    double rho = 0.0;                    // min(rho_raw, rho_cap)
    int outdeg1_u = 0;
    double q = 0.0;                      // volume / rho
    std::string psi_closed_form;
    bool unbounded_intensity = false;    // generator: rho infinite, q = 0
    bool cap_dominated = false;
    PsiProblem prob;                     // terms with reuse weights applied
    PsiSolution shape;                   // optimizer solution at x0
    std::vector<std::string> notes;
};

struct ReuseRecord {
    std::string array;
    double amount = 0.0;
    std::string limiting_statement;
};

struct BoundReport {
    daap::ParamMap parameters;
    double memory = 0.0;
    int ranks = 1;
    std::vector<StatementBound> statements;
    std::vector<ReuseRecord> reuse;
    std::int64_t volume_total = 0;
    double q_sequential = 0.0;
    double q_parallel = 0.0;
    std::vector<std::string> notes;
};

// ---------------------------------------------------------------------------

inline PsiProblem build_problem(const daap::Statement& st) {
    PsiProblem p;
    p.nvars = st.depth();
    for (size_t j = 0; j < st.inputs.size(); ++j) {
        AccessTerm t;
        t.levels = st.access_levels(st.inputs[j]);
        t.weight = 1.0;
        t.input_index = static_cast<int>(j);
        t.array = st.inputs[j].array;
        p.terms.push_back(std::move(t));
    }
    return p;
}

// Count inputs that force intensity <= 1/u: graph inputs of full access
// dimension that are read in exactly one input slot program-wide, plus any
// slots of full dimension whose array carries the @outdeg1 annotation.
inline int outdegree_one_bound(const daap::Program& prog, const daap::Statement& st) {
    std::set<std::string> pure = prog.pure_input_arrays();
    std::map<std::string, int> read_slots;
    for (const auto& s : prog.statements)
        for (const auto& in : s.inputs) ++read_slots[in.array];

    int u = 0;
    for (const auto& in : st.inputs) {
        if (daap::Statement::access_dim(in) != st.depth()) continue;
        bool forced = std::find(st.outdeg1_arrays.begin(), st.outdeg1_arrays.end(), in.array) !=
                      st.outdeg1_arrays.end();
        bool natural = pure.count(in.array) && read_slots[in.array] == 1;
        if (forced || natural) ++u;
    }
    return u;
}

namespace detail {

inline StatementBound analyze_statement(const daap::Program& prog, size_t index,
                                        const daap::ParamMap& params, double M,
                                        const std::vector<StatementBound>& done) {
    const daap::Statement& st = prog.statements[index];
    StatementBound sb;
    sb.id = st.id;
    sb.volume = daap::iteration_count(st, params);
    sb.prob = build_problem(st);

    // Weaken or remove terms fed by earlier statements: the producer's
    // intensity limits how much of the consumed region must be re-read.
    for (auto& term : sb.prob.terms) {
        double best = -1.0;
        bool removed = false;
        for (const auto& e : prog.producer_consumer) {
            if (e.consumer != static_cast<int>(index) || e.array != term.array) continue;
            const StatementBound& producer = done[e.producer];
            if (producer.unbounded_intensity) {
                removed = true;
                sb.notes.push_back("input " + st.inputs[term.input_index].str() +
                                   " is generated by " + producer.id +
                                   "; its access term is dropped");
            } else {
                best = std::max(best, producer.rho);
            }
        }
        if (removed) {
            term.weight = 0.0;
        } else if (best > 1.0) {
            term.weight = 1.0 / best;
            sb.notes.push_back("input " + st.inputs[term.input_index].str() +
                               " is produced upstream; access term divided by " +
                               std::to_string(best));
        }
    }

    X0Result x0 = find_x0(sb.prob, M);
    sb.notes.insert(sb.notes.end(), x0.notes.begin(), x0.notes.end());
    sb.psi_closed_form = x0.psi_closed_form;
    sb.cap_dominated = x0.cap_dominated;

    sb.outdeg1_u = outdegree_one_bound(prog, st);
    if (sb.outdeg1_u >= 1) {
        sb.rho_cap = 1.0 / sb.outdeg1_u;
        sb.notes.push_back("intensity capped at 1/" + std::to_string(sb.outdeg1_u) +
                           " by unique full-dimension graph inputs");
    }

    if (x0.unbounded) {
        sb.unbounded_intensity = true;
        sb.rho_raw = std::numeric_limits<double>::infinity();
        sb.rho = sb.rho_cap ? *sb.rho_cap : sb.rho_raw;
        if (!sb.rho_cap) {
            sb.q = 0.0;
            return sb;
        }
        sb.unbounded_intensity = false;
        sb.q = double(sb.volume) * sb.outdeg1_u;
        return sb;
    }

    sb.x0 = x0.x0;
    sb.rho_raw = x0.rho;
    sb.shape = x0.shape;
    sb.rho = sb.rho_cap ? std::min(sb.rho_raw, *sb.rho_cap) : sb.rho_raw;
    sb.q = double(sb.volume) / sb.rho;
    return sb;
}

}  // namespace detail

// Subtractable reuse for pure input arrays read by more than one statement.
inline std::vector<ReuseRecord> input_reuse(const daap::Program& prog,
                                            const std::vector<StatementBound>& bounds) {
    std::vector<ReuseRecord> out;
    for (const std::string& arr : prog.pure_input_arrays()) {
        std::vector<size_t> readers;
        for (size_t i = 0; i < prog.statements.size(); ++i) {
            for (const auto& in : prog.statements[i].inputs)
                if (in.array == arr) {
                    readers.push_back(i);
                    break;
                }
        }
        if (readers.size() < 2) continue;
        ReuseRecord rec;
        rec.array = arr;
        rec.amount = std::numeric_limits<double>::infinity();
        for (size_t i : readers) {
            const StatementBound& sb = bounds[i];
            if (sb.unbounded_intensity || sb.shape.range_sizes.empty()) continue;
            double access = 0.0;
            for (size_t j = 0; j < sb.prob.terms.size(); ++j)
                if (sb.prob.terms[j].array == arr) access += sb.shape.access_sizes[j];
            double amount = access * double(sb.volume) / sb.shape.volume;
            if (amount < rec.amount) {
                rec.amount = amount;
                rec.limiting_statement = sb.id;
            }
        }
        if (std::isfinite(rec.amount)) out.push_back(std::move(rec));
    }
    return out;
}

// Per-statement bounds with producer-aware term adjustments applied.
inline std::vector<StatementBound> output_reuse(const daap::Program& prog,
                                                const daap::ParamMap& params, double M) {
    std::vector<StatementBound> bounds;
    for (size_t i = 0; i < prog.statements.size(); ++i)
        bounds.push_back(detail::analyze_statement(prog, i, params, M, bounds));
    return bounds;
}

inline BoundReport program_bound(const daap::Program& prog, const daap::ParamMap& params,
                                 double M, int ranks = 1) {
    if (ranks < 1) throw std::runtime_error("rank count must be positive");
    for (const auto& p : prog.parameters)
        if (!params.count(p)) throw std::runtime_error("parameter " + p + " is unbound");

    BoundReport rep;
    rep.parameters = params;
    rep.memory = M;
    rep.ranks = ranks;
    rep.statements = output_reuse(prog, params, M);
    rep.reuse = input_reuse(prog, rep.statements);

    double sum = 0.0, worst = 0.0;
    for (const auto& sb : rep.statements) {
        sum += sb.q;
        worst = std::max(worst, sb.q);
        rep.volume_total += sb.volume;
    }
    double reuse_total = 0.0;
    for (const auto& r : rep.reuse) reuse_total += r.amount;
    double q = sum - reuse_total;
    if (q < worst) {
        q = worst;
        rep.notes.push_back("reuse subtraction clamped at the largest single-statement bound");
    }
    rep.q_sequential = q;
    rep.q_parallel = q / double(ranks);
    return rep;
}

// ---------------------------------------------------------------------------

inline json to_json(const BoundReport& rep) {
    json j;
    j["parameters"] = json::object();
    for (const auto& [k, v] : rep.parameters) j["parameters"][k] = v;
    j["memory"] = rep.memory;
    j["ranks"] = rep.ranks;
    j["statements"] = json::array();
    for (const auto& sb : rep.statements) {
        json s;
        s["id"] = sb.id;
        s["volume"] = sb.volume;
        s["q"] = sb.q;
        if (sb.unbounded_intensity) {
            s["rho"] = "inf";
        } else {
            s["x0"] = sb.x0;
            s["rho"] = sb.rho;
            s["rho_raw"] = std::isfinite(sb.rho_raw) ? json(sb.rho_raw) : json("inf");
            if (!sb.shape.range_sizes.empty()) s["range_sizes"] = sb.shape.range_sizes;
        }
        if (sb.rho_cap) {
            s["rho_cap"] = *sb.rho_cap;
            s["outdeg1_u"] = sb.outdeg1_u;
        }
        if (!sb.psi_closed_form.empty()) s["psi_closed_form"] = sb.psi_closed_form;
        if (sb.cap_dominated) s["cap_dominated"] = true;
        if (!sb.notes.empty()) s["notes"] = sb.notes;
        j["statements"].push_back(std::move(s));
    }
    j["reuse"] = json::array();
    for (const auto& r : rep.reuse)
        j["reuse"].push_back({{"array", r.array},
                              {"amount", r.amount},
                              {"limited_by", r.limiting_statement}});
    j["totals"] = {{"volume", rep.volume_total},
                   {"q_sequential", rep.q_sequential},
                   {"q_parallel", rep.q_parallel}};
    if (!rep.notes.empty()) j["notes"] = rep.notes;
    return j;
}

}  // namespace lux::bound
