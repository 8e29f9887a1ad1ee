#pragma once

// Closed-form per-processor communication volumes for dense LU variants,
// plus a sweep driver that tabulates them over processor ranges under
// different memory policies.

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lux::models {

inline const std::vector<std::string>& known() {
    static const std::vector<std::string> names{"conflux", "candmc", "2d"};
    return names;
}

// Words moved per processor. "candmc" is defined as exactly five times the
// "conflux" volume, so the two stay in lockstep under any policy.
inline double eval(const std::string& name, double n, double p, double mem) {
    if (n <= 0 || p <= 0) throw std::invalid_argument("model needs positive n and p");
    if (name == "conflux") return n * n * n / (p * std::sqrt(mem));
    if (name == "candmc") return 5.0 * eval("conflux", n, p, mem);
    if (name == "2d") return n * n / std::sqrt(p);
    throw std::invalid_argument("unknown model: " + name);
}

inline bool needs_memory(const std::string& name) { return name != "2d"; }

struct SweepSpec {
    std::vector<std::string> models;
    double n = 0;          // fixed problem size when positive
    double weak_base = 0;  // weak scaling n = base * cbrt(p) when positive
    int p_lo = 1, p_hi = 1;
    std::string mem_policy = "fig5";  // "fig5": M = n^2 / p^(2/3); "fixed": --mem
    double mem = 0;
};

struct SweepRow {
    std::string model;
    double n = 0, p = 0, mem = 0, words = 0;
};

inline std::vector<SweepRow> sweep(const SweepSpec& spec) {
    if (spec.models.empty()) throw std::invalid_argument("no models selected");
    for (const auto& m : spec.models) eval(m, 2, 2, 4);  // validates the name
    if ((spec.n > 0) == (spec.weak_base > 0))
        throw std::invalid_argument("choose either a fixed size or a weak-scaling base");
    if (spec.p_lo < 1 || spec.p_hi < spec.p_lo)
        throw std::invalid_argument("bad processor range");
    if (spec.mem_policy != "fig5" && spec.mem_policy != "fixed")
        throw std::invalid_argument("unknown memory policy: " + spec.mem_policy);
    if (spec.mem_policy == "fixed" && spec.mem <= 0)
        throw std::invalid_argument("fixed memory policy needs a positive budget");

    std::vector<SweepRow> rows;
    for (const auto& model : spec.models) {
        for (std::int64_t p = spec.p_lo; p <= spec.p_hi; p *= 2) {
            double n = spec.n > 0 ? spec.n : spec.weak_base * std::cbrt(double(p));
            double mem =
                spec.mem_policy == "fixed" ? spec.mem : n * n / std::pow(double(p), 2.0 / 3.0);
            rows.push_back({model, n, double(p), mem, eval(model, n, double(p), mem)});
        }
    }
    return rows;
}

inline void write_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << "model,n,p,mem,words,bytes\n";
    os.precision(17);
    for (const auto& r : rows)
        os << r.model << "," << r.n << "," << r.p << "," << r.mem << "," << r.words << ","
           << r.words * 8 << "\n";
}

}  // namespace lux::models
