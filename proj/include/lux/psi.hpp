#pragma once

// Subcomputation volume maximization. Given the access terms of a statement,
// psi(X) is the largest iteration-domain volume whose memory footprint
// (sum of access-region sizes) fits in X words:
//
//   psi(X) = max  prod_t R_t
//            s.t. sum_j w_j * prod_{t in levels_j} R_t <= X,   R_t >= 1
//
// Solved in log space (y_t = log R_t): the constraint becomes a sum of
// exponentials and the KKT system for each candidate active set is a small
// Newton solve. The computational intensity rho(X) = psi(X)/(X - M) is then
// minimized over X to obtain the bound anchor X0.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace lux::bound {

struct AccessTerm {
    std::vector<int> levels;  // distinct loop levels addressed by the access
    double weight = 1.0;      // output-reuse divisor applied; 0 removes the term
    int input_index = -1;
    std::string array;
};

struct PsiProblem {
    int nvars = 0;  // loop-nest depth
    std::vector<AccessTerm> terms;
};

struct PsiSolution {
    bool feasible = false;
    bool unbounded = false;
    std::vector<double> range_sizes;   // per level, continuous relaxation
    double volume = 0.0;               // psi(X)
    std::vector<double> access_sizes;  // per term, unweighted product of range sizes
};

namespace detail {

// Dense solve of A x = b by partial-pivot elimination; systems here are tiny.
inline bool solve_linear(std::vector<std::vector<double>> A, std::vector<double> b,
                         std::vector<double>& x) {
    const size_t n = b.size();
    for (size_t col = 0; col < n; ++col) {
        size_t piv = col;
        for (size_t r = col + 1; r < n; ++r)
            if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
        if (std::abs(A[piv][col]) < 1e-300) return false;
        std::swap(A[piv], A[col]);
        std::swap(b[piv], b[col]);
        for (size_t r = col + 1; r < n; ++r) {
            double f = A[r][col] / A[col][col];
            if (f == 0.0) continue;
            for (size_t c = col; c < n; ++c) A[r][c] -= f * A[col][c];
            b[r] -= f * b[col];
        }
    }
    x.assign(n, 0.0);
    for (size_t r = n; r-- > 0;) {
        double s = b[r];
        for (size_t c = r + 1; c < n; ++c) s -= A[r][c] * x[c];
        x[r] = s / A[r][r];
    }
    return true;
}

struct ActiveCandidate {
    std::vector<double> y;  // per level
    double objective;       // sum of y
};

// Newton solve of the KKT system restricted to active set A:
//   S_t(y) = tau for t in A,   sum_j T_j(y) = X,   y_t = 0 elsewhere,
// where T_j = w_j exp(sum_{t in levels_j} y_t) and S_t = sum_{j : t in j} T_j.
inline std::optional<ActiveCandidate> solve_active_set(const std::vector<AccessTerm>& terms,
                                                       int nvars,
                                                       const std::vector<int>& active,
                                                       double X) {
    const size_t k = active.size();
    std::vector<int> pos(nvars, -1);
    for (size_t i = 0; i < k; ++i) pos[active[i]] = static_cast<int>(i);

    // Feasible start: uniform y on the active set hitting the constraint.
    std::vector<int> touch(terms.size(), 0);
    bool any_touch = false;
    for (size_t j = 0; j < terms.size(); ++j) {
        for (int t : terms[j].levels)
            if (pos[t] >= 0) ++touch[j];
        if (touch[j] > 0) any_touch = true;
    }
    if (!any_touch) return std::nullopt;
    double lo = 0.0, hi = 1.0;
    auto g_of = [&](double s) {
        double g = 0.0;
        for (size_t j = 0; j < terms.size(); ++j) g += terms[j].weight * std::exp(s * touch[j]);
        return g;
    };
    if (g_of(0.0) > X) return std::nullopt;
    while (g_of(hi) < X && hi < 800.0) hi *= 2.0;
    for (int it = 0; it < 100; ++it) {
        double mid = 0.5 * (lo + hi);
        (g_of(mid) < X ? lo : hi) = mid;
    }
    double s0 = 0.5 * (lo + hi);

    std::vector<double> y(nvars, 0.0);
    for (int t : active) y[t] = s0;

    auto eval_terms = [&](const std::vector<double>& yy, std::vector<double>& T) {
        T.assign(terms.size(), 0.0);
        for (size_t j = 0; j < terms.size(); ++j) {
            double e = 0.0;
            for (int t : terms[j].levels) e += yy[t];
            T[j] = terms[j].weight * std::exp(e);
        }
    };

    std::vector<double> T;
    eval_terms(y, T);
    double tau = 0.0;
    for (int t : active) {
        double s = 0.0;
        for (size_t j = 0; j < terms.size(); ++j)
            for (int lv : terms[j].levels)
                if (lv == t) s += T[j];
        tau += s;
    }
    tau /= static_cast<double>(k);
    if (!(tau > 0.0)) return std::nullopt;

    auto residual = [&](const std::vector<double>& yy, double tt, std::vector<double>& F) {
        std::vector<double> TT;
        eval_terms(yy, TT);
        F.assign(k + 1, 0.0);
        for (size_t i = 0; i < k; ++i) {
            double s = 0.0;
            for (size_t j = 0; j < terms.size(); ++j)
                for (int lv : terms[j].levels)
                    if (lv == active[i]) s += TT[j];
            F[i] = (s - tt) / X;
        }
        double g = 0.0;
        for (double v : TT) g += v;
        F[k] = (g - X) / X;
    };

    auto norm = [](const std::vector<double>& F) {
        double n2 = 0.0;
        for (double v : F) n2 += v * v;
        return std::sqrt(n2);
    };

    std::vector<double> F;
    residual(y, tau, F);
    double fn = norm(F);
    for (int iter = 0; iter < 200 && fn > 1e-13; ++iter) {
        eval_terms(y, T);
        // Jacobian of the scaled residual.
        std::vector<std::vector<double>> J(k + 1, std::vector<double>(k + 1, 0.0));
        for (size_t i = 0; i < k; ++i) {
            for (size_t u = 0; u < k; ++u) {
                double h = 0.0;
                for (size_t j = 0; j < terms.size(); ++j) {
                    bool has_i = false, has_u = false;
                    for (int lv : terms[j].levels) {
                        if (lv == active[i]) has_i = true;
                        if (lv == active[u]) has_u = true;
                    }
                    if (has_i && has_u) h += T[j];
                }
                J[i][u] = h / X;
            }
            J[i][k] = -1.0 / X;
        }
        for (size_t u = 0; u < k; ++u) {
            double s = 0.0;
            for (size_t j = 0; j < terms.size(); ++j)
                for (int lv : terms[j].levels)
                    if (lv == active[u]) s += T[j];
            J[k][u] = s / X;
        }
        J[k][k] = 0.0;

        std::vector<double> rhs(k + 1);
        for (size_t i = 0; i <= k; ++i) rhs[i] = -F[i];
        std::vector<double> d;
        if (!solve_linear(J, rhs, d)) return std::nullopt;

        double step = 1.0;
        bool improved = false;
        for (int bt = 0; bt < 50; ++bt) {
            std::vector<double> y2 = y;
            for (size_t i = 0; i < k; ++i) y2[active[i]] += step * d[i];
            double tau2 = tau + step * d[k];
            bool sane = tau2 > 0.0;
            for (int t : active) sane = sane && y2[t] > -60.0 && y2[t] < 800.0;
            if (sane) {
                std::vector<double> F2;
                residual(y2, tau2, F2);
                if (norm(F2) < fn) {
                    y = std::move(y2);
                    tau = tau2;
                    F = std::move(F2);
                    fn = norm(F);
                    improved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!improved) break;
    }
    if (fn > 1e-9) return std::nullopt;

    // Primal feasibility and complementary slackness.
    for (int t : active) {
        if (y[t] < -1e-9) return std::nullopt;
        if (y[t] < 0.0) y[t] = 0.0;
    }
    eval_terms(y, T);
    for (int t = 0; t < nvars; ++t) {
        if (pos[t] >= 0) continue;
        double s = 0.0;
        for (size_t j = 0; j < terms.size(); ++j)
            for (int lv : terms[j].levels)
                if (lv == t) s += T[j];
        if (s < tau * (1.0 - 1e-6)) return std::nullopt;
    }

    double obj = 0.0;
    for (double v : y) obj += v;
    return ActiveCandidate{y, obj};
}

}  // namespace detail

inline PsiSolution solve_psi(const PsiProblem& prob, double X) {
    PsiSolution sol;
    std::vector<AccessTerm> terms;
    for (const auto& t : prob.terms)
        if (t.weight > 0.0) terms.push_back(t);

    std::set<int> covered;
    for (const auto& t : terms)
        for (int lv : t.levels) covered.insert(lv);
    for (int lv = 0; lv < prob.nvars; ++lv) {
        if (!covered.count(lv)) {  // variable unconstrained by any access
            sol.unbounded = true;
            sol.feasible = X >= 0.0;
            sol.volume = std::numeric_limits<double>::infinity();
            sol.range_sizes.assign(prob.nvars, 1.0);
            return sol;
        }
    }

    double base = 0.0;
    for (const auto& t : terms) base += t.weight;
    if (X < base) return sol;  // infeasible: even unit ranges exceed X

    if (prob.nvars > 16)
        throw std::runtime_error("loop nest too deep for active-set enumeration");

    std::vector<int> vars(covered.begin(), covered.end());
    std::optional<detail::ActiveCandidate> best;
    // Empty active set: y = 0, volume 1, always feasible here.
    best = detail::ActiveCandidate{std::vector<double>(prob.nvars, 0.0), 0.0};
    for (std::uint32_t mask = 1; mask < (1u << vars.size()); ++mask) {
        std::vector<int> active;
        for (size_t i = 0; i < vars.size(); ++i)
            if (mask & (1u << i)) active.push_back(vars[i]);
        auto cand = detail::solve_active_set(terms, prob.nvars, active, X);
        if (cand && (!best || cand->objective > best->objective)) best = cand;
    }

    sol.feasible = true;
    sol.range_sizes.assign(prob.nvars, 1.0);
    for (int lv = 0; lv < prob.nvars; ++lv) sol.range_sizes[lv] = std::exp(best->y[lv]);
    sol.volume = std::exp(best->objective);
    sol.access_sizes.assign(prob.terms.size(), 1.0);
    for (size_t j = 0; j < prob.terms.size(); ++j)
        for (int lv : prob.terms[j].levels) sol.access_sizes[j] *= sol.range_sizes[lv];
    return sol;
}

// ---------------------------------------------------------------------------
// Intensity minimization

struct X0Result {
    double x0 = 0.0;
    double rho = 0.0;          // psi(x0) / (x0 - M), before any out-degree cap
    double psi_x0 = 0.0;
    PsiSolution shape;         // solution at x0
    std::string psi_closed_form;  // empty when no closed form was recognized
    bool unbounded = false;    // psi infinite: generator statement
    bool cap_dominated = false;  // rho still decreasing at the search cap
    std::vector<std::string> notes;
};

namespace detail {

inline double snap_rational(double v, double tol = 1e-7) {
    double sign = v < 0 ? -1.0 : 1.0;
    double a = std::abs(v);
    for (int q = 1; q <= 6; ++q)
        for (int p = 0; p <= 36; ++p)
            if (std::abs(a - double(p) / q) <= tol) return sign * double(p) / q;
    return v;
}

inline std::string format_num(double v) {
    char buf[64];
    if (v == std::floor(v) && std::abs(v) < 1e15)
        std::snprintf(buf, sizeof buf, "%.0f", v);
    else
        std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace detail

// Minimize rho(X) = psi(X)/(X-M) over X in (M, x_max]. Power-law and affine
// psi shapes get an analytic minimizer; anything else falls back to a golden
// section search (with a grid scan guarding against non-unimodal surprises).
inline X0Result find_x0(const PsiProblem& prob, double M, double x_max_factor = 100.0) {
    if (M < 1.0) throw std::runtime_error("fast memory must hold at least one word");
    X0Result res;

    double base = 0.0;
    for (const auto& t : prob.terms)
        if (t.weight > 0.0) base += t.weight;

    {
        PsiSolution probe = solve_psi(prob, std::max(2.0 * M, 2.0 * base + 4.0));
        if (probe.unbounded) {
            res.unbounded = true;
            res.rho = std::numeric_limits<double>::infinity();
            res.notes.push_back("volume is unbounded in X; the statement generates values "
                                "without reading any constrained region");
            return res;
        }
    }

    const double x_lo = std::max(M * (1.0 + 1e-9), base);
    const double x_max = std::max(x_max_factor * M, x_lo * 2.0 + 16.0);
    auto rho_at = [&](double X) { return solve_psi(prob, X).volume / (X - M); };

    // Closed-form detection from samples clear of the left boundary.
    double b0 = std::max({2.0 * M, 2.0 * base, 16.0});
    double s[4];
    for (int i = 0; i < 4; ++i) s[i] = solve_psi(prob, b0 * double(1 << i)).volume;
    bool power = true;
    double alpha = std::log(s[1] / s[0]) / std::log(2.0);
    for (int i = 1; i < 3; ++i) {
        double a2 = std::log(s[i + 1] / s[i]) / std::log(2.0);
        if (std::abs(a2 - alpha) > 1e-7 * std::max(1.0, std::abs(alpha))) power = false;
    }
    bool affine = false;
    double aff_a = 0.0, aff_d = 0.0;
    {
        double a = detail::snap_rational((s[1] - s[0]) / b0);
        double d = detail::snap_rational(s[0] - a * b0, 1e-6);
        affine = true;
        for (int i = 2; i < 4; ++i) {
            double pred = a * (b0 * double(1 << i)) + d;
            if (std::abs(pred - s[i]) > 1e-9 * std::max(1.0, std::abs(s[i]))) affine = false;
        }
        aff_a = a;
        aff_d = d;
    }

    double analytic_x0 = -1.0;
    if (affine) {
        // rho' sign is the sign of -(a*M + d): constant over the domain.
        if (aff_a * M + aff_d > 0.0) {
            analytic_x0 = x_max;
            res.cap_dominated = true;
            res.notes.push_back("intensity decreases monotonically in X; minimized at the search cap");
        } else {
            analytic_x0 = x_lo;
            res.notes.push_back("intensity is minimized at the left edge of the X domain");
        }
        std::string form;
        if (std::abs(aff_a) > 1e-12)
            form = std::abs(aff_a - 1.0) < 1e-9 ? "X" : detail::format_num(aff_a) + "*X";
        if (form.empty())
            form = detail::format_num(aff_d);
        else if (std::abs(aff_d) > 1e-9)
            form += (aff_d > 0 ? "+" : "") + detail::format_num(aff_d);
        res.psi_closed_form = form;
    } else if (power) {
        alpha = detail::snap_rational(alpha);
        double C = s[0] / std::pow(b0, alpha);
        double Cs = detail::snap_rational(C);
        if (std::abs(Cs - C) <= 1e-7 * std::max(1.0, C)) C = Cs;
        res.psi_closed_form = detail::format_num(C) + "*X^" + detail::format_num(alpha);
        if (alpha > 1.0 + 1e-12) {
            analytic_x0 = alpha * M / (alpha - 1.0);
            if (analytic_x0 > x_max) {
                analytic_x0 = x_max;
                res.cap_dominated = true;
            }
        } else {
            analytic_x0 = x_max;
            res.cap_dominated = true;
            res.notes.push_back("intensity decreases monotonically in X; minimized at the search cap");
        }
    }

    // Numeric minimization as cross-check / fallback.
    const int grid_n = 96;
    std::vector<double> gx(grid_n), gr(grid_n);
    for (int i = 0; i < grid_n; ++i) {
        double f = double(i) / (grid_n - 1);
        gx[i] = x_lo * std::pow(x_max / x_lo, f);
        gr[i] = rho_at(gx[i]);
    }
    int gbest = 0;
    for (int i = 1; i < grid_n; ++i)
        if (gr[i] < gr[gbest]) gbest = i;
    int dips = 0;
    for (int i = 1; i + 1 < grid_n; ++i)
        if (gr[i] < gr[i - 1] * (1.0 - 1e-12) && gr[i] < gr[i + 1] * (1.0 - 1e-12)) ++dips;
    if (dips > 1)
        res.notes.push_back("intensity profile is not unimodal on the sample grid; "
                            "reporting the best grid-refined minimum");

    double lo = gx[std::max(0, gbest - 1)];
    double hi = gx[std::min(grid_n - 1, gbest + 1)];
    const double gold = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = hi - gold * (hi - lo), d = lo + gold * (hi - lo);
    double fc = rho_at(c), fd = rho_at(d);
    while (hi - lo > 1e-10 * hi) {
        if (fc < fd) {
            hi = d; d = c; fd = fc;
            c = hi - gold * (hi - lo);
            fc = rho_at(c);
        } else {
            lo = c; c = d; fc = fd;
            d = lo + gold * (hi - lo);
            fd = rho_at(d);
        }
    }
    double numeric_x0 = 0.5 * (lo + hi);
    if (gbest == grid_n - 1) {
        numeric_x0 = x_max;
        res.cap_dominated = true;
    }

    double x0 = numeric_x0;
    if (analytic_x0 > 0.0) {
        double ra = rho_at(analytic_x0), rn = rho_at(numeric_x0);
        x0 = (ra <= rn * (1.0 + 1e-9)) ? analytic_x0 : numeric_x0;
    }

    res.x0 = x0;
    res.shape = solve_psi(prob, x0);
    res.psi_x0 = res.shape.volume;
    res.rho = res.psi_x0 / (x0 - M);
    return res;
}

}  // namespace lux::bound
