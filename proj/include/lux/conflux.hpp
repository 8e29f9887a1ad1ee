#pragma once

// Communication-efficient LU with tournament pivoting on the simulated
// machine. The matrix lives as v*v tiles replicated across grid layers as
// partial sums; rows never migrate, a chosen-row mask advances instead of row
// swaps. Every transferred word passes through the netsim ledger, so measured
// traffic can be compared against closed-form predictions step by step.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lux/dense.hpp"
#include "lux/netsim.hpp"

namespace lux::conflux {

using json = nlohmann::json;

struct GridError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// [p1 x p1 x layers] processor grid; ranks beyond active() idle.
struct GridConfig {
    int p1 = 1;
    int layers = 1;
    int active() const { return p1 * p1 * layers; }
};

// Picks the grid with the most replication the memory budget allows. Each
// rank must hold its tile share of one layer: n^2/p1^2 words.
inline GridConfig select_grid(int ranks, std::int64_t n, double memory, int layers_override = 0) {
    if (ranks < 1) throw GridError("at least one rank required");
    if (n < 1) throw GridError("matrix dimension must be positive");
    auto side = [&](int c) {
        int p1 = 1;
        while (std::int64_t(p1 + 1) * (p1 + 1) * c <= ranks) ++p1;
        return p1;
    };
    auto fits = [&](int p1) {
        return double(n) * double(n) / (double(p1) * p1) <= memory * (1.0 + 1e-9);
    };
    if (layers_override > 0) {
        int c = layers_override;
        if (std::int64_t(c) > ranks) throw GridError("more layers than ranks");
        int p1 = side(c);
        if (!fits(p1))
            throw GridError("memory budget too small for a " + std::to_string(p1) + "x" +
                            std::to_string(p1) + "x" + std::to_string(c) + " grid");
        return {p1, c};
    }
    int c_cube = 1;
    while (std::int64_t(c_cube) * c_cube * c_cube < ranks) ++c_cube;
    int c_mem = int(std::max(1.0, std::floor(memory * ranks / (double(n) * n))));
    GridConfig best{0, 0};
    std::int64_t best_score = -1;
    for (int c = 1; c <= std::min(c_cube, c_mem); ++c) {
        int p1 = side(c);
        if (p1 < 1 || !fits(p1)) continue;
        std::int64_t active = std::int64_t(p1) * p1 * c;
        std::int64_t score = active * c;
        if (score > best_score ||
            (score == best_score && (active > best.active() ||
                                     (active == best.active() && p1 > best.p1)))) {
            best = {p1, c};
            best_score = score;
        }
    }
    if (best_score < 0)
        throw GridError("no feasible grid: need at least n^2/floor(sqrt(P))^2 words per rank");
    return best;
}

struct FactorConfig {
    std::int64_t n = 0;
    int ranks = 1;
    double memory = 0;  // words per rank
    int block = 0;      // tile side; 0 picks max(32, layers)
    int layers = 0;     // 0 picks automatically from the memory budget
    std::uint64_t seed = 1;
    bool strict_memory = false;
    bool verify = false;
};

struct StepCost {
    std::int64_t t = 0;
    std::int64_t charged_words = 0;  // summed over ranks for this iteration
    double avg_charged = 0;          // charged_words / active ranks
    double model_leading = 0;        // 2*n*v*(n-t*v) / (P*sqrt(M))
    double model_lower_unit = 0;     // n*v / P, to be scaled by a pinned constant
};

struct FactorResult {
    GridConfig grid;
    std::int64_t n = 0, n_padded = 0;
    int block = 0;
    std::uint64_t seed = 1;
    std::vector<std::int64_t> pivots;  // original row indices in elimination order
    std::vector<StepCost> steps;
    double residual = -1.0;  // set when verification is requested
    netsim::CommLedger ledger{1, 8};

    json summary() const {
        json steps_j = json::array();
        for (const auto& s : steps)
            steps_j.push_back({{"t", s.t},
                               {"charged_words", s.charged_words},
                               {"avg_charged_words", s.avg_charged},
                               {"model_leading", s.model_leading},
                               {"model_lower_unit", s.model_lower_unit}});
        json out{{"n", n},
                 {"n_padded", n_padded},
                 {"block", block},
                 {"p1_sqrt", grid.p1},
                 {"layers", grid.layers},
                 {"active_ranks", grid.active()},
                 {"seed", seed},
                 {"pivots", pivots},
                 {"steps", steps_j},
                 {"comm", ledger.summary()}};
        if (residual >= 0) out["residual"] = residual;
        return out;
    }
};

namespace detail {

using dense::Matrix;

// Masked partial-pivot selection: keeps `want` rows in pivot order, returning
// their original (untouched) values. `ids` must be ascending so that ties
// break toward the smaller global row. During local candidate selection a
// structurally zero residual column is skipped rather than fatal, so rows
// whose content sits in later columns still make the cut; only the final
// merged selection (`require_full`) treats it as a singular panel.
inline void select_pivot_rows(std::vector<std::int64_t>& ids, std::vector<double>& vals,
                              std::int64_t v, std::int64_t want, std::int64_t t,
                              bool require_full = true) {
    const std::int64_t rows = std::int64_t(ids.size());
    want = std::min(want, rows);
    std::vector<double> work = vals;
    std::vector<char> used(size_t(rows), 0);
    std::vector<std::int64_t> order;
    for (std::int64_t k = 0; k < v && std::int64_t(order.size()) < want; ++k) {
        std::int64_t arg = -1;
        double best = -1.0;
        for (std::int64_t i = 0; i < rows; ++i) {
            if (used[size_t(i)]) continue;
            double m = std::abs(work[size_t(i * v + k)]);
            if (m > best) {
                best = m;
                arg = i;
            }
        }
        if (arg < 0 || best < 1e-300) {
            if (require_full)
                throw dense::SingularMatrixError("singular pivot column in step " +
                                                 std::to_string(t));
            continue;
        }
        used[size_t(arg)] = 1;
        order.push_back(arg);
        const double d = work[size_t(arg * v + k)];
        for (std::int64_t i = 0; i < rows; ++i) {
            if (used[size_t(i)]) continue;
            double l = work[size_t(i * v + k)] / d;
            for (std::int64_t j = k + 1; j < v; ++j)
                work[size_t(i * v + j)] -= l * work[size_t(arg * v + j)];
        }
    }
    std::vector<std::int64_t> nids;
    std::vector<double> nvals;
    nvals.reserve(size_t(want * v));
    for (auto idx : order) {
        nids.push_back(ids[size_t(idx)]);
        nvals.insert(nvals.end(), vals.begin() + idx * v, vals.begin() + (idx + 1) * v);
    }
    ids = std::move(nids);
    vals = std::move(nvals);
}

inline void merge_candidates(std::vector<std::int64_t>& ids, std::vector<double>& vals,
                             const std::vector<std::int64_t>& oids,
                             const std::vector<double>& ovals, std::int64_t v, std::int64_t t) {
    std::vector<std::pair<std::int64_t, const double*>> all;
    for (size_t i = 0; i < ids.size(); ++i) all.emplace_back(ids[i], &vals[i * size_t(v)]);
    for (size_t i = 0; i < oids.size(); ++i) all.emplace_back(oids[i], &ovals[i * size_t(v)]);
    std::sort(all.begin(), all.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::int64_t> mids;
    std::vector<double> mvals;
    mvals.reserve(all.size() * size_t(v));
    for (auto& [id, p] : all) {
        mids.push_back(id);
        mvals.insert(mvals.end(), p, p + v);
    }
    select_pivot_rows(mids, mvals, v, v, t, /*require_full=*/false);
    ids = std::move(mids);
    vals = std::move(mvals);
}

struct RankState {
    bool active = false;
    int pi = 0, pj = 0, layer = 0;
    std::map<std::pair<std::int64_t, std::int64_t>, std::vector<double>> tiles;
    std::vector<char> chosen;
    std::vector<std::int64_t> win;
    Matrix a00;
    std::map<std::int64_t, std::vector<double>> panel;  // row -> v panel values
    std::vector<std::int64_t> cand_ids;
    std::vector<double> cand_vals;
    std::map<std::int64_t, std::vector<double>> a10;  // row -> v (multipliers after solve)
    std::map<std::int64_t, std::vector<double>> a01;  // col -> v in pivot order
    std::unordered_map<std::int64_t, std::vector<double>> s10, s01;  // layer slices
    std::map<std::pair<std::int64_t, std::int64_t>, std::vector<double>> l_store, u_store;
    std::map<std::int64_t, Matrix> diag;  // rank 0 keeps factored blocks per step
    std::map<std::int64_t, std::vector<std::int64_t>> diag_ids;
};

class Engine {
public:
    Engine(const FactorConfig& cfg, GridConfig grid, std::int64_t npad, int v)
        : cfg_(cfg), grid_(grid), npad_(npad), v_(v), vc_(v / grid.layers),
          nb_(npad / v), states_(size_t(cfg.ranks)) {
        if (grid_.p1 == 1)
            tsteps_ = 0;
        else if ((grid_.p1 & (grid_.p1 - 1)) == 0) {
            mode_ = Mode::Butterfly;
            for (int q = grid_.p1; q > 1; q >>= 1) ++tsteps_;
        } else {
            mode_ = Mode::Gather;
            tsteps_ = 2;
        }
        for (int r = 0; r < grid_.active(); ++r) members_.push_back(r);
        for (int r = 0; r < cfg_.ranks; ++r) init_rank(r);
    }

    std::int64_t slots() const { return 6 + tsteps_; }
    std::int64_t iterations() const { return nb_; }
    const std::vector<std::int64_t>& pivots() const { return pivots_; }
    const std::vector<RankState>& states() const { return states_; }

    void step(netsim::RankCtx& ctx) {
        RankState& st = states_[size_t(ctx.rank())];
        if (!st.active) {
            ctx.set_resident_words(0);
            ctx.halt();
            return;
        }
        const std::int64_t t = ctx.step() / slots();
        if (t >= nb_) {
            declare(ctx, st);
            ctx.halt();
            return;
        }
        const std::int64_t slot = ctx.step() % slots();
        if (slot == 0)
            panel_post(ctx, st, t);
        else if (slot == 1)
            panel_collect(ctx, st, t);
        else if (slot < tsteps_ + 1)
            tournament_round(ctx, st, t, slot);
        else if (slot == tsteps_ + 1)
            tournament_finish(ctx, st, t);
        else if (slot == tsteps_ + 2)
            block_read(ctx, st, t);
        else if (slot == tsteps_ + 3)
            pivot_rows_collect(ctx, st, t);
        else if (slot == tsteps_ + 4)
            schur_post(ctx, st, t);
        else
            schur_apply(ctx, st, t);
        declare(ctx, st);
    }

private:
    enum class Mode { Solo, Butterfly, Gather };
    enum Tag : std::int64_t { PANEL = 1, A00 = 2, A10 = 3, RED5 = 4, A01 = 5, S10 = 6, S01 = 7, TOURN = 100 };

    int encode(int pi, int pj, int layer) const {
        return layer * grid_.p1 * grid_.p1 + pj * grid_.p1 + pi;
    }
    int face_row(std::int64_t g) const { return int((g / v_) % grid_.p1); }
    int face_col(std::int64_t g) const { return int((g / v_) % grid_.p1); }

    void init_rank(int r) {
        RankState& st = states_[size_t(r)];
        if (r >= grid_.active()) return;
        st.active = true;
        st.pi = r % grid_.p1;
        st.pj = (r / grid_.p1) % grid_.p1;
        st.layer = r / (grid_.p1 * grid_.p1);
        st.chosen.assign(size_t(npad_), 0);
        for (std::int64_t bi = st.pi; bi < nb_; bi += grid_.p1)
            for (std::int64_t bj = st.pj; bj < nb_; bj += grid_.p1) {
                std::vector<double> tile(size_t(v_) * v_, 0.0);
                if (st.layer == 0)
                    for (std::int64_t i = 0; i < v_; ++i)
                        for (std::int64_t j = 0; j < v_; ++j)
                            tile[size_t(i * v_ + j)] = entry(bi * v_ + i, bj * v_ + j);
                st.tiles[{bi, bj}] = std::move(tile);
            }
    }

    double entry(std::int64_t i, std::int64_t j) const {
        if (i < cfg_.n && j < cfg_.n) return dense::matrix_entry(cfg_.seed, i, j);
        return i == j ? 1.0 : 0.0;
    }

    // Slot 0: non-root layers of the panel's face column ship their partial
    // sums toward the pivoting layer; the shipped tiles are done for good.
    void panel_post(netsim::RankCtx& ctx, RankState& st, std::int64_t t) {
        const int fct = int(t % grid_.p1), lt = int(t % grid_.layers);
        if (st.pj != fct) return;
        if (st.layer != lt) {
            std::vector<std::int64_t> ids;
            std::vector<double> data;
            for (std::int64_t bi = st.pi; bi < nb_; bi += grid_.p1) {
                auto it = st.tiles.find({bi, t});
                if (it == st.tiles.end()) continue;
                for (std::int64_t i = 0; i < v_; ++i) {
                    std::int64_t g = bi * v_ + i;
                    if (st.chosen[size_t(g)]) continue;
                    ids.push_back(g);
                    data.insert(data.end(), it->second.begin() + i * v_,
                                it->second.begin() + (i + 1) * v_);
                }
            }
            if (!ids.empty())
                ctx.send(encode(st.pi, fct, lt), PANEL, std::move(data), std::move(ids), "reduce",
                         -1, /*charge_sender=*/true);
            for (std::int64_t bi = st.pi; bi < nb_; bi += grid_.p1) st.tiles.erase({bi, t});
        }
    }

    // Slot 1: the pivoting layer folds in all layer contributions, then seeds
    // the tournament with its local pivot candidates.
    void panel_collect(netsim::RankCtx& ctx, RankState& st, std::int64_t t) {
        const int fct = int(t % grid_.p1), lt = int(t % grid_.layers);
        if (st.pj != fct || st.layer != lt) return;
        for (std::int64_t bi = st.pi; bi < nb_; bi += grid_.p1) {
            auto it = st.tiles.find({bi, t});
            if (it == st.tiles.end()) continue;
            for (std::int64_t i = 0; i < v_; ++i) {
                std::int64_t g = bi * v_ + i;
                if (st.chosen[size_t(g)]) continue;
                st.panel[g] = std::vector<double>(it->second.begin() + i * v_,
                                                 it->second.begin() + (i + 1) * v_);
            }
            st.tiles.erase(it);
        }
        for (int l = 0; l < grid_.layers; ++l) {
            if (l == lt) continue;
            int src = encode(st.pi, fct, l);
            if (!ctx.has(src, PANEL)) continue;
            const auto& m = ctx.require(src, PANEL);
            for (size_t k = 0; k < m.ints.size(); ++k) {
                auto& row = st.panel[m.ints[k]];
                if (row.empty()) row.assign(size_t(v_), 0.0);
                for (std::int64_t j = 0; j < v_; ++j) row[size_t(j)] += m.data[k * size_t(v_) + j];
            }
        }
        st.cand_ids.clear();
        st.cand_vals.clear();
        for (const auto& [g, row] : st.panel) {
            st.cand_ids.push_back(g);
            st.cand_vals.insert(st.cand_vals.end(), row.begin(), row.end());
        }
        if (!st.cand_ids.empty())
            select_pivot_rows(st.cand_ids, st.cand_vals, v_, v_, t, /*require_full=*/false);
        if (mode_ == Mode::Butterfly) {
            int partner = encode(st.pi ^ 1, fct, lt);
            ctx.send(partner, TOURN + 0, st.cand_vals, st.cand_ids, "tourn");
        } else if (mode_ == Mode::Gather) {
            if (st.pi != 0) ctx.send(encode(0, fct, lt), TOURN + 0, st.cand_vals, st.cand_ids, "tourn");
        } else {
            finalize_block(ctx, st, t);
            st.cand_ids.clear();
            st.cand_vals.clear();
        }
    }

    // Butterfly slots 2..tsteps_: exchange candidate blocks. Gather slot 2:
    // participant zero merges everything.
    void tournament_round(netsim::RankCtx& ctx, RankState& st, std::int64_t t, std::int64_t slot) {
        const int fct = int(t % grid_.p1), lt = int(t % grid_.layers);
        if (st.pj != fct || st.layer != lt) return;
        if (mode_ == Mode::Gather) {
            if (slot != 2 || st.pi != 0) return;
            for (int p = 1; p < grid_.p1; ++p) {
                const auto& m = ctx.require(encode(p, fct, lt), TOURN + 0);
                merge_candidates(st.cand_ids, st.cand_vals, m.ints, m.data, v_, t);
            }
            prepare_block(st, t);
            return;
        }
        const int round = int(slot - 2);
        const auto& m = ctx.require(encode(st.pi ^ (1 << round), fct, lt), TOURN + round);
        merge_candidates(st.cand_ids, st.cand_vals, m.ints, m.data, v_, t);
        int partner = encode(st.pi ^ (1 << (round + 1)), fct, lt);
        ctx.send(partner, TOURN + round + 1, st.cand_vals, st.cand_ids, "tourn");
    }

    // Slot tsteps_+1: the winner set is final; participant zero factors the
    // pivot block and broadcasts it with the winner row ids.
    void tournament_finish(netsim::RankCtx& ctx, RankState& st, std::int64_t t) {
        const int fct = int(t % grid_.p1), lt = int(t % grid_.layers);
        if (st.pj != fct || st.layer != lt) return;
        if (mode_ == Mode::Butterfly) {
            const int round = tsteps_ - 1;
            const auto& m = ctx.require(encode(st.pi ^ (1 << round), fct, lt), TOURN + round);
            merge_candidates(st.cand_ids, st.cand_vals, m.ints, m.data, v_, t);
            if (st.pi == 0) {
                prepare_block(st, t);
                finalize_block(ctx, st, t);
            }
        } else if (mode_ == Mode::Gather) {
            if (st.pi == 0) finalize_block(ctx, st, t);
        }
        st.cand_ids.clear();
        st.cand_vals.clear();
    }

    void prepare_block(RankState& st, std::int64_t t) {
        if (std::int64_t(st.cand_ids.size()) != v_)
            throw dense::SingularMatrixError("singular pivot block in step " + std::to_string(t));
        st.win = st.cand_ids;
        st.a00 = Matrix(v_, v_);
        st.a00.a = st.cand_vals;
        try {
            dense::lu_inorder(st.a00);
        } catch (const dense::SingularMatrixError&) {
            throw dense::SingularMatrixError("singular pivot block in step " + std::to_string(t));
        }
    }

    void finalize_block(netsim::RankCtx& ctx, RankState& st, std::int64_t t) {
        if (mode_ == Mode::Solo) prepare_block(st, t);
        netsim::bcast_post(ctx, members_, ctx.rank(), A00, st.a00.a, st.win,
                           std::int64_t(v_) * v_ + v_);
    }

    // Slot tsteps_+2: everyone learns the pivot block; the pivoting layer
    // scatters the remaining panel rows round-robin, and non-pivot layers ship
    // their partial sums of the winner rows' trailing columns.
    void block_read(netsim::RankCtx& ctx, RankState& st, std::int64_t t) {
        const int fct = int(t % grid_.p1), lt = int(t % grid_.layers);
        const int root = encode(0, fct, lt);
        if (ctx.rank() != root) {
            const auto& m = ctx.require(root, A00);
            st.a00 = Matrix(v_, v_);
            st.a00.a = m.data;
            st.win = m.ints;
        }
        for (auto w : st.win) st.chosen[size_t(w)] = 1;
        if (ctx.rank() == 0) {
            pivots_.insert(pivots_.end(), st.win.begin(), st.win.end());
            st.diag[t] = st.a00;
            st.diag_ids[t] = st.win;
        }
        if (st.pj == fct && st.layer == lt) {
            for (auto w : st.win) st.panel.erase(w);
            std::vector<std::int64_t> rows;
            for (std::int64_t g = 0; g < npad_; ++g)
                if (!st.chosen[size_t(g)]) rows.push_back(g);
            std::unordered_map<std::int64_t, std::int64_t> pos;
            for (std::int64_t i = 0; i < std::int64_t(rows.size()); ++i) pos[rows[size_t(i)]] = i;
            std::vector<std::vector<std::int64_t>> bids(size_t(grid_.active()));
            std::vector<std::vector<double>> bdata(size_t(grid_.active()));
            for (auto& [g, row] : st.panel) {
                int dst = int(pos[g] % grid_.active());
                bids[size_t(dst)].push_back(g);
                bdata[size_t(dst)].insert(bdata[size_t(dst)].end(), row.begin(), row.end());
            }
            for (int d = 0; d < grid_.active(); ++d) {
                if (bids[size_t(d)].empty()) continue;
                if (d == ctx.rank()) {
                    for (size_t k = 0; k < bids[size_t(d)].size(); ++k)
                        st.a10[bids[size_t(d)][k]] = std::vector<double>(
                            bdata[size_t(d)].begin() + k * size_t(v_),
                            bdata[size_t(d)].begin() + (k + 1) * size_t(v_));
                } else {
                    ctx.send(d, A10, std::move(bdata[size_t(d)]), std::move(bids[size_t(d)]),
                             "scatter");
                }
            }
            st.panel.clear();
        }
        if (st.layer != lt) {
            std::vector<std::int64_t> meta;
            std::vector<double> data;
            collect_pivot_rows(st, t, meta, data, nullptr);
            if (!meta.empty())
                ctx.send(encode(st.pi, st.pj, lt), RED5, std::move(data), std::move(meta),
                         "reduce", -1, /*charge_sender=*/true);
        }
    }

    // Appends (pivot position, column, value) triples for this rank's share
    // of the winner rows' trailing columns; accumulates into `sum` instead
    // when collecting on the pivoting layer.
    void collect_pivot_rows(RankState& st, std::int64_t t, std::vector<std::int64_t>& meta,
                            std::vector<double>& data,
                            std::map<std::int64_t, std::vector<std::pair<int, double>>>* sum) {
        for (std::int64_t wp = 0; wp < std::int64_t(st.win.size()); ++wp) {
            std::int64_t w = st.win[size_t(wp)];
            if (face_row(w) != st.pi) continue;
            std::int64_t bw = w / v_, li = w % v_;
            for (std::int64_t bj = st.pj; bj < nb_; bj += grid_.p1) {
                if (bj <= t) continue;
                auto it = st.tiles.find({bw, bj});
                if (it == st.tiles.end()) continue;
                for (std::int64_t cc = 0; cc < v_; ++cc) {
                    std::int64_t gc = bj * v_ + cc;
                    double val = it->second[size_t(li * v_ + cc)];
                    if (sum) {
                        (*sum)[gc].push_back({int(wp), val});
                    } else {
                        meta.push_back(wp);
                        meta.push_back(gc);
                        data.push_back(val);
                    }
                }
            }
        }
    }

    // Slot tsteps_+3: the pivoting layer assembles true winner-row values and
    // scatters them column-wise; panel-row owners apply the U00 solve.
    void pivot_rows_collect(netsim::RankCtx& ctx, RankState& st, std::int64_t t) {
        const int fct = int(t % grid_.p1), lt = int(t % grid_.layers);
        if (st.layer == lt) {
            std::map<std::int64_t, std::vector<std::pair<int, double>>> cols;
            std::vector<std::int64_t> meta;
            std::vector<double> data;
            collect_pivot_rows(st, t, meta, data, &cols);
            for (int l = 0; l < grid_.layers; ++l) {
                if (l == lt) continue;
                int src = encode(st.pi, st.pj, l);
                if (!ctx.has(src, RED5)) continue;
                const auto& m = ctx.require(src, RED5);
                for (size_t k = 0; k < m.data.size(); ++k) {
                    int wp = int(m.ints[2 * k]);
                    std::int64_t gc = m.ints[2 * k + 1];
                    auto& lst = cols[gc];
                    bool found = false;
                    for (auto& [p, val] : lst)
                        if (p == wp) {
                            val += m.data[k];
                            found = true;
                        }
                    if (!found) lst.push_back({wp, m.data[k]});
                }
            }
            std::vector<std::vector<std::int64_t>> bmeta(size_t(grid_.active()));
            std::vector<std::vector<double>> bdata(size_t(grid_.active()));
            const std::int64_t base = (t + 1) * v_;
            for (auto& [gc, lst] : cols) {
                int dst = int((gc - base) % grid_.active());
                for (auto& [wp, val] : lst) {
                    if (dst == ctx.rank()) {
                        auto& col = st.a01[gc];
                        if (col.empty()) col.assign(size_t(v_), 0.0);
                        col[size_t(wp)] = val;
                    } else {
                        bmeta[size_t(dst)].push_back(wp);
                        bmeta[size_t(dst)].push_back(gc);
                        bdata[size_t(dst)].push_back(val);
                    }
                }
            }
            for (int d = 0; d < grid_.active(); ++d)
                if (!bdata[size_t(d)].empty())
                    ctx.send(d, A01, std::move(bdata[size_t(d)]), std::move(bmeta[size_t(d)]),
                             "scatter");
        }
        for (int p = 0; p < grid_.p1; ++p) {
            int src = encode(p, fct, lt);
            if (src == ctx.rank() || !ctx.has(src, A10)) continue;
            const auto& m = ctx.require(src, A10);
            for (size_t k = 0; k < m.ints.size(); ++k)
                st.a10[m.ints[k]] = std::vector<double>(m.data.begin() + k * size_t(v_),
                                                        m.data.begin() + (k + 1) * size_t(v_));
        }
        for (auto& [g, row] : st.a10) {
            dense::solve_row_upper(st.a00, row.data());
            st.l_store[{t, g}] = row;
        }
    }

    // Slot tsteps_+4: finish the L00 solve on gathered columns, then slice
    // both update operands by layer and fan them out to the faces that need
    // them for the rank-v update.
    void schur_post(netsim::RankCtx& ctx, RankState& st, std::int64_t t) {
        const int lt = int(t % grid_.layers);
        for (int pj = 0; pj < grid_.p1; ++pj)
            for (int pi = 0; pi < grid_.p1; ++pi) {
                int src = encode(pi, pj, lt);
                if (src == ctx.rank() || !ctx.has(src, A01)) continue;
                const auto& m = ctx.require(src, A01);
                for (size_t k = 0; k < m.data.size(); ++k) {
                    auto& col = st.a01[m.ints[2 * k + 1]];
                    if (col.empty()) col.assign(size_t(v_), 0.0);
                    col[size_t(m.ints[2 * k])] = m.data[k];
                }
            }
        for (auto& [gc, col] : st.a01) {
            dense::solve_col_lower_unit(st.a00, col.data());
            st.u_store[{t, gc}] = col;
        }
        std::vector<std::vector<std::int64_t>> bids(size_t(grid_.active()));
        std::vector<std::vector<double>> bdata(size_t(grid_.active()));
        for (auto& [g, row] : st.a10) {
            int pir = face_row(g);
            for (int pj = 0; pj < grid_.p1; ++pj)
                for (int l = 0; l < grid_.layers; ++l) {
                    int dst = encode(pir, pj, l);
                    auto first = row.begin() + l * vc_;
                    if (dst == ctx.rank()) {
                        st.s10[g] = std::vector<double>(first, first + vc_);
                    } else {
                        bids[size_t(dst)].push_back(g);
                        bdata[size_t(dst)].insert(bdata[size_t(dst)].end(), first, first + vc_);
                    }
                }
        }
        for (int d = 0; d < grid_.active(); ++d)
            if (!bids[size_t(d)].empty())
                ctx.send(d, S10, std::move(bdata[size_t(d)]), std::move(bids[size_t(d)]), "bcast");
        bids.assign(size_t(grid_.active()), {});
        bdata.assign(size_t(grid_.active()), {});
        for (auto& [gc, col] : st.a01) {
            int pjc = face_col(gc);
            for (int pi = 0; pi < grid_.p1; ++pi)
                for (int l = 0; l < grid_.layers; ++l) {
                    int dst = encode(pi, pjc, l);
                    auto first = col.begin() + l * vc_;
                    if (dst == ctx.rank()) {
                        st.s01[gc] = std::vector<double>(first, first + vc_);
                    } else {
                        bids[size_t(dst)].push_back(gc);
                        bdata[size_t(dst)].insert(bdata[size_t(dst)].end(), first, first + vc_);
                    }
                }
        }
        for (int d = 0; d < grid_.active(); ++d)
            if (!bids[size_t(d)].empty())
                ctx.send(d, S01, std::move(bdata[size_t(d)]), std::move(bids[size_t(d)]), "bcast");
        st.a10.clear();
        st.a01.clear();
    }

    // Slot tsteps_+5: rank-v update of every live trailing tile from the
    // received layer slices.
    void schur_apply(netsim::RankCtx& ctx, RankState& st, std::int64_t t) {
        for (int r : members_) {
            if (r == ctx.rank()) continue;
            if (ctx.has(r, S10)) {
                const auto& m = ctx.require(r, S10);
                for (size_t k = 0; k < m.ints.size(); ++k)
                    st.s10[m.ints[k]] = std::vector<double>(m.data.begin() + k * size_t(vc_),
                                                            m.data.begin() + (k + 1) * size_t(vc_));
            }
            if (ctx.has(r, S01)) {
                const auto& m = ctx.require(r, S01);
                for (size_t k = 0; k < m.ints.size(); ++k)
                    st.s01[m.ints[k]] = std::vector<double>(m.data.begin() + k * size_t(vc_),
                                                            m.data.begin() + (k + 1) * size_t(vc_));
            }
        }
        std::vector<const double*> colp(static_cast<size_t>(v_), nullptr);
        for (auto& [key, tile] : st.tiles) {
            auto [bi, bj] = key;
            if (bj <= t) continue;
            for (std::int64_t cc = 0; cc < v_; ++cc) {
                auto it = st.s01.find(bj * v_ + cc);
                colp[size_t(cc)] = it == st.s01.end() ? nullptr : it->second.data();
            }
            for (std::int64_t i = 0; i < v_; ++i) {
                std::int64_t g = bi * v_ + i;
                if (st.chosen[size_t(g)]) continue;
                auto it = st.s10.find(g);
                if (it == st.s10.end()) continue;
                const double* rowp = it->second.data();
                double* out = tile.data() + i * v_;
                for (std::int64_t cc = 0; cc < v_; ++cc) {
                    const double* cp = colp[size_t(cc)];
                    if (!cp) continue;
                    double acc = 0.0;
                    for (std::int64_t k = 0; k < vc_; ++k) acc += rowp[k] * cp[k];
                    out[cc] -= acc;
                }
            }
        }
        st.s10.clear();
        st.s01.clear();
    }

    void declare(netsim::RankCtx& ctx, const RankState& st) const {
        std::int64_t words = std::int64_t(st.tiles.size()) * v_ * v_;
        words += std::int64_t(st.panel.size()) * v_;
        words += std::int64_t(st.cand_vals.size());
        words += std::int64_t(st.a00.a.size());
        words += std::int64_t(st.a10.size()) * v_ + std::int64_t(st.a01.size()) * v_;
        words += std::int64_t(st.s10.size()) * vc_ + std::int64_t(st.s01.size()) * vc_;
        words += std::int64_t(st.l_store.size()) * v_ + std::int64_t(st.u_store.size()) * v_;
        words += std::int64_t(st.diag.size()) * v_ * v_;
        ctx.set_resident_words(words);
    }

    FactorConfig cfg_;
    GridConfig grid_;
    std::int64_t npad_, v_, vc_, nb_;
    Mode mode_ = Mode::Solo;
    int tsteps_ = 0;
    std::vector<int> members_;
    std::vector<RankState> states_;
    std::vector<std::int64_t> pivots_;
};

}  // namespace detail

inline FactorResult factorize(const FactorConfig& cfg) {
    if (cfg.n < 1) throw GridError("matrix dimension must be positive");
    GridConfig grid = select_grid(cfg.ranks, cfg.n, cfg.memory, cfg.layers);
    int v = cfg.block > 0 ? cfg.block : std::max(32, grid.layers);
    if (v % grid.layers != 0) v += grid.layers - v % grid.layers;
    if (v > cfg.n) {
        v = int(cfg.n);
        if (v % grid.layers != 0) v += grid.layers - v % grid.layers;
    }
    const std::int64_t npad = (cfg.n + v - 1) / v * v;

    detail::Engine eng(cfg, grid, npad, v);
    netsim::MachineConfig mc;
    mc.ranks = cfg.ranks;
    mc.memory_words = std::int64_t(cfg.memory);
    mc.strict_memory = cfg.strict_memory;
    mc.max_supersteps = eng.iterations() * eng.slots() + 4;
    netsim::CommLedger ledger =
        netsim::run_spmd(mc, [&](netsim::RankCtx& ctx) { eng.step(ctx); });

    FactorResult res;
    res.grid = grid;
    res.n = cfg.n;
    res.n_padded = npad;
    res.block = v;
    res.seed = cfg.seed;
    res.pivots = eng.pivots();
    res.ledger = ledger;

    res.steps.assign(size_t(eng.iterations()), {});
    for (std::int64_t t = 0; t < eng.iterations(); ++t) {
        auto& s = res.steps[size_t(t)];
        s.t = t;
        s.model_leading = 2.0 * double(npad) * v * double(npad - t * v) /
                          (grid.active() * std::sqrt(cfg.memory));
        s.model_lower_unit = double(npad) * v / grid.active();
    }
    for (const auto& e : ledger.entries()) {
        std::int64_t t = e.step / eng.slots();
        if (t >= 0 && t < eng.iterations()) res.steps[size_t(t)].charged_words += e.words;
    }
    for (auto& s : res.steps) s.avg_charged = double(s.charged_words) / grid.active();

    if (cfg.verify) {
        const auto& pv = res.pivots;
        std::vector<std::int64_t> pos(size_t(npad), 0);
        for (std::int64_t q = 0; q < npad; ++q) pos[size_t(pv[size_t(q)])] = q;
        dense::Matrix L(npad, npad), U(npad, npad);
        const detail::RankState& r0 = eng.states()[0];
        for (const auto& [t, blk] : r0.diag) {
            for (std::int64_t li = 0; li < v; ++li) {
                std::int64_t p = t * v + li;
                L.at(p, p) = 1.0;
                for (std::int64_t lj = 0; lj < v; ++lj) {
                    if (lj < li)
                        L.at(p, t * v + lj) = blk.at(li, lj);
                    else
                        U.at(p, t * v + lj) = blk.at(li, lj);
                }
            }
        }
        for (const auto& st : eng.states()) {
            for (const auto& [key, row] : st.l_store) {
                auto [t, g] = key;
                for (std::int64_t lj = 0; lj < v; ++lj)
                    L.at(pos[size_t(g)], t * v + lj) = row[size_t(lj)];
            }
            for (const auto& [key, col] : st.u_store) {
                auto [t, gc] = key;
                for (std::int64_t li = 0; li < v; ++li) U.at(t * v + li, gc) = col[size_t(li)];
            }
        }
        double num = 0.0, den = 0.0;
        std::vector<double> rrow(static_cast<size_t>(npad), 0.0);
        for (std::int64_t q = 0; q < npad; ++q) {
            std::int64_t src = pv[size_t(q)];
            for (std::int64_t j = 0; j < npad; ++j) {
                double a = (src < cfg.n && j < cfg.n) ? dense::matrix_entry(cfg.seed, src, j)
                                                      : (src == j ? 1.0 : 0.0);
                rrow[size_t(j)] = a;
            }
            for (std::int64_t k = 0; k <= q; ++k) {
                double l = L.at(q, k);
                if (l == 0.0) continue;
                const double* urow = U.row(k);
                for (std::int64_t j = k; j < npad; ++j) rrow[size_t(j)] -= l * urow[j];
            }
            for (std::int64_t j = 0; j < npad; ++j) num += rrow[size_t(j)] * rrow[size_t(j)];
        }
        for (std::int64_t i = 0; i < npad; ++i)
            for (std::int64_t j = 0; j < npad; ++j) {
                double a = (i < cfg.n && j < cfg.n) ? dense::matrix_entry(cfg.seed, i, j)
                                                    : (i == j ? 1.0 : 0.0);
                den += a * a;
            }
        res.residual = std::sqrt(num) / std::sqrt(den);
    }
    return res;
}

}  // namespace lux::conflux
