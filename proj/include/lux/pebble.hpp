#pragma once

// Red-blue pebble game on computation DAGs: schedule replay with rule-level
// diagnostics, exact minimum-I/O search for small graphs, partition quality
// checks (minimum set and minimum dominator sizes), and a generator for the
// element-granularity LU cDAG.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace lux::pebble {

using json = nlohmann::json;

struct Vertex {
    std::string id;
    bool is_input = false;
    bool is_output = false;
    std::string label;
};

struct CDag {
    std::vector<Vertex> vertices;
    std::vector<std::pair<int, int>> edges;
    std::vector<std::vector<int>> preds, succs;
    std::map<std::string, int> index;

    int find(const std::string& id) const {
        auto it = index.find(id);
        return it == index.end() ? -1 : it->second;
    }

    void rebuild() {
        preds.assign(vertices.size(), {});
        succs.assign(vertices.size(), {});
        index.clear();
        for (size_t i = 0; i < vertices.size(); ++i) {
            if (!index.emplace(vertices[i].id, int(i)).second)
                throw std::runtime_error("duplicate vertex id '" + vertices[i].id + "'");
        }
        for (auto [a, b] : edges) {
            preds[b].push_back(a);
            succs[a].push_back(b);
        }
    }

    int max_in_degree() const {
        size_t m = 0;
        for (const auto& p : preds) m = std::max(m, p.size());
        return static_cast<int>(m);
    }

    std::vector<int> topo_order() const {
        std::vector<int> indeg(vertices.size(), 0), order;
        for (auto [a, b] : edges) ++indeg[b];
        std::deque<int> q;
        for (size_t i = 0; i < vertices.size(); ++i)
            if (indeg[i] == 0) q.push_back(int(i));
        while (!q.empty()) {
            int v = q.front();
            q.pop_front();
            order.push_back(v);
            for (int s : succs[v])
                if (--indeg[s] == 0) q.push_back(s);
        }
        if (order.size() != vertices.size()) throw std::runtime_error("cDAG contains a cycle");
        return order;
    }
};

inline json to_json(const CDag& g) {
    json j;
    j["vertices"] = json::array();
    for (const auto& v : g.vertices) {
        json jv{{"id", v.id}, {"kind", v.is_input ? "input" : "compute"}};
        if (v.is_output) jv["output"] = true;
        if (!v.label.empty()) jv["label"] = v.label;
        j["vertices"].push_back(std::move(jv));
    }
    j["edges"] = json::array();
    for (auto [a, b] : g.edges)
        j["edges"].push_back(json::array({g.vertices[a].id, g.vertices[b].id}));
    return j;
}

inline CDag cdag_from_json(const json& j) {
    CDag g;
    for (const auto& jv : j.at("vertices")) {
        Vertex v;
        v.id = jv.at("id").get<std::string>();
        std::string kind = jv.at("kind").get<std::string>();
        if (kind == "input") {
            v.is_input = true;
        } else if (kind == "compute" || kind == "output") {
            v.is_input = false;
        } else {
            throw std::runtime_error("unknown vertex kind '" + kind + "'");
        }
        v.is_output = kind == "output" || jv.value("output", false);
        v.label = jv.value("label", std::string{});
        g.vertices.push_back(std::move(v));
    }
    g.rebuild();
    for (const auto& je : j.at("edges")) {
        int a = g.find(je.at(0).get<std::string>());
        int b = g.find(je.at(1).get<std::string>());
        if (a < 0 || b < 0) throw std::runtime_error("edge references unknown vertex");
        g.edges.emplace_back(a, b);
    }
    g.rebuild();
    for (size_t i = 0; i < g.vertices.size(); ++i)
        if (g.vertices[i].is_input && !g.preds[i].empty())
            throw std::runtime_error("input vertex '" + g.vertices[i].id + "' has predecessors");
    g.topo_order();  // reject cycles up front
    return g;
}

// ---------------------------------------------------------------------------
// Schedules and replay

enum class MoveKind { Load, Store, Compute, Discard };

struct Move {
    MoveKind kind;
    std::string vertex;
    int hue = 0;
};

struct Schedule {
    std::vector<Move> moves;
};

inline const char* move_kind_name(MoveKind k) {
    switch (k) {
        case MoveKind::Load: return "load";
        case MoveKind::Store: return "store";
        case MoveKind::Compute: return "compute";
        case MoveKind::Discard: return "discard";
    }
    return "?";
}

inline json to_json(const Schedule& s) {
    json j;
    j["moves"] = json::array();
    for (const auto& m : s.moves)
        j["moves"].push_back({{"kind", move_kind_name(m.kind)}, {"vertex", m.vertex}, {"hue", m.hue}});
    return j;
}

inline Schedule schedule_from_json(const json& j) {
    Schedule s;
    for (const auto& jm : j.at("moves")) {
        Move m;
        std::string k = jm.at("kind").get<std::string>();
        if (k == "load") m.kind = MoveKind::Load;
        else if (k == "store") m.kind = MoveKind::Store;
        else if (k == "compute") m.kind = MoveKind::Compute;
        else if (k == "discard") m.kind = MoveKind::Discard;
        else throw std::runtime_error("unknown move kind '" + k + "'");
        m.vertex = jm.at("vertex").get<std::string>();
        m.hue = jm.value("hue", 0);
        s.moves.push_back(std::move(m));
    }
    return s;
}

struct ReplayResult {
    bool ok = false;
    std::int64_t q = 0;  // loads + stores
    size_t failed_move = 0;
    std::string rule;    // stable rule id on failure
    std::string detail;
};

// Replays a schedule under the capacity M per hue. In the parallel game
// (hues > 1) a load only needs some pebble on the vertex; in the sequential
// game the vertex has to be blue. Blue pebbles are never removed.
inline ReplayResult validate_schedule(const CDag& g, const Schedule& s, std::int64_t M,
                                      int hues = 1) {
    ReplayResult res;
    if (hues < 1) {
        res.rule = "hue-range";
        res.detail = "hue count must be at least 1";
        return res;
    }
    std::vector<char> blue(g.vertices.size(), 0);
    for (size_t i = 0; i < g.vertices.size(); ++i) blue[i] = g.vertices[i].is_input;
    std::vector<std::vector<char>> red(hues, std::vector<char>(g.vertices.size(), 0));
    std::vector<std::int64_t> red_count(hues, 0);

    auto fail = [&](size_t at, std::string rule, std::string detail) {
        res.failed_move = at;
        res.rule = std::move(rule);
        res.detail = std::move(detail);
        return res;
    };

    for (size_t mi = 0; mi < s.moves.size(); ++mi) {
        const Move& m = s.moves[mi];
        int v = g.find(m.vertex);
        if (v < 0) return fail(mi, "unknown-vertex", "no vertex named '" + m.vertex + "'");
        if (m.hue < 0 || m.hue >= hues)
            return fail(mi, "hue-range", "hue " + std::to_string(m.hue) + " outside [0, " +
                                             std::to_string(hues) + ")");
        auto& r = red[m.hue];
        switch (m.kind) {
            case MoveKind::Load: {
                bool source = blue[v];
                if (!source && hues > 1)
                    for (int h = 0; h < hues && !source; ++h) source = red[h][v];
                if (!source)
                    return fail(mi, "load-source",
                                "'" + m.vertex + "' has no pebble to load from");
                if (!r[v]) {
                    if (red_count[m.hue] + 1 > M)
                        return fail(mi, "red-cap", "hue " + std::to_string(m.hue) +
                                                       " would exceed " + std::to_string(M) +
                                                       " red pebbles");
                    r[v] = 1;
                    ++red_count[m.hue];
                }
                ++res.q;
                break;
            }
            case MoveKind::Store: {
                if (!r[v])
                    return fail(mi, "store-source",
                                "'" + m.vertex + "' holds no red pebble of hue " +
                                    std::to_string(m.hue));
                blue[v] = 1;
                ++res.q;
                break;
            }
            case MoveKind::Compute: {
                if (g.vertices[v].is_input)
                    return fail(mi, "compute-on-input", "'" + m.vertex + "' is a graph input");
                for (int p : g.preds[v])
                    if (!r[p])
                        return fail(mi, "compute-missing-predecessor",
                                    "predecessor '" + g.vertices[p].id +
                                        "' is not red in hue " + std::to_string(m.hue));
                if (!r[v]) {
                    if (red_count[m.hue] + 1 > M)
                        return fail(mi, "red-cap", "hue " + std::to_string(m.hue) +
                                                       " would exceed " + std::to_string(M) +
                                                       " red pebbles");
                    r[v] = 1;
                    ++red_count[m.hue];
                }
                break;
            }
            case MoveKind::Discard: {
                if (!r[v])
                    return fail(mi, "discard-missing",
                                "'" + m.vertex + "' holds no red pebble of hue " +
                                    std::to_string(m.hue));
                r[v] = 0;
                --red_count[m.hue];
                break;
            }
        }
        for (int h = 0; h < hues; ++h)
            if (red_count[h] > M)
                throw std::logic_error("internal red-pebble accounting breached the capacity");
    }
    for (size_t i = 0; i < g.vertices.size(); ++i)
        if (g.vertices[i].is_output && !blue[i])
            return fail(s.moves.size(), "outputs-not-blue",
                        "output '" + g.vertices[i].id + "' never reached slow memory");
    res.ok = true;
    return res;
}

// ---------------------------------------------------------------------------
// Greedy valid schedule (upper bound; also the fuzzing generator)

inline Schedule greedy_schedule(const CDag& g, std::int64_t M, std::mt19937* rng = nullptr) {
    if (M < g.max_in_degree() + 1)
        throw std::runtime_error("capacity below max in-degree + 1; no schedule exists");
    const size_t nv = g.vertices.size();
    std::vector<int> order = g.topo_order();
    std::vector<int> computes;
    for (int v : order)
        if (!g.vertices[v].is_input) computes.push_back(v);
    if (rng) {  // randomized topological order keeps dependencies, shuffles ties
        std::vector<int> indeg(nv, 0);
        for (auto [a, b] : g.edges) ++indeg[b];
        std::vector<int> ready;
        for (size_t i = 0; i < nv; ++i)
            if (indeg[i] == 0) ready.push_back(int(i));
        std::vector<int> shuffled;
        std::vector<int> deg = indeg;
        while (!ready.empty()) {
            size_t pick = (*rng)() % ready.size();
            int v = ready[pick];
            ready.erase(ready.begin() + pick);
            shuffled.push_back(v);
            for (int s : g.succs[v])
                if (--deg[s] == 0) ready.push_back(s);
        }
        computes.clear();
        for (int v : shuffled)
            if (!g.vertices[v].is_input) computes.push_back(v);
    }

    Schedule sched;
    std::vector<char> red(nv, 0), blue(nv, 0), computed(nv, 0);
    for (size_t i = 0; i < nv; ++i) blue[i] = g.vertices[i].is_input;
    std::int64_t in_red = 0;

    auto evict_one = [&](const std::set<int>& keep) {
        std::vector<int> victims;
        for (size_t i = 0; i < nv; ++i)
            if (red[i] && !keep.count(int(i))) victims.push_back(int(i));
        if (victims.empty()) throw std::logic_error("no evictable red pebble");
        // Prefer vertices that already have a blue copy.
        std::stable_sort(victims.begin(), victims.end(),
                         [&](int a, int b) { return blue[a] > blue[b]; });
        size_t pick = 0;
        if (rng && victims.size() > 1 && blue[victims[0]])
            pick = (*rng)() % std::count_if(victims.begin(), victims.end(),
                                            [&](int v) { return blue[v]; });
        int v = victims[pick];
        if (!blue[v]) {
            sched.moves.push_back({MoveKind::Store, g.vertices[v].id, 0});
            blue[v] = 1;
        }
        sched.moves.push_back({MoveKind::Discard, g.vertices[v].id, 0});
        red[v] = 0;
        --in_red;
    };

    for (int v : computes) {
        std::set<int> keep(g.preds[v].begin(), g.preds[v].end());
        keep.insert(v);
        for (int p : g.preds[v]) {
            if (red[p]) continue;
            while (in_red >= M) evict_one(keep);
            sched.moves.push_back({MoveKind::Load, g.vertices[p].id, 0});
            red[p] = 1;
            ++in_red;
        }
        while (in_red >= M) evict_one(keep);
        sched.moves.push_back({MoveKind::Compute, g.vertices[v].id, 0});
        red[v] = 1;
        computed[v] = 1;
        ++in_red;
    }
    for (size_t i = 0; i < nv; ++i) {
        if (g.vertices[i].is_output && !blue[i]) {
            if (!red[i]) {  // evicted earlier; eviction always stored first
                throw std::logic_error("output lost without a blue copy");
            }
            sched.moves.push_back({MoveKind::Store, g.vertices[i].id, 0});
            blue[i] = 1;
        }
    }
    return sched;
}

// ---------------------------------------------------------------------------
// Exact minimum-I/O search (A* over red/stored bitmask states)

struct SearchResult {
    std::int64_t q = 0;
    bool optimal = false;
    std::uint64_t expanded = 0;
};

inline SearchResult min_io_search(const CDag& g, std::int64_t M,
                                  std::uint64_t node_limit = 8'000'000) {
    const size_t nv = g.vertices.size();
    std::vector<int> comp_index(nv, -1);
    std::vector<int> computes;
    for (size_t i = 0; i < nv; ++i) {
        if (!g.vertices[i].is_input) {
            comp_index[i] = static_cast<int>(computes.size());
            computes.push_back(int(i));
        }
    }
    const size_t nc = computes.size();
    if (nv + nc > 60) throw std::runtime_error("cDAG too large for exact search");
    if (M < g.max_in_degree() + 1)
        throw std::runtime_error("capacity below max in-degree + 1; no schedule exists");

    std::uint64_t outputs_needed = 0;
    for (size_t i = 0; i < nv; ++i)
        if (g.vertices[i].is_output && comp_index[i] >= 0)
            outputs_needed |= 1ull << comp_index[i];

    std::uint64_t input_mask = 0;
    for (size_t i = 0; i < nv; ++i)
        if (g.vertices[i].is_input) input_mask |= 1ull << i;

    auto pack = [&](std::uint64_t red, std::uint64_t stored) { return red | (stored << nv); };
    auto h_of = [&](std::uint64_t stored) {
        return std::int64_t(std::popcount(outputs_needed & ~stored));
    };

    struct Node {
        std::int64_t f, g;
        std::uint64_t red, stored;
        bool operator>(const Node& o) const { return f > o.f; }
    };
    std::priority_queue<Node, std::vector<Node>, std::greater<Node>> pq;
    std::unordered_map<std::uint64_t, std::int64_t> dist;
    dist.reserve(1 << 20);

    pq.push({h_of(0), 0, 0, 0});
    dist[pack(0, 0)] = 0;
    SearchResult res;

    // Fallback upper bound if the budget runs out.
    Schedule greedy = greedy_schedule(g, M);
    std::int64_t greedy_q = validate_schedule(g, greedy, M).q;

    while (!pq.empty()) {
        Node n = pq.top();
        pq.pop();
        auto it = dist.find(pack(n.red, n.stored));
        if (it != dist.end() && it->second < n.g) continue;
        if ((n.stored & outputs_needed) == outputs_needed) {
            res.q = n.g;
            res.optimal = true;
            return res;
        }
        if (++res.expanded > node_limit) break;

        int in_red = std::popcount(n.red);
        auto push = [&](std::uint64_t red, std::uint64_t stored, std::int64_t cost) {
            std::uint64_t key = pack(red, stored);
            std::int64_t ng = n.g + cost;
            auto [dit, fresh] = dist.emplace(key, ng);
            if (!fresh && dit->second <= ng) return;
            dit->second = ng;
            pq.push({ng + h_of(stored), ng, red, stored});
        };

        if (in_red < M) {
            for (size_t i = 0; i < nv; ++i) {
                std::uint64_t bit = 1ull << i;
                if (n.red & bit) continue;
                bool is_blue = (input_mask & bit) ||
                               (comp_index[i] >= 0 && (n.stored & (1ull << comp_index[i])));
                if (is_blue) push(n.red | bit, n.stored, 1);  // load
                if (comp_index[i] >= 0) {                     // compute
                    bool ready = true;
                    for (int p : g.preds[i]) ready = ready && (n.red & (1ull << p));
                    if (ready) push(n.red | bit, n.stored, 0);
                }
            }
        } else {
            for (size_t i = 0; i < nv; ++i) {  // at capacity: discard only
                std::uint64_t bit = 1ull << i;
                if (n.red & bit) push(n.red & ~bit, n.stored, 0);
            }
        }
        for (size_t i = 0; i < nv; ++i) {  // store
            std::uint64_t bit = 1ull << i;
            if (!(n.red & bit) || comp_index[i] < 0) continue;
            std::uint64_t sbit = 1ull << comp_index[i];
            if (!(n.stored & sbit)) push(n.red, n.stored | sbit, 1);
        }
    }
    res.q = greedy_q;
    res.optimal = false;
    return res;
}

// ---------------------------------------------------------------------------
// Partition quality: Min and Dom_min sizes, inter-set acyclicity

namespace detail {

// Dinic max-flow; node count here is 2V+2, capacities 1 or "infinite".
class MaxFlow {
public:
    explicit MaxFlow(int n) : adj_(n) {}
    void add_edge(int a, int b, std::int64_t cap) {
        adj_[a].push_back({b, int(adj_[b].size()), cap});
        adj_[b].push_back({a, int(adj_[a].size()) - 1, 0});
    }
    std::int64_t run(int s, int t) {
        std::int64_t flow = 0;
        while (bfs(s, t)) {
            it_.assign(adj_.size(), 0);
            while (std::int64_t f = dfs(s, t, std::numeric_limits<std::int64_t>::max()))
                flow += f;
        }
        return flow;
    }

private:
    struct Edge { int to, rev; std::int64_t cap; };
    bool bfs(int s, int t) {
        level_.assign(adj_.size(), -1);
        std::deque<int> q{s};
        level_[s] = 0;
        while (!q.empty()) {
            int v = q.front();
            q.pop_front();
            for (const Edge& e : adj_[v])
                if (e.cap > 0 && level_[e.to] < 0) {
                    level_[e.to] = level_[v] + 1;
                    q.push_back(e.to);
                }
        }
        return level_[t] >= 0;
    }
    std::int64_t dfs(int v, int t, std::int64_t f) {
        if (v == t) return f;
        for (int& i = it_[v]; i < int(adj_[v].size()); ++i) {
            Edge& e = adj_[v][i];
            if (e.cap > 0 && level_[e.to] == level_[v] + 1) {
                std::int64_t d = dfs(e.to, t, std::min(f, e.cap));
                if (d > 0) {
                    e.cap -= d;
                    adj_[e.to][e.rev].cap += d;
                    return d;
                }
            }
        }
        return 0;
    }
    std::vector<std::vector<Edge>> adj_;
    std::vector<int> level_, it_;
};

}  // namespace detail

// Minimum vertex cut separating the graph inputs from the given set: the size
// of the smallest dominator of the set.
inline std::int64_t dominator_size(const CDag& g, const std::vector<int>& set) {
    const int nv = static_cast<int>(g.vertices.size());
    const std::int64_t inf = std::numeric_limits<std::int64_t>::max() / 4;
    detail::MaxFlow mf(2 * nv + 2);
    int S = 2 * nv, T = 2 * nv + 1;
    auto in_node = [](int v) { return 2 * v; };
    auto out_node = [](int v) { return 2 * v + 1; };
    for (int v = 0; v < nv; ++v) mf.add_edge(in_node(v), out_node(v), 1);
    for (auto [a, b] : g.edges) mf.add_edge(out_node(a), in_node(b), inf);
    for (int v = 0; v < nv; ++v)
        if (g.vertices[v].is_input) mf.add_edge(S, in_node(v), inf);
    for (int v : set) mf.add_edge(out_node(v), T, inf);
    return mf.run(S, T);
}

struct SetReport {
    std::int64_t min_size = 0;  // vertices with no successor inside the set
    std::int64_t dom_size = 0;  // minimum dominator (max-flow value)
    bool ok = false;
};

struct XPartitionReport {
    bool ok = false;
    bool covers = false;
    bool disjoint = false;
    bool acyclic = false;
    std::vector<SetReport> sets;
    std::string detail;
};

inline XPartitionReport check_xpartition(const CDag& g, const std::vector<std::vector<int>>& sets,
                                         std::int64_t X) {
    XPartitionReport rep;
    const size_t nv = g.vertices.size();
    std::vector<int> owner(nv, -1);
    rep.disjoint = true;
    for (size_t si = 0; si < sets.size(); ++si) {
        for (int v : sets[si]) {
            if (v < 0 || size_t(v) >= nv || g.vertices[v].is_input) {
                rep.detail = "set " + std::to_string(si) + " contains a non-compute vertex";
                return rep;
            }
            if (owner[v] >= 0) rep.disjoint = false;
            owner[v] = static_cast<int>(si);
        }
    }
    rep.covers = true;
    for (size_t v = 0; v < nv; ++v)
        if (!g.vertices[v].is_input && owner[v] < 0) rep.covers = false;

    bool all_within = true;
    for (const auto& set : sets) {
        SetReport sr;
        std::set<int> members(set.begin(), set.end());
        for (int v : set) {
            bool has_inner_succ = false;
            for (int s : g.succs[v]) has_inner_succ = has_inner_succ || members.count(s);
            if (!has_inner_succ) ++sr.min_size;
        }
        sr.dom_size = dominator_size(g, set);
        sr.ok = sr.min_size <= X && sr.dom_size <= X;
        all_within = all_within && sr.ok;
        rep.sets.push_back(sr);
    }

    // Contract sets and look for cycles among them.
    std::vector<std::set<int>> cadj(sets.size());
    for (auto [a, b] : g.edges) {
        if (owner[a] >= 0 && owner[b] >= 0 && owner[a] != owner[b]) cadj[owner[a]].insert(owner[b]);
    }
    std::vector<int> indeg(sets.size(), 0);
    for (const auto& s : cadj)
        for (int t : s) ++indeg[t];
    std::deque<int> q;
    for (size_t i = 0; i < sets.size(); ++i)
        if (indeg[i] == 0) q.push_back(int(i));
    size_t seen = 0;
    while (!q.empty()) {
        int v = q.front();
        q.pop_front();
        ++seen;
        for (int t : cadj[v])
            if (--indeg[t] == 0) q.push_back(t);
    }
    rep.acyclic = seen == sets.size();

    rep.ok = rep.covers && rep.disjoint && rep.acyclic && all_within;
    if (!rep.ok && rep.detail.empty()) {
        if (!rep.disjoint) rep.detail = "sets overlap";
        else if (!rep.covers) rep.detail = "sets do not cover every compute vertex";
        else if (!rep.acyclic) rep.detail = "contracted set graph has a cycle";
        else rep.detail = "a set exceeds X in Min or Dom size";
    }
    return rep;
}

// ---------------------------------------------------------------------------
// LU cDAG generator (element granularity, in-place element versions)

inline CDag gen_lu_cdag(int n) {
    if (n < 1 || n > 16) throw std::runtime_error("LU cDAG generator supports 1 <= N <= 16");
    CDag g;
    std::vector<std::vector<int>> cur(n, std::vector<int>(n));
    auto add_vertex = [&](Vertex v) {
        g.vertices.push_back(std::move(v));
        return static_cast<int>(g.vertices.size() - 1);
    };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            cur[i][j] = add_vertex({"a_" + std::to_string(i) + "_" + std::to_string(j), true,
                                    false, "A(" + std::to_string(i) + "," + std::to_string(j) + ")"});
    for (int k = 0; k < n; ++k) {
        for (int i = k + 1; i < n; ++i) {
            int v = add_vertex({"s1_" + std::to_string(k) + "_" + std::to_string(i), false, false,
                                "S1(" + std::to_string(k) + "," + std::to_string(i) + ")"});
            g.edges.emplace_back(cur[i][k], v);
            g.edges.emplace_back(cur[k][k], v);
            cur[i][k] = v;
        }
        for (int i = k + 1; i < n; ++i) {
            for (int j = k + 1; j < n; ++j) {
                int v = add_vertex({"s2_" + std::to_string(k) + "_" + std::to_string(i) + "_" +
                                        std::to_string(j),
                                    false, false,
                                    "S2(" + std::to_string(k) + "," + std::to_string(i) + "," +
                                        std::to_string(j) + ")"});
                g.edges.emplace_back(cur[i][j], v);
                g.edges.emplace_back(cur[i][k], v);
                g.edges.emplace_back(cur[k][j], v);
                cur[i][j] = v;
            }
        }
    }
    // Final element versions that carry factor values; original row 0 entries
    // are graph inputs and already live in slow memory.
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (!g.vertices[cur[i][j]].is_input) g.vertices[cur[i][j]].is_output = true;
    g.rebuild();
    return g;
}

}  // namespace lux::pebble
