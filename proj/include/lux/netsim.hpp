#pragma once

// Deterministic simulated distributed machine. Ranks execute the same step
// function in lockstep supersteps; messages posted in superstep s are
// readable in superstep s+1. Every transfer is charged to a communication
// ledger in words. Collective helpers implement the accounting conventions
// used by the factorization cost proofs: broadcast and scatter charge the
// receivers, reduce charges the sending non-roots.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace lux::netsim {

using json = nlohmann::json;

struct MachineConfig {
    int ranks = 1;
    std::int64_t memory_words = 0;  // checked only in strict mode
    int word_size = 8;
    bool strict_memory = false;
    std::int64_t max_supersteps = 1 << 24;
};

struct LedgerEntry {
    std::int64_t step = 0;
    int rank = 0;  // the rank the words are charged to
    std::string op;
    int peer = 0;
    std::int64_t words = 0;
};

struct DeadlockError : std::runtime_error {
    int rank;
    std::int64_t step;
    DeadlockError(int rank_, std::int64_t step_, const std::string& what_)
        : std::runtime_error("rank " + std::to_string(rank_) + " blocked at superstep " +
                             std::to_string(step_) + ": " + what_),
          rank(rank_), step(step_) {}
};

struct MemoryError : std::runtime_error {
    int rank;
    std::int64_t step;
    MemoryError(int rank_, std::int64_t step_, std::int64_t used, std::int64_t cap)
        : std::runtime_error("rank " + std::to_string(rank_) + " exceeded memory at superstep " +
                             std::to_string(step_) + ": " + std::to_string(used) + " > " +
                             std::to_string(cap) + " words"),
          rank(rank_), step(step_) {}
};

struct Msg {
    int src = 0, dst = 0;
    std::int64_t tag = 0;
    std::vector<double> data;
    std::vector<std::int64_t> ints;
};

class CommLedger {
public:
    explicit CommLedger(int ranks, int word_size)
        : word_size_(word_size), charged_(ranks, 0), received_(ranks, 0), sent_(ranks, 0) {}

    void charge(std::int64_t step, int rank, const std::string& op, int peer,
                std::int64_t words) {
        entries_.push_back({step, rank, op, peer, words});
        charged_[rank] += words;
    }
    void note_physical(int src, int dst, std::int64_t words) {
        sent_[src] += words;
        received_[dst] += words;
    }

    const std::vector<LedgerEntry>& entries() const { return entries_; }
    const std::vector<std::int64_t>& charged_words() const { return charged_; }
    const std::vector<std::int64_t>& received_words() const { return received_; }
    const std::vector<std::int64_t>& sent_words() const { return sent_; }

    std::int64_t total_charged() const {
        std::int64_t t = 0;
        for (auto v : charged_) t += v;
        return t;
    }
    std::int64_t max_charged() const {
        std::int64_t m = 0;
        for (auto v : charged_) m = std::max(m, v);
        return m;
    }

    void write_csv(std::ostream& os) const {
        os << "step,rank,op,peer,words,bytes\n";
        for (const auto& e : entries_)
            os << e.step << "," << e.rank << "," << e.op << "," << e.peer << "," << e.words << ","
               << e.words * word_size_ << "\n";
    }

    json summary() const {
        json per_rank = json::array();
        for (size_t r = 0; r < charged_.size(); ++r)
            per_rank.push_back({{"rank", r},
                                {"charged_words", charged_[r]},
                                {"received_words", received_[r]},
                                {"sent_words", sent_[r]}});
        std::int64_t max_recv = 0, tot_recv = 0, tot_sent = 0;
        for (auto v : received_) {
            max_recv = std::max(max_recv, v);
            tot_recv += v;
        }
        for (auto v : sent_) tot_sent += v;
        return json{{"word_size", word_size_},
                    {"per_rank", per_rank},
                    {"total_charged_words", total_charged()},
                    {"total_sent_words", tot_sent},
                    {"total_received_words", tot_recv},
                    {"max_charged_words", max_charged()},
                    {"max_received_words", max_recv}};
    }

private:
    int word_size_;
    std::vector<LedgerEntry> entries_;
    std::vector<std::int64_t> charged_, received_, sent_;
};

class Machine;

class RankCtx {
public:
    int rank() const { return rank_; }
    int ranks() const;
    std::int64_t step() const;

    // Posts a message delivered at the next superstep. `op` labels the ledger
    // row; `charge` overrides the charged word count (default: data words).
    // `charge_sender` switches the charged side (used by reduce).
    void send(int dst, std::int64_t tag, std::vector<double> data,
              std::vector<std::int64_t> ints = {}, const std::string& op = "recv",
              std::int64_t charge = -1, bool charge_sender = false);

    bool has(int src, std::int64_t tag) const;
    const Msg& require(int src, std::int64_t tag) const;
    std::vector<const Msg*> with_tag(std::int64_t tag) const;

    void set_resident_words(std::int64_t words);
    void halt() { halted_ = true; }

private:
    friend class Machine;
    Machine* machine_ = nullptr;
    int rank_ = 0;
    bool halted_ = false;
};

class Machine {
public:
    using StepFn = std::function<void(RankCtx&)>;

    explicit Machine(MachineConfig cfg)
        : cfg_(cfg), ledger_(cfg.ranks, cfg.word_size), inbox_(cfg.ranks),
          resident_(cfg.ranks, 0), ctx_(cfg.ranks) {
        if (cfg.ranks < 1) throw std::runtime_error("machine needs at least one rank");
        for (int r = 0; r < cfg_.ranks; ++r) {
            ctx_[r].machine_ = this;
            ctx_[r].rank_ = r;
        }
    }

    CommLedger& run(const StepFn& fn) {
        while (true) {
            if (step_ > cfg_.max_supersteps) throw std::runtime_error("superstep limit exceeded");
            bool all_halted = true;
            for (int r = 0; r < cfg_.ranks; ++r) {
                ctx_[r].halted_ = false;
                fn(ctx_[r]);
                all_halted = all_halted && ctx_[r].halted_;
            }
            if (cfg_.strict_memory) {
                for (int r = 0; r < cfg_.ranks; ++r)
                    if (resident_[r] > cfg_.memory_words)
                        throw MemoryError(r, step_, resident_[r], cfg_.memory_words);
            }
            if (all_halted && pending_.empty()) break;
            deliver();
            ++step_;
        }
        return ledger_;
    }

    const CommLedger& ledger() const { return ledger_; }
    std::int64_t current_step() const { return step_; }
    const MachineConfig& config() const { return cfg_; }

private:
    friend class RankCtx;

    void deliver() {
        for (auto& r : inbox_) r.clear();
        // Deterministic order regardless of posting interleave.
        std::stable_sort(pending_.begin(), pending_.end(), [](const Msg& a, const Msg& b) {
            return std::tie(a.dst, a.src, a.tag) < std::tie(b.dst, b.src, b.tag);
        });
        for (auto& m : pending_) inbox_[m.dst].push_back(std::move(m));
        pending_.clear();
    }

    MachineConfig cfg_;
    CommLedger ledger_;
    std::vector<std::vector<Msg>> inbox_;
    std::vector<Msg> pending_;
    std::vector<std::int64_t> resident_;
    std::vector<RankCtx> ctx_;
    std::int64_t step_ = 0;
};

inline int RankCtx::ranks() const { return machine_->cfg_.ranks; }
inline std::int64_t RankCtx::step() const { return machine_->step_; }

inline void RankCtx::send(int dst, std::int64_t tag, std::vector<double> data,
                          std::vector<std::int64_t> ints, const std::string& op,
                          std::int64_t charge, bool charge_sender) {
    if (dst < 0 || dst >= ranks()) throw std::runtime_error("send to rank out of range");
    if (dst == rank_) throw std::runtime_error("self-sends are local copies; not modeled");
    std::int64_t words = charge >= 0 ? charge : std::int64_t(data.size());
    Msg m;
    m.src = rank_;
    m.dst = dst;
    m.tag = tag;
    std::int64_t physical = std::int64_t(data.size());
    m.data = std::move(data);
    m.ints = std::move(ints);
    machine_->ledger_.note_physical(rank_, dst, physical);
    if (charge_sender)
        machine_->ledger_.charge(machine_->step_, rank_, op, dst, words);
    else
        machine_->ledger_.charge(machine_->step_, dst, op, rank_, words);
    machine_->pending_.push_back(std::move(m));
}

inline bool RankCtx::has(int src, std::int64_t tag) const {
    for (const auto& m : machine_->inbox_[rank_])
        if (m.src == src && m.tag == tag) return true;
    return false;
}

inline const Msg& RankCtx::require(int src, std::int64_t tag) const {
    for (const auto& m : machine_->inbox_[rank_])
        if (m.src == src && m.tag == tag) return m;
    throw DeadlockError(rank_, machine_->step_,
                        "expected a message from rank " + std::to_string(src) + " with tag " +
                            std::to_string(tag));
}

inline std::vector<const Msg*> RankCtx::with_tag(std::int64_t tag) const {
    std::vector<const Msg*> out;
    for (const auto& m : machine_->inbox_[rank_])
        if (m.tag == tag) out.push_back(&m);
    return out;
}

inline void RankCtx::set_resident_words(std::int64_t words) {
    machine_->resident_[rank_] = words;
}

// ---------------------------------------------------------------------------
// Collective helpers (post side; read with require/with_tag next superstep)

// Root posts `data` to every other member; each non-root receiver is charged
// `charge` words (default: the payload size).
inline void bcast_post(RankCtx& ctx, const std::vector<int>& members, int root, std::int64_t tag,
                       const std::vector<double>& data, std::vector<std::int64_t> ints = {},
                       std::int64_t charge = -1) {
    if (ctx.rank() != root) return;
    for (int m : members)
        if (m != root) ctx.send(m, tag, data, ints, "bcast", charge);
}

// Non-root members post their contribution to the root; each sender is
// charged its contribution.
inline void reduce_post(RankCtx& ctx, const std::vector<int>& members, int root, std::int64_t tag,
                        const std::vector<double>& data, std::vector<std::int64_t> ints = {}) {
    bool member = std::find(members.begin(), members.end(), ctx.rank()) != members.end();
    if (!member || ctx.rank() == root) return;
    ctx.send(root, tag, data, std::move(ints), "reduce", -1, /*charge_sender=*/true);
}

// Elementwise sum of the root's own slice plus every received contribution.
inline std::vector<double> reduce_collect(RankCtx& ctx, std::int64_t tag,
                                          std::vector<double> own) {
    for (const Msg* m : ctx.with_tag(tag)) {
        if (m->data.size() != own.size())
            throw std::runtime_error("reduce contribution size mismatch");
        for (size_t i = 0; i < own.size(); ++i) own[i] += m->data[i];
    }
    return own;
}

// Root posts partition i to member i; receivers are charged their partition.
inline void scatter_post(RankCtx& ctx, const std::vector<int>& members, int root, std::int64_t tag,
                         const std::vector<std::vector<double>>& parts,
                         const std::vector<std::vector<std::int64_t>>& int_parts = {}) {
    if (ctx.rank() != root) return;
    for (size_t i = 0; i < members.size(); ++i) {
        if (members[i] == root) continue;
        if (parts[i].empty() && (int_parts.empty() || int_parts[i].empty())) continue;
        ctx.send(members[i], tag, parts[i], int_parts.empty() ? std::vector<std::int64_t>{} : int_parts[i],
                 "scatter");
    }
}

// Every member posts its slice to every other member; receivers are charged.
inline void allgather_post(RankCtx& ctx, const std::vector<int>& members, std::int64_t tag,
                           const std::vector<double>& data) {
    bool member = std::find(members.begin(), members.end(), ctx.rank()) != members.end();
    if (!member) return;
    for (int m : members)
        if (m != ctx.rank()) ctx.send(m, tag, data, {}, "allgather");
}

// ---------------------------------------------------------------------------

inline CommLedger run_spmd(const MachineConfig& cfg, const Machine::StepFn& fn) {
    Machine m(cfg);
    return m.run(fn);
}

}  // namespace lux::netsim
