#pragma once

#include "qnet/des.hpp"
#include "qnet/netmodel.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

// Runtime protocol logic: heralded link generation with background
// (continuous) strategies, hop distillation, sequential swapping along routed
// paths, and request service accounting.

namespace qnet::proto {

using des::SimTime;

enum class StrategyKind { ODO, UCP, ACP };

struct StrategyConfig {
    std::string name = "ucp";
    StrategyKind kind = StrategyKind::UCP;
    int background_slots_per_node = 0;   // ignored (0) under ODO
    double acp_ewma_alpha = 0.3;
    SimTime acp_window_ns = 1'000'000'000;
    std::optional<double> distill_threshold;
    double evict_fidelity = 0.3;
};

struct Request {
    std::uint64_t id = 0;
    int src = 0;
    int dst = 0;
    SimTime arrival = 0;
    int pairs_requested = 1;
    std::optional<double> min_fidelity;
};

struct ServiceRecord {
    std::uint64_t request_id = 0;
    int src = 0;
    int dst = 0;
    SimTime arrival = 0;
    int pairs_requested = 1;
    std::optional<SimTime> completed_at;          // empty => censored
    std::vector<double> delivered_fidelities;
    std::vector<std::uint64_t> delivered_pair_ids;
    std::vector<SimTime> delivered_times;         // confirm time per pair
    bool censored = false;
};

struct NeighborScore {
    int neighbor = 0;
    double ewma_demand = 0.0;
    int allocated_slots = 0;
};

// Minimum-hop path; ties broken by the lexicographically smallest node-id
// sequence. Throws if dst is unreachable.
std::vector<int> route(const net::Topology& topo, int src, int dst);

// Tracks memory-slot usage per node and counts violations; consulted by the
// acceptance suite, which requires both counters to stay at zero.
class MemoryAuditor {
  public:
    void init(const net::Topology& topo);
    void acquire(int node);
    void release(int node);
    int used(int node) const { return used_[node]; }
    std::int64_t oversubscriptions() const { return oversubscriptions_; }
    std::int64_t negative_releases() const { return negative_releases_; }

  private:
    std::vector<int> used_;
    std::vector<int> capacity_;
    std::int64_t oversubscriptions_ = 0;
    std::int64_t negative_releases_ = 0;
};

// Creation log for every pair the simulation ever made; enough to replay any
// delivered fidelity from creation fidelities, event times, and the
// decoherence law.
struct PairLogEntry {
    enum class Op { generated, swapped, distilled };
    std::uint64_t pair_id = 0;
    Op op = Op::generated;
    std::uint64_t parent_a = 0;   // 0 = none
    std::uint64_t parent_b = 0;
    int node_a = 0;
    int node_b = 0;
    double fidelity_at_creation = 1.0;
    SimTime created_at = 0;
    SimTime op_time = 0;          // swap/distill measurement time
};

struct ChannelStats {
    std::int64_t attempts = 0;
    std::int64_t successes = 0;
};

// Event kinds; nonnegative kinds are recorded in the engine trace, negative
// ones are internal bookkeeping.
enum EventKind : int {
    kArrival = 0,
    kPairHerald = 1,
    kSwapResolve = 2,
    kDistillResolve = 3,
    kDeliveryConfirm = 4,
    kDeliveryNotify = 5,
    kEvict = 6,
    kRemoteRelease = 7,
    kSegmentKnown = 8,
    kHopActivate = 9,
    kGenTick = -1,
    kAcpWindow = -2,
};

// One strategy running on one topology with one master seed. Strictly
// single-threaded; run independent instances concurrently for sweeps.
class NetworkSim {
  public:
    NetworkSim(const net::Topology& topo, const StrategyConfig& strategy,
               std::uint64_t master_seed);
    ~NetworkSim();
    NetworkSim(const NetworkSim&) = delete;
    NetworkSim& operator=(const NetworkSim&) = delete;

    void submit(const Request& r);
    void run_until(SimTime t_end);   // finalizes censored records at t_end

    const std::vector<ServiceRecord>& records() const;
    const std::vector<PairLogEntry>& pair_log() const;
    const MemoryAuditor& auditor() const;
    const ChannelStats& channel_stats(int channel_index) const;
    des::Simulator& engine();

    // True when every held slot is accounted for by a live pair.
    bool memory_consistent() const;

    std::vector<NeighborScore> neighbor_scores(int node) const;

    // Diagnostic snapshot of queue/claim/chain state.
    void dump_state(std::ostream& os) const;

  private:
    struct Impl;
    Impl* impl_;
};

}  // namespace qnet::proto
