#pragma once

#include "qnet/des.hpp"
#include "qnet/entmath.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

// Static network description: nodes with memories, quantum channels with
// their heralded-generation physics (midpoint BSM model), parallel classical
// channels, and the coexistence coupling into link fidelity.

namespace qnet::net {

using des::SimTime;
using json = nlohmann::json;

inline constexpr double kFiberNsPerKm = 5000.0;  // 2e8 m/s propagation

struct NodeSpec {
    std::string name;
    int memory_count = 4;
    SimTime memory_coherence_ns = 100'000'000;  // 100 ms
    double swap_success_prob = 1.0;
    SimTime gate_time_ns = 1000;
};

struct QuantumChannel {
    int node_a = 0;
    int node_b = 0;
    double length_km = 1.0;
    double attenuation_db_per_km = 0.2;
    SimTime attempt_period_ns = 10'000;
    double detector_efficiency = 0.9;
    double dark_count_rate_per_ns = 0.0;
    double source_fidelity = 0.98;
    std::optional<entmath::CarParams> coexistence;
};

struct ClassicalChannel {
    int node_a = 0;
    int node_b = 0;
    SimTime delay_ns = 0;
};

struct Topology {
    std::vector<NodeSpec> nodes;
    std::vector<QuantumChannel> qchannels;
    std::vector<ClassicalChannel> cchannels;

    // Derived on finalize().
    std::vector<std::vector<int>> adjacency;            // sorted neighbor ids
    std::map<std::pair<int, int>, int> qchannel_index;  // key (min, max)
    std::map<std::pair<int, int>, SimTime> cdelay;      // key (min, max)

    int node_index(const std::string& name) const;
    const QuantumChannel& channel_between(int u, int v) const;
    SimTime classical_delay(int u, int v) const;

    // Rebuild derived maps and enforce the structural invariants: nonempty
    // connected graph, valid parameter ranges, and a parallel classical
    // channel for every quantum channel.
    void finalize();
};

// Per-attempt success of midpoint-heralded generation:
// p = eta_det^2 * 10^(-alpha * L / 20) * 0.5. Always in (0, 0.5].
double link_success_prob(const QuantumChannel& ch);

// Fidelity of a freshly heralded pair: the source fidelity degraded by the
// coexistence admixture when CAR parameters are present.
double link_fidelity(const QuantumChannel& ch, double source_fidelity);

// Config document handling. load applies defaults, validates, and the dump is
// normalized so load -> dump -> load is the identity.
Topology load_topology(const json& doc);
json dump_topology(const Topology& topo);

// Scale-free preferential-attachment graph (2 edges per arriving node),
// deterministic in the seed; nodes/channels carry the given defaults.
Topology generate_as_topology(int n, std::uint64_t seed,
                              const NodeSpec& node_defaults = {},
                              const QuantumChannel& channel_defaults = {});

// Line of n nodes with uniform parameters.
Topology generate_line_topology(int n, const NodeSpec& node_defaults = {},
                                const QuantumChannel& channel_defaults = {});

// Network-level entanglement record. The pair holds one memory slot at each
// endpoint while alive; its current fidelity decays toward 0.25 with the
// smaller endpoint coherence time.
struct WernerPair {
    std::uint64_t id = 0;
    int node_a = 0;
    int node_b = 0;
    double fidelity_at_creation = 1.0;
    SimTime created_at = 0;
};

double current_fidelity(const WernerPair& pair, SimTime now, const Topology& topo);

}  // namespace qnet::net
