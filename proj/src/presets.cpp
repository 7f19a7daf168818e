#include "qnet/experiments.hpp"

#include <stdexcept>

namespace qnet::exp {

namespace {

// Equivalence sweep of the analytic link formulas against the exact circuit
// simulator over the Werner fidelity range.
const char* kPcsValidation = R"JSON({
  "name": "pcs_validation",
  "kind": "pcs_grid",
  "grid": {"from": 0.25, "to": 1.0, "step": 0.05}
})JSON";

// Two nodes over the 4.38 km deployed-fiber loop, 1 ns coincidence window,
// classical traffic coexisting on the fiber. The CAR parameters give
// CAR ~ 4.4 (fringe visibility in the high-50s percent range).
const char* kTwoNodeArqnet = R"JSON({
  "name": "two_node_arqnet",
  "kind": "network",
  "topology": {
    "nodes": [
      {"name": "b360", "memory_count": 4, "memory_coherence_ns": 50000000,
       "swap_success_prob": 1.0, "gate_time_ns": 1000},
      {"name": "b440", "memory_count": 4, "memory_coherence_ns": 50000000,
       "swap_success_prob": 1.0, "gate_time_ns": 1000}
    ],
    "qchannels": [
      {"a": "b360", "b": "b440", "length_km": 4.38,
       "attenuation_db_per_km": 0.2, "attempt_period_ns": 10000,
       "detector_efficiency": 0.9, "dark_count_rate_per_ns": 1e-9,
       "source_fidelity": 0.98,
       "coexistence": {"alpha_s": 0.5, "alpha_i": 0.5, "mu_c": 0.01,
                        "mu_sn": 0.002, "mu_in": 0.002,
                        "d_s": 1e-5, "d_i": 1e-5}}
    ]
  },
  "strategies": [
    {"name": "odo", "kind": "ODO"},
    {"name": "ucp", "kind": "UCP", "background_slots_per_node": 2}
  ],
  "traffic": {
    "mean_interarrival_ns": 2000000,
    "phase_a": {"src_lo": 0, "src_hi": 0, "dst_lo": 1, "dst_hi": 1},
    "pairs_requested": 1
  },
  "duration_ns": 100000000,
  "seeds": [1, 2, 3, 4, 5],
  "ma_window": 50
})JSON";

// 20-node repeater line with a mid-run shift of the request hotspot from the
// left half to the right half. Memory is tight (3 slots) so uniform stock on
// idle links costs the hot ones; traffic parameters are reconstructions.
const char* kLine20Acp = R"JSON({
  "name": "line_20_acp",
  "kind": "network",
  "topology": {
    "generate": {"kind": "line", "n": 20},
    "defaults": {
      "node": {"memory_count": 3, "memory_coherence_ns": 200000000,
               "swap_success_prob": 0.92, "gate_time_ns": 1000},
      "qchannel": {"length_km": 10.0, "attenuation_db_per_km": 0.2,
                   "attempt_period_ns": 20000, "detector_efficiency": 0.85,
                   "source_fidelity": 0.95}
    }
  },
  "strategies": [
    {"name": "odo", "kind": "ODO"},
    {"name": "ucp", "kind": "UCP", "background_slots_per_node": 2},
    {"name": "acp", "kind": "ACP", "background_slots_per_node": 2,
     "acp_ewma_alpha": 0.5, "acp_window_ns": 100000000},
    {"name": "acp_distill", "kind": "ACP", "background_slots_per_node": 2,
     "acp_ewma_alpha": 0.5, "acp_window_ns": 100000000,
     "distill_threshold": 0.96}
  ],
  "traffic": {
    "mean_interarrival_ns": 1500000,
    "phase_a": {"src_lo": 1, "src_hi": 5, "dst_lo": 4, "dst_hi": 8},
    "phase_b": {"src_lo": 11, "src_hi": 15, "dst_lo": 14, "dst_hi": 18},
    "shift_at_ns": 1500000000,
    "pairs_requested": 1
  },
  "duration_ns": 3000000000,
  "seeds": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10,
            11, 12, 13, 14, 15, 16, 17, 18, 19, 20],
  "ma_window": 50
})JSON";

// Autonomous-system-shaped topology at desk scale: 200 nodes, scale-free,
// short run. Traffic concentrates on a small client/server family.
const char* kAs200Acp = R"JSON({
  "name": "as200_acp",
  "kind": "network",
  "topology": {
    "generate": {"kind": "as", "n": 200, "seed": 7},
    "defaults": {
      "node": {"memory_count": 4, "memory_coherence_ns": 200000000,
               "swap_success_prob": 0.92, "gate_time_ns": 1000},
      "qchannel": {"length_km": 8.0, "attenuation_db_per_km": 0.2,
                   "attempt_period_ns": 20000, "detector_efficiency": 0.85,
                   "source_fidelity": 0.95}
    }
  },
  "strategies": [
    {"name": "odo", "kind": "ODO"},
    {"name": "ucp", "kind": "UCP", "background_slots_per_node": 2},
    {"name": "acp", "kind": "ACP", "background_slots_per_node": 2,
     "acp_ewma_alpha": 0.5, "acp_window_ns": 100000000}
  ],
  "traffic": {
    "mean_interarrival_ns": 1000000,
    "phase_a": {"src_lo": 0, "src_hi": 30, "dst_lo": 0, "dst_hi": 30},
    "pairs_requested": 1
  },
  "duration_ns": 1000000000,
  "seeds": [1, 2, 3, 4, 5],
  "ma_window": 50
})JSON";

}  // namespace

std::vector<std::string> preset_names() {
    return {"pcs_validation", "two_node_arqnet", "line_20_acp", "as200_acp"};
}

std::string preset_text(const std::string& name) {
    if (name == "pcs_validation") return kPcsValidation;
    if (name == "two_node_arqnet") return kTwoNodeArqnet;
    if (name == "line_20_acp") return kLine20Acp;
    if (name == "as200_acp") return kAs200Acp;
    throw std::invalid_argument("unknown preset '" + name + "'");
}

}  // namespace qnet::exp
