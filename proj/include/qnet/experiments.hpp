#pragma once

#include "qnet/netmodel.hpp"
#include "qnet/protocols.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

// Scenario runner: loads experiment configs, executes (strategy, seed) sweeps,
// collects per-request metrics, and serializes them to a versioned CSV.

namespace qnet::exp {

using des::SimTime;
using net::json;

struct TrafficPhase {
    int src_lo = 0, src_hi = 0;   // src sampled uniformly in [lo, hi]
    int dst_lo = 0, dst_hi = 0;   // dst likewise, resampled while == src
    // Offset mode (set use_offset): dst = src + U[offset_lo, offset_hi],
    // clamped to the node range; expresses hop-local request patterns.
    bool use_offset = false;
    int offset_lo = 1, offset_hi = 1;
};

struct TrafficSpec {
    double mean_interarrival_ns = 1e6;
    TrafficPhase phase_a;
    std::optional<TrafficPhase> phase_b;
    SimTime shift_at_ns = -1;     // switch to phase_b at this time
    int pairs_requested = 1;
    std::optional<double> min_fidelity;
};

struct Scenario {
    std::string name;
    std::string kind = "network";   // "network" | "pcs_grid"
    json topology_doc;
    std::vector<proto::StrategyConfig> strategies;
    TrafficSpec traffic;
    SimTime duration_ns = 0;
    std::vector<std::uint64_t> seeds;
    int ma_window = 50;
    // pcs_grid sweep
    double grid_from = 0.25, grid_to = 1.0, grid_step = 0.05;
};

Scenario load_scenario(const json& doc);
json scenario_to_json(const Scenario& s);

struct RequestRow {
    std::string strategy;
    std::uint64_t seed = 0;
    std::uint64_t request_id = 0;
    int src = 0, dst = 0;
    SimTime arrival = 0;
    int pairs_requested = 1;
    std::optional<SimTime> completed_at;
    bool censored = false;
    std::vector<double> fidelities;

    SimTime time_to_serve() const { return *completed_at - arrival; }
};

struct MetricsFrame {
    std::vector<RequestRow> rows;
    std::int64_t oversubscriptions = 0;
    std::int64_t negative_releases = 0;
    bool memory_consistent = true;
};

struct RunResult {
    std::vector<proto::ServiceRecord> records;
    std::uint64_t trace_hash = 0;
    std::int64_t oversubscriptions = 0;
    std::int64_t negative_releases = 0;
    bool memory_consistent = true;
};

// One (strategy, seed) instance; traffic is drawn from the seed's traffic
// stream, so strategies sharing a seed see identical request sequences.
RunResult run_one(const Scenario& s, const proto::StrategyConfig& strategy,
                  std::uint64_t seed, bool want_trace = false);

MetricsFrame run_scenario(const Scenario& s);

void write_metrics_csv(const MetricsFrame& frame, std::ostream& os);
MetricsFrame read_metrics_csv(std::istream& is);

struct StrategySummary {
    std::string strategy;
    int completed = 0;
    int censored = 0;
    double mean_tts_ns = 0;
    double median_tts_ns = 0;
    double p95_tts_ns = 0;
    double mean_fidelity = 0;
    int delivered_pairs = 0;
    double tts_vs_baseline = 0;   // (mean - baseline mean) / baseline mean
};

std::vector<StrategySummary> summarize(const MetricsFrame& frame,
                                       const std::string& baseline);
std::string summary_text(const std::vector<StrategySummary>& table);

// Trailing moving average of time-to-serve over completed requests in arrival
// order, for one (strategy, seed); pairs of (arrival, average).
std::vector<std::pair<SimTime, double>> rolling_time_to_serve(
    const MetricsFrame& frame, const std::string& strategy, std::uint64_t seed,
    int window);

// Analytic-vs-oracle sweep used by the pcs_grid scenario kind and the CLI
// `oracle` subcommand.
struct PcsGridRow {
    double f = 0;
    std::string variant;
    double c_formula = 0, c_oracle = 0;
    double fp_formula = 0, fp_oracle = 0;
    double deviation = 0;   // max abs over both columns
};

std::vector<PcsGridRow> run_pcs_grid(double from, double to, double step);
void write_pcs_grid_csv(const std::vector<PcsGridRow>& rows, std::ostream& os);

// Shipped scenario presets, embedded in the library.
std::vector<std::string> preset_names();
std::string preset_text(const std::string& name);   // throws on unknown name

}  // namespace qnet::exp
