#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <stdexcept>
#include <vector>

// Deterministic discrete-event core: integer-nanosecond clock, (time, seq)
// ordered event queue, and counter-based per-entity random streams. A
// Simulator instance is strictly single-threaded; independent instances share
// nothing.

namespace qnet::des {

using SimTime = std::int64_t;  // nanoseconds

// Counter-based stream: output i is a stateless mix of (master_seed,
// stream_id, i), so distinct entities draw from independent sequences and
// adding entities never perturbs existing ones.
class RngStream {
  public:
    RngStream() = default;
    RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

    std::uint64_t next_u64();
    double uniform();                  // [0, 1)
    bool bernoulli(double p);          // p in [0, 1]
    double exponential(double rate);   // mean 1/rate; rate > 0
    std::uint64_t counter() const { return counter_; }

  private:
    std::uint64_t base_ = 0;
    std::uint64_t counter_ = 0;
};

struct TraceEntry {
    SimTime t;
    int target;
    int kind;
    bool operator==(const TraceEntry&) const = default;
};

class Simulator {
  public:
    SimTime now() const { return now_; }

    // fire_at must not precede the current clock; violations are protocol
    // logic bugs and throw.
    void schedule_at(SimTime fire_at, int target, int kind, std::function<void()> action);
    void schedule_in(SimTime delay, int target, int kind, std::function<void()> action);

    // Processes every event with fire_at <= t_end in (fire_at, seq) order,
    // leaves the clock at t_end, and returns the number processed. Handler
    // exceptions abort the run with the offending event identified.
    std::size_t run_until(SimTime t_end);

    bool empty() const { return queue_.empty(); }
    std::size_t processed() const { return processed_; }

    void enable_trace() { tracing_ = true; }
    const std::vector<TraceEntry>& trace() const { return trace_; }
    std::uint64_t trace_hash() const;

  private:
    struct Event {
        SimTime fire_at;
        std::uint64_t seq;
        int target;
        int kind;
        std::function<void()> action;
    };
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            if (a.fire_at != b.fire_at) return a.fire_at > b.fire_at;
            return a.seq > b.seq;
        }
    };

    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    SimTime now_ = 0;
    std::uint64_t next_seq_ = 0;
    std::size_t processed_ = 0;
    bool tracing_ = false;
    std::vector<TraceEntry> trace_;
};

}  // namespace qnet::des
