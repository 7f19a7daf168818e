#include "qnet/des.hpp"

#include <cmath>
#include <string>

namespace qnet::des {

namespace {

// SplitMix64 finalizer; a 64-bit bijection with strong avalanche.
std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

}  // namespace

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
    : base_(mix64(master_seed + kGamma * mix64(stream_id + kGamma))) {}

std::uint64_t RngStream::next_u64() {
    return mix64(base_ + kGamma * ++counter_);
}

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

bool RngStream::bernoulli(double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::domain_error("bernoulli: p outside [0, 1]");
    }
    return uniform() < p;
}

double RngStream::exponential(double rate) {
    if (!(rate > 0.0)) {
        throw std::domain_error("exponential: rate must be positive");
    }
    return -std::log1p(-uniform()) / rate;
}

void Simulator::schedule_at(SimTime fire_at, int target, int kind,
                            std::function<void()> action) {
    if (fire_at < now_) {
        throw std::logic_error("schedule_at: event in the past (t=" +
                               std::to_string(fire_at) + " < now=" +
                               std::to_string(now_) + ")");
    }
    queue_.push(Event{fire_at, next_seq_++, target, kind, std::move(action)});
}

void Simulator::schedule_in(SimTime delay, int target, int kind,
                            std::function<void()> action) {
    if (delay < 0) throw std::logic_error("schedule_in: negative delay");
    schedule_at(now_ + delay, target, kind, std::move(action));
}

std::size_t Simulator::run_until(SimTime t_end) {
    std::size_t count = 0;
    while (!queue_.empty() && queue_.top().fire_at <= t_end) {
        Event ev = queue_.top();
        queue_.pop();
        now_ = ev.fire_at;
        // Negative kinds are internal bookkeeping and stay out of the trace.
        if (tracing_ && ev.kind >= 0) trace_.push_back({ev.fire_at, ev.target, ev.kind});
        try {
            ev.action();
        } catch (const std::exception& e) {
            throw std::runtime_error("event handler failed at t=" +
                                     std::to_string(ev.fire_at) + " target=" +
                                     std::to_string(ev.target) + " kind=" +
                                     std::to_string(ev.kind) + ": " + e.what());
        }
        ++count;
        ++processed_;
    }
    now_ = t_end;
    return count;
}

std::uint64_t Simulator::trace_hash() const {
    // FNV-1a over the (t, target, kind) stream.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto fold = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    };
    for (const TraceEntry& e : trace_) {
        fold(static_cast<std::uint64_t>(e.t));
        fold(static_cast<std::uint64_t>(e.target));
        fold(static_cast<std::uint64_t>(e.kind));
    }
    return h;
}

}  // namespace qnet::des
