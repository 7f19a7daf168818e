#include "qnet/protocols.hpp"

#include "qnet/entmath.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>
#include <stdexcept>

namespace qnet::proto {

std::vector<int> route(const net::Topology& topo, int src, int dst) {
    const int n = static_cast<int>(topo.nodes.size());
    if (src < 0 || src >= n || dst < 0 || dst >= n) {
        throw std::out_of_range("route: node index out of range");
    }
    if (src == dst) throw std::invalid_argument("route: src == dst");
    // BFS with neighbors visited in ascending id; parents settle smallest-first,
    // which makes the minimum-hop node sequence lexicographically smallest.
    std::vector<int> parent(n, -1);
    std::vector<int> dist(n, -1);
    std::deque<int> frontier{src};
    dist[src] = 0;
    while (!frontier.empty()) {
        const int u = frontier.front();
        frontier.pop_front();
        for (int v : topo.adjacency[u]) {
            if (dist[v] < 0) {
                dist[v] = dist[u] + 1;
                parent[v] = u;
                frontier.push_back(v);
            }
        }
    }
    if (dist[dst] < 0) throw std::runtime_error("route: destination unreachable");
    std::vector<int> path;
    for (int v = dst; v != -1; v = parent[v]) path.push_back(v);
    std::reverse(path.begin(), path.end());
    return path;
}

void MemoryAuditor::init(const net::Topology& topo) {
    used_.assign(topo.nodes.size(), 0);
    capacity_.clear();
    for (const net::NodeSpec& n : topo.nodes) capacity_.push_back(n.memory_count);
    oversubscriptions_ = 0;
    negative_releases_ = 0;
}

void MemoryAuditor::acquire(int node) {
    if (++used_[node] > capacity_[node]) ++oversubscriptions_;
}

void MemoryAuditor::release(int node) {
    if (used_[node] == 0) {
        ++negative_releases_;
    } else {
        --used_[node];
    }
}

namespace {

constexpr std::uint64_t kChannelStreamBase = 1'000'000;
constexpr std::uint64_t kNodeStreamBase = 2'000'000;

struct ClaimTicket {
    std::uint64_t claim_id = 0;
    std::uint64_t request_id = 0;
    int hop_index = 0;
};

struct PairState {
    net::WernerPair pair;
    bool background = true;
    std::uint64_t claimed_by = 0;
    bool slot_a_held = true;
    bool slot_b_held = true;
    bool alive = true;
};

struct HopState {
    int channel = 0;
    int u = 0, v = 0;
    double success_prob = 0.0;
    std::set<std::uint64_t> available;
    std::set<std::pair<std::uint64_t, std::uint64_t>> pending;  // (request, claim)
    int incoming = 0;
    int background_target = 0;
    bool tick_scheduled = false;
    SimTime last_tick_at = -1;
};

struct HopProgress {
    std::uint64_t claimed_pair = 0;
    std::uint64_t partner_pair = 0;
    int pending_claims = 0;
    bool distilling = false;
    bool active = false;
};

struct RequestState {
    Request req;
    std::vector<int> path;
    std::vector<SimTime> relay_west;   // classical delay path[0] -> path[k]
    std::vector<HopProgress> hops;
    std::vector<double> delivered_fidelities;
    std::vector<std::uint64_t> delivered_pair_ids;
    std::vector<SimTime> delivered_times;
    int delivered = 0;
    int notifies_arrived = 0;
    int reach = 0;                     // chain spans path[0..reach]; 0 = none
    std::uint64_t chain_pair = 0;
    bool chain_known = false;
    bool swap_in_flight = false;
    bool finishing = false;
    bool done = false;
};

}  // namespace

struct NetworkSim::Impl {
    net::Topology topo;
    StrategyConfig strat;

    des::Simulator sim;
    MemoryAuditor audit;

    std::vector<HopState> hops;
    std::vector<des::RngStream> channel_rng;
    std::vector<des::RngStream> node_rng;
    std::vector<ChannelStats> stats;

    std::map<std::uint64_t, PairState> pairs;
    std::uint64_t next_pair_id = 1;
    std::uint64_t next_claim_id = 1;
    std::map<std::uint64_t, ClaimTicket> tickets;

    std::map<std::uint64_t, RequestState> requests;
    std::vector<ServiceRecord> records;
    std::vector<PairLogEntry> log;

    // ACP feedback state, indexed [node][adjacency position].
    std::vector<std::vector<double>> ewma;
    std::vector<std::vector<std::int64_t>> window_count;
    std::vector<std::vector<int>> alloc;

    bool finalized = false;

    Impl(const net::Topology& t, const StrategyConfig& s, std::uint64_t seed)
        : topo(t), strat(s) {
        if (!(strat.acp_ewma_alpha >= 0.0 && strat.acp_ewma_alpha <= 1.0)) {
            throw std::domain_error("strategy: acp_ewma_alpha outside [0, 1]");
        }
        if (strat.kind == StrategyKind::ACP && strat.acp_window_ns <= 0) {
            throw std::domain_error("strategy: nonpositive acp_window");
        }
        audit.init(topo);
        const int nch = static_cast<int>(topo.qchannels.size());
        hops.resize(nch);
        stats.resize(nch);
        for (int c = 0; c < nch; ++c) {
            const net::QuantumChannel& ch = topo.qchannels[c];
            HopState& h = hops[c];
            h.channel = c;
            h.u = std::min(ch.node_a, ch.node_b);
            h.v = std::max(ch.node_a, ch.node_b);
            h.success_prob = net::link_success_prob(ch);
            channel_rng.emplace_back(seed, kChannelStreamBase + c);
        }
        for (std::size_t i = 0; i < topo.nodes.size(); ++i) {
            node_rng.emplace_back(seed, kNodeStreamBase + i);
        }
        const int n = static_cast<int>(topo.nodes.size());
        ewma.resize(n);
        window_count.resize(n);
        alloc.resize(n);
        for (int u = 0; u < n; ++u) {
            ewma[u].assign(topo.adjacency[u].size(), 0.0);
            window_count[u].assign(topo.adjacency[u].size(), 0);
            alloc[u].assign(topo.adjacency[u].size(), 0);
        }
        reallocate_background();
        if (strat.kind == StrategyKind::ACP) {
            sim.schedule_at(strat.acp_window_ns, 0, kAcpWindow, [this] { on_acp_window(); });
        }
    }

    // ---- background slot allocation ----------------------------------------

    int background_budget() const {
        return strat.kind == StrategyKind::ODO ? 0 : strat.background_slots_per_node;
    }

    void allocate_node(int u) {
        const auto& nbrs = topo.adjacency[u];
        const int budget = background_budget();
        std::vector<double> w(nbrs.size(), 1.0);
        if (strat.kind == StrategyKind::ACP) {
            double total = 0;
            for (double e : ewma[u]) total += e;
            if (total > 0) w = ewma[u];
        }
        double wsum = 0;
        for (double x : w) wsum += x;
        std::vector<int> shares(nbrs.size(), 0);
        std::vector<std::pair<double, int>> rem;  // (-fraction, index): largest remainder
        int assigned = 0;
        for (std::size_t i = 0; i < nbrs.size(); ++i) {
            const double share = wsum > 0 ? budget * w[i] / wsum : 0.0;
            shares[i] = static_cast<int>(std::floor(share + 1e-9));
            assigned += shares[i];
            rem.emplace_back(-(share - shares[i]), static_cast<int>(i));
        }
        std::sort(rem.begin(), rem.end());
        for (int k = 0; k < budget - assigned && k < static_cast<int>(rem.size()); ++k) {
            ++shares[rem[k].second];
        }
        alloc[u] = shares;
    }

    int neighbor_pos(int node, int neighbor) const {
        const auto& nbrs = topo.adjacency[node];
        const auto it = std::lower_bound(nbrs.begin(), nbrs.end(), neighbor);
        return static_cast<int>(it - nbrs.begin());
    }

    void reallocate_background() {
        for (int u = 0; u < static_cast<int>(topo.nodes.size()); ++u) allocate_node(u);
        for (HopState& h : hops) {
            // Either endpoint wanting stock drives generation; attempts stay
            // memory-gated at both ends.
            const int target = std::max(alloc[h.u][neighbor_pos(h.u, h.v)],
                                        alloc[h.v][neighbor_pos(h.v, h.u)]);
            if (target != h.background_target) {
                h.background_target = target;
                // Only a real change re-arms the attempt loop; a frozen ACP
                // must stay event-identical to UCP.
                ensure_generation(h.channel);
            }
        }
    }

    void on_acp_window() {
        const double a = strat.acp_ewma_alpha;
        for (std::size_t u = 0; u < ewma.size(); ++u) {
            for (std::size_t i = 0; i < ewma[u].size(); ++i) {
                ewma[u][i] =
                    (1.0 - a) * ewma[u][i] + a * static_cast<double>(window_count[u][i]);
                window_count[u][i] = 0;
            }
        }
        reallocate_background();
        sim.schedule_in(strat.acp_window_ns, 0, kAcpWindow, [this] { on_acp_window(); });
    }

    // ---- generation ----------------------------------------------------------

    int free_slots(int node) const {
        return topo.nodes[node].memory_count - audit.used(node);
    }

    int deficit(const HopState& h) const {
        const int want = h.background_target + static_cast<int>(h.pending.size());
        return want - static_cast<int>(h.available.size()) - h.incoming;
    }

    void ensure_generation(int c) {
        HopState& h = hops[c];
        if (h.tick_scheduled || deficit(h) <= 0) return;
        const bool room = free_slots(h.u) > 0 && free_slots(h.v) > 0;
        // Without room the tick can still make progress by preempting idle
        // stock or younger claims, but only unmet claims justify that.
        if (!room && !claims_unmet(h)) return;  // re-armed on release
        const SimTime period = topo.qchannels[c].attempt_period_ns;
        SimTime t = ((sim.now() + period - 1) / period) * period;
        if (t <= h.last_tick_at) t += period;  // one tick per grid point
        h.tick_scheduled = true;
        sim.schedule_at(t, c, kGenTick, [this, c] { on_gen_tick(c); });
    }

    // True when the hop's pending claims outnumber the supply already made
    // or in flight; only these on-demand needs may preempt held resources.
    bool claims_unmet(const HopState& h) const {
        return static_cast<int>(h.pending.size()) >
               static_cast<int>(h.available.size()) + h.incoming;
    }

    // Free one slot at `node` by retiring the smallest-id unclaimed background
    // pair parked there. Returns false when no such pair exists.
    bool preempt_background_at(int node) {
        std::uint64_t victim = 0;
        for (int nb : topo.adjacency[node]) {
            const int c = topo.qchannel_index.at({std::min(node, nb), std::max(node, nb)});
            if (!hops[c].available.empty()) {
                const std::uint64_t id = *hops[c].available.begin();
                if (victim == 0 || id < victim) victim = id;
            }
        }
        if (victim == 0) return false;
        const int c = channel_of(pairs.at(victim).pair);
        hops[c].available.erase(victim);
        destroy_pair(victim, true, true);
        return true;
    }

    // Wound-wait: a request may reclaim resources held idle by any younger
    // request (higher id), so the oldest request can always make progress.
    // Victim order: youngest owner first, then largest pair id.
    bool preempt_claim_at(int node, std::uint64_t r_min, int generating_channel) {
        std::uint64_t victim_pair = 0;
        std::uint64_t victim_owner = 0;
        int victim_hop = -1;
        for (const auto& [id, ps] : pairs) {
            if (!ps.alive || ps.background || ps.claimed_by <= r_min) continue;
            if (!slot_held_at(ps, node)) continue;
            auto rit = requests.find(ps.claimed_by);
            if (rit == requests.end()) continue;
            RequestState& owner = rit->second;
            if (owner.swap_in_flight || owner.finishing) continue;
            for (int hh = 0; hh < static_cast<int>(owner.hops.size()); ++hh) {
                HopProgress& hp = owner.hops[hh];
                if (hp.distilling) continue;
                if (hp.claimed_pair == id || hp.partner_pair == id) {
                    if (ps.claimed_by > victim_owner ||
                        (ps.claimed_by == victim_owner && id > victim_pair)) {
                        victim_pair = id;
                        victim_owner = ps.claimed_by;
                        victim_hop = hh;
                    }
                }
            }
        }
        if (victim_pair == 0) return false;
        RequestState& owner = requests.at(victim_owner);
        HopProgress& hp = owner.hops[victim_hop];
        if (hp.partner_pair == victim_pair) {
            hp.partner_pair = 0;
        } else {
            hp.claimed_pair = hp.partner_pair;  // promote, possibly to empty
            hp.partner_pair = 0;
        }
        const int victim_channel = channel_of(pairs.at(victim_pair).pair);
        if (victim_channel == generating_channel) {
            // Same hop: hand the pair straight back through the pool so the
            // older claim picks it up without regenerating.
            return_to_pool(victim_pair);
        } else {
            destroy_pair(victim_pair, true, true);
        }
        if (hp.claimed_pair == 0) {
            request_hop_pair(owner, victim_hop);
        } else {
            evaluate_hop(owner, victim_hop);
        }
        return true;
    }

    // Last resort: tear down the chain fragment of a younger request holding
    // a slot at the node; that request restarts its segment.
    bool preempt_chain_at(int node, std::uint64_t r_min) {
        std::uint64_t victim_req = 0;
        for (auto& [id, r] : requests) {
            if (id <= r_min || r.done || r.chain_pair == 0) continue;
            if (r.swap_in_flight || r.finishing) continue;
            if (slot_held_at(pairs.at(r.chain_pair), node)) victim_req = id;
        }
        if (victim_req == 0) return false;
        RequestState& owner = requests.at(victim_req);
        const std::uint64_t pair_id = owner.chain_pair;
        destroy_pair(pair_id, true, true);
        owner.chain_pair = 0;
        const int failed_hops = owner.reach;
        owner.reach = 0;
        owner.chain_known = false;
        for (int hh = 0; hh < failed_hops; ++hh) request_hop_pair(owner, hh);
        return true;
    }

    bool make_room_at(HopState& h, int node) {
        if (!claims_unmet(h) || h.pending.empty()) return false;
        const std::uint64_t r_min = h.pending.begin()->first;
        if (preempt_background_at(node)) return true;
        if (preempt_claim_at(node, r_min, h.channel)) return true;
        return preempt_chain_at(node, r_min);
    }

    void on_gen_tick(int c) {
        HopState& h = hops[c];
        h.tick_scheduled = false;
        h.last_tick_at = sim.now();
        const net::QuantumChannel& ch = topo.qchannels[c];
        // One attempt per wanted pair per period; failed attempts retry at
        // the next tick, not within this one.
        int budget = deficit(h);
        int launched = 0;
        int guard = 0;
        while (budget > 0 && deficit(h) > 0 && ++guard < 4096) {
            if (free_slots(h.u) <= 0) {
                if (!make_room_at(h, h.u)) break;
                continue;  // room-making may have satisfied claims instead
            }
            if (free_slots(h.v) <= 0) {
                if (!make_room_at(h, h.v)) break;
                continue;
            }
            audit.acquire(h.u);
            audit.acquire(h.v);
            ++stats[c].attempts;
            ++launched;
            --budget;
            if (channel_rng[c].bernoulli(h.success_prob)) {
                ++stats[c].successes;
                ++h.incoming;
                const std::uint64_t id = next_pair_id++;
                PairState ps;
                ps.pair = {id, h.u, h.v, net::link_fidelity(ch, ch.source_fidelity),
                           sim.now()};
                pairs.emplace(id, ps);
                log.push_back({id, PairLogEntry::Op::generated, 0, 0, h.u, h.v,
                               ps.pair.fidelity_at_creation, sim.now(), sim.now()});
                sim.schedule_in(topo.classical_delay(h.u, h.v), c, kPairHerald,
                                [this, c, id] { on_herald(c, id); });
            } else {
                audit.release(h.u);
                audit.release(h.v);
            }
        }
        if (launched > 0 && deficit(h) > 0) {
            h.tick_scheduled = true;
            sim.schedule_in(ch.attempt_period_ns, c, kGenTick, [this, c] { on_gen_tick(c); });
        }
    }

    void on_herald(int c, std::uint64_t id) {
        HopState& h = hops[c];
        --h.incoming;
        h.available.insert(id);
        schedule_eviction(id);
        match_hop(c);
        ensure_generation(c);
    }

    // ---- pair lifetime -------------------------------------------------------

    void schedule_eviction(std::uint64_t id) {
        const PairState& ps = pairs.at(id);
        const double f0 = ps.pair.fidelity_at_creation;
        const double theta = strat.evict_fidelity;
        if (theta <= 0.25 || f0 <= theta) return;
        const SimTime t_coh = std::min(topo.nodes[ps.pair.node_a].memory_coherence_ns,
                                       topo.nodes[ps.pair.node_b].memory_coherence_ns);
        const double dt =
            static_cast<double>(t_coh) * std::log((f0 - 0.25) / (theta - 0.25));
        const SimTime when = ps.pair.created_at + static_cast<SimTime>(std::ceil(dt));
        sim.schedule_at(std::max(when, sim.now()), ps.pair.node_a, kEvict,
                        [this, id] { on_evict(id); });
    }

    void on_evict(std::uint64_t id) {
        auto it = pairs.find(id);
        if (it == pairs.end() || !it->second.alive || !it->second.background) return;
        const int c = channel_of(it->second.pair);
        hops[c].available.erase(id);
        destroy_pair(id, true, true);
        ensure_generation(c);
    }

    int channel_of(const net::WernerPair& p) const {
        return topo.qchannel_index.at(
            {std::min(p.node_a, p.node_b), std::max(p.node_a, p.node_b)});
    }

    void destroy_pair(std::uint64_t id, bool release_a, bool release_b) {
        PairState& ps = pairs.at(id);
        ps.alive = false;
        if (release_a && ps.slot_a_held) {
            ps.slot_a_held = false;
            release_slot(ps.pair.node_a);
        }
        if (release_b && ps.slot_b_held) {
            ps.slot_b_held = false;
            release_slot(ps.pair.node_b);
        }
        if (!ps.slot_a_held && !ps.slot_b_held) pairs.erase(id);
    }

    void release_remote_side(std::uint64_t id, int node) {
        auto it = pairs.find(id);
        if (it == pairs.end()) return;
        PairState& ps = it->second;
        if (ps.pair.node_a == node && ps.slot_a_held) {
            ps.slot_a_held = false;
            release_slot(node);
        } else if (ps.pair.node_b == node && ps.slot_b_held) {
            ps.slot_b_held = false;
            release_slot(node);
        }
        if (!ps.alive && !ps.slot_a_held && !ps.slot_b_held) pairs.erase(id);
    }

    void release_slot(int node) {
        audit.release(node);
        for (int v : topo.adjacency[node]) {
            ensure_generation(
                topo.qchannel_index.at({std::min(node, v), std::max(node, v)}));
        }
    }

    // ---- claims ----------------------------------------------------------------

    void add_claim(std::uint64_t request_id, int hop_index) {
        RequestState& r = requests.at(request_id);
        const int c = hop_channel(r, hop_index);
        const std::uint64_t claim = next_claim_id++;
        tickets[claim] = {claim, request_id, hop_index};
        hops[c].pending.insert({request_id, claim});
        r.hops[hop_index].pending_claims++;
        match_hop(c);
        ensure_generation(c);
    }

    int hop_channel(const RequestState& r, int hop_index) const {
        const int a = r.path[hop_index], b = r.path[hop_index + 1];
        return topo.qchannel_index.at({std::min(a, b), std::max(a, b)});
    }

    void match_hop(int c) {
        HopState& h = hops[c];
        while (!h.available.empty() && !h.pending.empty()) {
            const std::uint64_t pair_id = *h.available.begin();
            const auto [req_id, claim_id] = *h.pending.begin();
            h.available.erase(h.available.begin());
            h.pending.erase(h.pending.begin());
            const ClaimTicket ticket = tickets.at(claim_id);
            tickets.erase(claim_id);
            PairState& ps = pairs.at(pair_id);
            ps.background = false;
            ps.claimed_by = req_id;
            RequestState& r = requests.at(req_id);
            r.hops[ticket.hop_index].pending_claims--;
            on_claim_granted(r, ticket.hop_index, pair_id);
        }
    }

    void cancel_claims(RequestState& r) {
        for (int h = 0; h < static_cast<int>(r.hops.size()); ++h) {
            if (r.hops[h].pending_claims == 0) continue;
            auto& pending = hops[hop_channel(r, h)].pending;
            for (auto it = pending.begin(); it != pending.end();) {
                if (it->first == r.req.id) {
                    tickets.erase(it->second);
                    it = pending.erase(it);
                } else {
                    ++it;
                }
            }
            r.hops[h].pending_claims = 0;
        }
    }

    // ---- request lifecycle -------------------------------------------------------

    void submit(const Request& req) {
        if (req.src == req.dst) throw std::invalid_argument("request: src == dst");
        if (req.pairs_requested < 1) {
            throw std::invalid_argument("request: pairs_requested < 1");
        }
        sim.schedule_at(req.arrival, static_cast<int>(req.id), kArrival,
                        [this, req] { on_arrival(req); });
    }

    void on_arrival(const Request& req) {
        RequestState r;
        r.req = req;
        r.path = route(topo, req.src, req.dst);
        r.relay_west.assign(r.path.size(), 0);
        for (std::size_t k = 1; k < r.path.size(); ++k) {
            r.relay_west[k] =
                r.relay_west[k - 1] + topo.classical_delay(r.path[k - 1], r.path[k]);
        }
        r.hops.resize(r.path.size() - 1);
        for (std::size_t k = 0; k + 1 < r.path.size(); ++k) {
            bump_demand(r.path[k], r.path[k + 1]);
            bump_demand(r.path[k + 1], r.path[k]);
        }
        requests.emplace(req.id, std::move(r));
        RequestState& stored = requests.at(req.id);
        // The setup message relays along the path; a hop joins the request
        // when its left endpoint hears about it.
        for (int h = 0; h < static_cast<int>(stored.hops.size()); ++h) {
            const SimTime when = stored.relay_west[h];
            const std::uint64_t id = req.id;
            if (when == 0) {
                activate_hop(id, h);
            } else {
                sim.schedule_in(when, static_cast<int>(id), kHopActivate,
                                [this, id, h] { activate_hop(id, h); });
            }
        }
    }

    void bump_demand(int node, int neighbor) {
        window_count[node][static_cast<std::size_t>(neighbor_pos(node, neighbor))]++;
    }

    void activate_hop(std::uint64_t req_id, int h) {
        auto it = requests.find(req_id);
        if (it == requests.end() || it->second.done) return;
        RequestState& r = it->second;
        if (r.hops[h].active) return;
        r.hops[h].active = true;
        request_hop_pair(r, h);
    }

    void request_hop_pair(RequestState& r, int h) {
        HopProgress& hp = r.hops[h];
        if (!hp.active || r.done) return;
        if (hp.claimed_pair != 0 || hp.pending_claims > 0 || hp.distilling) return;
        add_claim(r.req.id, h);
    }

    void on_claim_granted(RequestState& r, int h, std::uint64_t pair_id) {
        if (r.done) {
            return_to_pool(pair_id);
            return;
        }
        HopProgress& hp = r.hops[h];
        if (hp.claimed_pair == 0) {
            hp.claimed_pair = pair_id;
        } else {
            hp.partner_pair = pair_id;
        }
        evaluate_hop(r, h);
    }

    void return_to_pool(std::uint64_t pair_id) {
        auto it = pairs.find(pair_id);
        if (it == pairs.end() || !it->second.alive) return;
        it->second.background = true;
        it->second.claimed_by = 0;
        const int c = channel_of(it->second.pair);
        hops[c].available.insert(pair_id);
        schedule_eviction(pair_id);
        match_hop(c);
    }

    void evaluate_hop(RequestState& r, int h) {
        HopProgress& hp = r.hops[h];
        if (hp.claimed_pair == 0 || hp.distilling || r.done) return;
        const double threshold = strat.distill_threshold.value_or(-1.0);
        const double f_now =
            net::current_fidelity(pairs.at(hp.claimed_pair).pair, sim.now(), topo);
        if (threshold > 0 && f_now < threshold) {
            if (hp.partner_pair == 0) {
                if (hp.pending_claims == 0) add_claim(r.req.id, h);
                return;
            }
            start_distill(r, h);
            return;
        }
        if (hp.partner_pair != 0) {
            const std::uint64_t spare = hp.partner_pair;
            hp.partner_pair = 0;
            return_to_pool(spare);
        }
        try_advance_chain(r);
    }

    void start_distill(RequestState& r, int h) {
        HopProgress& hp = r.hops[h];
        hp.distilling = true;
        const int a = r.path[h], b = r.path[h + 1];
        const SimTime gate =
            std::max(topo.nodes[a].gate_time_ns, topo.nodes[b].gate_time_ns);
        const SimTime t_meas = sim.now() + gate;
        const SimTime resolve = t_meas + topo.classical_delay(a, b);
        const std::uint64_t req_id = r.req.id;
        const int c = hop_channel(r, h);
        sim.schedule_at(resolve, c, kDistillResolve, [this, req_id, h, c, t_meas] {
            on_distill_resolve(req_id, h, c, t_meas);
        });
    }

    void on_distill_resolve(std::uint64_t req_id, int h, int c, SimTime t_meas) {
        auto it = requests.find(req_id);
        if (it == requests.end()) return;
        RequestState& r = it->second;
        HopProgress& hp = r.hops[h];
        hp.distilling = false;
        const std::uint64_t main_id = hp.claimed_pair;
        const std::uint64_t partner_id = hp.partner_pair;
        hp.partner_pair = 0;
        if (r.done) {
            hp.claimed_pair = 0;
            return_to_pool(main_id);
            return_to_pool(partner_id);
            return;
        }
        const double f1 = net::current_fidelity(pairs.at(main_id).pair, t_meas, topo);
        const double f2 = net::current_fidelity(pairs.at(partner_id).pair, t_meas, topo);
        const auto [p_succ, f_out] = entmath::distill_bbpssw(f1, f2);
        const bool ok = channel_rng[c].bernoulli(p_succ);
        if (ok) {
            const std::uint64_t merged = next_pair_id++;
            PairState ps;
            ps.pair = {merged, pairs.at(main_id).pair.node_a,
                       pairs.at(main_id).pair.node_b, f_out, t_meas};
            ps.background = false;
            ps.claimed_by = req_id;
            ps.slot_a_held = pairs.at(main_id).slot_a_held;
            ps.slot_b_held = pairs.at(main_id).slot_b_held;
            pairs.erase(main_id);
            destroy_pair(partner_id, true, true);
            pairs.emplace(merged, ps);
            log.push_back({merged, PairLogEntry::Op::distilled, main_id, partner_id,
                           ps.pair.node_a, ps.pair.node_b, f_out, t_meas, t_meas});
            hp.claimed_pair = merged;
            evaluate_hop(r, h);
        } else {
            destroy_pair(partner_id, true, true);
            destroy_pair(main_id, true, true);
            hp.claimed_pair = 0;
            request_hop_pair(r, h);
        }
    }

    // ---- chain construction -------------------------------------------------------

    void try_advance_chain(RequestState& r) {
        if (r.done || r.swap_in_flight || r.finishing) return;
        if (r.reach == 0) {
            HopProgress& hp = r.hops[0];
            if (hp.claimed_pair == 0 || hp.distilling || !hop_pair_ready(r, 0)) return;
            r.chain_pair = hp.claimed_pair;
            hp.claimed_pair = 0;
            r.reach = 1;
            r.chain_known = true;  // link heralds reached both endpoints already
            if (r.reach == static_cast<int>(r.path.size()) - 1) {
                begin_delivery(r);
                return;
            }
        }
        const int h = r.reach;
        if (h >= static_cast<int>(r.hops.size())) return;
        HopProgress& hp = r.hops[h];
        if (!r.chain_known || hp.claimed_pair == 0 || hp.distilling ||
            !hop_pair_ready(r, h)) {
            return;
        }
        r.swap_in_flight = true;
        const int node = r.path[h];
        const SimTime t_bsm = sim.now() + topo.nodes[node].gate_time_ns;
        const std::uint64_t req_id = r.req.id;
        sim.schedule_at(t_bsm, node, kSwapResolve,
                        [this, req_id, node] { on_swap_resolve(req_id, node); });
    }

    bool hop_pair_ready(RequestState& r, int h) {
        if (!strat.distill_threshold) return true;
        const double f = net::current_fidelity(pairs.at(r.hops[h].claimed_pair).pair,
                                               sim.now(), topo);
        if (f >= *strat.distill_threshold) return true;
        evaluate_hop(r, h);  // decayed below threshold: back to distillation
        return false;
    }

    void on_swap_resolve(std::uint64_t req_id, int node) {
        auto itr = requests.find(req_id);
        if (itr == requests.end()) return;
        RequestState& r = itr->second;
        r.swap_in_flight = false;
        const int h = r.reach;
        HopProgress& hp = r.hops[h];
        const std::uint64_t left_id = r.chain_pair;
        const std::uint64_t right_id = hp.claimed_pair;
        const SimTime t_bsm = sim.now();
        const double f_left = net::current_fidelity(pairs.at(left_id).pair, t_bsm, topo);
        const double f_right = net::current_fidelity(pairs.at(right_id).pair, t_bsm, topo);
        const bool ok = node_rng[node].bernoulli(topo.nodes[node].swap_success_prob);
        const int src = r.path[0];
        const int next = r.path[h + 1];
        if (ok) {
            const double f_new = entmath::swap_fidelity(f_left, f_right);
            const std::uint64_t id = next_pair_id++;
            PairState ps;
            ps.pair = {id, src, next, f_new, t_bsm};
            ps.background = false;
            ps.claimed_by = req_id;
            // Far-end slots transfer to the new pair; the two qubits at the
            // swap node were measured, so those slots free now.
            ps.slot_a_held = slot_held_at(pairs.at(left_id), src);
            ps.slot_b_held = slot_held_at(pairs.at(right_id), next);
            take_slot(pairs.at(left_id), src);
            take_slot(pairs.at(right_id), next);
            destroy_pair(left_id, true, true);
            destroy_pair(right_id, true, true);
            pairs.emplace(id, ps);
            log.push_back({id, PairLogEntry::Op::swapped, left_id, right_id, src, next,
                           f_new, t_bsm, t_bsm});
            hp.claimed_pair = 0;
            r.chain_pair = id;
            r.reach = h + 1;
            r.chain_known = false;
            if (r.reach == static_cast<int>(r.path.size()) - 1) {
                begin_delivery(r);
                return;
            }
            sim.schedule_in(topo.classical_delay(node, next), static_cast<int>(req_id),
                            kSegmentKnown, [this, req_id] {
                                auto it = requests.find(req_id);
                                if (it == requests.end()) return;
                                it->second.chain_known = true;
                                try_advance_chain(it->second);
                            });
        } else {
            // Both pairs are consumed. Swap-node slots free immediately; the
            // far ends free when the failure heralds arrive, and the
            // controller restarts the lost segment when src learns.
            destroy_pair(left_id, pairs.at(left_id).pair.node_a == node,
                         pairs.at(left_id).pair.node_b == node);
            destroy_pair(right_id, pairs.at(right_id).pair.node_a == node,
                         pairs.at(right_id).pair.node_b == node);
            hp.claimed_pair = 0;
            r.chain_pair = 0;
            r.reach = 0;
            r.chain_known = false;
            const int failed_hop = h;
            sim.schedule_in(r.relay_west[h], src, kRemoteRelease,
                            [this, left_id, src, req_id, failed_hop] {
                                release_remote_side(left_id, src);
                                auto it = requests.find(req_id);
                                if (it == requests.end() || it->second.done) return;
                                for (int hh = 0; hh <= failed_hop; ++hh) {
                                    request_hop_pair(it->second, hh);
                                }
                                try_advance_chain(it->second);
                            });
            sim.schedule_in(topo.classical_delay(node, next), next, kRemoteRelease,
                            [this, right_id, next] { release_remote_side(right_id, next); });
        }
    }

    static bool slot_held_at(const PairState& ps, int node) {
        if (ps.pair.node_a == node) return ps.slot_a_held;
        if (ps.pair.node_b == node) return ps.slot_b_held;
        return false;
    }

    static void take_slot(PairState& ps, int node) {
        if (ps.pair.node_a == node) ps.slot_a_held = false;
        if (ps.pair.node_b == node) ps.slot_b_held = false;
    }

    // ---- delivery -------------------------------------------------------------

    void begin_delivery(RequestState& r) {
        r.finishing = true;
        // Completion point is the hop-0 herald for single-hop chains (both
        // ends know already) or the final swap at path[reach-1].
        const SimTime confirm_delay = (r.reach == 1) ? 0 : r.relay_west[r.reach - 1];
        const std::uint64_t req_id = r.req.id;
        if (confirm_delay == 0) {
            // Same-time confirm still goes through the queue to keep handler
            // nesting shallow and ordering explicit.
            sim.schedule_at(sim.now(), r.path[0], kDeliveryConfirm,
                            [this, req_id] { on_delivery_confirm(req_id); });
        } else {
            sim.schedule_in(confirm_delay, r.path[0], kDeliveryConfirm,
                            [this, req_id] { on_delivery_confirm(req_id); });
        }
    }

    void on_delivery_confirm(std::uint64_t req_id) {
        auto it = requests.find(req_id);
        if (it == requests.end()) return;
        RequestState& r = it->second;
        const std::uint64_t pair_id = r.chain_pair;
        PairState& ps = pairs.at(pair_id);
        const double f = net::current_fidelity(ps.pair, sim.now(), topo);
        const int src = r.req.src;
        const int dst = r.req.dst;
        const bool accept = !r.req.min_fidelity || f >= *r.req.min_fidelity;
        // src acts on its qubit now; dst's side resolves when the classical
        // notice arrives.
        destroy_pair(pair_id, ps.pair.node_a == src, ps.pair.node_b == src);
        r.chain_pair = 0;
        r.reach = 0;
        r.chain_known = false;
        r.finishing = false;
        if (accept) {
            r.delivered++;
            r.delivered_fidelities.push_back(f);
            r.delivered_pair_ids.push_back(pair_id);
            r.delivered_times.push_back(sim.now());
            sim.schedule_in(r.relay_west.back(), dst, kDeliveryNotify,
                            [this, req_id, pair_id, dst] {
                                on_delivery_notify(req_id, pair_id, dst);
                            });
        } else {
            sim.schedule_in(r.relay_west.back(), dst, kRemoteRelease,
                            [this, pair_id, dst] { release_remote_side(pair_id, dst); });
        }
        if (r.delivered < r.req.pairs_requested) {
            for (int h = 0; h < static_cast<int>(r.hops.size()); ++h) {
                request_hop_pair(r, h);
            }
            try_advance_chain(r);
        }
    }

    void on_delivery_notify(std::uint64_t req_id, std::uint64_t pair_id, int dst) {
        release_remote_side(pair_id, dst);
        auto it = requests.find(req_id);
        if (it == requests.end()) return;
        RequestState& r = it->second;
        r.notifies_arrived++;
        if (r.notifies_arrived == r.req.pairs_requested && !r.done) {
            r.done = true;
            cancel_claims(r);
            release_request_resources(r);
            ServiceRecord rec;
            rec.request_id = req_id;
            rec.src = r.req.src;
            rec.dst = r.req.dst;
            rec.arrival = r.req.arrival;
            rec.pairs_requested = r.req.pairs_requested;
            rec.completed_at = sim.now();
            rec.delivered_fidelities = r.delivered_fidelities;
            rec.delivered_pair_ids = r.delivered_pair_ids;
            rec.delivered_times = r.delivered_times;
            rec.censored = false;
            records.push_back(std::move(rec));
        }
    }

    // Unused claimed pairs go back to the shared pool on completion.
    void release_request_resources(RequestState& r) {
        for (HopProgress& hp : r.hops) {
            if (hp.claimed_pair != 0 && !hp.distilling) {
                const std::uint64_t id = hp.claimed_pair;
                hp.claimed_pair = 0;
                return_to_pool(id);
            }
            if (hp.partner_pair != 0 && !hp.distilling) {
                const std::uint64_t id = hp.partner_pair;
                hp.partner_pair = 0;
                return_to_pool(id);
            }
        }
        if (r.chain_pair != 0) {
            // A chain fragment outlives completion only when the request was
            // over-served; return it as well.
            return_to_pool(r.chain_pair);
            r.chain_pair = 0;
        }
    }

    // ---- finalization ------------------------------------------------------------

    void finalize() {
        if (finalized) return;
        finalized = true;
        for (auto& [id, r] : requests) {
            if (r.done) continue;
            ServiceRecord rec;
            rec.request_id = id;
            rec.src = r.req.src;
            rec.dst = r.req.dst;
            rec.arrival = r.req.arrival;
            rec.pairs_requested = r.req.pairs_requested;
            rec.delivered_fidelities = r.delivered_fidelities;
            rec.delivered_pair_ids = r.delivered_pair_ids;
            rec.delivered_times = r.delivered_times;
            rec.censored = true;
            records.push_back(std::move(rec));
        }
        std::sort(records.begin(), records.end(),
                  [](const ServiceRecord& a, const ServiceRecord& b) {
                      return a.request_id < b.request_id;
                  });
    }

    bool memory_consistent() const {
        std::vector<int> held(topo.nodes.size(), 0);
        for (const auto& [id, ps] : pairs) {
            if (ps.slot_a_held) held[ps.pair.node_a]++;
            if (ps.slot_b_held) held[ps.pair.node_b]++;
        }
        for (std::size_t v = 0; v < held.size(); ++v) {
            if (held[v] != audit.used(static_cast<int>(v))) return false;
        }
        return true;
    }
};

NetworkSim::NetworkSim(const net::Topology& topo, const StrategyConfig& strategy,
                       std::uint64_t master_seed)
    : impl_(new Impl(topo, strategy, master_seed)) {}

NetworkSim::~NetworkSim() { delete impl_; }

void NetworkSim::submit(const Request& r) { impl_->submit(r); }

void NetworkSim::run_until(SimTime t_end) {
    impl_->sim.run_until(t_end);
    impl_->finalize();
}

const std::vector<ServiceRecord>& NetworkSim::records() const { return impl_->records; }
const std::vector<PairLogEntry>& NetworkSim::pair_log() const { return impl_->log; }
const MemoryAuditor& NetworkSim::auditor() const { return impl_->audit; }

const ChannelStats& NetworkSim::channel_stats(int channel_index) const {
    return impl_->stats.at(channel_index);
}

des::Simulator& NetworkSim::engine() { return impl_->sim; }

bool NetworkSim::memory_consistent() const { return impl_->memory_consistent(); }

void NetworkSim::dump_state(std::ostream& os) const {
    os << "t=" << impl_->sim.now() << "\n";
    for (const auto& h : impl_->hops) {
        os << "hop ch" << h.channel << " (" << h.u << "," << h.v
           << ") target=" << h.background_target << " avail=" << h.available.size()
           << " pending=" << h.pending.size() << " incoming=" << h.incoming
           << " tick=" << h.tick_scheduled << " free_u="
           << impl_->free_slots(h.u) << " free_v=" << impl_->free_slots(h.v) << "\n";
    }
    for (const auto& [id, r] : impl_->requests) {
        if (r.done) continue;
        os << "req " << id << " reach=" << r.reach << " chain=" << r.chain_pair
           << " known=" << r.chain_known << " swap=" << r.swap_in_flight
           << " fin=" << r.finishing << " hops:";
        for (const auto& hp : r.hops) {
            os << " [c=" << hp.claimed_pair << " p=" << hp.partner_pair
               << " pend=" << hp.pending_claims << " d=" << hp.distilling
               << " a=" << hp.active << "]";
        }
        os << "\n";
    }
    for (const auto& [id, ps] : impl_->pairs) {
        os << "pair " << id << " (" << ps.pair.node_a << "," << ps.pair.node_b
           << ") f0=" << ps.pair.fidelity_at_creation << " bg=" << ps.background
           << " by=" << ps.claimed_by << " slots=" << ps.slot_a_held << ps.slot_b_held
           << " alive=" << ps.alive << "\n";
    }
}

std::vector<NeighborScore> NetworkSim::neighbor_scores(int node) const {
    std::vector<NeighborScore> out;
    const auto& nbrs = impl_->topo.adjacency.at(node);
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
        out.push_back({nbrs[i], impl_->ewma[node][i], impl_->alloc[node][i]});
    }
    return out;
}

}  // namespace qnet::proto
