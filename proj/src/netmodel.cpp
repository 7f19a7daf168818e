#include "qnet/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <stdexcept>

namespace qnet::net {

namespace {

std::pair<int, int> edge_key(int u, int v) { return {std::min(u, v), std::max(u, v)}; }

}  // namespace

int Topology::node_index(const std::string& name) const {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].name == name) return static_cast<int>(i);
    }
    throw std::out_of_range("topology: unknown node '" + name + "'");
}

const QuantumChannel& Topology::channel_between(int u, int v) const {
    auto it = qchannel_index.find(edge_key(u, v));
    if (it == qchannel_index.end()) {
        throw std::out_of_range("topology: no quantum channel between nodes " +
                                std::to_string(u) + " and " + std::to_string(v));
    }
    return qchannels[it->second];
}

SimTime Topology::classical_delay(int u, int v) const {
    auto it = cdelay.find(edge_key(u, v));
    if (it == cdelay.end()) {
        throw std::out_of_range("topology: no classical channel between nodes " +
                                std::to_string(u) + " and " + std::to_string(v));
    }
    return it->second;
}

void Topology::finalize() {
    if (nodes.empty()) throw std::invalid_argument("topology: no nodes");
    std::set<std::string> names;
    for (const NodeSpec& n : nodes) {
        if (!names.insert(n.name).second) {
            throw std::invalid_argument("topology: duplicate node name '" + n.name + "'");
        }
        if (n.memory_count < 1) throw std::invalid_argument("topology: memory_count < 1");
        if (n.memory_coherence_ns <= 0 || n.gate_time_ns <= 0) {
            throw std::invalid_argument("topology: nonpositive time on node '" + n.name + "'");
        }
        if (!(n.swap_success_prob > 0 && n.swap_success_prob <= 1)) {
            throw std::invalid_argument("topology: swap_success_prob outside (0,1]");
        }
    }
    const int n = static_cast<int>(nodes.size());
    adjacency.assign(n, {});
    qchannel_index.clear();
    cdelay.clear();
    for (std::size_t i = 0; i < qchannels.size(); ++i) {
        QuantumChannel& ch = qchannels[i];
        if (ch.node_a == ch.node_b || ch.node_a < 0 || ch.node_b < 0 ||
            ch.node_a >= n || ch.node_b >= n) {
            throw std::invalid_argument("topology: bad quantum channel endpoints");
        }
        if (!(ch.length_km > 0) || ch.attenuation_db_per_km < 0 ||
            ch.attempt_period_ns <= 0 || !(ch.detector_efficiency > 0 &&
            ch.detector_efficiency <= 1) || ch.dark_count_rate_per_ns < 0 ||
            !(ch.source_fidelity >= 0.25 && ch.source_fidelity <= 1)) {
            throw std::invalid_argument("topology: bad quantum channel parameters");
        }
        const auto key = edge_key(ch.node_a, ch.node_b);
        if (!qchannel_index.emplace(key, static_cast<int>(i)).second) {
            throw std::invalid_argument("topology: duplicate quantum channel " +
                                        nodes[key.first].name + "-" + nodes[key.second].name);
        }
        adjacency[ch.node_a].push_back(ch.node_b);
        adjacency[ch.node_b].push_back(ch.node_a);
    }
    for (auto& adj : adjacency) std::sort(adj.begin(), adj.end());
    for (const ClassicalChannel& cc : cchannels) {
        if (cc.node_a == cc.node_b || cc.node_a < 0 || cc.node_b < 0 ||
            cc.node_a >= n || cc.node_b >= n || cc.delay_ns <= 0) {
            throw std::invalid_argument("topology: bad classical channel");
        }
        cdelay[edge_key(cc.node_a, cc.node_b)] = cc.delay_ns;
    }
    for (const auto& [key, idx] : qchannel_index) {
        (void)idx;
        if (!cdelay.count(key)) {
            throw std::invalid_argument("topology: quantum channel " +
                                        nodes[key.first].name + "-" + nodes[key.second].name +
                                        " has no parallel classical channel");
        }
    }
    // Connectivity over the quantum graph.
    std::vector<char> seen(n, 0);
    std::deque<int> frontier{0};
    seen[0] = 1;
    int reached = 1;
    while (!frontier.empty()) {
        const int u = frontier.front();
        frontier.pop_front();
        for (int v : adjacency[u]) {
            if (!seen[v]) {
                seen[v] = 1;
                ++reached;
                frontier.push_back(v);
            }
        }
    }
    if (reached != n) throw std::invalid_argument("topology: graph is not connected");
}

double link_success_prob(const QuantumChannel& ch) {
    const double loss = std::pow(10.0, -ch.attenuation_db_per_km * ch.length_km / 20.0);
    return ch.detector_efficiency * ch.detector_efficiency * loss * 0.5;
}

double link_fidelity(const QuantumChannel& ch, double source_fidelity) {
    if (!ch.coexistence) return source_fidelity;
    const double car = entmath::car_model(*ch.coexistence);
    return entmath::coexistence_fidelity(source_fidelity, car);
}

namespace {

NodeSpec node_from_json(const json& j, const NodeSpec& defaults) {
    NodeSpec n = defaults;
    if (j.contains("name")) n.name = j.at("name").get<std::string>();
    if (j.contains("memory_count")) n.memory_count = j.at("memory_count").get<int>();
    if (j.contains("memory_coherence_ns"))
        n.memory_coherence_ns = j.at("memory_coherence_ns").get<SimTime>();
    if (j.contains("swap_success_prob"))
        n.swap_success_prob = j.at("swap_success_prob").get<double>();
    if (j.contains("gate_time_ns")) n.gate_time_ns = j.at("gate_time_ns").get<SimTime>();
    return n;
}

entmath::CarParams car_from_json(const json& j) {
    entmath::CarParams p;
    p.alpha_s = j.value("alpha_s", 1.0);
    p.alpha_i = j.value("alpha_i", 1.0);
    p.mu_c = j.value("mu_c", 0.0);
    p.mu_sn = j.value("mu_sn", 0.0);
    p.mu_in = j.value("mu_in", 0.0);
    p.d_s = j.value("d_s", 0.0);
    p.d_i = j.value("d_i", 0.0);
    return p;
}

json car_to_json(const entmath::CarParams& p) {
    return json{{"alpha_s", p.alpha_s}, {"alpha_i", p.alpha_i}, {"mu_c", p.mu_c},
                {"mu_sn", p.mu_sn},     {"mu_in", p.mu_in},     {"d_s", p.d_s},
                {"d_i", p.d_i}};
}

void qchannel_params_from_json(const json& j, QuantumChannel& ch) {
    if (j.contains("length_km")) ch.length_km = j.at("length_km").get<double>();
    if (j.contains("attenuation_db_per_km"))
        ch.attenuation_db_per_km = j.at("attenuation_db_per_km").get<double>();
    if (j.contains("attempt_period_ns"))
        ch.attempt_period_ns = j.at("attempt_period_ns").get<SimTime>();
    if (j.contains("detector_efficiency"))
        ch.detector_efficiency = j.at("detector_efficiency").get<double>();
    if (j.contains("dark_count_rate_per_ns"))
        ch.dark_count_rate_per_ns = j.at("dark_count_rate_per_ns").get<double>();
    if (j.contains("source_fidelity"))
        ch.source_fidelity = j.at("source_fidelity").get<double>();
    if (j.contains("coexistence") && !j.at("coexistence").is_null())
        ch.coexistence = car_from_json(j.at("coexistence"));
}

}  // namespace

Topology load_topology(const json& doc) {
    Topology topo;
    if (!doc.is_object()) throw std::invalid_argument("topology: document must be an object");

    NodeSpec node_defaults;
    QuantumChannel channel_defaults;
    if (doc.contains("defaults")) {
        const json& d = doc.at("defaults");
        if (d.contains("node")) node_defaults = node_from_json(d.at("node"), node_defaults);
        if (d.contains("qchannel")) qchannel_params_from_json(d.at("qchannel"), channel_defaults);
    }

    if (doc.contains("generate")) {
        const json& g = doc.at("generate");
        const std::string kind = g.at("kind").get<std::string>();
        const int n = g.at("n").get<int>();
        if (kind == "as") {
            topo = generate_as_topology(n, g.value("seed", std::uint64_t{1}),
                                        node_defaults, channel_defaults);
        } else if (kind == "line") {
            topo = generate_line_topology(n, node_defaults, channel_defaults);
        } else {
            throw std::invalid_argument("topology: unknown generator kind '" + kind + "'");
        }
        return topo;
    }

    if (!doc.contains("nodes")) throw std::invalid_argument("topology: missing 'nodes'");
    for (const json& nj : doc.at("nodes")) {
        NodeSpec n = node_from_json(nj, node_defaults);
        if (n.name.empty()) throw std::invalid_argument("topology: node without a name");
        topo.nodes.push_back(std::move(n));
    }
    if (doc.contains("qchannels")) {
        for (const json& cj : doc.at("qchannels")) {
            QuantumChannel ch = channel_defaults;
            ch.node_a = topo.node_index(cj.at("a").get<std::string>());
            ch.node_b = topo.node_index(cj.at("b").get<std::string>());
            qchannel_params_from_json(cj, ch);
            topo.qchannels.push_back(std::move(ch));
        }
    }
    if (doc.contains("cchannels")) {
        for (const json& cj : doc.at("cchannels")) {
            ClassicalChannel cc;
            cc.node_a = topo.node_index(cj.at("a").get<std::string>());
            cc.node_b = topo.node_index(cj.at("b").get<std::string>());
            if (cj.contains("delay_ns")) {
                cc.delay_ns = cj.at("delay_ns").get<SimTime>();
            } else {
                const QuantumChannel& qc = [&]() -> const QuantumChannel& {
                    for (const auto& q : topo.qchannels) {
                        if (edge_key(q.node_a, q.node_b) == edge_key(cc.node_a, cc.node_b))
                            return q;
                    }
                    throw std::invalid_argument(
                        "topology: classical channel without delay has no parallel "
                        "quantum channel to derive it from");
                }();
                cc.delay_ns = static_cast<SimTime>(std::llround(qc.length_km * kFiberNsPerKm));
            }
            topo.cchannels.push_back(cc);
        }
    } else {
        // No classical plane given: build the parallel channel for every
        // quantum channel at fiber propagation delay.
        for (const QuantumChannel& qc : topo.qchannels) {
            topo.cchannels.push_back(
                {qc.node_a, qc.node_b,
                 static_cast<SimTime>(std::llround(qc.length_km * kFiberNsPerKm))});
        }
    }
    topo.finalize();
    return topo;
}

json dump_topology(const Topology& topo) {
    json nodes = json::array();
    for (const NodeSpec& n : topo.nodes) {
        nodes.push_back(json{{"name", n.name},
                             {"memory_count", n.memory_count},
                             {"memory_coherence_ns", n.memory_coherence_ns},
                             {"swap_success_prob", n.swap_success_prob},
                             {"gate_time_ns", n.gate_time_ns}});
    }
    auto normalized = [&topo](int a, int b) {
        return std::pair<std::string, std::string>{
            topo.nodes[std::min(a, b)].name, topo.nodes[std::max(a, b)].name};
    };
    std::vector<json> qcs;
    for (const QuantumChannel& ch : topo.qchannels) {
        auto [a, b] = normalized(ch.node_a, ch.node_b);
        json j{{"a", a},
               {"b", b},
               {"length_km", ch.length_km},
               {"attenuation_db_per_km", ch.attenuation_db_per_km},
               {"attempt_period_ns", ch.attempt_period_ns},
               {"detector_efficiency", ch.detector_efficiency},
               {"dark_count_rate_per_ns", ch.dark_count_rate_per_ns},
               {"source_fidelity", ch.source_fidelity}};
        if (ch.coexistence) j["coexistence"] = car_to_json(*ch.coexistence);
        qcs.push_back(std::move(j));
    }
    std::vector<json> ccs;
    for (const ClassicalChannel& cc : topo.cchannels) {
        auto [a, b] = normalized(cc.node_a, cc.node_b);
        ccs.push_back(json{{"a", a}, {"b", b}, {"delay_ns", cc.delay_ns}});
    }
    auto by_edge = [](const json& x, const json& y) {
        return std::tie(x.at("a").get_ref<const std::string&>(),
                        x.at("b").get_ref<const std::string&>()) <
               std::tie(y.at("a").get_ref<const std::string&>(),
                        y.at("b").get_ref<const std::string&>());
    };
    std::sort(qcs.begin(), qcs.end(), by_edge);
    std::sort(ccs.begin(), ccs.end(), by_edge);
    return json{{"nodes", nodes}, {"qchannels", qcs}, {"cchannels", ccs}};
}

Topology generate_as_topology(int n, std::uint64_t seed, const NodeSpec& node_defaults,
                              const QuantumChannel& channel_defaults) {
    if (n < 2) throw std::invalid_argument("generate_as_topology: need n >= 2");
    Topology topo;
    for (int i = 0; i < n; ++i) {
        NodeSpec node = node_defaults;
        node.name = "n" + std::to_string(i);
        topo.nodes.push_back(std::move(node));
    }
    des::RngStream rng(seed, 0xA5A5ULL);
    std::vector<std::pair<int, int>> edges;
    std::vector<int> degree(n, 0);
    // Degree-proportional target sampling via a repeated-endpoint urn.
    std::vector<int> urn;
    auto add_edge = [&](int u, int v) {
        edges.emplace_back(std::min(u, v), std::max(u, v));
        ++degree[u];
        ++degree[v];
        urn.push_back(u);
        urn.push_back(v);
    };
    add_edge(0, 1);
    for (int k = 2; k < n; ++k) {
        const int m = std::min(2, k);
        std::set<int> targets;
        while (static_cast<int>(targets.size()) < m) {
            const int pick = urn[static_cast<std::size_t>(rng.uniform() * urn.size())];
            targets.insert(pick);
        }
        for (int t : targets) add_edge(k, t);
    }
    std::sort(edges.begin(), edges.end());
    for (auto [u, v] : edges) {
        QuantumChannel ch = channel_defaults;
        ch.node_a = u;
        ch.node_b = v;
        topo.qchannels.push_back(ch);
        topo.cchannels.push_back(
            {u, v, static_cast<SimTime>(std::llround(ch.length_km * kFiberNsPerKm))});
    }
    topo.finalize();
    return topo;
}

Topology generate_line_topology(int n, const NodeSpec& node_defaults,
                                const QuantumChannel& channel_defaults) {
    if (n < 2) throw std::invalid_argument("generate_line_topology: need n >= 2");
    Topology topo;
    for (int i = 0; i < n; ++i) {
        NodeSpec node = node_defaults;
        node.name = "n" + std::to_string(i);
        topo.nodes.push_back(std::move(node));
    }
    for (int i = 0; i + 1 < n; ++i) {
        QuantumChannel ch = channel_defaults;
        ch.node_a = i;
        ch.node_b = i + 1;
        topo.qchannels.push_back(ch);
        topo.cchannels.push_back(
            {i, i + 1, static_cast<SimTime>(std::llround(ch.length_km * kFiberNsPerKm))});
    }
    topo.finalize();
    return topo;
}

double current_fidelity(const WernerPair& pair, SimTime now, const Topology& topo) {
    const SimTime t_coh = std::min(topo.nodes[pair.node_a].memory_coherence_ns,
                                   topo.nodes[pair.node_b].memory_coherence_ns);
    return entmath::werner_decohere(pair.fidelity_at_creation, now - pair.created_at, t_coh);
}

}  // namespace qnet::net
