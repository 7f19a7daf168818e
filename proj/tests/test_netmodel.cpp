#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qnet/netmodel.hpp"

#include <algorithm>
#include <cmath>

using namespace qnet::net;
using qnet::entmath::CarParams;

namespace {

json two_node_doc() {
    return json::parse(R"({
        "nodes": [
            {"name": "a", "memory_count": 2},
            {"name": "b", "memory_count": 2}
        ],
        "qchannels": [
            {"a": "a", "b": "b", "length_km": 4.38, "attenuation_db_per_km": 0.2,
             "detector_efficiency": 0.9}
        ]
    })");
}

}  // namespace

TEST_CASE("link success probability") {
    QuantumChannel ideal;
    ideal.attenuation_db_per_km = 0.0;
    ideal.detector_efficiency = 1.0;
    ideal.length_km = 10.0;
    CHECK(link_success_prob(ideal) == doctest::Approx(0.5).epsilon(1e-14));

    QuantumChannel ch;
    ch.detector_efficiency = 0.9;
    ch.attenuation_db_per_km = 0.2;
    ch.length_km = 4.38;
    const double expect = 0.81 * std::pow(10.0, -0.2 * 4.38 / 20.0) * 0.5;
    CHECK(link_success_prob(ch) == doctest::Approx(expect).epsilon(1e-14));
    CHECK(link_success_prob(ch) == doctest::Approx(0.3661).epsilon(1e-3));

    // Doubling the length squares the loss factor.
    QuantumChannel twice = ch;
    twice.length_km = 2 * ch.length_km;
    const double ratio = link_success_prob(twice) / link_success_prob(ch);
    CHECK(ratio == doctest::Approx(std::pow(10.0, -0.2 * 4.38 / 20.0)).epsilon(1e-12));
}

TEST_CASE("link fidelity with and without coexistence") {
    QuantumChannel ch;
    CHECK(link_fidelity(ch, 0.95) == doctest::Approx(0.95));

    CarParams far;   // CAR -> huge when only correlated pairs
    far.mu_c = 1e-9;
    ch.coexistence = far;
    CHECK(link_fidelity(ch, 0.95) == doctest::Approx(0.95).epsilon(1e-8));

    CarParams car101;
    car101.mu_c = 0.01;
    ch.coexistence = car101;   // CAR = 101
    CHECK(link_fidelity(ch, 0.95) == doctest::Approx(95.25 / 101.0).epsilon(1e-12));
}

TEST_CASE("two-node document loads with derived classical plane") {
    Topology topo = load_topology(two_node_doc());
    CHECK(topo.nodes.size() == 2);
    CHECK(topo.qchannels.size() == 1);
    CHECK(topo.cchannels.size() == 1);
    CHECK(topo.classical_delay(0, 1) == 21900);  // 4.38 km at 5 us/km
    CHECK(topo.adjacency[0] == std::vector<int>{1});
}

TEST_CASE("topology round trip is exact") {
    json doc = json::parse(R"({
        "defaults": {
            "node": {"memory_count": 5, "memory_coherence_ns": 77000000},
            "qchannel": {"length_km": 3.5, "attempt_period_ns": 12000}
        },
        "generate": {"kind": "line", "n": 20}
    })");
    Topology topo = load_topology(doc);
    CHECK(topo.nodes.size() == 20);
    CHECK(topo.nodes[3].memory_count == 5);
    CHECK(topo.qchannels[7].length_km == doctest::Approx(3.5));
    json dumped = dump_topology(topo);
    Topology again = load_topology(dumped);
    CHECK(dump_topology(again) == dumped);
}

TEST_CASE("missing classical channel is named in the error") {
    json doc = json::parse(R"({
        "nodes": [{"name": "a"}, {"name": "b"}, {"name": "c"}],
        "qchannels": [
            {"a": "a", "b": "b"},
            {"a": "b", "b": "c"}
        ],
        "cchannels": [
            {"a": "a", "b": "b", "delay_ns": 1000}
        ]
    })");
    try {
        load_topology(doc);
        FAIL("expected validation error");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("b-c") != std::string::npos);
        CHECK(msg.find("classical") != std::string::npos);
    }
}

TEST_CASE("disconnected topologies are rejected") {
    json doc = json::parse(R"({
        "nodes": [{"name": "a"}, {"name": "b"}, {"name": "c"}, {"name": "d"}],
        "qchannels": [
            {"a": "a", "b": "b"},
            {"a": "c", "b": "d"}
        ]
    })");
    try {
        load_topology(doc);
        FAIL("expected validation error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("not connected") != std::string::npos);
    }
}

TEST_CASE("parameter range validation") {
    json doc = two_node_doc();
    doc["qchannels"][0]["detector_efficiency"] = 1.5;
    CHECK_THROWS_AS(load_topology(doc), std::invalid_argument);
    doc = two_node_doc();
    doc["nodes"][0]["memory_count"] = 0;
    CHECK_THROWS_AS(load_topology(doc), std::invalid_argument);
    doc = two_node_doc();
    doc["qchannels"][0]["source_fidelity"] = 0.1;
    CHECK_THROWS_AS(load_topology(doc), std::invalid_argument);
}

TEST_CASE("scale-free generator") {
    SUBCASE("n = 2 is a single edge") {
        Topology t = generate_as_topology(2, 1);
        CHECK(t.qchannels.size() == 1);
    }
    SUBCASE("deterministic in the seed") {
        Topology a = generate_as_topology(200, 7);
        Topology b = generate_as_topology(200, 7);
        REQUIRE(a.qchannels.size() == b.qchannels.size());
        for (std::size_t i = 0; i < a.qchannels.size(); ++i) {
            CHECK(a.qchannels[i].node_a == b.qchannels[i].node_a);
            CHECK(a.qchannels[i].node_b == b.qchannels[i].node_b);
        }
        Topology c = generate_as_topology(200, 8);
        bool differs = a.qchannels.size() != c.qchannels.size();
        for (std::size_t i = 0; !differs && i < a.qchannels.size(); ++i) {
            differs = a.qchannels[i].node_a != c.qchannels[i].node_a ||
                      a.qchannels[i].node_b != c.qchannels[i].node_b;
        }
        CHECK(differs);
    }
    SUBCASE("degree distribution is heavy tailed at n = 200") {
        Topology t = generate_as_topology(200, 7);
        std::vector<int> degree(200, 0);
        for (const auto& ch : t.qchannels) {
            degree[ch.node_a]++;
            degree[ch.node_b]++;
        }
        std::vector<int> sorted = degree;
        std::sort(sorted.begin(), sorted.end());
        const int median = sorted[100];
        const int maxdeg = sorted.back();
        CHECK(maxdeg > 4 * median);
    }
    CHECK_THROWS_AS(generate_as_topology(1, 3), std::invalid_argument);
}

TEST_CASE("werner pair decoheres with the weaker memory") {
    json doc = two_node_doc();
    doc["nodes"][0]["memory_coherence_ns"] = 1000;
    doc["nodes"][1]["memory_coherence_ns"] = 100000;
    Topology topo = load_topology(doc);
    WernerPair pair{1, 0, 1, 1.0, 0};
    // After one coherence time of the weaker end.
    CHECK(current_fidelity(pair, 1000, topo) ==
          doctest::Approx(0.25 + 0.75 * std::exp(-1.0)).epsilon(1e-12));
    CHECK(current_fidelity(pair, 0, topo) == doctest::Approx(1.0));
}
