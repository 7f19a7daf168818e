#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qnet/pcs.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <vector>

using namespace qnet;
using dm::PcsCircuitConfig;
using dm::PcsVariant;

namespace {

// Independent route for the 4-to-2 protocol: enumerate the 4^4 Pauli error
// patterns of four Werner pairs, postselect patterns commuting with both
// stabilizer correlations, and read the logical frames off the symplectic
// overlaps. Shares nothing with the density-matrix path.
struct FrameOracle {
    double success;
    double f1;
    double f2;
};

FrameOracle leung_shor_frame_oracle(double f) {
    const double e = (1.0 - f) / 3.0;
    const std::array<double, 4> prob = {f, e, e, e};  // I, X, Y, Z
    const std::array<int, 4> xbit = {0, 1, 1, 0};
    const std::array<int, 4> zbit = {0, 0, 1, 1};
    // Logical supports over the four code qubits.
    const std::array<std::array<int, 4>, 2> Zb = {{{1, 1, 0, 0}, {1, 0, 1, 0}}};
    const std::array<std::array<int, 4>, 2> Xb = {{{1, 0, 1, 0}, {1, 1, 0, 0}}};
    double succ = 0, keep1 = 0, keep2 = 0;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            for (int c = 0; c < 4; ++c)
                for (int d = 0; d < 4; ++d) {
                    const std::array<int, 4> pat = {a, b, c, d};
                    int zsum = 0, xsum = 0;
                    for (int i = 0; i < 4; ++i) {
                        zsum += zbit[pat[i]];
                        xsum += xbit[pat[i]];
                    }
                    if (zsum % 2 || xsum % 2) continue;  // detected
                    const double p = prob[a] * prob[b] * prob[c] * prob[d];
                    succ += p;
                    for (int j = 0; j < 2; ++j) {
                        int lx = 0, lz = 0;
                        for (int i = 0; i < 4; ++i) {
                            lx += xbit[pat[i]] * Zb[j][i];
                            lz += zbit[pat[i]] * Xb[j][i];
                        }
                        if (lx % 2 == 0 && lz % 2 == 0) (j == 0 ? keep1 : keep2) += p;
                    }
                }
    return {succ, keep1 / succ, keep2 / succ};
}

}  // namespace

TEST_CASE("pcs circuit reproduces both closed forms on the 0.05 grid") {
    double worst = 0;
    for (double f = 0.25; f <= 1.0 + 1e-12; f += 0.05) {
        const double fc = std::min(f, 1.0);
        PcsCircuitConfig cfg;
        cfg.channel_fidelity = fc;

        cfg.variant = PcsVariant::X_only;
        auto ox = dm::simulate_pcs(cfg);
        auto fx = entmath::pcs_x_predict(fc);
        worst = std::max(worst, std::abs(ox.postselect_prob - fx.postselect_prob));
        worst = std::max(worst, std::abs(ox.output_fidelity - fx.output_fidelity));

        cfg.variant = PcsVariant::X_and_Z;
        auto oz = dm::simulate_pcs(cfg);
        auto fz = entmath::pcs_xz_predict(fc);
        worst = std::max(worst, std::abs(oz.postselect_prob - fz.postselect_prob));
        worst = std::max(worst, std::abs(oz.output_fidelity - fz.output_fidelity));
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("pcs fixed points at the ends of the Werner range") {
    for (auto variant : {PcsVariant::X_only, PcsVariant::X_and_Z}) {
        PcsCircuitConfig cfg;
        cfg.variant = variant;
        cfg.channel_fidelity = 1.0;
        auto top = dm::simulate_pcs(cfg);
        CHECK(std::abs(top.postselect_prob - 1.0) < 1e-12);
        CHECK(std::abs(top.output_fidelity - 1.0) < 1e-12);
        cfg.channel_fidelity = 0.25;
        auto bottom = dm::simulate_pcs(cfg);
        CHECK(std::abs(bottom.output_fidelity - 0.25) < 1e-12);
    }
}

TEST_CASE("noiseless circuit at any recursion level is transparent") {
    for (int rec = 0; rec <= 2; ++rec) {
        PcsCircuitConfig cfg;
        cfg.variant = PcsVariant::X_only;
        cfg.recursion_level = rec;
        cfg.channel_fidelity = 1.0;
        auto r = dm::simulate_pcs(cfg);
        CHECK(r.postselect_prob == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(r.output_fidelity == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("recursion helps once and then saturates") {
    // One noise point here; the acceptance suite runs the full set.
    const double gp = 0.005;
    std::array<double, 3> fid{};
    for (int rec = 0; rec <= 2; ++rec) {
        PcsCircuitConfig cfg;
        cfg.variant = PcsVariant::X_and_Z;
        cfg.recursion_level = rec;
        cfg.gate_depolarizing_prob = gp;
        cfg.channel_fidelity = 0.9;
        fid[rec] = dm::simulate_pcs(cfg).output_fidelity;
    }
    CHECK(fid[1] > fid[0]);
    CHECK(fid[2] - fid[1] <= fid[1] - fid[0]);
}

TEST_CASE("pcs config validation") {
    PcsCircuitConfig cfg;
    cfg.recursion_level = 3;
    CHECK_THROWS_AS(dm::simulate_pcs(cfg), std::invalid_argument);
    cfg.recursion_level = 0;
    cfg.channel_fidelity = 0.1;
    CHECK_THROWS_AS(dm::simulate_pcs(cfg), std::domain_error);
    CHECK(dm::pcs_total_qubits({PcsVariant::X_and_Z, 2, 0.0, 0.9}) == 12);
    CHECK(dm::pcs_total_qubits({PcsVariant::X_only, 0, 0.0, 0.9}) == 6);
}

TEST_CASE("check symmetry contract") {
    // X (x) X commutes through CX in the sandwich sense for U = CX.
    dm::PauliCheckSpec spec{"XX", "XI", 0};
    CHECK(dm::check_symmetry(spec, dm::gates::cx()));
    dm::PauliCheckSpec bad{"XI", "XI", 0};
    CHECK_FALSE(dm::check_symmetry(bad, dm::gates::cx()));
    dm::PauliCheckSpec ident{"ZZ", "ZZ", 0};
    CHECK(dm::check_symmetry(ident, dm::gates::identity(2)));
}

TEST_CASE("swap circuit equals the closed form") {
    CHECK(std::abs(dm::simulate_swap(1.0, 1.0) - 1.0) < 1e-12);
    CHECK(std::abs(dm::simulate_swap(0.25, 0.8) - 0.25) < 1e-12);
    CHECK(std::abs(dm::simulate_swap(0.85, 0.7) - entmath::swap_fidelity(0.85, 0.7)) <
          1e-12);
    CHECK(std::abs(dm::simulate_swap(0.9, 0.9) - entmath::swap_fidelity(0.9, 0.9)) <
          1e-12);
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> uf(0.25, 1.0);
    for (int i = 0; i < 50; ++i) {
        const double f1 = uf(gen), f2 = uf(gen);
        CHECK(std::abs(dm::simulate_swap(f1, f2) - entmath::swap_fidelity(f1, f2)) < 1e-12);
    }
}

TEST_CASE("distillation circuit equals the closed form") {
    auto perfect = dm::simulate_bbpssw(1.0, 1.0);
    CHECK(std::abs(perfect.success_prob - 1.0) < 1e-12);
    CHECK(std::abs(perfect.output_fidelity - 1.0) < 1e-12);
    auto floor = dm::simulate_bbpssw(0.25, 0.25);
    CHECK(std::abs(floor.output_fidelity - 0.25) < 1e-12);

    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> uf(0.25, 1.0);
    for (int i = 0; i < 50; ++i) {
        const double f1 = uf(gen), f2 = uf(gen);
        auto circuit = dm::simulate_bbpssw(f1, f2);
        auto formula = entmath::distill_bbpssw(f1, f2);
        CHECK(std::abs(circuit.success_prob - formula.success_prob) < 1e-12);
        CHECK(std::abs(circuit.output_fidelity - formula.output_fidelity) < 1e-12);
    }
}

TEST_CASE("4-to-2 distillation against the Pauli-frame oracle") {
    for (double f : {0.6, 0.75, 0.85, 0.95}) {
        auto sim = dm::simulate_leung_shor_4to2(f, 0.0);
        auto oracle = leung_shor_frame_oracle(f);
        CHECK(sim.success_prob == doctest::Approx(oracle.success).epsilon(1e-11));
        CHECK(sim.out_fidelity_1 == doctest::Approx(oracle.f1).epsilon(1e-11));
        CHECK(sim.out_fidelity_2 == doctest::Approx(oracle.f2).epsilon(1e-11));
    }
}

TEST_CASE("4-to-2 distillation fixed points and gain region") {
    auto perfect = dm::simulate_leung_shor_4to2(1.0, 0.0);
    CHECK(std::abs(perfect.success_prob - 1.0) < 1e-12);
    CHECK(std::abs(perfect.out_fidelity_1 - 1.0) < 1e-12);
    CHECK(std::abs(perfect.out_fidelity_2 - 1.0) < 1e-12);

    auto floor = dm::simulate_leung_shor_4to2(0.25, 0.0);
    CHECK(std::abs(floor.out_fidelity_1 - 0.25) < 1e-12);
    CHECK(std::abs(floor.out_fidelity_2 - 0.25) < 1e-12);
    CHECK(std::abs(floor.success_prob - 0.25) < 1e-12);

    for (double f : {0.85, 0.9, 0.95}) {
        auto r = dm::simulate_leung_shor_4to2(f, 0.0);
        CHECK(r.out_fidelity_1 > f);
        CHECK(r.out_fidelity_2 > f);
    }
}

TEST_CASE("4-to-2 regression vectors stay pinned") {
    std::ifstream fx(std::string(QNET_FIXTURE_DIR) + "/leung_shor_4to2_v1.txt");
    REQUIRE(fx.good());
    std::string tag, version;
    fx >> tag >> version;
    REQUIRE(tag == "leung-shor-4to2");
    REQUIRE(version == "v1");
    std::string line;
    std::getline(fx, line);
    int checked = 0;
    while (std::getline(fx, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream row(line);
        double f, gp, succ, f1, f2;
        row >> f >> gp >> succ >> f1 >> f2;
        auto r = dm::simulate_leung_shor_4to2(f, gp);
        CHECK(r.success_prob == doctest::Approx(succ).epsilon(1e-9));
        CHECK(r.out_fidelity_1 == doctest::Approx(f1).epsilon(1e-9));
        CHECK(r.out_fidelity_2 == doctest::Approx(f2).epsilon(1e-9));
        ++checked;
    }
    CHECK(checked == 4);
}

TEST_CASE("gate noise only hurts") {
    auto clean = dm::simulate_leung_shor_4to2(0.9, 0.0);
    auto noisy = dm::simulate_leung_shor_4to2(0.9, 0.01);
    CHECK(noisy.out_fidelity_1 < clean.out_fidelity_1);
    PcsCircuitConfig cfg;
    cfg.variant = PcsVariant::X_and_Z;
    cfg.channel_fidelity = 0.9;
    auto c0 = dm::simulate_pcs(cfg);
    cfg.gate_depolarizing_prob = 0.01;
    auto c1 = dm::simulate_pcs(cfg);
    CHECK(c1.output_fidelity < c0.output_fidelity);
}
