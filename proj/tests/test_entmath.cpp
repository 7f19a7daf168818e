#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qnet/entmath.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

using namespace qnet::entmath;

TEST_CASE("pcs x predictions") {
    auto p1 = pcs_x_predict(1.0);
    CHECK(p1.postselect_prob == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p1.output_fidelity == doctest::Approx(1.0).epsilon(1e-14));

    auto p025 = pcs_x_predict(0.25);
    CHECK(p025.postselect_prob == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(p025.output_fidelity == doctest::Approx(0.25).epsilon(1e-14));

    auto p05 = pcs_x_predict(0.5);
    CHECK(p05.postselect_prob == doctest::Approx(4.0 / 9.0).epsilon(1e-14));
    CHECK(p05.output_fidelity == doctest::Approx(0.5625).epsilon(1e-14));

    CHECK_THROWS_AS(pcs_x_predict(0.2), std::domain_error);
    CHECK_THROWS_AS(pcs_x_predict(1.01), std::domain_error);
}

TEST_CASE("pcs xz predictions") {
    auto p1 = pcs_xz_predict(1.0);
    CHECK(std::abs(p1.postselect_prob - 1.0) < 1e-12);
    CHECK(std::abs(p1.output_fidelity - 1.0) < 1e-12);

    auto p025 = pcs_xz_predict(0.25);
    CHECK(std::abs(p025.postselect_prob - 0.0625) < 1e-12);
    CHECK(std::abs(p025.output_fidelity - 0.25) < 1e-12);

    // Frozen from the exact circuit oracle.
    auto p05 = pcs_xz_predict(0.5);
    CHECK(p05.postselect_prob == doctest::Approx(0.18452040028032882).epsilon(1e-12));
    CHECK(p05.output_fidelity == doctest::Approx(0.61200461886989799).epsilon(1e-12));

    CHECK_THROWS_AS(pcs_xz_predict(0.249), std::domain_error);
}

TEST_CASE("pcs gain and monotonicity over the fidelity grid") {
    double prev_x = 0.0, prev_xz = 0.0;
    bool fail = false;
    for (double f = 0.25; f <= 1.0 + 1e-12; f += 1e-3) {
        const double fc = std::min(f, 1.0);
        auto px = pcs_x_predict(fc);
        auto pxz = pcs_xz_predict(fc);
        fail = fail || !(px.postselect_prob >= 0.0 && px.postselect_prob <= 1.0);
        fail = fail || !(pxz.postselect_prob >= 0.0 && pxz.postselect_prob <= 1.0);
        fail = fail || !(pxz.output_fidelity >= 0.25 - 1e-12 &&
                         pxz.output_fidelity <= 1.0 + 1e-12);
        // The X check gains everywhere: F' - F = F(1-F)(4F-1)/(1+2F)^2 >= 0.
        fail = fail || !(px.output_fidelity >= fc - 1e-12);
        // The X&Z form only gains above the crossover near F = 0.317 (the
        // transmitted check ancillas add noise of their own); below it the
        // closed form genuinely dips under F.
        if (fc >= 0.32) fail = fail || !(pxz.output_fidelity >= fc - 1e-12);
        fail = fail || !(px.output_fidelity >= prev_x - 1e-12);
        fail = fail || !(pxz.output_fidelity >= prev_xz - 1e-12);
        prev_x = px.output_fidelity;
        prev_xz = pxz.output_fidelity;
    }
    CHECK_FALSE(fail);

    // Freeze the dip so the formula is protected against "helpful" rewrites.
    CHECK(pcs_xz_predict(0.30).output_fidelity ==
          doctest::Approx(0.29605708976570183).epsilon(1e-12));
    CHECK(pcs_xz_predict(0.30).output_fidelity < 0.30);
    CHECK(pcs_xz_predict(0.35).output_fidelity > 0.35);
}

TEST_CASE("swap fidelity") {
    CHECK(swap_fidelity(1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(swap_fidelity(1.0, 0.7) == doctest::Approx(0.7).epsilon(1e-14));
    CHECK(swap_fidelity(0.7, 1.0) == doctest::Approx(0.7).epsilon(1e-14));
    CHECK(swap_fidelity(0.9, 0.9) ==
          doctest::Approx(0.81 + 0.01 / 3.0).epsilon(1e-14));
    // Commutative.
    CHECK(swap_fidelity(0.8, 0.6) == doctest::Approx(swap_fidelity(0.6, 0.8)));
    CHECK_THROWS_AS(swap_fidelity(0.2, 0.9), std::domain_error);
}

TEST_CASE("bbpssw recurrence") {
    auto perfect = distill_bbpssw(1.0, 1.0);
    CHECK(perfect.success_prob == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(perfect.output_fidelity == doctest::Approx(1.0).epsilon(1e-14));

    auto mixed = distill_bbpssw(0.25, 0.25);
    CHECK(mixed.output_fidelity == doctest::Approx(0.25).epsilon(1e-14));

    auto p8 = distill_bbpssw(0.8, 0.8);
    CHECK(p8.success_prob == doctest::Approx(173.0 / 225.0).epsilon(1e-14));
    CHECK(p8.output_fidelity == doctest::Approx(145.0 / 173.0).epsilon(1e-14));

    // Gain whenever both inputs are equal and above 1/2.
    for (double f = 0.51; f < 1.0; f += 0.02) {
        CHECK(distill_bbpssw(f, f).output_fidelity > f);
    }
}

TEST_CASE("memory decoherence") {
    CHECK(werner_decohere(0.9, 0, 1000) == doctest::Approx(0.9).epsilon(1e-14));
    CHECK(werner_decohere(0.25, 123456, 1000) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(werner_decohere(1.0, 1000, 1000) ==
          doctest::Approx(0.25 + 0.75 * std::exp(-1.0)).epsilon(1e-14));
    // Nonincreasing in elapsed time.
    double prev = 1.0;
    for (std::int64_t t = 0; t < 10'000; t += 500) {
        const double f = werner_decohere(0.95, t, 3000);
        CHECK(f <= prev + 1e-15);
        prev = f;
    }
    CHECK_THROWS_AS(werner_decohere(0.9, 10, 0), std::domain_error);
    CHECK_THROWS_AS(werner_decohere(0.9, -1, 10), std::domain_error);
}

TEST_CASE("car model examples") {
    CarParams p;
    p.alpha_s = p.alpha_i = 1.0;
    p.mu_c = 0.01;
    CHECK(car_model(p) == doctest::Approx(101.0).epsilon(1e-14));

    CarParams dark;
    dark.mu_c = 0.0;
    dark.d_s = dark.d_i = 1e-4;
    CHECK(car_model(dark) == doctest::Approx(1.0).epsilon(1e-14));

    CarParams degenerate;  // no pairs, no dark counts
    CHECK_THROWS_AS(car_model(degenerate), std::domain_error);
}

TEST_CASE("car model is at least 1 on random valid parameters") {
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> ua(0.05, 1.0), um(0.0, 5.0), ud(0.0, 0.1);
    for (int i = 0; i < 10'000; ++i) {
        CarParams p;
        p.alpha_s = ua(gen);
        p.alpha_i = ua(gen);
        p.mu_c = um(gen) + 1e-9;
        p.mu_sn = um(gen);
        p.mu_in = um(gen);
        p.d_s = ud(gen);
        p.d_i = ud(gen);
        CHECK(car_model(p) >= 1.0);
    }
}

TEST_CASE("car model has an interior maximizer with dark counts") {
    CarParams p;
    p.alpha_s = p.alpha_i = 0.5;
    p.d_s = p.d_i = 1e-5;
    // Coarse unimodality probe on a log grid.
    double best = 0, best_mu = 0;
    double prev = 0;
    int direction_changes = 0;
    for (double mu = 1e-6; mu <= 10.0; mu *= 1.25) {
        p.mu_c = mu;
        const double car = car_model(p);
        if (car > best) {
            best = car;
            best_mu = mu;
        }
        if (prev > 0 && car < prev && best_mu < mu / 1.26) {
            // falling after the peak is fine; rising again would not be
            if (car > prev) ++direction_changes;
        }
        prev = car;
    }
    CHECK(best_mu > 1e-6 * 1.3);   // interior, not the lower end
    CHECK(best_mu < 10.0 / 1.3);   // not the upper end
    CHECK(direction_changes == 0);
}

TEST_CASE("optimal pump") {
    SUBCASE("noise-free objective is monotone decreasing: maximizer at lo") {
        CarParams p;  // CAR = 1 + 1/mu
        auto r = optimal_pump(p, 1e-4, 1.0);
        CHECK(r.mu_c_star == doctest::Approx(1e-4).epsilon(1e-6));
        CHECK(r.car_star == doctest::Approx(1.0 + 1.0 / 1e-4).epsilon(1e-6));
    }
    SUBCASE("dark-count case matches dense grid search") {
        CarParams p;
        p.alpha_s = p.alpha_i = 0.5;
        p.d_s = p.d_i = 1e-5;
        auto r = optimal_pump(p, 1e-6, 10.0);
        // 1e6-point oracle over the same interval (log spacing).
        double best_car = 0, best_mu = 0;
        const double lo = 1e-6, hi = 10.0;
        for (int i = 0; i < 1'000'000; ++i) {
            const double mu = lo * std::pow(hi / lo, i / 999'999.0);
            p.mu_c = mu;
            const double car = car_model(p);
            if (car > best_car) {
                best_car = car;
                best_mu = mu;
            }
        }
        CHECK(std::abs(r.mu_c_star - best_mu) / best_mu < 1e-4);
        CHECK(r.car_star >= best_car - 1e-9);
    }
    SUBCASE("bounds clipped below the maximizer return hi") {
        CarParams p;
        p.alpha_s = p.alpha_i = 0.5;
        p.d_s = p.d_i = 1e-5;
        auto r = optimal_pump(p, 1e-7, 1e-5);  // optimum (2e-5) above hi
        CHECK(r.mu_c_star == doctest::Approx(1e-5).epsilon(1e-9));
    }
    CHECK_THROWS_AS(optimal_pump(CarParams{}, 0.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(optimal_pump(CarParams{}, 1.0, 0.5), std::domain_error);
}

TEST_CASE("visibility") {
    CHECK(visibility(100, 100) == doctest::Approx(0.0));
    CHECK(visibility(100, 0) == doctest::Approx(1.0));
    CHECK(visibility(84, 16) == doctest::Approx(0.68).epsilon(1e-14));
    CHECK_THROWS_AS(visibility(0, 0), std::domain_error);
    CHECK_THROWS_AS(visibility(10, 20), std::domain_error);
}

TEST_CASE("coexistence fidelity") {
    CHECK(coexistence_fidelity(0.9, 1e12) == doctest::Approx(0.9).epsilon(1e-9));
    CHECK(coexistence_fidelity(0.9, 1.0) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(coexistence_fidelity(0.95, 101.0) ==
          doctest::Approx(95.25 / 101.0).epsilon(1e-14));
    CHECK_THROWS_AS(coexistence_fidelity(0.9, 0.99), std::domain_error);

    // Monotone in both arguments, bounded in [0.25, 1].
    double prev = 0.0;
    for (double car = 1.0; car < 50.0; car += 0.5) {
        const double f = coexistence_fidelity(0.9, car);
        CHECK(f >= prev - 1e-15);
        CHECK(f >= 0.25);
        CHECK(f <= 1.0);
        prev = f;
    }
    prev = 0.0;
    for (double fs = 0.25; fs <= 1.0; fs += 0.05) {
        const double f = coexistence_fidelity(std::min(fs, 1.0), 7.0);
        CHECK(f >= prev - 1e-15);
        prev = f;
    }
}
