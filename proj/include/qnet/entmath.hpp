#pragma once

#include <cstdint>

// Closed-form algebra for Werner-state entanglement links: Pauli-check
// sandwiching predictions, swapping/distillation recurrences, memory
// decoherence, and the classical-coexistence (CAR) model. All functions are
// pure and stateless; invalid inputs throw std::domain_error.

namespace qnet::entmath {

// Fidelity of the maximally mixed two-qubit state; the Werner floor.
inline constexpr double kMixedFidelity = 0.25;

struct PcsPrediction {
    double postselect_prob;   // c, in [0,1]
    double output_fidelity;   // F', in [0,1]
};

struct DistillResult {
    double success_prob;
    double output_fidelity;
};

// Seven parameters of the coincidences-to-accidentals model.
struct CarParams {
    double alpha_s = 1.0;   // signal-arm transmittance, (0,1]
    double alpha_i = 1.0;   // idler-arm transmittance, (0,1]
    double mu_c    = 0.0;   // mean correlated pairs per pulse, >= 0
    double mu_sn   = 0.0;   // mean signal-arm noise photons per pulse, >= 0
    double mu_in   = 0.0;   // mean idler-arm noise photons per pulse, >= 0
    double d_s     = 0.0;   // mean signal dark counts per coincidence window, >= 0
    double d_i     = 0.0;   // mean idler dark counts per coincidence window, >= 0
};

struct PumpOptimum {
    double mu_c_star;
    double car_star;
    bool flat;   // objective improves over the endpoints by < 1e-12
};

// Throw std::domain_error unless 0.25 <= f <= 1 (Werner regime).
void require_werner_fidelity(double f, const char* what);

// PCS X checks: c = (1+2F)^2/9, F' = 9F^2/(1+2F)^2.
PcsPrediction pcs_x_predict(double f);

// PCS X&Z checks: c and F' with radicand sqrt(12F-3).
PcsPrediction pcs_xz_predict(double f);

// Ideal Bell-state-measurement swap of two Werner pairs:
// F' = F1*F2 + (1-F1)(1-F2)/3. Commutative.
double swap_fidelity(double f1, double f2);

// One round of 2-to-1 Werner distillation (bilateral CNOT, keep on equal
// target outcomes). Returns success probability and postselected fidelity.
DistillResult distill_bbpssw(double f1, double f2);

// Exponential decay toward the maximally mixed fidelity:
// F(t) = 0.25 + (F0 - 0.25) * exp(-elapsed / t_coh).
double werner_decohere(double f0, std::int64_t elapsed_ns, std::int64_t t_coh_ns);

// CAR = a_s*a_i*mu_c / (((mu_c+mu_sn)*a_s + d_s) * ((mu_c+mu_in)*a_i + d_i)) + 1.
double car_model(const CarParams& p);

// Bounded scalar maximization of car_model over mu_c in [lo, hi] to relative
// tolerance 1e-6 (golden-section). fixed.mu_c is ignored.
PumpOptimum optimal_pump(const CarParams& fixed, double lo, double hi);

// Fringe visibility V = (n_max - n_min) / (n_max + n_min).
double visibility(double n_max, double n_min);

// Accidental coincidences as a maximally-mixed admixture of weight 1/CAR:
// F_eff = ((car-1)/car) * source_fidelity + 0.25/car.
double coexistence_fidelity(double source_fidelity, double car);

}  // namespace qnet::entmath
