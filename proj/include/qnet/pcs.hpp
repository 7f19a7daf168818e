#pragma once

#include "qnet/dm.hpp"
#include "qnet/entmath.hpp"

#include <string>
#include <utility>

// Exact circuit-level counterparts of the analytic link operations: the
// distributed Pauli-check-sandwiching scheme (with recursive ancilla checks),
// entanglement swapping, 2-to-1 distillation, and the [[4,2,2]] code-based
// 4-to-2 distillation. These are the ground truth the closed forms in
// qnet::entmath are validated against.

namespace qnet::dm {

enum class PcsVariant { X_only, X_and_Z };

struct PcsCircuitConfig {
    PcsVariant variant = PcsVariant::X_only;
    int recursion_level = 0;              // 0..2 (red Z-check layers)
    double gate_depolarizing_prob = 0.0;  // two-qubit depolarizing after each 2q gate
    double channel_fidelity = 1.0;        // A-B fidelity without checks, [0.25, 1]
};

// A sandwiching check pair: P_L (receiver side) and P_R (sender side) over the
// data qubits, with the ancilla that carries the controls.
struct PauliCheckSpec {
    std::string left_check;
    std::string right_check;
    int ancilla_index = 0;
};

// True iff P_L * U * P_R == U (elementwise within tol); the PCS symmetry
// contract for a protected unitary on the data qubits.
bool check_symmetry(const PauliCheckSpec& spec, const Matrix& u, double tol = 1e-12);

// Total qubit count of the distributed circuit (two end nodes + repeater).
int pcs_total_qubits(const PcsCircuitConfig& cfg);

// Simulates end-node Bell/GHZ-like preparation, transmission of the comp
// qubit and all check ancillas through per-link depolarizing channels, the
// mirrored right-end checks and heralding BSM at the repeater, and
// postselection of every check ancilla on the + outcome. Returns the exact
// postselection probability and the postselected A-B Bell fidelity.
entmath::PcsPrediction simulate_pcs(const PcsCircuitConfig& cfg);

// Bell-state-measurement swap of Werner(f1) (x) Werner(f2), all four herald
// outcomes kept with Pauli correction.
double simulate_swap(double f1, double f2);

// Bilateral-CNOT 2-to-1 distillation circuit on Werner(f1) (x) Werner(f2),
// keeping equal target-measurement outcomes.
entmath::DistillResult simulate_bbpssw(double f1, double f2);

struct LeungShorResult {
    double success_prob;
    double out_fidelity_1;
    double out_fidelity_2;
};

// [[4,2,2]] 4-to-2 distillation: four Werner(f) pairs, both stabilizer
// correlations (XXXX and ZZZZ on each side) measured via an ancilla and
// postselected on the trivial relative syndrome; returns the success
// probability and the fidelities of the two decoded logical pairs.
LeungShorResult simulate_leung_shor_4to2(double f, double gate_noise);

}  // namespace qnet::dm
