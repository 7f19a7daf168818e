#include "qnet/pcs.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace qnet::dm {

namespace {

// Depolarizing strength for one per-link transmission. channel_fidelity is the
// end-to-end no-check fidelity through the repeater; the two links compose
// multiplicatively in the Werner contraction w = (4F-1)/3, so each link (and
// every qubit it carries) gets contraction sqrt(w).
double link_channel_strength(double channel_fidelity) {
    const double w = (4.0 * channel_fidelity - 1.0) / 3.0;
    return 1.0 - std::sqrt(w);
}

struct LinkCircuit {
    // Qubit order: keep, comp, x, [z], [r1], [r2].
    int n = 3;
    int keep = 0, comp = 1, x = 2;
    int z = -1, r1 = -1, r2 = -1;
};

LinkCircuit link_layout(const PcsCircuitConfig& cfg) {
    LinkCircuit lc;
    int next = 3;
    if (cfg.variant == PcsVariant::X_and_Z) lc.z = next++;
    if (cfg.recursion_level >= 1) lc.r1 = next++;
    if (cfg.recursion_level >= 2) lc.r2 = next++;
    lc.n = next;
    return lc;
}

void two_qubit(DensityMatrix& rho, const Matrix& g, int a, int b, double gate_p) {
    const std::array<int, 2> q = {a, b};
    rho.apply_unitary(g, q);
    if (gate_p > 0) rho.depolarize2(a, b, gate_p);
}

void hadamard(DensityMatrix& rho, int q) {
    const std::array<int, 1> t = {q};
    rho.apply_unitary(gates::h(), t);
}

// One link of the distributed scheme: returns the unnormalized (keep, comp)
// state; its trace is the probability that every check ancilla heralds +.
DensityMatrix simulate_link(const PcsCircuitConfig& cfg) {
    const LinkCircuit lc = link_layout(cfg);
    const double gp = cfg.gate_depolarizing_prob;
    const double p_ch = link_channel_strength(cfg.channel_fidelity);

    DensityMatrix rho(lc.n);
    // Bell pair on (keep, comp).
    hadamard(rho, lc.keep);
    two_qubit(rho, gates::cx(), lc.keep, lc.comp, gp);
    // Left-end checks (GHZ-like preparation).
    hadamard(rho, lc.x);
    two_qubit(rho, gates::cx(), lc.x, lc.comp, gp);
    if (lc.z >= 0) {
        hadamard(rho, lc.z);
        two_qubit(rho, gates::cz(), lc.z, lc.comp, gp);
    }
    if (lc.r1 >= 0) {
        hadamard(rho, lc.r1);
        two_qubit(rho, gates::cz(), lc.r1, lc.x, gp);
    }
    if (lc.r2 >= 0) {
        hadamard(rho, lc.r2);
        two_qubit(rho, gates::cz(), lc.r2, lc.r1, gp);
    }
    // Transmission: comp and every check ancilla ride the fiber.
    for (int q = 1; q < lc.n; ++q) rho.depolarize(q, p_ch);
    // Right end at the repeater, nested mirror of the primaries; the red
    // checks go last so they also cover the primary right-end gates.
    if (lc.z >= 0) two_qubit(rho, gates::cz(), lc.z, lc.comp, gp);
    two_qubit(rho, gates::cx(), lc.x, lc.comp, gp);
    if (lc.r1 >= 0) two_qubit(rho, gates::cz(), lc.r1, lc.x, gp);
    if (lc.r2 >= 0) two_qubit(rho, gates::cz(), lc.r2, lc.r1, gp);
    // Measure every ancilla in the X basis, postselect +, drop the qubit.
    DensityMatrix out = rho;
    for (int q = lc.n - 1; q >= 2; --q) {
        hadamard(out, q);
        out.project(q, 0);
        out = out.traced_out(q);
    }
    return out;
}

// Heralding BSM on (qa, qb) with the correction Z^m1 X^m2 applied to
// correction_target; every outcome branch is kept. Input may be
// sub-normalized; the result keeps the same total weight.
DensityMatrix bsm_and_correct(const DensityMatrix& rho, int qa, int qb,
                              int correction_target, double gate_p) {
    DensityMatrix pre = rho;
    two_qubit(pre, gates::cx(), qa, qb, gate_p);
    hadamard(pre, qa);
    DensityMatrix total(pre.n_qubits());
    Matrix zero = Matrix::Zero(pre.dim(), pre.dim());
    DensityMatrix acc(pre.n_qubits(), zero);
    for (int m1 = 0; m1 < 2; ++m1) {
        for (int m2 = 0; m2 < 2; ++m2) {
            DensityMatrix branch = pre;
            branch.project(qa, m1);
            branch.project(qb, m2);
            if (branch.trace_weight() <= 0) continue;
            Matrix corr = Matrix::Identity(2, 2);
            if (m2) corr = gates::x() * corr;
            if (m1) corr = gates::z() * corr;
            const std::array<int, 1> t = {correction_target};
            branch.apply_unitary(corr, t);
            acc = DensityMatrix(pre.n_qubits(), acc.entries() + branch.entries());
        }
    }
    // Drop the measured qubits, higher index first.
    DensityMatrix out = acc.traced_out(std::max(qa, qb));
    out = out.traced_out(std::min(qa, qb));
    return out;
}

}  // namespace

bool check_symmetry(const PauliCheckSpec& spec, const Matrix& u, double tol) {
    if (spec.left_check.size() != spec.right_check.size()) {
        throw std::invalid_argument("check_symmetry: check lengths differ");
    }
    const int n = static_cast<int>(spec.left_check.size());
    if (u.rows() != (1 << n) || u.cols() != (1 << n)) {
        throw std::invalid_argument("check_symmetry: unitary shape mismatch");
    }
    auto string_op = [n](const std::string& s) {
        Matrix op = Matrix::Identity(1, 1);
        for (int q = 0; q < n; ++q) {
            const Matrix* g = nullptr;
            switch (s[q]) {
                case 'I': break;
                case 'X': g = &gates::x(); break;
                case 'Y': g = &gates::y(); break;
                case 'Z': g = &gates::z(); break;
                default: throw std::invalid_argument("check_symmetry: bad Pauli character");
            }
            const Matrix factor = g ? *g : Matrix::Identity(2, 2);
            Matrix next(op.rows() * 2, op.cols() * 2);
            for (int r = 0; r < op.rows(); ++r)
                for (int c = 0; c < op.cols(); ++c)
                    next.block(r * 2, c * 2, 2, 2) = op(r, c) * factor;
            op = std::move(next);
        }
        return op;
    };
    const Matrix lhs = string_op(spec.left_check) * u * string_op(spec.right_check);
    return (lhs - u).cwiseAbs().maxCoeff() <= tol;
}

int pcs_total_qubits(const PcsCircuitConfig& cfg) {
    const int per_link_anc = (cfg.variant == PcsVariant::X_and_Z ? 2 : 1) + cfg.recursion_level;
    return 2 * (2 + per_link_anc);
}

entmath::PcsPrediction simulate_pcs(const PcsCircuitConfig& cfg) {
    if (cfg.recursion_level < 0 || cfg.recursion_level > 2) {
        throw std::invalid_argument("simulate_pcs: recursion level outside 0..2");
    }
    if (!(cfg.gate_depolarizing_prob >= 0 && cfg.gate_depolarizing_prob <= 1)) {
        throw std::domain_error("simulate_pcs: gate noise outside [0, 1]");
    }
    entmath::require_werner_fidelity(cfg.channel_fidelity, "simulate_pcs");
    if (pcs_total_qubits(cfg) > kMaxQubits) {
        throw std::invalid_argument("simulate_pcs: qubit budget exceeded");
    }

    // The two links share no gate before the heralding BSM, so each is
    // evolved (and its ancillas postselected) independently and the joint
    // state is their exact tensor product.
    DensityMatrix link_a = simulate_link(cfg);
    DensityMatrix link_b = simulate_link(cfg);
    DensityMatrix joint = DensityMatrix::tensor(link_a, link_b);
    // Layout: keep_a=0, comp_a=1, keep_b=2, comp_b=3.
    DensityMatrix final_pair =
        bsm_and_correct(joint, 1, 3, 2, cfg.gate_depolarizing_prob);
    const double c = final_pair.trace_weight();
    const double fid = final_pair.fidelity_phi_plus(0, 1);
    return {c, fid};
}

double simulate_swap(double f1, double f2) {
    entmath::require_werner_fidelity(f1, "simulate_swap");
    entmath::require_werner_fidelity(f2, "simulate_swap");
    DensityMatrix joint = DensityMatrix::tensor(DensityMatrix::make_werner(f1),
                                                DensityMatrix::make_werner(f2));
    // (keep_a=0, mid_a=1, keep_b=2, mid_b=3); BSM on the two mids.
    DensityMatrix pair = bsm_and_correct(joint, 1, 3, 2, 0.0);
    return pair.fidelity_phi_plus(0, 1);
}

entmath::DistillResult simulate_bbpssw(double f1, double f2) {
    entmath::require_werner_fidelity(f1, "simulate_bbpssw");
    entmath::require_werner_fidelity(f2, "simulate_bbpssw");
    // (a1=0, b1=1) source pair, (a2=2, b2=3) target pair.
    DensityMatrix rho = DensityMatrix::tensor(DensityMatrix::make_werner(f1),
                                              DensityMatrix::make_werner(f2));
    two_qubit(rho, gates::cx(), 0, 2, 0.0);
    two_qubit(rho, gates::cx(), 1, 3, 0.0);
    // Keep branches with equal target outcomes on both sides.
    Matrix zero = Matrix::Zero(rho.dim(), rho.dim());
    DensityMatrix acc(rho.n_qubits(), zero);
    double succ = 0;
    for (int m = 0; m < 2; ++m) {
        DensityMatrix branch = rho;
        branch.project(2, m);
        branch.project(3, m);
        succ += branch.trace_weight();
        acc = DensityMatrix(rho.n_qubits(), acc.entries() + branch.entries());
    }
    DensityMatrix out = acc.traced_out(3).traced_out(2);
    const double fid = out.fidelity_phi_plus(0, 1);
    return {succ, fid};
}

LeungShorResult simulate_leung_shor_4to2(double f, double gate_noise) {
    entmath::require_werner_fidelity(f, "simulate_leung_shor_4to2");
    if (!(gate_noise >= 0 && gate_noise <= 1)) {
        throw std::domain_error("simulate_leung_shor_4to2: gate noise outside [0, 1]");
    }
    // Pairs i = 0..3 on qubits (2i, 2i+1); ancilla = 8. 9 qubits total.
    DensityMatrix rho = DensityMatrix::make_werner(f);
    for (int i = 1; i < 4; ++i) {
        rho = DensityMatrix::tensor(rho, DensityMatrix::make_werner(f));
    }
    rho = DensityMatrix::tensor(rho, DensityMatrix(1));
    const int anc = 8;

    // Measure S_A (x) S_B via the ancilla and postselect on +1 (trivial
    // relative syndrome). The ancilla ends in |0>, so it is reused as-is.
    auto measure_correlation = [&rho, anc, gate_noise](const Matrix& p) {
        hadamard(rho, anc);
        for (int q = 0; q < 8; ++q) {
            two_qubit(rho, gates::controlled(p), anc, q, gate_noise);
        }
        hadamard(rho, anc);
        rho.project(anc, 0);
    };
    measure_correlation(gates::x());
    measure_correlation(gates::z());

    const double succ = rho.trace_weight();
    if (succ <= 0) {
        throw std::runtime_error("simulate_leung_shor_4to2: postselection weight vanished");
    }

    // Output fidelity of logical pair j as the expectation of the pulled-back
    // Bell projector (I + Xb(x)Xb + Zb(x)Zb - Yb(x)Yb)/4. Logicals over code
    // qubits (= pairs): Xb1 = XIXI, Zb1 = ZZII; Xb2 = XXII, Zb2 = ZIZI. Each
    // logical pair overlaps its X and Z supports on exactly one code qubit,
    // where Yb = i Xb Zb = i(-i) Y... = +Y, so the Yb string is the plain
    // Pauli string with Y on the overlap and the term enters with sign -1.
    auto place = [](std::string& s, const std::array<int, 2>& pairs, char p) {
        for (int pr : pairs) {
            for (int side = 0; side < 2; ++side) {
                char& slot = s[2 * pr + side];
                slot = (slot == 'I') ? p : 'Y';
            }
        }
    };
    auto logical_fidelity = [&](const std::array<int, 2>& x_pairs,
                                const std::array<int, 2>& z_pairs) {
        std::string sx(9, 'I'), sz(9, 'I'), sy(9, 'I');
        place(sx, x_pairs, 'X');
        place(sz, z_pairs, 'Z');
        place(sy, x_pairs, 'X');
        place(sy, z_pairs, 'Z');
        return 0.25 * (1.0 + rho.pauli_expectation(sx) + rho.pauli_expectation(sz) -
                       rho.pauli_expectation(sy));
    };

    const double f1 = logical_fidelity({0, 2}, {0, 1});
    const double f2 = logical_fidelity({0, 1}, {0, 2});
    return {succ, f1, f2};
}

}  // namespace qnet::dm
