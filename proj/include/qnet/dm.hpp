#pragma once

#include <Eigen/Dense>

#include <complex>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

// Exact multi-qubit density-matrix simulator (<= 12 qubits) with depolarizing
// and dephasing noise and postselection bookkeeping. Qubit 0 is the most
// significant bit of the basis index. Matrices are allowed to be
// sub-normalized: the running trace is the retained postselection weight.

namespace qnet::dm {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;

inline constexpr int kMaxQubits = 12;

// Thrown by postselect() when the requested branch has probability ~0.
struct ImpossibleOutcome : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace gates {
Matrix identity(int n_qubits);
const Matrix& x();
const Matrix& y();
const Matrix& z();
const Matrix& h();
const Matrix& cx();                    // control = first listed qubit
const Matrix& cz();
Matrix controlled(const Matrix& p);    // 4x4 controlled-P for 2x2 P
}  // namespace gates

class DensityMatrix {
  public:
    explicit DensityMatrix(int n_qubits);                 // |0...0>
    DensityMatrix(int n_qubits, Matrix entries);          // validated shape

    // F |Phi+><Phi+| + (1-F)/3 * (other Bell projectors), two qubits.
    static DensityMatrix make_werner(double f);

    static DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b);

    int n_qubits() const { return n_; }
    int dim() const { return static_cast<int>(m_.rows()); }
    const Matrix& entries() const { return m_; }
    double trace_weight() const;

    // rho -> U rho U^dagger on the listed qubits (<= 3). Rejects non-unitary
    // input and out-of-range/duplicate indices.
    void apply_unitary(const Matrix& u, std::span<const int> qubits);

    void depolarize(int q, double strength);              // (1-p) rho + p I/2 (x) tr_q
    void depolarize2(int qa, int qb, double strength);    // two-qubit analogue
    void dephase(int q, double strength);                 // phase flip with prob p

    // Project qubit q onto |outcome> without renormalizing; returns the branch
    // probability relative to the current trace.
    double project(int q, int outcome);

    void renormalize();
    DensityMatrix traced_out(int q) const;
    DensityMatrix reduced(std::span<const int> keep) const;

    // <Phi+| rho_{qa,qb} |Phi+> of the normalized reduced pair state.
    double fidelity_phi_plus(int qa, int qb) const;

    // Expectation of a Pauli string ("IXYZ", length n) on the normalized state.
    double pauli_expectation(const std::string& paulis) const;

    bool is_hermitian(double tol = 1e-9) const;
    double min_eigenvalue() const;

    void dump_text(std::ostream& os) const;               // row-major re/im pairs
    static DensityMatrix load_text(std::istream& is);

  private:
    void check_qubit(int q) const;
    int bit_pos(int q) const { return n_ - 1 - q; }

    int n_;
    Matrix m_;
};

struct NoiseChannel {
    enum class Kind { depolarizing, dephasing };
    Kind kind = Kind::depolarizing;
    double strength = 0.0;
    std::vector<int> targets;
};

// Single-qubit Kraus set realizing the channel (for inspection/tests).
std::vector<Matrix> kraus_operators(const NoiseChannel& ch);

// Apply an explicit Kraus set to one qubit; rejects sets that do not satisfy
// sum K^dag K = I within 1e-12.
DensityMatrix apply_kraus(DensityMatrix rho, const std::vector<Matrix>& ops, int target);

// Functional forms of the simulator operations.
DensityMatrix apply_gate(DensityMatrix rho, const Matrix& u, std::span<const int> qubits);
DensityMatrix apply_noise(DensityMatrix rho, const NoiseChannel& ch);
std::pair<DensityMatrix, double> postselect(const DensityMatrix& rho, int qubit, int outcome);
double fidelity_to_phi_plus(const DensityMatrix& rho, int qa, int qb);

}  // namespace qnet::dm
