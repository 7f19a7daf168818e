#include "qnet/dm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>

namespace qnet::dm {

namespace gates {

Matrix identity(int n_qubits) {
    const int d = 1 << n_qubits;
    return Matrix::Identity(d, d);
}

const Matrix& x() {
    static const Matrix g = [] {
        Matrix m(2, 2);
        m << 0, 1, 1, 0;
        return m;
    }();
    return g;
}

const Matrix& y() {
    static const Matrix g = [] {
        Matrix m(2, 2);
        m << Complex(0, 0), Complex(0, -1), Complex(0, 1), Complex(0, 0);
        return m;
    }();
    return g;
}

const Matrix& z() {
    static const Matrix g = [] {
        Matrix m(2, 2);
        m << 1, 0, 0, -1;
        return m;
    }();
    return g;
}

const Matrix& h() {
    static const Matrix g = [] {
        Matrix m(2, 2);
        const double s = 1.0 / std::sqrt(2.0);
        m << s, s, s, -s;
        return m;
    }();
    return g;
}

Matrix controlled(const Matrix& p) {
    Matrix m = Matrix::Identity(4, 4);
    m.block<2, 2>(2, 2) = p;
    return m;
}

const Matrix& cx() {
    static const Matrix g = controlled(x());
    return g;
}

const Matrix& cz() {
    static const Matrix g = controlled(z());
    return g;
}

}  // namespace gates

DensityMatrix::DensityMatrix(int n_qubits) : n_(n_qubits) {
    if (n_ < 1 || n_ > kMaxQubits) {
        throw std::invalid_argument("DensityMatrix: qubit count outside 1..12");
    }
    const int d = 1 << n_;
    m_ = Matrix::Zero(d, d);
    m_(0, 0) = 1.0;
}

DensityMatrix::DensityMatrix(int n_qubits, Matrix entries) : n_(n_qubits), m_(std::move(entries)) {
    if (n_ < 1 || n_ > kMaxQubits) {
        throw std::invalid_argument("DensityMatrix: qubit count outside 1..12");
    }
    const int d = 1 << n_;
    if (m_.rows() != d || m_.cols() != d) {
        throw std::invalid_argument("DensityMatrix: entry shape does not match qubit count");
    }
}

DensityMatrix DensityMatrix::make_werner(double f) {
    if (!(f >= 0.0 && f <= 1.0)) {
        throw std::domain_error("make_werner: fidelity outside [0, 1]");
    }
    Matrix m = Matrix::Zero(4, 4);
    const double s = 1.0 / std::sqrt(2.0);
    Eigen::Vector4cd phip, phim, psip, psim;
    phip << s, 0, 0, s;
    phim << s, 0, 0, -s;
    psip << 0, s, s, 0;
    psim << 0, s, -s, 0;
    m = f * (phip * phip.adjoint());
    const double e = (1.0 - f) / 3.0;
    m += e * (phim * phim.adjoint() + psip * psip.adjoint() + psim * psim.adjoint());
    return DensityMatrix(2, std::move(m));
}

DensityMatrix DensityMatrix::tensor(const DensityMatrix& a, const DensityMatrix& b) {
    const int n = a.n_ + b.n_;
    if (n > kMaxQubits) {
        throw std::invalid_argument("tensor: qubit budget exceeded");
    }
    const int da = a.dim(), db = b.dim();
    Matrix m(da * db, da * db);
    for (int ra = 0; ra < da; ++ra)
        for (int ca = 0; ca < da; ++ca)
            m.block(ra * db, ca * db, db, db) = a.m_(ra, ca) * b.m_;
    return DensityMatrix(n, std::move(m));
}

double DensityMatrix::trace_weight() const { return m_.trace().real(); }

void DensityMatrix::check_qubit(int q) const {
    if (q < 0 || q >= n_) {
        throw std::out_of_range("DensityMatrix: qubit index out of range");
    }
}

void DensityMatrix::apply_unitary(const Matrix& u, std::span<const int> qubits) {
    const int k = static_cast<int>(qubits.size());
    if (k < 1 || k > 3) {
        throw std::invalid_argument("apply_unitary: gates act on 1..3 qubits");
    }
    const int gd = 1 << k;
    if (u.rows() != gd || u.cols() != gd) {
        throw std::invalid_argument("apply_unitary: gate shape mismatch");
    }
    if ((u.adjoint() * u - Matrix::Identity(gd, gd)).cwiseAbs().maxCoeff() > 1e-12) {
        throw std::invalid_argument("apply_unitary: non-unitary gate");
    }
    std::set<int> uniq(qubits.begin(), qubits.end());
    if (static_cast<int>(uniq.size()) != k) {
        throw std::invalid_argument("apply_unitary: duplicate target qubit");
    }
    for (int q : qubits) check_qubit(q);

    const int d = dim();
    std::array<int, 8> off{};
    for (int j = 0; j < gd; ++j) {
        int o = 0;
        for (int b = 0; b < k; ++b) {
            if ((j >> (k - 1 - b)) & 1) o |= 1 << bit_pos(qubits[b]);
        }
        off[j] = o;
    }
    const int mask = off[gd - 1];

    std::array<Complex, 8> v{}, w{};
    // rho <- U rho
    for (int base = 0; base < d; ++base) {
        if (base & mask) continue;
        for (int c = 0; c < d; ++c) {
            for (int j = 0; j < gd; ++j) v[j] = m_(base | off[j], c);
            for (int i = 0; i < gd; ++i) {
                Complex acc = 0;
                for (int j = 0; j < gd; ++j) acc += u(i, j) * v[j];
                w[i] = acc;
            }
            for (int i = 0; i < gd; ++i) m_(base | off[i], c) = w[i];
        }
    }
    // rho <- rho U^dagger
    for (int base = 0; base < d; ++base) {
        if (base & mask) continue;
        for (int r = 0; r < d; ++r) {
            for (int j = 0; j < gd; ++j) v[j] = m_(r, base | off[j]);
            for (int i = 0; i < gd; ++i) {
                Complex acc = 0;
                for (int j = 0; j < gd; ++j) acc += v[j] * std::conj(u(i, j));
                w[i] = acc;
            }
            for (int i = 0; i < gd; ++i) m_(r, base | off[i]) = w[i];
        }
    }
}

void DensityMatrix::depolarize(int q, double strength) {
    check_qubit(q);
    if (!(strength >= 0.0 && strength <= 1.0)) {
        throw std::domain_error("depolarize: strength outside [0, 1]");
    }
    const double p = strength;
    const int d = dim();
    const int bit = 1 << bit_pos(q);
    for (int r = 0; r < d; ++r) {
        if (r & bit) continue;
        for (int c = 0; c < d; ++c) {
            if (c & bit) continue;
            const Complex s = m_(r, c) + m_(r | bit, c | bit);
            m_(r, c) = (1 - p) * m_(r, c) + 0.5 * p * s;
            m_(r | bit, c | bit) = (1 - p) * m_(r | bit, c | bit) + 0.5 * p * s;
            m_(r, c | bit) *= (1 - p);
            m_(r | bit, c) *= (1 - p);
        }
    }
}

void DensityMatrix::depolarize2(int qa, int qb, double strength) {
    check_qubit(qa);
    check_qubit(qb);
    if (qa == qb) throw std::invalid_argument("depolarize2: identical qubits");
    if (!(strength >= 0.0 && strength <= 1.0)) {
        throw std::domain_error("depolarize2: strength outside [0, 1]");
    }
    const double p = strength;
    const int d = dim();
    const int ba = 1 << bit_pos(qa), bb = 1 << bit_pos(qb);
    const std::array<int, 4> sub = {0, bb, ba, ba | bb};
    for (int r = 0; r < d; ++r) {
        if (r & (ba | bb)) continue;
        for (int c = 0; c < d; ++c) {
            if (c & (ba | bb)) continue;
            Complex s = 0;
            for (int j = 0; j < 4; ++j) s += m_(r | sub[j], c | sub[j]);
            for (int j = 0; j < 4; ++j) {
                for (int i = 0; i < 4; ++i) {
                    Complex& e = m_(r | sub[i], c | sub[j]);
                    e *= (1 - p);
                    if (i == j) e += 0.25 * p * s;
                }
            }
        }
    }
}

void DensityMatrix::dephase(int q, double strength) {
    check_qubit(q);
    if (!(strength >= 0.0 && strength <= 1.0)) {
        throw std::domain_error("dephase: strength outside [0, 1]");
    }
    const int d = dim();
    const int bit = 1 << bit_pos(q);
    const double damp = 1.0 - 2.0 * strength;
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c)
            if (((r ^ c) & bit) != 0) m_(r, c) *= damp;
}

double DensityMatrix::project(int q, int outcome) {
    check_qubit(q);
    if (outcome != 0 && outcome != 1) {
        throw std::invalid_argument("project: outcome must be 0 or 1");
    }
    const double before = trace_weight();
    const int d = dim();
    const int bit = 1 << bit_pos(q);
    const int want = outcome ? bit : 0;
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c)
            if ((r & bit) != want || (c & bit) != want) m_(r, c) = 0;
    const double after = trace_weight();
    return before > 0 ? after / before : 0.0;
}

void DensityMatrix::renormalize() {
    const double w = trace_weight();
    if (w <= 0) throw std::runtime_error("renormalize: nonpositive trace");
    m_ /= w;
}

DensityMatrix DensityMatrix::traced_out(int q) const {
    check_qubit(q);
    if (n_ == 1) throw std::invalid_argument("traced_out: cannot trace the last qubit");
    const int d2 = dim() / 2;
    const int pos = bit_pos(q);
    auto insert_bit = [pos](int idx, int b) {
        const int lo = idx & ((1 << pos) - 1);
        const int hi = idx >> pos;
        return (hi << (pos + 1)) | (b << pos) | lo;
    };
    Matrix out = Matrix::Zero(d2, d2);
    for (int r = 0; r < d2; ++r)
        for (int c = 0; c < d2; ++c)
            out(r, c) = m_(insert_bit(r, 0), insert_bit(c, 0)) +
                        m_(insert_bit(r, 1), insert_bit(c, 1));
    return DensityMatrix(n_ - 1, std::move(out));
}

DensityMatrix DensityMatrix::reduced(std::span<const int> keep) const {
    std::vector<int> sorted(keep.begin(), keep.end());
    for (int q : sorted) check_qubit(q);
    DensityMatrix out = *this;
    // Trace out everything else, highest index first so positions stay valid.
    std::vector<int> drop;
    for (int q = n_ - 1; q >= 0; --q) {
        if (std::find(sorted.begin(), sorted.end(), q) == sorted.end()) drop.push_back(q);
    }
    for (int q : drop) out = out.traced_out(q);
    return out;
}

double DensityMatrix::fidelity_phi_plus(int qa, int qb) const {
    check_qubit(qa);
    check_qubit(qb);
    if (qa == qb) throw std::invalid_argument("fidelity_phi_plus: identical qubits");
    const std::array<int, 2> keep = {qa, qb};
    DensityMatrix pair = reduced(keep);
    // reduced() preserves index order; if qa > qb the pair is swapped, which
    // leaves |Phi+> overlap unchanged (the state is symmetric).
    const Matrix& r = pair.m_;
    const double w = pair.trace_weight();
    if (w <= 0) throw std::runtime_error("fidelity_phi_plus: zero-weight state");
    const Complex v = 0.5 * (r(0, 0) + r(0, 3) + r(3, 0) + r(3, 3));
    return v.real() / w;
}

double DensityMatrix::pauli_expectation(const std::string& paulis) const {
    if (static_cast<int>(paulis.size()) != n_) {
        throw std::invalid_argument("pauli_expectation: string length mismatch");
    }
    // tr(P rho) via rows pass only: rho <- P rho, then take the trace.
    Matrix work = m_;
    const int d = dim();
    for (int q = 0; q < n_; ++q) {
        const char ch = paulis[q];
        if (ch == 'I') continue;
        if (ch != 'X' && ch != 'Y' && ch != 'Z') {
            throw std::invalid_argument("pauli_expectation: characters must be IXYZ");
        }
        const int bit = 1 << bit_pos(q);
        for (int r = 0; r < d; ++r) {
            if (r & bit) continue;
            for (int c = 0; c < d; ++c) {
                const Complex lo = work(r, c);
                const Complex hi = work(r | bit, c);
                switch (ch) {
                    case 'X':
                        work(r, c) = hi;
                        work(r | bit, c) = lo;
                        break;
                    case 'Y':
                        work(r, c) = Complex(0, -1) * hi;
                        work(r | bit, c) = Complex(0, 1) * lo;
                        break;
                    case 'Z':
                        work(r | bit, c) = -hi;
                        break;
                }
            }
        }
    }
    return work.trace().real() / trace_weight();
}

bool DensityMatrix::is_hermitian(double tol) const {
    return (m_ - m_.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

double DensityMatrix::min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m_ + m_.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

void DensityMatrix::dump_text(std::ostream& os) const {
    os << "qnet-dm v1 " << n_ << "\n";
    os.precision(17);
    const int d = dim();
    for (int r = 0; r < d; ++r) {
        for (int c = 0; c < d; ++c) {
            os << m_(r, c).real() << " " << m_(r, c).imag();
            os << (c + 1 == d ? '\n' : ' ');
        }
    }
}

DensityMatrix DensityMatrix::load_text(std::istream& is) {
    std::string tag, version;
    int n = 0;
    is >> tag >> version;
    if (tag != "qnet-dm") throw std::runtime_error("load_text: bad header");
    if (version == "v1") {
        is >> n;
    } else {
        throw std::runtime_error("load_text: unsupported version " + version);
    }
    const int d = 1 << n;
    Matrix m(d, d);
    for (int r = 0; r < d; ++r) {
        for (int c = 0; c < d; ++c) {
            double re = 0, im = 0;
            if (!(is >> re >> im)) throw std::runtime_error("load_text: truncated data");
            m(r, c) = Complex(re, im);
        }
    }
    return DensityMatrix(n, std::move(m));
}

std::vector<Matrix> kraus_operators(const NoiseChannel& ch) {
    if (!(ch.strength >= 0.0 && ch.strength <= 1.0)) {
        throw std::domain_error("kraus_operators: strength outside [0, 1]");
    }
    const double p = ch.strength;
    std::vector<Matrix> ops;
    if (ch.kind == NoiseChannel::Kind::depolarizing) {
        ops.push_back(std::sqrt(1.0 - 0.75 * p) * Matrix::Identity(2, 2));
        ops.push_back(std::sqrt(0.25 * p) * gates::x());
        ops.push_back(std::sqrt(0.25 * p) * gates::y());
        ops.push_back(std::sqrt(0.25 * p) * gates::z());
    } else {
        ops.push_back(std::sqrt(1.0 - p) * Matrix::Identity(2, 2));
        ops.push_back(std::sqrt(p) * gates::z());
    }
    return ops;
}

DensityMatrix apply_kraus(DensityMatrix rho, const std::vector<Matrix>& ops, int target) {
    Matrix comp = Matrix::Zero(2, 2);
    for (const Matrix& k : ops) {
        if (k.rows() != 2 || k.cols() != 2) {
            throw std::invalid_argument("apply_kraus: single-qubit operators expected");
        }
        comp += k.adjoint() * k;
    }
    if ((comp - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() > 1e-12) {
        throw std::invalid_argument("apply_kraus: incomplete Kraus set");
    }
    const int d = rho.dim();
    const int bit = 1 << (rho.n_qubits() - 1 - target);
    Matrix acc = Matrix::Zero(d, d);
    for (const Matrix& k : ops) {
        // K rho K^dag for a general (possibly non-unitary) single-qubit K.
        Matrix mm = rho.entries();
        for (int r = 0; r < d; ++r) {
            if (r & bit) continue;
            for (int c = 0; c < d; ++c) {
                const Complex lo = mm(r, c), hi = mm(r | bit, c);
                mm(r, c) = k(0, 0) * lo + k(0, 1) * hi;
                mm(r | bit, c) = k(1, 0) * lo + k(1, 1) * hi;
            }
        }
        for (int c = 0; c < d; ++c) {
            if (c & bit) continue;
            for (int r = 0; r < d; ++r) {
                const Complex lo = mm(r, c), hi = mm(r, c | bit);
                mm(r, c) = lo * std::conj(k(0, 0)) + hi * std::conj(k(0, 1));
                mm(r, c | bit) = lo * std::conj(k(1, 0)) + hi * std::conj(k(1, 1));
            }
        }
        acc += mm;
    }
    return DensityMatrix(rho.n_qubits(), std::move(acc));
}

DensityMatrix apply_gate(DensityMatrix rho, const Matrix& u, std::span<const int> qubits) {
    rho.apply_unitary(u, qubits);
    return rho;
}

DensityMatrix apply_noise(DensityMatrix rho, const NoiseChannel& ch) {
    if (ch.targets.empty()) {
        throw std::invalid_argument("apply_noise: no target qubits");
    }
    std::set<int> uniq(ch.targets.begin(), ch.targets.end());
    if (uniq.size() != ch.targets.size()) {
        throw std::invalid_argument("apply_noise: duplicate target qubit");
    }
    for (int q : ch.targets) {
        if (ch.kind == NoiseChannel::Kind::depolarizing) {
            rho.depolarize(q, ch.strength);
        } else {
            rho.dephase(q, ch.strength);
        }
    }
    return rho;
}

std::pair<DensityMatrix, double> postselect(const DensityMatrix& rho, int qubit, int outcome) {
    DensityMatrix out = rho;
    const double p = out.project(qubit, outcome);
    if (p < 1e-15) {
        throw ImpossibleOutcome("postselect: branch has zero probability");
    }
    out.renormalize();
    return {std::move(out), p};
}

double fidelity_to_phi_plus(const DensityMatrix& rho, int qa, int qb) {
    return rho.fidelity_phi_plus(qa, qb);
}

}  // namespace qnet::dm
