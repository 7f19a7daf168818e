#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qnet/dm.hpp"

#include <array>
#include <cmath>
#include <sstream>

using namespace qnet::dm;

namespace {

// Independent dense embedding: U on the listed qubits as a full 2^n matrix
// built by explicit Kronecker products (the check the fast path is tested
// against).
Matrix embed(const Matrix& u, int n, std::vector<int> qubits) {
    const int d = 1 << n;
    Matrix full = Matrix::Zero(d, d);
    const int k = static_cast<int>(qubits.size());
    for (int r = 0; r < d; ++r) {
        for (int c = 0; c < d; ++c) {
            // keep non-target bits equal, map target bits through u
            bool same = true;
            for (int q = 0; q < n; ++q) {
                bool is_target = false;
                for (int t : qubits) is_target |= (t == q);
                if (!is_target) {
                    const int br = (r >> (n - 1 - q)) & 1;
                    const int bc = (c >> (n - 1 - q)) & 1;
                    if (br != bc) same = false;
                }
            }
            if (!same) continue;
            int gr = 0, gc = 0;
            for (int i = 0; i < k; ++i) {
                gr |= ((r >> (n - 1 - qubits[i])) & 1) << (k - 1 - i);
                gc |= ((c >> (n - 1 - qubits[i])) & 1) << (k - 1 - i);
            }
            full(r, c) = u(gr, gc);
        }
    }
    return full;
}

}  // namespace

TEST_CASE("apply_unitary matches a hand-expanded dense product") {
    // |Phi+> (x) |0> then CNOT(1 -> 2); compare against the explicit 8x8 math.
    DensityMatrix rho(3);
    const std::array<int, 1> q0 = {0};
    const std::array<int, 2> q01 = {0, 1};
    rho.apply_unitary(gates::h(), q0);
    rho.apply_unitary(gates::cx(), q01);
    DensityMatrix expect = rho;

    const std::array<int, 2> q12 = {1, 2};
    rho.apply_unitary(gates::cx(), q12);

    const Matrix full = embed(gates::cx(), 3, {1, 2});
    Matrix m = full * expect.entries() * full.adjoint();
    CHECK((m - rho.entries()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(rho.trace_weight() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("identity and X gates behave") {
    DensityMatrix rho(1);
    const std::array<int, 1> q = {0};
    rho.apply_unitary(Matrix::Identity(2, 2), q);
    CHECK(rho.entries()(0, 0).real() == doctest::Approx(1.0));
    rho.apply_unitary(gates::x(), q);
    CHECK(rho.entries()(1, 1).real() == doctest::Approx(1.0));
    CHECK(rho.entries()(0, 0).real() == doctest::Approx(0.0));
}

TEST_CASE("non-unitary and bad targets rejected") {
    DensityMatrix rho(2);
    Matrix bad = Matrix::Identity(2, 2) * 0.5;
    const std::array<int, 1> q = {0};
    CHECK_THROWS_AS(rho.apply_unitary(bad, q), std::invalid_argument);
    const std::array<int, 2> dup = {1, 1};
    CHECK_THROWS_AS(rho.apply_unitary(gates::cx(), dup), std::invalid_argument);
    const std::array<int, 1> oob = {5};
    CHECK_THROWS_AS(rho.apply_unitary(gates::x(), oob), std::out_of_range);
}

TEST_CASE("werner construction") {
    auto pure = DensityMatrix::make_werner(1.0);
    CHECK(pure.fidelity_phi_plus(0, 1) == doctest::Approx(1.0).epsilon(1e-13));
    auto mixed = DensityMatrix::make_werner(0.25);
    CHECK((mixed.entries() - Matrix::Identity(4, 4) / 4.0).cwiseAbs().maxCoeff() < 1e-13);
    auto w = DensityMatrix::make_werner(0.7);
    CHECK(w.fidelity_phi_plus(0, 1) == doctest::Approx(0.7).epsilon(1e-13));
    CHECK(w.is_hermitian());
    CHECK(w.min_eigenvalue() > -1e-12);
    CHECK_THROWS_AS(DensityMatrix::make_werner(1.2), std::domain_error);
}

TEST_CASE("product state fidelity to phi plus") {
    DensityMatrix rho(2);  // |00>
    CHECK(rho.fidelity_phi_plus(0, 1) == doctest::Approx(0.5).epsilon(1e-13));
}

TEST_CASE("depolarizing channels") {
    SUBCASE("strength 0 is the identity map") {
        auto w = DensityMatrix::make_werner(0.8);
        auto before = w.entries();
        w.depolarize(0, 0.0);
        CHECK((w.entries() - before).cwiseAbs().maxCoeff() < 1e-15);
    }
    SUBCASE("strength 1 on a pure qubit gives I/2") {
        DensityMatrix rho(1);
        rho.depolarize(0, 1.0);
        CHECK((rho.entries() - Matrix::Identity(2, 2) / 2.0).cwiseAbs().maxCoeff() < 1e-14);
    }
    SUBCASE("strength 1 on every qubit gives the maximally mixed state") {
        DensityMatrix rho(5);
        const std::array<int, 1> q0 = {0};
        rho.apply_unitary(gates::h(), q0);
        for (int q = 0; q + 1 < 5; ++q) {
            const std::array<int, 2> qs = {q, q + 1};
            rho.apply_unitary(gates::cx(), qs);
        }
        for (int q = 0; q < 5; ++q) rho.depolarize(q, 1.0);
        CHECK((rho.entries() - Matrix::Identity(32, 32) / 32.0).cwiseAbs().maxCoeff() <
              1e-12);
    }
    SUBCASE("one-sided noise on a Bell pair matches the independent Kraus sum") {
        auto bell = DensityMatrix::make_werner(1.0);
        DensityMatrix via_channel = bell;
        via_channel.depolarize(0, 0.1);
        NoiseChannel ch{NoiseChannel::Kind::depolarizing, 0.1, {0}};
        DensityMatrix via_kraus = apply_kraus(bell, kraus_operators(ch), 0);
        CHECK((via_channel.entries() - via_kraus.entries()).cwiseAbs().maxCoeff() < 1e-13);
        // Bell fidelity after one-sided depolarizing of strength p is 1-3p/4.
        CHECK(via_channel.fidelity_phi_plus(0, 1) ==
              doctest::Approx(1.0 - 0.75 * 0.1).epsilon(1e-13));
    }
    SUBCASE("two-qubit depolarizing with strength 1 fully mixes the pair") {
        auto bell = DensityMatrix::make_werner(1.0);
        bell.depolarize2(0, 1, 1.0);
        CHECK((bell.entries() - Matrix::Identity(4, 4) / 4.0).cwiseAbs().maxCoeff() < 1e-13);
    }
}

TEST_CASE("apply_noise channel wrapper") {
    auto w = DensityMatrix::make_werner(0.9);
    NoiseChannel dep{NoiseChannel::Kind::depolarizing, 0.0, {0, 1}};
    auto same = apply_noise(w, dep);
    CHECK((same.entries() - w.entries()).cwiseAbs().maxCoeff() < 1e-15);

    NoiseChannel deph{NoiseChannel::Kind::dephasing, 1.0, {0}};
    auto z = apply_noise(w, deph);  // strength-1 phase flip = Z conjugation
    const std::array<int, 1> q0 = {0};
    DensityMatrix manual = w;
    manual.apply_unitary(gates::z(), q0);
    CHECK((z.entries() - manual.entries()).cwiseAbs().maxCoeff() < 1e-13);

    NoiseChannel empty{NoiseChannel::Kind::depolarizing, 0.5, {}};
    CHECK_THROWS_AS(apply_noise(w, empty), std::invalid_argument);
}

TEST_CASE("kraus completeness enforced") {
    auto w = DensityMatrix::make_werner(0.9);
    std::vector<Matrix> incomplete{0.5 * Matrix::Identity(2, 2)};
    CHECK_THROWS_AS(apply_kraus(w, incomplete, 0), std::invalid_argument);
    NoiseChannel ch{NoiseChannel::Kind::depolarizing, 0.3, {0}};
    auto ops = kraus_operators(ch);
    Matrix sum = Matrix::Zero(2, 2);
    for (const auto& k : ops) sum += k.adjoint() * k;
    CHECK((sum - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("postselection") {
    SUBCASE("|0> measured for outcome 0 keeps the state") {
        DensityMatrix rho(1);
        auto [post, p] = postselect(rho, 0, 0);
        CHECK(p == doctest::Approx(1.0));
        CHECK(post.entries()(0, 0).real() == doctest::Approx(1.0));
    }
    SUBCASE("|+> splits evenly and collapses") {
        DensityMatrix rho(1);
        const std::array<int, 1> q = {0};
        rho.apply_unitary(gates::h(), q);
        auto [post, p] = postselect(rho, 0, 0);
        CHECK(p == doctest::Approx(0.5).epsilon(1e-13));
        CHECK(post.entries()(0, 0).real() == doctest::Approx(1.0).epsilon(1e-13));
        auto [post1, p1] = postselect(rho, 0, 1);
        CHECK(p + p1 == doctest::Approx(1.0).epsilon(1e-13));
    }
    SUBCASE("impossible branch signals instead of returning NaN") {
        DensityMatrix rho(1);  // |0>
        CHECK_THROWS_AS(postselect(rho, 0, 1), ImpossibleOutcome);
    }
}

TEST_CASE("partial trace and reduced states") {
    auto bell = DensityMatrix::make_werner(1.0);
    DensityMatrix three = DensityMatrix::tensor(bell, DensityMatrix(1));
    auto pair = three.reduced(std::array<int, 2>{0, 1});
    CHECK(pair.n_qubits() == 2);
    CHECK(pair.fidelity_phi_plus(0, 1) == doctest::Approx(1.0).epsilon(1e-13));
    auto one = three.traced_out(2).traced_out(1);
    CHECK(one.trace_weight() == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(one.entries()(0, 0).real() == doctest::Approx(0.5).epsilon(1e-13));
}

TEST_CASE("pauli expectations") {
    auto bell = DensityMatrix::make_werner(1.0);
    CHECK(bell.pauli_expectation("XX") == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(bell.pauli_expectation("ZZ") == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(bell.pauli_expectation("YY") == doctest::Approx(-1.0).epsilon(1e-13));
    CHECK(bell.pauli_expectation("XI") == doctest::Approx(0.0).epsilon(1e-13));
    CHECK_THROWS_AS(bell.pauli_expectation("Q!"), std::invalid_argument);
}

TEST_CASE("state invariants after a noisy circuit") {
    auto rho = DensityMatrix::make_werner(0.85);
    const std::array<int, 2> q01 = {0, 1};
    rho.apply_unitary(gates::cx(), q01);
    rho.depolarize2(0, 1, 0.05);
    rho.depolarize(0, 0.02);
    rho.dephase(1, 0.1);
    CHECK(rho.is_hermitian(1e-9));
    CHECK(rho.min_eigenvalue() > -1e-9);
    CHECK(rho.trace_weight() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("text dump round trip") {
    auto w = DensityMatrix::make_werner(0.6180339887);
    std::stringstream ss;
    w.dump_text(ss);
    auto back = DensityMatrix::load_text(ss);
    CHECK(back.n_qubits() == 2);
    CHECK((back.entries() - w.entries()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("qubit budget") {
    CHECK_THROWS_AS(DensityMatrix(13), std::invalid_argument);
    CHECK_THROWS_AS(DensityMatrix(0), std::invalid_argument);
    // 12 qubits is the documented ceiling; touch it once.
    DensityMatrix big(12);
    const std::array<int, 1> q = {11};
    big.apply_unitary(gates::x(), q);
    CHECK(big.trace_weight() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(big.project(11, 1) == doctest::Approx(1.0).epsilon(1e-12));
}
