#include <doctest.h>

#include <cmath>
#include <numbers>

#include "eventstate/errors.hpp"
#include "eventstate/quantum_core.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace eventstate;
using testsupport::max_abs;

namespace {

Ket ket2(Complex a, Complex b) { return (Ket(2) << a, b).finished(); }

const double s2 = 1.0 / std::sqrt(2.0);

} // namespace

TEST_CASE("tensor product") {
    CHECK(max_abs(tensor_product(pauli::identity(), pauli::identity()), Operator::Identity(4, 4)) == 0.0);

    const Operator p0 = ket2(1, 0) * ket2(1, 0).adjoint();
    const Operator p1 = ket2(0, 1) * ket2(0, 1).adjoint();
    Operator d = Operator::Zero(4, 4);
    d(1, 1) = 1.0;
    CHECK(max_abs(tensor_product(p0, p1), d) == 0.0);

    const Ket k00 = tensor_product(ket2(1, 0), ket2(1, 0));
    const Ket k11 = tensor_product(ket2(0, 1), ket2(0, 1));
    CHECK((tensor_product(pauli::x(), pauli::x()) * k00 - k11).norm() < 1e-15);

    testsupport::Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Operator a = testsupport::random_density(2, rng);
        const Operator b = testsupport::random_density(3, rng);
        const Operator c = testsupport::random_density(2, rng);
        CHECK(max_abs(tensor_product(a, b), oracle::kron(a, b)) < 1e-15);
        CHECK(max_abs(tensor_product(tensor_product(a, b), c), tensor_product(a, tensor_product(b, c))) < 1e-12);
    }
}

TEST_CASE("partial trace") {
    const Ket phi_plus = (Ket(4) << s2, 0, 0, s2).finished();
    const Operator bell = phi_plus * phi_plus.adjoint();
    CHECK(max_abs(partial_trace(bell, 2, 2, Keep::B), 0.5 * Operator::Identity(2, 2)) < 1e-15);
    CHECK(max_abs(partial_trace(bell, 2, 2, Keep::B), oracle::partial_trace(bell, 2, 2, false)) < 1e-15);

    Operator diag = Operator::Zero(4, 4);
    diag(0, 0) = diag(3, 3) = 0.5;
    CHECK(max_abs(partial_trace(diag, 2, 2, Keep::A), 0.5 * Operator::Identity(2, 2)) < 1e-15);

    testsupport::Rng rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        const Operator ra = testsupport::random_density(2, rng);
        const Operator rb = testsupport::random_density(3, rng);
        CHECK(max_abs(partial_trace(tensor_product(ra, rb), 2, 3, Keep::A), ra) < 1e-12);
        CHECK(max_abs(partial_trace(tensor_product(ra, rb), 2, 3, Keep::B), rb) < 1e-12);
        const Operator joint = testsupport::random_density(6, rng);
        CHECK(max_abs(partial_trace(joint, 2, 3, Keep::A), oracle::partial_trace(joint, 2, 3, true)) < 1e-13);
        CHECK(max_abs(partial_trace(joint, 2, 3, Keep::B), oracle::partial_trace(joint, 2, 3, false)) < 1e-13);
    }

    SUBCASE("generic factors") {
        const Operator r = testsupport::random_density(12, rng);
        const std::array<Index, 3> dims{2, 3, 2};
        const std::array<bool, 3> keep_first{true, false, false};
        const Operator mid = oracle::partial_trace(r, 2, 6, true);
        CHECK(max_abs(partial_trace(r, dims, keep_first), mid) < 1e-13);
        const std::array<bool, 3> keep_last_two{false, true, true};
        CHECK(max_abs(partial_trace(r, dims, keep_last_two), oracle::partial_trace(r, 2, 6, false)) < 1e-13);
    }

    CHECK_THROWS_AS(partial_trace(bell, 2, 3, Keep::A), DimensionMismatch);
}

TEST_CASE("von Neumann entropy") {
    CHECK(von_neumann_entropy(DensityMatrix::pure(ket2(s2, Complex(0, s2)))) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(von_neumann_entropy(DensityMatrix::maximally_mixed(2)) == doctest::Approx(1.0).epsilon(1e-12));
    Operator d = Operator::Zero(2, 2);
    d(0, 0) = 0.25;
    d(1, 1) = 0.75;
    CHECK(std::abs(von_neumann_entropy(DensityMatrix(d)) - oracle::binary_entropy(0.25)) < 1e-12);
    CHECK(std::abs(oracle::binary_entropy(0.25) - 0.8113) < 1e-4);

    testsupport::Rng rng(13);
    for (int trial = 0; trial < 30; ++trial) {
        const Operator r = testsupport::random_density(3, rng);
        const Operator u = testsupport::random_unitary(3, rng);
        const double s = von_neumann_entropy(DensityMatrix(r));
        CHECK(std::abs(s - oracle::entropy(r)) < 1e-9);
        CHECK(std::abs(von_neumann_entropy(DensityMatrix(u * r * u.adjoint())) - s) < 1e-9);
    }

    Eigen::VectorXd bad(2);
    bad << 1.1, -0.1;
    CHECK_THROWS_AS(entropy_bits(bad), InvalidInput);
}

TEST_CASE("trace distance") {
    const DensityMatrix zero = DensityMatrix::pure(ket2(1, 0));
    const DensityMatrix one = DensityMatrix::pure(ket2(0, 1));
    const DensityMatrix plus = DensityMatrix::pure(ket2(s2, s2));
    CHECK(trace_distance(zero, zero) == doctest::Approx(0.0));
    CHECK(trace_distance(zero, one) == doctest::Approx(1.0).epsilon(1e-12));
    // eigenvalues of |0><0| - |+><+| are +-1/sqrt(2)
    CHECK(std::abs(trace_distance(zero, plus) - s2) < 1e-12);
    CHECK_THROWS_AS(trace_distance(zero, DensityMatrix::maximally_mixed(3)), DimensionMismatch);

    testsupport::Rng rng(14);
    for (int trial = 0; trial < 50; ++trial) {
        const DensityMatrix a(testsupport::random_density(3, rng));
        const DensityMatrix b(testsupport::random_density(3, rng));
        const DensityMatrix c(testsupport::random_density(3, rng));
        const double ab = trace_distance(a, b);
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0 + 1e-12);
        CHECK(ab <= trace_distance(a, c) + trace_distance(c, b) + 1e-9);
    }
}

TEST_CASE("relative entropy of coherence") {
    const MeasurementModel z = MeasurementModel::named("Sz");
    Operator d = Operator::Zero(2, 2);
    d(0, 0) = 0.3;
    d(1, 1) = 0.7;
    CHECK(relative_entropy_of_coherence(DensityMatrix(d), z) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::abs(relative_entropy_of_coherence(DensityMatrix::pure(ket2(s2, s2)), z) - 1.0) < 1e-12);
    // |+x> is diagonal in its own basis
    CHECK(relative_entropy_of_coherence(DensityMatrix::pure(ket2(s2, s2)), MeasurementModel::named("Sx")) <
          1e-12);

    testsupport::Rng rng(15);
    for (int trial = 0; trial < 30; ++trial) {
        const DensityMatrix r(testsupport::random_density(3, rng));
        const Operator basis = testsupport::random_unitary(3, rng);
        const double c = relative_entropy_of_coherence(r, basis);
        const Operator dephased = dephase(r.matrix(), basis);
        CHECK(c >= -1e-12);
        CHECK(std::abs(c - (oracle::entropy(dephased) - oracle::entropy(r.matrix()))) < 1e-9);
        // a state already dephased has none left
        CHECK(relative_entropy_of_coherence(DensityMatrix(dephased), basis) < 1e-10);
        CHECK(max_off_diagonal(dephased, basis) < 1e-12);
    }
}

TEST_CASE("density validation") {
    CHECK(validate_density(0.5 * Operator::Identity(2, 2)).passed());

    Operator nilpotent = Operator::Zero(2, 2);
    nilpotent(0, 1) = 1.0;
    const DensityReport r1 = validate_density(nilpotent);
    CHECK_FALSE(r1.passed());
    CHECK_FALSE(r1.hermitian);

    const DensityReport r2 = validate_density(0.6 * Operator::Identity(2, 2));
    CHECK_FALSE(r2.passed());
    CHECK_FALSE(r2.unit_trace);
    CHECK(r2.hermitian);

    Operator negative = Operator::Zero(2, 2);
    negative(0, 0) = 1.2;
    negative(1, 1) = -0.2;
    CHECK_FALSE(validate_density(negative).positive);

    Operator nan = 0.5 * Operator::Identity(2, 2);
    nan(0, 0) = std::nan("");
    CHECK_FALSE(validate_density(nan).finite);

    CHECK_THROWS_AS(DensityMatrix(0.6 * Operator::Identity(2, 2)), InvalidInput);
}

TEST_CASE("measurement models") {
    const MeasurementModel sy = MeasurementModel::named("Sy");
    CHECK(max_abs(sy.observable(), pauli::y()) < 1e-15);
    CHECK(max_abs(MeasurementModel::named("Sx").observable(), pauli::x()) < 1e-15);
    CHECK(max_abs(MeasurementModel::named("Sz").observable(), pauli::z()) < 1e-15);
    CHECK_THROWS_AS(MeasurementModel::named("Sq"), InvalidInput);

    Operator skew = Operator::Identity(2, 2);
    skew(0, 1) = 0.1;
    CHECK_THROWS_AS(MeasurementModel(skew, {1, -1}), InvalidInput);
    CHECK_THROWS_AS(MeasurementModel(Operator::Identity(2, 2), {1, 1}), InvalidInput);
    CHECK_THROWS_AS(MeasurementModel(Operator::Identity(2, 2), {1, -1, 0}), InvalidInput);

    const MeasurementModel b = MeasurementModel::bloch(0.7, 1.9);
    const Operator axis = std::sin(0.7) * std::cos(1.9) * pauli::x() + std::sin(0.7) * std::sin(1.9) * pauli::y() +
                          std::cos(0.7) * pauli::z();
    CHECK(max_abs(b.observable(), axis) < 1e-14);
    const BlochAngles angles = bloch_angles(b.ket(0));
    CHECK(angles.theta == doctest::Approx(0.7));
    CHECK(angles.phi == doctest::Approx(1.9));

    Operator rephased = b.basis();
    rephased.col(1) *= std::polar(1.0, 0.4);
    CHECK(b.same_basis(MeasurementModel(rephased, {1, -1})));
    CHECK_FALSE(b.same_basis(MeasurementModel(rephased, {-1, 1})));
}

TEST_CASE("rotations and propagators") {
    // exp(i pi sigma_x / 4) = (I + i sigma_x) / sqrt(2)
    const Operator expected = s2 * (pauli::identity() + Complex(0, 1) * pauli::x());
    CHECK(max_abs(rotation('x', -std::numbers::pi / 2), expected) < 1e-15);
    CHECK(is_unitary(hadamard()));
    CHECK_FALSE(is_unitary(2.0 * pauli::identity()));
    CHECK_THROWS_AS(require_unitary(2.0 * pauli::identity(), "U"), InvalidInput);

    testsupport::Rng rng(16);
    const Operator h = testsupport::random_density(3, rng) * 3.0;
    const Propagator prop(h);
    for (double tau : {0.0, 0.3, -1.7, 5.0}) CHECK(max_abs(prop(tau), oracle::propagate(h, tau)) < 1e-12);
    CHECK(Propagator(Operator::Zero(2, 2)).is_zero());
    CHECK(max_abs(Propagator::stationary(2)(3.0), pauli::identity()) == 0.0);
}
