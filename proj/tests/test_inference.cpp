#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "eventstate/errors.hpp"
#include "eventstate/inference.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace eventstate;
using testsupport::max_abs;

namespace {

const double s2 = 1.0 / std::sqrt(2.0);
constexpr double pi = std::numbers::pi;

Ket ket2(Complex a, Complex b) { return (Ket(2) << a, b).finished(); }

EventScenario appendix_e() {
    return EventScenario::timelike(ket2(s2, s2), MeasurementModel::named("Sz"), MeasurementModel::named("Sy"),
                                   rotation('x', -pi / 2));
}

ConditionalDecomposition decompose(const EventScenario& sc) {
    return conditional_decomposition(build_event_state(sc));
}

/// Normalized overlap of the conditional states for an A basis, straight from the amplitudes.
double oracle_overlap(const Ket& psi, const Operator& u, const MeasurementModel& a, const MeasurementModel& b) {
    const oracle::Lambdas l = oracle::lambdas(psi, a.basis(), b.basis(), u);
    if (l.p[0] < 1e-12 || l.p[1] < 1e-12) return 0.0;
    return std::abs(l.lambda[0].dot(l.lambda[1]));
}

} // namespace

TEST_CASE("Helstrom bound for two pure qubit states") {
    const DensityMatrix zero = DensityMatrix::pure(ket2(1, 0));
    const DensityMatrix plus = DensityMatrix::pure(ket2(s2, s2));
    const HelstromResult h = helstrom_success(0.5, zero, 0.5, plus);
    CHECK(h.p_suc == doctest::Approx(0.5 * (1 + s2)).epsilon(1e-12));
    CHECK(std::abs(h.p_suc - 0.85355) < 1e-5);
    CHECK(std::abs(h.p_suc - oracle::helstrom_grid(0.5, zero.matrix(), 0.5, plus.matrix(), 100, 100)) < 1e-4);
    CHECK(h.p_suc == doctest::Approx(helstrom_pure(0.5, ket2(1, 0), 0.5, ket2(s2, s2))).epsilon(1e-12));

    // Born rule on the returned projector reproduces the bound.
    const Operator& p = h.optimal_projector;
    const Operator q = Operator::Identity(2, 2) - p;
    CHECK(0.5 * (p * zero.matrix()).trace().real() + 0.5 * (q * plus.matrix()).trace().real() ==
          doctest::Approx(h.p_suc).epsilon(1e-12));
}

TEST_CASE("Helstrom edge cases") {
    const DensityMatrix zero = DensityMatrix::pure(ket2(1, 0));
    const DensityMatrix one = DensityMatrix::pure(ket2(0, 1));
    CHECK(helstrom_success(0.3, zero, 0.7, one).p_suc == doctest::Approx(1.0));
    CHECK(helstrom_success(0.3, zero, 0.7, zero).p_suc == doctest::Approx(0.7));
    CHECK(helstrom_pure(0.5, ket2(1, 0), 0.5, ket2(1, 0)) == doctest::Approx(0.5));
    CHECK_THROWS_AS(helstrom_success(0.6, zero, 0.6, one), InvalidInput);
    CHECK_THROWS_AS(helstrom_success(-0.1, zero, 1.1, one), InvalidInput);
    CHECK_THROWS_AS(helstrom_success(0.5, zero, 0.5, DensityMatrix::maximally_mixed(3)), DimensionMismatch);
    CHECK_THROWS_AS(helstrom_pure(0.5, ket2(1, 1), 0.5, ket2(1, 0)), InvalidInput);
}

TEST_CASE("pure-state formula agrees with the general bound") {
    testsupport::Rng rng(5);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Index d = i % 4 == 0 ? 3 : 2;
        const Ket a = testsupport::random_ket(d, rng);
        const Ket b = testsupport::random_ket(d, rng);
        const double p = testsupport::uniform(rng, 0.0, 1.0);
        const double general = helstrom_success(p, DensityMatrix::pure(a), 1 - p, DensityMatrix::pure(b)).p_suc;
        worst = std::max(worst, std::abs(general - helstrom_pure(p, a, 1 - p, b)));
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("Helstrom matches a measurement grid on random mixed pairs") {
    testsupport::Rng rng(8);
    for (int i = 0; i < 20; ++i) {
        const Operator s1 = testsupport::random_density(2, rng);
        const Operator s2m = testsupport::random_density(2, rng);
        const double p = testsupport::uniform(rng, 0.1, 0.9);
        const HelstromResult h = helstrom_success(p, DensityMatrix(s1), 1 - p, DensityMatrix(s2m));
        // Always guessing one hypothesis is not on the rank-1 grid.
        const double grid = std::max({oracle::helstrom_grid(p, s1, 1 - p, s2m, 200, 200), p, 1 - p});
        CHECK(h.p_suc >= grid - 1e-12);
        CHECK(h.p_suc - grid < 1e-3);
    }
}

TEST_CASE("predicting the later outcome") {
    SUBCASE("worked timelike example is perfect") {
        const Prediction pr = predict_future_outcome(decompose(appendix_e()));
        REQUIRE(pr.p_suc);
        CHECK(*pr.p_suc == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(pr.used_pure_formula);
        CHECK_FALSE(pr.partial);
        REQUIRE(pr.bloch);
        // The optimal projector is Sz up to ordering.
        CHECK(std::abs(std::cos(pr.bloch->theta)) == doctest::Approx(1.0).epsilon(1e-8));
    }
    SUBCASE("spacelike Bell pair is perfect") {
        const Ket phi_plus = (Ket(4) << s2, 0, 0, s2).finished();
        const MeasurementModel z = MeasurementModel::named("Sz");
        const Prediction pr = predict_future_outcome(decompose(EventScenario::spacelike(phi_plus, z, z)));
        REQUIRE(pr.p_suc);
        CHECK(*pr.p_suc == doctest::Approx(1.0).epsilon(1e-10));
        CHECK_FALSE(pr.used_pure_formula);
    }
    SUBCASE("spacelike product gives the larger prior") {
        const Ket prod = tensor_product(ket2(1, 0), ket2(std::sqrt(0.8), std::sqrt(0.2)));
        const MeasurementModel z = MeasurementModel::named("Sz");
        const Prediction pr = predict_future_outcome(decompose(EventScenario::spacelike(prod, z, z)));
        REQUIRE(pr.p_suc);
        CHECK(*pr.p_suc == doctest::Approx(0.8).epsilon(1e-10));
    }
    SUBCASE("omitted branch") {
        const MeasurementModel z = MeasurementModel::named("Sz");
        const Prediction pr =
            predict_future_outcome(decompose(EventScenario::timelike(ket2(1, 0), z, z, Operator::Identity(2, 2))));
        REQUIRE(pr.p_suc);
        CHECK(*pr.p_suc == doctest::Approx(1.0));
    }
    SUBCASE("three outcomes give a partial result") {
        testsupport::Rng rng(17);
        const EventScenario sc = EventScenario::timelike(testsupport::random_ket(3, rng), testsupport::random_basis(3, rng),
                                                         testsupport::random_basis(3, rng),
                                                         testsupport::random_unitary(3, rng));
        const Prediction pr = predict_future_outcome(decompose(sc));
        CHECK(pr.partial);
        CHECK_FALSE(pr.p_suc);
        REQUIRE(pr.pairwise.size() == 3);
        for (const auto& b : pr.pairwise) {
            CHECK(b.p_suc >= 0.5 - 1e-12);
            CHECK(b.p_suc <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("pure formula matches the general route on random timelike qubits") {
    testsupport::Rng rng(21);
    for (int i = 0; i < 100; ++i) {
        const EventScenario sc = EventScenario::timelike(testsupport::random_ket(2, rng), testsupport::random_basis(2, rng),
                                                         testsupport::random_basis(2, rng),
                                                         testsupport::random_unitary(2, rng));
        const ConditionalDecomposition dec = decompose(sc);
        const Prediction pr = predict_future_outcome(dec);
        REQUIRE(pr.used_pure_formula);
        const auto& br = dec.branches;
        const double general = helstrom_success(br[0].probability, br[0].sigma, br[1].probability, br[1].sigma).p_suc;
        CHECK(std::abs(*pr.p_suc - general) < 1e-10);
    }
}

TEST_CASE("classical correlation") {
    const MeasurementModel z = MeasurementModel::named("Sz");
    SUBCASE("Bell pair carries one bit") {
        const Ket phi_plus = (Ket(4) << s2, 0, 0, s2).finished();
        const ClassicalCorrelation c = classical_correlation(build_sl_instant(EventScenario::spacelike(phi_plus, z, z)));
        CHECK(c.c_a == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("worked timelike example") {
        const ClassicalCorrelation c = classical_correlation(build_tl_instant(appendix_e()));
        CHECK(std::abs(c.c_a - 1.0) < 1e-3);
        REQUIRE(c.bloch);
        CHECK(c.bloch->theta == doctest::Approx(0.0));
        CHECK(c.bloch->phi == doctest::Approx(0.0));
    }
    SUBCASE("product states carry nothing") {
        testsupport::Rng rng(2);
        for (int i = 0; i < 5; ++i) {
            const Ket prod = tensor_product(testsupport::random_ket(2, rng), testsupport::random_ket(2, rng));
            const ClassicalCorrelation c = classical_correlation(
                build_sl_instant(EventScenario::spacelike(prod, testsupport::random_basis(2, rng), z)));
            CHECK(c.c_a < 1e-9);
        }
    }
    SUBCASE("at least the record-basis value") {
        testsupport::Rng rng(4);
        for (int i = 0; i < 10; ++i) {
            EventScenario sc = testsupport::random_tl_scenario(rng);
            if (sc.dim_a() != 2) continue;
            const EventState s = build_tl_instant(sc);
            const double at_record = entropy_reduction(s, ProjectiveMeasurement::from_basis(s.record_basis_a));
            CHECK(classical_correlation(s).c_a >= at_record - 1e-12);
        }
    }
    SUBCASE("qutrits need candidates") {
        testsupport::Rng rng(6);
        const Ket psi = testsupport::random_ket(6, rng);
        const EventState s = build_sl_instant(
            EventScenario::spacelike(psi, MeasurementModel::computational(3), MeasurementModel::named("Sz")));
        CHECK_THROWS_AS(classical_correlation(s), InvalidInput);
        SearchPolicy search;
        search.candidates.push_back(ProjectiveMeasurement::from_basis(MeasurementModel::computational(3)));
        search.candidates.push_back(ProjectiveMeasurement::from_basis(testsupport::random_basis(3, rng)));
        const ClassicalCorrelation c = classical_correlation(s, search);
        CHECK(c.c_a == doctest::Approx(std::max(entropy_reduction(s, search.candidates[0]),
                                                entropy_reduction(s, search.candidates[1]))));
        CHECK_FALSE(c.bloch);
    }
}

TEST_CASE("entropy reduction against a direct computation") {
    testsupport::Rng rng(31);
    for (int i = 0; i < 10; ++i) {
        const EventState s = build_sl_instant(testsupport::random_sl_scenario(rng));
        const MeasurementModel m = testsupport::random_basis(s.dim_a(), rng);
        const Operator& rho = s.rho.matrix();
        const Index da = s.dim_a();
        const Index db = s.dim_b();
        double expected = oracle::entropy(oracle::partial_trace(rho, da, db, false));
        for (Index a = 0; a < da; ++a) {
            const Operator lift = oracle::kron(m.projector(a), Operator::Identity(db, db));
            const Operator post = lift * rho * lift;
            const double p = post.trace().real();
            if (p > 1e-14) expected -= p * oracle::entropy(oracle::partial_trace(post / p, da, db, false));
        }
        CHECK(entropy_reduction(s, ProjectiveMeasurement::from_basis(m)) == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("search results do not depend on the worker count") {
    testsupport::Rng rng(12);
    for (int i = 0; i < 3; ++i) {
        const EventState s = build_sl_instant(EventScenario::spacelike(
            DensityMatrix(testsupport::random_density(4, rng)), MeasurementModel::named("Sz"), MeasurementModel::named("Sx")));
        SearchPolicy one;
        one.threads = 1;
        SearchPolicy many;
        many.threads = 7;
        const ClassicalCorrelation a = classical_correlation(s, one);
        const ClassicalCorrelation b = classical_correlation(s, many);
        CHECK(a.c_a == b.c_a);
        CHECK(a.bloch->theta == b.bloch->theta);
        CHECK(a.bloch->phi == b.bloch->phi);
    }
    SearchPolicy fixed;
    fixed.threads = 3;
    CHECK(search_threads(fixed) == 3);
    CHECK(search_threads({}) >= 1);
}

TEST_CASE("projective measurements are validated") {
    const Operator p0 = MeasurementModel::named("Sz").projector(0);
    CHECK_THROWS_AS(ProjectiveMeasurement({p0}), InvalidInput);
    CHECK_THROWS_AS(ProjectiveMeasurement({p0, MeasurementModel::named("Sx").projector(1)}), InvalidInput);
    CHECK_THROWS_AS(ProjectiveMeasurement({}), InvalidInput);
    CHECK_NOTHROW(ProjectiveMeasurement({Operator::Identity(2, 2), Operator::Zero(2, 2)}));
    const ProjectiveMeasurement b = ProjectiveMeasurement::bloch(pi / 2, 0);
    CHECK(max_abs(b.projectors()[0], MeasurementModel::named("Sx").projector(0)) < 1e-12);
}

TEST_CASE("determinism check") {
    const MeasurementModel z = MeasurementModel::named("Sz");
    const MeasurementModel x = MeasurementModel::named("Sx");
    CHECK(determinism_check(decompose(appendix_e())).deterministic);
    // |+x> under identity with Sz records on both sides: lambda = |0>, |1>.
    CHECK(determinism_check(decompose(EventScenario::timelike(ket2(s2, s2), z, z, Operator::Identity(2, 2)))).deterministic);
    CHECK(determinism_check(decompose(EventScenario::timelike(ket2(s2, s2), z, z, hadamard()))).deterministic);
    const DeterminismCheck no = determinism_check(decompose(EventScenario::timelike(ket2(s2, s2), x, z, Operator::Identity(2, 2))));
    CHECK_FALSE(no.deterministic);
    CHECK(no.max_off_diagonal == doctest::Approx(1.0));
    CHECK(no.gram.rows() == 2);

    const Ket phi_plus = (Ket(4) << s2, 0, 0, s2).finished();
    CHECK_THROWS_AS(determinism_check(decompose(EventScenario::spacelike(phi_plus, z, z))), InvalidInput);
    // Mixed input with Sx then Sz records: both conditional states are I/2.
    CHECK_THROWS_AS(determinism_check(decompose(EventScenario::timelike(DensityMatrix::maximally_mixed(2), x, z,
                                                                        Operator::Identity(2, 2)))),
                    InvalidInput);
}

TEST_CASE("deterministic basis search") {
    const MeasurementModel z = MeasurementModel::named("Sz");
    const MeasurementModel sy = MeasurementModel::named("Sy");
    SUBCASE("worked example finds Sz") {
        const BasisSearchResult r = find_deterministic_basis(ket2(s2, s2), rotation('x', -pi / 2), sy);
        REQUIRE(std::holds_alternative<DeterministicBasis>(r));
        const auto& found = std::get<DeterministicBasis>(r);
        CHECK(found.residual < 1e-8);
        CHECK(found.bloch.theta == doctest::Approx(0.0));
        CHECK(found.basis.same_basis(z));
    }
    SUBCASE("identity evolution finds Sz") {
        const auto r = find_deterministic_basis(ket2(s2, s2), Operator::Identity(2, 2), z);
        REQUIRE(std::holds_alternative<DeterministicBasis>(r));
        CHECK(std::get<DeterministicBasis>(r).basis.same_basis(z));
    }
    SUBCASE("|0> under a Hadamard needs a basis off the grid") {
        const Ket zero = ket2(1, 0);
        CHECK(oracle_overlap(zero, hadamard(), z, z) == doctest::Approx(1.0));
        const auto r = find_deterministic_basis(zero, hadamard(), z);
        REQUIRE(std::holds_alternative<DeterministicBasis>(r));
        const auto& found = std::get<DeterministicBasis>(r);
        CHECK(found.residual < 1e-8);
        CHECK(oracle_overlap(zero, hadamard(), found.basis, z) < 1e-8);
    }
    SUBCASE("random qubit scenarios always have one") {
        testsupport::Rng rng(77);
        for (int i = 0; i < 30; ++i) {
            const Ket psi = testsupport::random_ket(2, rng);
            const Operator u = testsupport::random_unitary(2, rng);
            const MeasurementModel b = testsupport::random_basis(2, rng);
            const auto r = find_deterministic_basis(psi, u, b);
            REQUIRE(std::holds_alternative<DeterministicBasis>(r));
            const auto& found = std::get<DeterministicBasis>(r);
            CHECK(oracle_overlap(psi, u, found.basis, b) < 1e-8);
            const EventScenario sc = EventScenario::timelike(psi, found.basis, b, u);
            CHECK(determinism_check(decompose(sc)).deterministic);
        }
    }
    SUBCASE("qubits only") {
        testsupport::Rng rng(1);
        CHECK_THROWS_AS(find_deterministic_basis(testsupport::random_ket(3, rng), Operator::Identity(3, 3),
                                                 MeasurementModel::computational(3)),
                        InvalidInput);
    }
}
