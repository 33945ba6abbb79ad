#include "eventstate/bell.hpp"

#include <cmath>
#include <future>

#include "eventstate/errors.hpp"

namespace eventstate {

namespace {

constexpr double kFamilyTolerance = 1e-12;

bool same_operator(const Operator& x, const Operator& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && (x - y).cwiseAbs().maxCoeff() <= kFamilyTolerance;
}

bool same_optional(const std::optional<Operator>& x, const std::optional<Operator>& y) {
    if (x.has_value() != y.has_value()) return false;
    return !x || same_operator(*x, *y);
}

void require_family(const std::array<EventScenario, 4>& f) {
    const EventScenario& ref = f[0];
    for (const EventScenario& s : f) {
        s.validate();
        if (s.kind != ref.kind) throw InvalidInput("CHSH family mixes SL and TL scenarios");
        if (!same_operator(s.initial.matrix(), ref.initial.matrix()))
            throw InvalidInput("CHSH family: initial states differ");
        if (!same_operator(s.evolution, ref.evolution) || !same_optional(s.evolution_a, ref.evolution_a) ||
            !same_optional(s.evolution_b, ref.evolution_b))
            throw InvalidInput("CHSH family: evolutions differ");
        if (!same_optional(s.hamiltonian, ref.hamiltonian) || !same_optional(s.hamiltonian_a, ref.hamiltonian_a) ||
            !same_optional(s.hamiltonian_b, ref.hamiltonian_b))
            throw InvalidInput("CHSH family: Hamiltonians differ");
        if (s.timing.has_value() != ref.timing.has_value())
            throw InvalidInput("CHSH family: timing given for some scenarios only");
    }
    if (!f[0].basis_a.same_basis(f[1].basis_a) || !f[2].basis_a.same_basis(f[3].basis_a))
        throw InvalidInput("CHSH family: A settings must be shared as (a,b),(a,b'),(a',b),(a',b')");
    if (!f[0].basis_b.same_basis(f[2].basis_b) || !f[1].basis_b.same_basis(f[3].basis_b))
        throw InvalidInput("CHSH family: B settings must be shared as (a,b),(a,b'),(a',b),(a',b')");
}

} // namespace

double event_correlator(const EventState& state, const MeasurementModel& obs_a, const MeasurementModel& obs_b) {
    if (!obs_a.same_basis(MeasurementModel(state.record_basis_a.basis(), obs_a.labels())) ||
        !obs_b.same_basis(MeasurementModel(state.record_basis_b.basis(), obs_b.labels()))) {
        throw InvalidInput("event correlator: observable does not match the record basis of the state");
    }
    const EventState detectors = trace_timers(state);
    const Operator r = record_coordinates(detectors);
    const Index db = detectors.dim_b();
    double e = 0.0;
    for (Index a = 0; a < detectors.dim_a(); ++a) {
        for (Index b = 0; b < db; ++b) {
            e += obs_a.labels()[static_cast<std::size_t>(a)] * obs_b.labels()[static_cast<std::size_t>(b)] *
                 r(a * db + b, a * db + b).real();
        }
    }
    return e;
}

MeasurementModel plane_setting(double angle) {
    // theta outside [0, pi] is the same axis reached through phi = pi
    return MeasurementModel::bloch(angle, 0.0);
}

std::array<EventScenario, 4> chsh_family(const EventScenario& base, const ChshSettings& settings) {
    std::array<EventScenario, 4> f{base, base, base, base};
    f[0].basis_a = settings.a;
    f[0].basis_b = settings.b;
    f[1].basis_a = settings.a;
    f[1].basis_b = settings.b_prime;
    f[2].basis_a = settings.a_prime;
    f[2].basis_b = settings.b;
    f[3].basis_a = settings.a_prime;
    f[3].basis_b = settings.b_prime;
    return f;
}

ChshReport chsh_value(const std::array<EventScenario, 4>& family, bool timed) {
    require_family(family);
    std::array<std::future<double>, 4> jobs;
    for (std::size_t i = 0; i < 4; ++i) {
        jobs[i] = std::async(std::launch::async, [&family, i, timed] {
            const EventScenario& s = family[i];
            return event_correlator(build_event_state(s, timed), s.basis_a, s.basis_b);
        });
    }
    ChshReport out;
    for (std::size_t i = 0; i < 4; ++i) out.correlators[i] = jobs[i].get();
    const auto& e = out.correlators;
    out.s = std::abs(e[0] + e[1] + e[2] - e[3]);
    out.tsirelson_ok = out.s <= kTsirelsonBound + 1e-9;
    return out;
}

} // namespace eventstate
