#include "eventstate/event_states.hpp"

#include <array>
#include <cmath>
#include <map>

#include "eventstate/errors.hpp"

namespace eventstate {

namespace {

constexpr double kTimingTolerance = 1e-6;
constexpr double kOmittedBranch = 1e-12;
constexpr double kRankOneTolerance = 1e-10;

Operator embed(const Operator& record, const Operator& basis) {
    return basis * record * basis.adjoint();
}

/// TL detector state in record coordinates for initial state `rho_s` and
/// evolution `u` between the two events:
/// R[(a,b),(a',b)] = <b|U|a> <a|rho|a'> <a'|U^dag|b>.
Operator tl_record_state(const Operator& rho_s, const Operator& va, const Operator& vb, const Operator& u) {
    const Index d = va.rows();
    const Operator w = vb.adjoint() * u * va; // w(b, a) = <b|U|a>
    const Operator ra = va.adjoint() * rho_s * va;
    Operator r = Operator::Zero(d * d, d * d);
    for (Index b = 0; b < d; ++b) {
        for (Index a = 0; a < d; ++a) {
            for (Index ap = 0; ap < d; ++ap) {
                r(a * d + b, ap * d + b) = w(b, a) * ra(a, ap) * std::conj(w(b, ap));
            }
        }
    }
    return r;
}

void require_timing(const EventScenario& s, std::string_view what) {
    if (!s.timing) throw InvalidInput(std::string(what) + ": scenario has no timing profiles");
    if (s.timing->profile_a.normalization_defect() > kTimingTolerance ||
        s.timing->profile_b.normalization_defect() > kTimingTolerance) {
        throw InvalidInput(std::string(what) + ": timing profiles are not normalized");
    }
}

DensityMatrix finalize(Operator rho) {
    // Riemann sums carry the profile normalization error (<= 1e-6); rescale to unit trace.
    const Complex tr = rho.trace();
    if (!(tr.real() > 0.0)) throw NumericalFailure("event state has non-positive trace");
    rho /= tr.real();
    rho = 0.5 * (rho + rho.adjoint()).eval();
    const DensityReport report = validate_density(rho);
    if (!report.passed()) throw NumericalFailure("event state failed validation: " + report.summary());
    return DensityMatrix(std::move(rho));
}

} // namespace

EventScenario EventScenario::timelike(const Ket& initial, MeasurementModel a, MeasurementModel b, Operator evolution) {
    return timelike(DensityMatrix::pure(initial), std::move(a), std::move(b), std::move(evolution));
}

EventScenario EventScenario::timelike(DensityMatrix initial, MeasurementModel a, MeasurementModel b,
                                      Operator evolution) {
    EventScenario s;
    s.kind = EventKind::Timelike;
    s.initial = std::move(initial);
    s.basis_a = std::move(a);
    s.basis_b = std::move(b);
    s.evolution = std::move(evolution);
    s.validate();
    return s;
}

EventScenario EventScenario::spacelike(const Ket& initial, MeasurementModel a, MeasurementModel b) {
    return spacelike(DensityMatrix::pure(initial), std::move(a), std::move(b));
}

EventScenario EventScenario::spacelike(DensityMatrix initial, MeasurementModel a, MeasurementModel b) {
    EventScenario s;
    s.kind = EventKind::Spacelike;
    s.initial = std::move(initial);
    s.basis_a = std::move(a);
    s.basis_b = std::move(b);
    s.evolution = Operator::Identity(1, 1);
    s.validate();
    return s;
}

void EventScenario::validate() const {
    const Index da = dim_a();
    const Index db = dim_b();
    auto check_h = [](const std::optional<Operator>& h, Index d, std::string_view what) {
        if (!h) return;
        if (h->rows() != d || h->cols() != d) {
            throw DimensionMismatch(std::string(what) + ": expected " + std::to_string(d) + "x" + std::to_string(d));
        }
        if (!all_finite(*h) || hermiticity_defect(*h) > default_policy().hermiticity) {
            throw InvalidInput(std::string(what) + ": not Hermitian");
        }
    };
    auto check_u = [](const std::optional<Operator>& u, Index d, std::string_view what) {
        if (!u) return;
        if (u->rows() != d || u->cols() != d) {
            throw DimensionMismatch(std::string(what) + ": expected " + std::to_string(d) + "x" + std::to_string(d));
        }
        require_unitary(*u, what);
    };

    if (kind == EventKind::Timelike) {
        if (da != db) throw DimensionMismatch("TL scenario: basisA and basisB must share the system dimension");
        if (initial.dim() != da) {
            throw DimensionMismatch("TL scenario: initial state dim " + std::to_string(initial.dim()) +
                                    " does not match basis dim " + std::to_string(da));
        }
        check_u(evolution, da, "TL evolution");
        check_h(hamiltonian, da, "TL Hamiltonian");
        if (timing) {
            if (!timing->profile_a.is_marginal()) throw InvalidInput("TL timing: profileA must be marginal");
            if (timing->profile_b.is_marginal()) throw InvalidInput("TL timing: profileB must be conditional");
            if (timing->joint_amplitude) throw InvalidInput("TL timing: joint amplitude tables are SL-only");
        }
    } else {
        if (initial.dim() != da * db) {
            throw DimensionMismatch("SL scenario: initial state dim " + std::to_string(initial.dim()) +
                                    " does not match dA*dB = " + std::to_string(da * db));
        }
        check_u(evolution_a, da, "SL evolution A");
        check_u(evolution_b, db, "SL evolution B");
        check_h(hamiltonian_a, da, "SL Hamiltonian A");
        check_h(hamiltonian_b, db, "SL Hamiltonian B");
        if (timing) {
            if (!timing->profile_a.is_marginal() || !timing->profile_b.is_marginal()) {
                throw InvalidInput("SL timing: both profiles must be marginal");
            }
            if (timing->joint_amplitude) {
                const auto n = static_cast<Index>(timing->grid().n_bins);
                if (timing->joint_amplitude->rows() != n || timing->joint_amplitude->cols() != n) {
                    throw DimensionMismatch("SL timing: joint amplitude table does not match grid");
                }
            }
        }
    }
    if (timing && !timing->profile_a.grid().matches(timing->profile_b.grid())) {
        throw InvalidInput("timing: profiles use different grids");
    }
}

Operator EventState::joint_record_basis() const {
    return tensor_product(record_basis_a.basis(), record_basis_b.basis());
}

Operator record_coordinates(const EventState& state) {
    Operator v = state.joint_record_basis();
    if (state.timed()) {
        const auto n = static_cast<Index>(state.timer_bins);
        const Operator id = Operator::Identity(n, n);
        v = tensor_product(tensor_product(id, state.record_basis_a.basis()),
                           tensor_product(id, state.record_basis_b.basis()));
    }
    return v.adjoint() * state.rho.matrix() * v;
}

EventState build_sl_instant(const EventScenario& scenario) {
    if (scenario.kind != EventKind::Spacelike) throw InvalidInput("build_sl_instant: scenario is not SL");
    scenario.validate();
    const Index da = scenario.dim_a();
    const Index db = scenario.dim_b();
    Operator rho_s = scenario.initial.matrix();
    if (scenario.evolution_a || scenario.evolution_b) {
        const Operator ua = scenario.evolution_a.value_or(Operator::Identity(da, da));
        const Operator ub = scenario.evolution_b.value_or(Operator::Identity(db, db));
        const Operator u = tensor_product(ua, ub);
        rho_s = u * rho_s * u.adjoint();
    }
    const Operator v = tensor_product(scenario.basis_a.basis(), scenario.basis_b.basis());
    const Eigen::VectorXcd populations = (v.adjoint() * rho_s * v).diagonal().real().cast<Complex>();
    const Operator record = populations.asDiagonal();
    return EventState{EventKind::Spacelike, finalize(embed(record, v)), scenario.basis_a, scenario.basis_b, 0};
}

EventState build_tl_instant(const EventScenario& scenario) {
    if (scenario.kind != EventKind::Timelike) throw InvalidInput("build_tl_instant: scenario is not TL");
    scenario.validate();
    const Operator& va = scenario.basis_a.basis();
    const Operator& vb = scenario.basis_b.basis();
    const Operator record = tl_record_state(scenario.initial.matrix(), va, vb, scenario.evolution);
    return EventState{EventKind::Timelike, finalize(embed(record, tensor_product(va, vb))), scenario.basis_a,
                      scenario.basis_b, 0};
}

EventState build_tl_fuzzy(const EventScenario& scenario) {
    if (scenario.kind != EventKind::Timelike) throw InvalidInput("build_tl_fuzzy: scenario is not TL");
    scenario.validate();
    require_timing(scenario, "build_tl_fuzzy");
    if (!scenario.hamiltonian) throw InvalidInput("build_tl_fuzzy: scenario has no system Hamiltonian");

    const TimingSpec& timing = *scenario.timing;
    const TimeGrid& grid = timing.grid();
    const std::size_t n = grid.n_bins;
    const Propagator evolve(*scenario.hamiltonian);
    const Operator& va = scenario.basis_a.basis();
    const Operator& vb = scenario.basis_b.basis();
    const Index d = va.rows();

    // Bin offsets only enter through multiples of dt.
    std::vector<Operator> step(n);
    for (std::size_t j = 0; j < n; ++j) step[j] = evolve(static_cast<double>(j) * grid.dt);

    const Eigen::VectorXd pa = timing.profile_a.bin_masses();
    const Eigen::MatrixXd pb = timing.profile_b.conditional_masses();
    Operator record = Operator::Zero(d * d, d * d);
    for (std::size_t k = 0; k < n; ++k) {
        const double wa = pa(static_cast<Index>(k));
        if (wa == 0.0) continue;
        const Operator& before = step[k];
        const Operator rho_k = before * scenario.initial.matrix() * before.adjoint();
        for (std::size_t l = k; l < n; ++l) {
            const double w = wa * pb(static_cast<Index>(k), static_cast<Index>(l));
            if (w == 0.0) continue;
            record += w * tl_record_state(rho_k, va, vb, step[l - k]);
        }
    }
    return EventState{EventKind::Timelike, finalize(embed(record, tensor_product(va, vb))), scenario.basis_a,
                      scenario.basis_b, 0};
}

EventState build_sl_fuzzy(const EventScenario& scenario) {
    if (scenario.kind != EventKind::Spacelike) throw InvalidInput("build_sl_fuzzy: scenario is not SL");
    scenario.validate();
    require_timing(scenario, "build_sl_fuzzy");
    if (!scenario.hamiltonian_a || !scenario.hamiltonian_b) {
        throw InvalidInput("build_sl_fuzzy: scenario needs Hamiltonians for both subsystems");
    }
    const TimingSpec& timing = *scenario.timing;
    if (timing.joint_amplitude) throw InvalidInput("build_sl_fuzzy: non-separable timing needs build_timed_state");
    const TimeGrid& grid = timing.grid();
    const Index da = scenario.dim_a();
    const Index db = scenario.dim_b();

    // With separable timing and evolution the double integral factorizes:
    // P(a,b) = Tr[(M_a (x) M_b) rho_S], M_a = sum_k p_A(k) U_A(t_k)^dag |a><a| U_A(t_k).
    auto averaged_projectors = [&](const Operator& h, const MeasurementModel& basis, const Eigen::VectorXd& p) {
        const Propagator evolve(h);
        std::vector<Operator> out(static_cast<std::size_t>(basis.dim()),
                                  Operator::Zero(basis.dim(), basis.dim()));
        for (std::size_t k = 0; k < grid.n_bins; ++k) {
            const double w = p(static_cast<Index>(k));
            if (w == 0.0) continue;
            const Operator u = evolve(grid.time(k) - grid.t0);
            for (Index a = 0; a < basis.dim(); ++a) {
                out[static_cast<std::size_t>(a)] += w * (u.adjoint() * basis.projector(a) * u);
            }
        }
        return out;
    };
    const auto ma = averaged_projectors(*scenario.hamiltonian_a, scenario.basis_a, timing.profile_a.bin_masses());
    const auto mb = averaged_projectors(*scenario.hamiltonian_b, scenario.basis_b, timing.profile_b.bin_masses());

    Eigen::VectorXcd populations(da * db);
    for (Index a = 0; a < da; ++a) {
        for (Index b = 0; b < db; ++b) {
            const Operator m = tensor_product(ma[static_cast<std::size_t>(a)], mb[static_cast<std::size_t>(b)]);
            populations(a * db + b) = (m * scenario.initial.matrix()).trace().real();
        }
    }
    const Operator v = tensor_product(scenario.basis_a.basis(), scenario.basis_b.basis());
    const Operator record = populations.asDiagonal();
    return EventState{EventKind::Spacelike, finalize(embed(record, v)), scenario.basis_a, scenario.basis_b, 0};
}

EventState build_timed_state(const EventScenario& scenario) {
    scenario.validate();
    if (!scenario.timing) throw InvalidInput("build_timed_state: scenario has no timing profiles");
    const TimingSpec& timing = *scenario.timing;
    const TimeGrid& grid = timing.grid();
    const std::size_t n = grid.n_bins;
    const bool spacelike = scenario.kind == EventKind::Spacelike;
    const Index da = scenario.dim_a();
    const Index db = scenario.dim_b();
    const auto ni = static_cast<Index>(n);
    const Index total = ni * da * ni * db;
    if (n > kMaxTimedBins || total > kMaxTimedDim) {
        throw InvalidInput("build_timed_state: grid too large (" + std::to_string(n) + " bins, state dim " +
                           std::to_string(total) + "; limits " + std::to_string(kMaxTimedBins) + " bins, dim " +
                           std::to_string(kMaxTimedDim) + ")");
    }
    if (timing.joint_amplitude) {
        const double mass = timing.joint_amplitude->cwiseAbs2().sum() * grid.dt * grid.dt;
        if (std::abs(mass - 1.0) > kTimingTolerance) {
            throw InvalidInput("build_timed_state: joint amplitude table is not normalized");
        }
    } else {
        require_timing(scenario, "build_timed_state");
    }

    // System propagator. SL evolution is separable: H = H_A (x) 1 + 1 (x) H_B.
    Operator h;
    if (spacelike) {
        if (!scenario.hamiltonian_a || !scenario.hamiltonian_b) {
            throw InvalidInput("build_timed_state: SL scenario needs Hamiltonians for both subsystems");
        }
        h = tensor_product(*scenario.hamiltonian_a, Operator::Identity(db, db)) +
            tensor_product(Operator::Identity(da, da), *scenario.hamiltonian_b);
    } else {
        if (!scenario.hamiltonian) throw InvalidInput("build_timed_state: TL scenario has no system Hamiltonian");
        h = *scenario.hamiltonian;
    }
    const Propagator evolve(h);
    auto u = [&](long long bins) { return evolve(static_cast<double>(bins) * grid.dt); };

    // Projectors on S for each recorded outcome.
    std::vector<Operator> proj_a(static_cast<std::size_t>(da));
    std::vector<Operator> proj_b(static_cast<std::size_t>(db));
    for (Index a = 0; a < da; ++a) {
        proj_a[static_cast<std::size_t>(a)] =
            spacelike ? tensor_product(scenario.basis_a.projector(a), Operator::Identity(db, db))
                      : scenario.basis_a.projector(a);
    }
    for (Index b = 0; b < db; ++b) {
        proj_b[static_cast<std::size_t>(b)] =
            spacelike ? tensor_product(Operator::Identity(da, da), scenario.basis_b.projector(b))
                      : scenario.basis_b.projector(b);
    }

    // Joint timing amplitude per cell, weighted by one grid cell dt^2 (the
    // same-bin SL branch included).
    Eigen::MatrixXcd cell(ni, ni);
    for (Index k = 0; k < ni; ++k) {
        for (Index l = 0; l < ni; ++l) {
            Complex chi;
            if (timing.joint_amplitude) {
                chi = (*timing.joint_amplitude)(k, l);
            } else if (spacelike) {
                chi = timing.profile_a.amplitude(static_cast<std::size_t>(k)) *
                      timing.profile_b.amplitude(static_cast<std::size_t>(l));
            } else {
                chi = timing.profile_a.amplitude(static_cast<std::size_t>(k)) *
                      timing.profile_b.amplitude(static_cast<std::size_t>(k), static_cast<std::size_t>(l));
            }
            cell(k, l) = chi * grid.dt;
        }
    }

    struct Branch {
        Index index;   // record-coordinate flat index ((k dA + a) n + l) dB + b
        Complex amp;   // cell amplitude
        long long end; // bin of the last measurement
        Operator k_rho; // K rho_S
        Operator k_op;  // K
    };
    std::vector<Branch> branches;
    const Operator& rho_s = scenario.initial.matrix();
    for (Index k = 0; k < ni; ++k) {
        for (Index l = 0; l < ni; ++l) {
            if (cell(k, l) == Complex{}) continue;
            if (!spacelike && l < k) throw InvalidInput("build_timed_state: TL amplitude before t_A");
            for (Index a = 0; a < da; ++a) {
                for (Index b = 0; b < db; ++b) {
                    const Operator& pa = proj_a[static_cast<std::size_t>(a)];
                    const Operator& pb = proj_b[static_cast<std::size_t>(b)];
                    Operator kop;
                    long long end = 0;
                    if (l > k || !spacelike) { // A first, B at t_l
                        kop = pb * u(l - k) * pa * u(k);
                        end = l;
                    } else if (k > l) { // B first
                        kop = pa * u(k - l) * pb * u(l);
                        end = k;
                    } else { // same bin, joint projector
                        kop = pa * pb * u(k);
                        end = k;
                    }
                    const Index flat = ((k * da + a) * ni + l) * db + b;
                    Operator k_rho = kop * rho_s;
                    branches.push_back(Branch{flat, cell(k, l), end, std::move(k_rho), std::move(kop)});
                }
            }
        }
    }

    // rho[I, I'] = c c'* Tr[U(t_e' - t_e) K rho_S K'^dag]; the evolution after
    // the last measurement cancels by cyclicity up to U(t_e', t_e).
    std::map<long long, Operator> lag_cache;
    auto lag = [&](long long bins) -> const Operator& {
        auto it = lag_cache.find(bins);
        if (it == lag_cache.end()) it = lag_cache.emplace(bins, u(bins)).first;
        return it->second;
    };
    Operator record = Operator::Zero(total, total);
    std::vector<std::map<long long, Operator>> shifted(branches.size());
    for (std::size_t i = 0; i < branches.size(); ++i) {
        const Branch& bi = branches[i];
        for (std::size_t j = 0; j < branches.size(); ++j) {
            const Branch& bj = branches[j];
            const long long tau = bj.end - bi.end;
            auto& cache = shifted[i];
            auto it = cache.find(tau);
            if (it == cache.end()) it = cache.emplace(tau, lag(tau) * bi.k_rho).first;
            // Tr[X K'^dag] = sum_ij X_ij conj(K'_ij)
            const Complex tr = (it->second.array() * bj.k_op.conjugate().array()).sum();
            record(bi.index, bj.index) = bi.amp * std::conj(bj.amp) * tr;
        }
    }
    const Operator id = Operator::Identity(ni, ni);
    const Operator v = tensor_product(tensor_product(id, scenario.basis_a.basis()),
                                      tensor_product(id, scenario.basis_b.basis()));
    return EventState{scenario.kind, finalize(embed(record, v)), scenario.basis_a, scenario.basis_b, n};
}

EventState trace_timers(const EventState& state) {
    if (!state.timed()) return state;
    const auto n = static_cast<Index>(state.timer_bins);
    const std::array<Index, 4> dims{n, state.dim_a(), n, state.dim_b()};
    const std::array<bool, 4> keep{false, true, false, true};
    Operator reduced = partial_trace(state.rho.matrix(), dims, keep);
    return EventState{state.kind, finalize(std::move(reduced)), state.record_basis_a, state.record_basis_b, 0};
}

JointTimeDistribution time_distribution(const EventState& state, const TimeGrid& grid) {
    if (!state.timed()) throw InvalidInput("time distribution: state carries no timers");
    if (grid.n_bins != state.timer_bins) throw DimensionMismatch("time distribution: grid does not match timers");
    const auto n = static_cast<Index>(state.timer_bins);
    const std::array<Index, 4> dims{n, state.dim_a(), n, state.dim_b()};
    const std::array<bool, 4> keep{true, false, true, false};
    const Operator timers = partial_trace(state.rho.matrix(), dims, keep);
    JointTimeDistribution out{grid, state.kind, Eigen::MatrixXd(n, n)};
    for (Index k = 0; k < n; ++k) {
        for (Index l = 0; l < n; ++l) out.p(k, l) = std::max(0.0, timers(k * n + l, k * n + l).real());
    }
    return out;
}

EventState build_event_state(const EventScenario& scenario, bool timed) {
    if (timed) return build_timed_state(scenario);
    if (scenario.kind == EventKind::Timelike) {
        return scenario.timing ? build_tl_fuzzy(scenario) : build_tl_instant(scenario);
    }
    return scenario.timing ? build_sl_fuzzy(scenario) : build_sl_instant(scenario);
}

bool ConditionalDecomposition::has_lambdas() const {
    for (const auto& br : branches) {
        if (!br.omitted && !br.lambda) return false;
    }
    return !branches.empty();
}

Operator ConditionalDecomposition::reconstruct() const {
    const Index da = record_basis_a.dim();
    const Index db = record_basis_b.dim();
    Operator out = Operator::Zero(da * db, da * db);
    for (Index b = 0; b < db; ++b) {
        const auto& br = branches[static_cast<std::size_t>(b)];
        if (br.omitted) continue;
        out += br.probability * tensor_product(br.sigma.matrix(), record_basis_b.projector(b));
    }
    return out;
}

ConditionalDecomposition conditional_decomposition(const EventState& state) {
    if (state.timed()) throw InvalidInput("conditional decomposition: trace out the timers first");
    const Index da = state.dim_a();
    const Index db = state.dim_b();
    const Operator r = record_coordinates(state);
    const Operator& va = state.record_basis_a.basis();

    ConditionalDecomposition out;
    out.kind = state.kind;
    out.record_basis_a = state.record_basis_a;
    out.record_basis_b = state.record_basis_b;
    for (Index b = 0; b < db; ++b) {
        Operator block(da, da);
        for (Index a = 0; a < da; ++a) {
            for (Index ap = 0; ap < da; ++ap) block(a, ap) = r(a * db + b, ap * db + b);
        }
        ConditionalBranch br;
        br.probability = block.trace().real();
        if (br.probability < kOmittedBranch) {
            br.probability = std::max(br.probability, 0.0);
            br.omitted = true;
            br.sigma = DensityMatrix::maximally_mixed(da);
            out.branches.push_back(std::move(br));
            continue;
        }
        Operator sigma = embed(block / br.probability, va);
        sigma = 0.5 * (sigma + sigma.adjoint()).eval();
        br.sigma = DensityMatrix(sigma);
        if (state.kind == EventKind::Timelike) {
            Eigen::SelfAdjointEigenSolver<Operator> solver(br.sigma.matrix());
            if (solver.eigenvalues()(da - 1) >= 1.0 - kRankOneTolerance) {
                Ket lambda = solver.eigenvectors().col(da - 1);
                for (Index i = 0; i < da; ++i) {
                    if (std::abs(lambda(i)) > 1e-9) {
                        lambda *= std::conj(lambda(i)) / std::abs(lambda(i));
                        lambda(i) = std::abs(lambda(i));
                        break;
                    }
                }
                br.lambda = std::move(lambda);
            }
        }
        out.branches.push_back(std::move(br));
    }
    out.reconstruction_error = (out.reconstruct() - state.rho.matrix()).cwiseAbs().maxCoeff();
    return out;
}

} // namespace eventstate
