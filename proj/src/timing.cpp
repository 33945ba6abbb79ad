#include "eventstate/timing.hpp"

#include <cmath>
#include <sstream>

#include "eventstate/errors.hpp"

namespace eventstate {

namespace {

constexpr double kProfileTolerance = 1e-6;

double row_mass(const Eigen::MatrixXcd& amps, Index row, double dt) {
    return amps.row(row).cwiseAbs2().sum() * dt;
}

void require_same_grid(const TimeGrid& a, const TimeGrid& b, std::string_view what) {
    if (!a.matches(b)) throw InvalidInput(std::string(what) + ": time grids differ");
}

void require_table_size(const TimeGrid& grid, std::string_view what) {
    if (grid.n_bins > kMaxTableBins) {
        throw InvalidInput(std::string(what) + ": " + std::to_string(grid.n_bins) + " bins exceed the table limit of " +
                           std::to_string(kMaxTableBins) + "; use a coarser grid");
    }
}

} // namespace

std::string to_string(EventKind kind) {
    return kind == EventKind::Spacelike ? "SL" : "TL";
}

EventKind event_kind_from_string(std::string_view s) {
    if (s == "SL") return EventKind::Spacelike;
    if (s == "TL") return EventKind::Timelike;
    throw InvalidInput("unknown event kind '" + std::string(s) + "' (expected SL or TL)");
}

void TimeGrid::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt) || !std::isfinite(t0)) {
        throw InvalidInput("time grid: dt must be positive and finite");
    }
    if (n_bins < 2) throw InvalidInput("time grid: need at least 2 bins");
}

bool TimeGrid::matches(const TimeGrid& other, double tol) const {
    return n_bins == other.n_bins && std::abs(t0 - other.t0) <= tol &&
           std::abs(dt - other.dt) <= tol * std::max(1.0, std::abs(dt));
}

TimeGrid grid_for_exponential(double gamma, double dt, double tail_mass, double t0) {
    if (!(gamma > 0.0)) throw InvalidInput("exponential grid: gamma must be positive");
    if (!(dt > 0.0)) throw InvalidInput("exponential grid: dt must be positive");
    if (!(tail_mass > 0.0 && tail_mass < 1.0)) throw InvalidInput("exponential grid: tail mass must lie in (0, 1)");
    const double span = std::log(1.0 / tail_mass) / gamma;
    const double bins = std::ceil(span / dt);
    if (!(bins <= static_cast<double>(kMaxGridBins))) {
        throw InvalidInput("exponential grid: " + std::to_string(bins) + " bins exceed the limit of " +
                           std::to_string(kMaxGridBins) + "; increase dt");
    }
    const auto n = static_cast<std::size_t>(bins);
    return TimeGrid{t0, dt, std::max<std::size_t>(n, 2)};
}

TimingProfile::TimingProfile(TimeGrid grid, ProfileKind kind, Eigen::MatrixXcd amps)
    : grid_(grid), kind_(kind), amps_(std::move(amps)) {}

TimingProfile TimingProfile::marginal(const TimeGrid& grid, Eigen::VectorXcd amplitudes) {
    grid.validate();
    if (static_cast<std::size_t>(amplitudes.size()) != grid.n_bins) {
        throw DimensionMismatch("marginal profile: amplitude count does not match grid");
    }
    if (!all_finite(amplitudes)) throw InvalidInput("marginal profile: non-finite amplitude");
    return TimingProfile(grid, ProfileKind::Marginal, std::move(amplitudes));
}

TimingProfile TimingProfile::conditional(const TimeGrid& grid, Eigen::MatrixXcd amplitudes) {
    grid.validate();
    require_table_size(grid, "conditional profile");
    const auto n = static_cast<Index>(grid.n_bins);
    if (amplitudes.rows() != n || amplitudes.cols() != n) {
        throw DimensionMismatch("conditional profile: expected an n_bins x n_bins table");
    }
    if (!all_finite(amplitudes)) throw InvalidInput("conditional profile: non-finite amplitude");
    for (Index k = 0; k < n; ++k) {
        for (Index l = 0; l < k; ++l) {
            if (amplitudes(k, l) != Complex{}) {
                throw InvalidInput("conditional profile: nonzero amplitude before t_A (row " +
                                   std::to_string(k) + ", column " + std::to_string(l) + ")");
            }
        }
    }
    return TimingProfile(grid, ProfileKind::Conditional, std::move(amplitudes));
}

Complex TimingProfile::amplitude(std::size_t k) const {
    if (kind_ != ProfileKind::Marginal) throw InvalidInput("profile is conditional");
    if (k >= grid_.n_bins) throw InvalidInput("profile: bin index out of range");
    return amps_(static_cast<Index>(k), 0);
}

Complex TimingProfile::amplitude(std::size_t k, std::size_t l) const {
    if (kind_ != ProfileKind::Conditional) throw InvalidInput("profile is marginal");
    if (k >= grid_.n_bins || l >= grid_.n_bins) throw InvalidInput("profile: bin index out of range");
    return amps_(static_cast<Index>(k), static_cast<Index>(l));
}

Eigen::VectorXd TimingProfile::bin_masses() const {
    if (kind_ != ProfileKind::Marginal) throw InvalidInput("bin masses need a marginal profile");
    return amps_.col(0).cwiseAbs2() * grid_.dt;
}

Eigen::MatrixXd TimingProfile::conditional_masses() const {
    if (kind_ != ProfileKind::Conditional) throw InvalidInput("conditional masses need a conditional profile");
    return amps_.cwiseAbs2() * grid_.dt;
}

double TimingProfile::normalization_defect() const {
    if (kind_ == ProfileKind::Marginal) return std::abs(amps_.cwiseAbs2().sum() * grid_.dt - 1.0);
    double worst = 0.0;
    for (Index k = 0; k < amps_.rows(); ++k) worst = std::max(worst, std::abs(row_mass(amps_, k, grid_.dt) - 1.0));
    return worst;
}

TimingProfile TimingProfile::normalized() const {
    Eigen::MatrixXcd out = amps_;
    if (kind_ == ProfileKind::Marginal) {
        const double mass = amps_.cwiseAbs2().sum() * grid_.dt;
        if (!(mass > 0.0)) throw InvalidInput("cannot normalize a zero profile");
        out /= std::sqrt(mass);
    } else {
        for (Index k = 0; k < out.rows(); ++k) {
            const double mass = row_mass(out, k, grid_.dt);
            if (!(mass > 0.0)) throw InvalidInput("cannot normalize a zero conditional row");
            out.row(k) /= std::sqrt(mass);
        }
    }
    return TimingProfile(grid_, kind_, std::move(out));
}

ExponentialProfile exponential_profile(double gamma, const TimeGrid& grid) {
    grid.validate();
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidInput("exponential profile: gamma must be positive");
    Eigen::VectorXcd amps(static_cast<Index>(grid.n_bins));
    for (std::size_t k = 0; k < grid.n_bins; ++k) {
        amps(static_cast<Index>(k)) = std::sqrt(gamma) * std::exp(-gamma * (grid.time(k) - grid.t0) / 2.0);
    }
    ExponentialProfile out{TimingProfile::marginal(grid, std::move(amps)).normalized(), 0.0, {}};
    out.truncated_mass = std::exp(-gamma * grid.dt * static_cast<double>(grid.n_bins));
    if (gamma * grid.dt > 0.1) {
        std::ostringstream os;
        os << "coarse grid: gamma*dt = " << gamma * grid.dt << " exceeds 0.1";
        out.warnings.push_back(os.str());
    }
    if (out.truncated_mass > kProfileTolerance) {
        std::ostringstream os;
        os << "grid truncates exponential tail mass " << out.truncated_mass << " (renormalized)";
        out.warnings.push_back(os.str());
    }
    return out;
}

TimingProfile delta_profile(const TimeGrid& grid, std::size_t bin) {
    grid.validate();
    if (bin >= grid.n_bins) throw InvalidInput("delta profile: bin out of range");
    Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(static_cast<Index>(grid.n_bins));
    amps(static_cast<Index>(bin)) = 1.0 / std::sqrt(grid.dt);
    return TimingProfile::marginal(grid, std::move(amps));
}

TimingProfile conditional_exponential_profile(double gamma, const TimeGrid& grid) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidInput("conditional exponential: gamma must be positive");
    grid.validate();
    require_table_size(grid, "conditional exponential");
    Eigen::VectorXcd kernel(static_cast<Index>(grid.n_bins));
    for (std::size_t j = 0; j < grid.n_bins; ++j) {
        kernel(static_cast<Index>(j)) = std::sqrt(gamma) * std::exp(-gamma * grid.dt * static_cast<double>(j) / 2.0);
    }
    return conditional_from_kernel(grid, kernel);
}

TimingProfile conditional_delta_profile(const TimeGrid& grid, std::size_t lag_bins) {
    grid.validate();
    require_table_size(grid, "conditional delta");
    const auto n = static_cast<Index>(grid.n_bins);
    Eigen::MatrixXcd amps = Eigen::MatrixXcd::Zero(n, n);
    for (Index k = 0; k < n; ++k) {
        const Index l = std::min<Index>(k + static_cast<Index>(lag_bins), n - 1);
        amps(k, l) = 1.0 / std::sqrt(grid.dt);
    }
    return TimingProfile::conditional(grid, std::move(amps));
}

TimingProfile conditional_from_kernel(const TimeGrid& grid, const Eigen::VectorXcd& kernel) {
    grid.validate();
    require_table_size(grid, "conditional kernel");
    if (kernel.size() == 0) throw InvalidInput("conditional kernel is empty");
    const auto n = static_cast<Index>(grid.n_bins);
    Eigen::MatrixXcd amps = Eigen::MatrixXcd::Zero(n, n);
    for (Index k = 0; k < n; ++k) {
        const Index len = std::min<Index>(kernel.size(), n - k);
        amps.row(k).segment(k, len) = kernel.head(len).transpose();
        const double mass = row_mass(amps, k, grid.dt);
        if (mass > 0.0) {
            amps.row(k) /= std::sqrt(mass);
        } else {
            // kernel support lies entirely past the grid end: detect in the last bin
            amps(k, n - 1) = 1.0 / std::sqrt(grid.dt);
        }
    }
    return TimingProfile::conditional(grid, std::move(amps));
}

BranchingSchedule BranchingSchedule::constant(const TimeGrid& grid, double dp) {
    BranchingSchedule s{grid, std::vector<double>(grid.n_bins, dp), std::vector<double>(grid.n_bins, 0.0)};
    s.validate();
    return s;
}

BranchingSchedule BranchingSchedule::from_rate(double gamma, const TimeGrid& grid) {
    if (!(gamma > 0.0)) throw InvalidInput("branching schedule: gamma must be positive");
    return constant(grid, gamma * grid.dt);
}

void BranchingSchedule::validate() const {
    grid.validate();
    if (step_probs.size() != grid.n_bins || step_phases.size() != grid.n_bins) {
        throw DimensionMismatch("branching schedule: step arrays do not match grid");
    }
    for (double dp : step_probs) {
        if (!(dp >= 0.0 && dp < 1.0)) throw InvalidInput("branching schedule: step probability outside [0, 1)");
    }
    for (double phi : step_phases) {
        if (!std::isfinite(phi)) throw InvalidInput("branching schedule: non-finite phase");
    }
}

std::vector<std::string> BranchingSchedule::warnings() const {
    std::vector<std::string> out;
    std::size_t coarse = 0;
    for (double dp : step_probs) coarse += dp > 0.1 ? 1 : 0;
    if (coarse > 0) out.push_back(std::to_string(coarse) + " step(s) with detection probability above 0.1");
    return out;
}

Eigen::VectorXcd branching_amplitudes(const BranchingSchedule& schedule) {
    schedule.validate();
    const std::size_t n = schedule.grid.n_bins;
    Eigen::VectorXcd out(static_cast<Index>(n));
    Complex undetected{1.0, 0.0};
    for (std::size_t k = 0; k < n; ++k) {
        out(static_cast<Index>(k)) = std::sqrt(schedule.step_probs[k]) * undetected;
        undetected *= std::sqrt(1.0 - schedule.step_probs[k]) * std::polar(1.0, schedule.step_phases[k]);
    }
    return out;
}

Complex branching_amplitude(const BranchingSchedule& schedule, std::size_t k) {
    schedule.validate();
    if (k >= schedule.grid.n_bins) throw InvalidInput("branching amplitude: step index out of range");
    Complex undetected{1.0, 0.0};
    for (std::size_t l = 0; l < k; ++l) {
        undetected *= std::sqrt(1.0 - schedule.step_probs[l]) * std::polar(1.0, schedule.step_phases[l]);
    }
    return std::sqrt(schedule.step_probs[k]) * undetected;
}

double survival_probability(const BranchingSchedule& schedule) {
    schedule.validate();
    double q = 1.0;
    for (double dp : schedule.step_probs) q *= 1.0 - dp;
    return q;
}

ContinuumCheck continuum_limit_check(const BranchingSchedule& schedule, const TimingProfile& profile) {
    schedule.validate();
    if (!profile.is_marginal()) throw InvalidInput("continuum check needs a marginal profile");
    require_same_grid(schedule.grid, profile.grid(), "continuum check");

    const Eigen::VectorXcd discrete = branching_amplitudes(schedule);
    const double dt = schedule.grid.dt;
    ContinuumCheck out;
    double cumulative = 0.0;
    for (std::size_t k = 0; k < schedule.grid.n_bins; ++k) {
        if (cumulative >= 0.99) break;
        const double lhs = std::norm(discrete(static_cast<Index>(k))) / dt;
        const double rhs = std::norm(profile.amplitude(k));
        double err = 0.0;
        if (rhs > 0.0) {
            err = std::abs(lhs - rhs) / rhs;
        } else if (lhs > 0.0) {
            err = std::numeric_limits<double>::infinity();
        }
        out.max_relative_error = std::max(out.max_relative_error, err);
        ++out.bins_compared;
        cumulative += lhs * dt;
    }
    return out;
}

Eigen::VectorXd JointTimeDistribution::times() const {
    Eigen::VectorXd t(static_cast<Index>(grid.n_bins));
    for (std::size_t k = 0; k < grid.n_bins; ++k) t(static_cast<Index>(k)) = grid.time(k);
    return t;
}

JointTimeDistribution JointTimeDistribution::shifted(double offset) const {
    JointTimeDistribution out = *this;
    out.grid.t0 += offset;
    return out;
}

JointTimeDistribution joint_time_distribution(const TimingProfile& a, const TimingProfile& b, EventKind kind) {
    if (!a.is_marginal()) throw InvalidInput("joint time distribution: profile A must be marginal");
    require_same_grid(a.grid(), b.grid(), "joint time distribution");
    require_table_size(a.grid(), "joint time distribution");
    if (kind == EventKind::Spacelike && !b.is_marginal()) {
        throw InvalidInput("joint time distribution: SL events need two marginal profiles");
    }
    if (kind == EventKind::Timelike && b.is_marginal()) {
        throw InvalidInput("joint time distribution: TL events need a conditional profile for B");
    }
    if (a.normalization_defect() > kProfileTolerance || b.normalization_defect() > kProfileTolerance) {
        throw InvalidInput("joint time distribution: profiles are not normalized");
    }
    JointTimeDistribution out{a.grid(), kind, {}};
    const Eigen::VectorXd pa = a.bin_masses();
    if (kind == EventKind::Spacelike) {
        out.p = pa * b.bin_masses().transpose();
    } else {
        out.p = pa.asDiagonal() * b.conditional_masses();
    }
    return out;
}

JointTimeDistribution joint_time_distribution(const TimeGrid& grid, const Eigen::MatrixXcd& joint_amplitude,
                                              EventKind kind) {
    grid.validate();
    require_table_size(grid, "joint time distribution");
    const auto n = static_cast<Index>(grid.n_bins);
    if (joint_amplitude.rows() != n || joint_amplitude.cols() != n) {
        throw DimensionMismatch("joint amplitude table does not match grid");
    }
    JointTimeDistribution out{grid, kind, joint_amplitude.cwiseAbs2() * grid.dt * grid.dt};
    if (kind == EventKind::Timelike) {
        for (Index k = 0; k < n; ++k) {
            for (Index l = 0; l < k; ++l) {
                if (out.p(k, l) != 0.0) throw InvalidInput("TL joint amplitude has mass before t_A");
            }
        }
    }
    if (std::abs(out.total() - 1.0) > kProfileTolerance) {
        throw InvalidInput("joint amplitude table is not normalized");
    }
    return out;
}

} // namespace eventstate
