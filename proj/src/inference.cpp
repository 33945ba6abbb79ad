#include "eventstate/inference.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <string>
#include <thread>

#include "eventstate/errors.hpp"

namespace eventstate {

namespace {

constexpr double kTieTolerance = 1e-12;
constexpr double kOmittedBranch = 1e-12;
constexpr double kPriorTolerance = 1e-10;
constexpr double kEmptyOutcome = 1e-14;

using Point = std::array<double, 2>; // (theta, phi)

void require_priors(double p1, double p2) {
    if (!(p1 >= 0.0 && p1 <= 1.0 && p2 >= 0.0 && p2 <= 1.0) || std::abs(p1 + p2 - 1.0) > kPriorTolerance) {
        throw InvalidInput("Helstrom: priors must be probabilities summing to 1");
    }
}

/// Folds Bloch angles into theta in [0, pi], phi in [0, 2 pi).
Point canonical_angles(Point x) {
    constexpr double two_pi = 2 * std::numbers::pi;
    double theta = std::fmod(x[0], two_pi);
    double phi = x[1];
    if (theta < 0) theta += two_pi;
    if (theta > std::numbers::pi) {
        theta = two_pi - theta;
        phi += std::numbers::pi;
    }
    phi = std::fmod(phi, two_pi);
    if (phi < 0) phi += two_pi;
    return {theta, phi};
}

/// Nelder-Mead minimization in the (theta, phi) plane.
struct SimplexResult {
    Point x;
    double value;
};

SimplexResult nelder_mead(const std::function<double(const Point&)>& f, Point start, Point step,
                          std::size_t max_iter, double x_tol, double f_target) {
    std::array<Point, 3> xs{start, Point{start[0] + step[0], start[1]}, Point{start[0], start[1] + step[1]}};
    std::array<double, 3> fs{f(xs[0]), f(xs[1]), f(xs[2])};
    auto order = [&] {
        std::array<std::size_t, 3> idx{0, 1, 2};
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
        const std::array<Point, 3> x2{xs[idx[0]], xs[idx[1]], xs[idx[2]]};
        const std::array<double, 3> f2{fs[idx[0]], fs[idx[1]], fs[idx[2]]};
        xs = x2;
        fs = f2;
    };
    auto diameter = [&] {
        double d = 0.0;
        for (std::size_t i = 1; i < 3; ++i) d = std::max(d, std::hypot(xs[i][0] - xs[0][0], xs[i][1] - xs[0][1]));
        return d;
    };
    auto along = [](const Point& c, const Point& w, double t) {
        return Point{c[0] + t * (w[0] - c[0]), c[1] + t * (w[1] - c[1])};
    };
    order();
    for (std::size_t it = 0; it < max_iter; ++it) {
        if (fs[0] <= f_target || diameter() < x_tol) break;
        const Point centroid{(xs[0][0] + xs[1][0]) / 2, (xs[0][1] + xs[1][1]) / 2};
        const Point reflected = along(centroid, xs[2], -1.0);
        const double fr = f(reflected);
        if (fr < fs[0]) {
            const Point expanded = along(centroid, xs[2], -2.0);
            const double fe = f(expanded);
            if (fe < fr) {
                xs[2] = expanded;
                fs[2] = fe;
            } else {
                xs[2] = reflected;
                fs[2] = fr;
            }
        } else if (fr < fs[1]) {
            xs[2] = reflected;
            fs[2] = fr;
        } else {
            const bool outside = fr < fs[2];
            const Point contracted = along(centroid, outside ? reflected : xs[2], 0.5);
            const double fc = f(contracted);
            if (fc < std::min(fr, fs[2])) {
                xs[2] = contracted;
                fs[2] = fc;
            } else {
                for (std::size_t i = 1; i < 3; ++i) {
                    xs[i] = along(xs[0], xs[i], 0.5);
                    fs[i] = f(xs[i]);
                }
            }
        }
        order();
    }
    return {xs[0], fs[0]};
}

/// Values of f on the theta-major Bloch grid, theta in [0, pi] inclusive and
/// phi in [0, 2 pi). Filled in parallel; the layout does not depend on the
/// worker count.
std::vector<double> evaluate_bloch_grid(const std::function<double(const Point&)>& f, const SearchPolicy& search) {
    if (search.theta_steps < 2 || search.phi_steps < 1) throw InvalidInput("search grid too small");
    const std::size_t total = search.theta_steps * search.phi_steps;
    std::vector<double> values(total);
    auto point = [&](std::size_t idx) {
        const std::size_t i = idx / search.phi_steps;
        const std::size_t j = idx % search.phi_steps;
        return Point{std::numbers::pi * static_cast<double>(i) / static_cast<double>(search.theta_steps - 1),
                     2 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(search.phi_steps)};
    };
    const std::size_t workers = std::min(search_threads(search), total);
    auto run = [&](std::size_t begin, std::size_t end) {
        for (std::size_t idx = begin; idx < end; ++idx) values[idx] = f(point(idx));
    };
    if (workers <= 1) {
        run(0, total);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (total + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(total, begin + chunk);
            if (begin < end) pool.emplace_back(run, begin, end);
        }
        for (auto& t : pool) t.join();
    }
    return values;
}

Point grid_point(std::size_t idx, const SearchPolicy& search) {
    const std::size_t i = idx / search.phi_steps;
    const std::size_t j = idx % search.phi_steps;
    return {std::numbers::pi * static_cast<double>(i) / static_cast<double>(search.theta_steps - 1),
            2 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(search.phi_steps)};
}

/// Index of the smallest value; near-ties (1e-12) keep the earlier index,
/// i.e. the smaller polar angle.
std::size_t argmin_with_ties(const std::vector<double>& values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] < values[best] - kTieTolerance) best = i;
    }
    return best;
}

Operator positive_projector(const Operator& delta) {
    Eigen::SelfAdjointEigenSolver<Operator> solver(0.5 * (delta + delta.adjoint()));
    Operator p = Operator::Zero(delta.rows(), delta.cols());
    for (Index i = 0; i < delta.rows(); ++i) {
        if (solver.eigenvalues()(i) > kTieTolerance) {
            p += solver.eigenvectors().col(i) * solver.eigenvectors().col(i).adjoint();
        }
    }
    return p;
}

std::optional<BlochAngles> rank_one_angles(const Operator& p) {
    if (p.rows() != 2 || std::abs(p.trace().real() - 1.0) > 1e-8) return std::nullopt;
    Eigen::SelfAdjointEigenSolver<Operator> solver(p);
    return bloch_angles(solver.eigenvectors().col(1));
}

} // namespace

std::size_t search_threads(const SearchPolicy& search) {
    if (search.threads > 0) return search.threads;
    if (const char* env = std::getenv("EVENTSTATE_NUM_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

ProjectiveMeasurement::ProjectiveMeasurement(std::vector<Operator> projectors, const NumericPolicy& policy)
    : projectors_(std::move(projectors)) {
    if (projectors_.empty()) throw InvalidInput("projective measurement: no projectors");
    const Index d = projectors_.front().rows();
    Operator sum = Operator::Zero(d, d);
    for (std::size_t i = 0; i < projectors_.size(); ++i) {
        const Operator& p = projectors_[i];
        if (p.rows() != d || p.cols() != d) throw DimensionMismatch("projective measurement: mixed dimensions");
        sum += p;
        for (std::size_t j = 0; j <= i; ++j) {
            const Operator expect = (i == j) ? p : Operator::Zero(d, d);
            if ((p * projectors_[j] - expect).cwiseAbs().maxCoeff() > policy.orthonormality) {
                throw InvalidInput("projective measurement: projectors are not orthogonal idempotents");
            }
        }
    }
    if ((sum - Operator::Identity(d, d)).cwiseAbs().maxCoeff() > policy.orthonormality) {
        throw InvalidInput("projective measurement: projectors do not sum to identity");
    }
}

ProjectiveMeasurement ProjectiveMeasurement::from_basis(const MeasurementModel& basis) {
    std::vector<Operator> ps;
    for (Index i = 0; i < basis.dim(); ++i) ps.push_back(basis.projector(i));
    return ProjectiveMeasurement(std::move(ps));
}

ProjectiveMeasurement ProjectiveMeasurement::bloch(double theta, double phi) {
    return from_basis(MeasurementModel::bloch(theta, phi));
}

HelstromResult helstrom_success(double p1, const DensityMatrix& s1, double p2, const DensityMatrix& s2) {
    require_priors(p1, p2);
    if (s1.dim() != s2.dim()) throw DimensionMismatch("Helstrom: hypotheses have different dimensions");
    const Operator delta = p1 * s1.matrix() - p2 * s2.matrix();
    const Eigen::VectorXd spectrum = hermitian_eigenvalues(delta);
    HelstromResult out;
    out.p_suc = std::min(1.0, 0.5 * (1.0 + spectrum.cwiseAbs().sum()));
    out.optimal_projector = positive_projector(delta);
    return out;
}

double helstrom_pure(double p1, const Ket& lambda1, double p2, const Ket& lambda2) {
    require_priors(p1, p2);
    require_unit_ket(lambda1, "Helstrom hypothesis 1");
    require_unit_ket(lambda2, "Helstrom hypothesis 2");
    if (lambda1.size() != lambda2.size()) throw DimensionMismatch("Helstrom: hypotheses have different dimensions");
    const double overlap2 = std::norm(lambda1.dot(lambda2));
    return 0.5 * (1.0 + std::sqrt(std::max(0.0, 1.0 - 4.0 * p1 * p2 * overlap2)));
}

Prediction predict_future_outcome(const ConditionalDecomposition& decomp) {
    Prediction out;
    const auto& br = decomp.branches;
    if (br.size() == 2) {
        const HelstromResult h = helstrom_success(br[0].probability, br[0].sigma, br[1].probability, br[1].sigma);
        out.p_suc = h.p_suc;
        const Index d = h.optimal_projector.rows();
        out.measurement = ProjectiveMeasurement({h.optimal_projector, Operator::Identity(d, d) - h.optimal_projector});
        out.bloch = rank_one_angles(h.optimal_projector);
        if (decomp.kind == EventKind::Timelike && decomp.has_lambdas()) {
            if (br[0].omitted || br[1].omitted) {
                out.p_suc = 1.0;
            } else {
                out.p_suc = helstrom_pure(br[0].probability, *br[0].lambda, br[1].probability, *br[1].lambda);
            }
            out.used_pure_formula = true;
        }
        return out;
    }
    out.partial = true;
    for (std::size_t i = 0; i < br.size(); ++i) {
        for (std::size_t j = i + 1; j < br.size(); ++j) {
            if (br[i].omitted || br[j].omitted) continue;
            const double total = br[i].probability + br[j].probability;
            const double pi = br[i].probability / total;
            const HelstromResult h = helstrom_success(pi, br[i].sigma, 1.0 - pi, br[j].sigma);
            out.pairwise.push_back(PairwiseBound{i, j, h.p_suc});
        }
    }
    return out;
}

double entropy_reduction(const EventState& state, const ProjectiveMeasurement& measurement) {
    const EventState detectors = trace_timers(state);
    const Index da = detectors.dim_a();
    const Index db = detectors.dim_b();
    if (measurement.dim() != da) throw DimensionMismatch("entropy reduction: measurement does not act on D_A");
    const Operator& rho = detectors.rho.matrix();
    const double s_b = entropy_bits(hermitian_eigenvalues(partial_trace(rho, da, db, Keep::B)));
    const Operator id_b = Operator::Identity(db, db);
    double conditional = 0.0;
    for (const Operator& p : measurement.projectors()) {
        const Operator lift = tensor_product(p, id_b);
        const Operator post = lift * rho * lift;
        const double prob = post.trace().real();
        if (prob <= kEmptyOutcome) continue;
        const Operator rho_b = partial_trace(post, da, db, Keep::B) / prob;
        conditional += prob * entropy_bits(hermitian_eigenvalues(rho_b));
    }
    return s_b - conditional;
}

ClassicalCorrelation classical_correlation(const EventState& state, const SearchPolicy& search) {
    const EventState detectors = trace_timers(state);
    const Index da = detectors.dim_a();
    if (!search.candidates.empty()) {
        std::size_t best = 0;
        double best_value = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < search.candidates.size(); ++i) {
            const double v = entropy_reduction(detectors, search.candidates[i]);
            if (v > best_value + kTieTolerance) {
                best_value = v;
                best = i;
            }
        }
        ClassicalCorrelation out{std::max(0.0, best_value), search.candidates[best], std::nullopt};
        if (da == 2 && search.candidates[best].projectors().size() == 2) {
            out.bloch = rank_one_angles(search.candidates[best].projectors().front());
        }
        return out;
    }
    if (da != 2) {
        throw InvalidInput("classical correlation: D_A of dimension " + std::to_string(da) +
                           " needs an explicit list of candidate measurements");
    }

    auto negative = [&](const Point& x) {
        return -entropy_reduction(detectors, ProjectiveMeasurement::bloch(x[0], x[1]));
    };
    const std::vector<double> values = evaluate_bloch_grid(negative, search);
    const std::size_t idx = argmin_with_ties(values);
    Point best = grid_point(idx, search);
    double best_value = values[idx];

    const Point step{std::numbers::pi / static_cast<double>(search.theta_steps - 1),
                     2 * std::numbers::pi / static_cast<double>(search.phi_steps)};
    const SimplexResult refined = nelder_mead(negative, best, step, search.max_iterations, search.tolerance,
                                              -std::numeric_limits<double>::infinity());
    if (refined.value < best_value - kTieTolerance) {
        best = canonical_angles(refined.x);
        best_value = refined.value;
    }
    ClassicalCorrelation out{std::max(0.0, -best_value), ProjectiveMeasurement::bloch(best[0], best[1]),
                             BlochAngles{best[0], best[1]}};
    return out;
}

DeterminismCheck determinism_check(const ConditionalDecomposition& decomp) {
    if (decomp.kind != EventKind::Timelike || !decomp.has_lambdas()) {
        throw InvalidInput("determinism check needs a TL decomposition with pure conditional states");
    }
    std::vector<const Ket*> lambdas;
    for (const auto& br : decomp.branches) {
        if (!br.omitted) lambdas.push_back(&*br.lambda);
    }
    const auto n = static_cast<Index>(lambdas.size());
    DeterminismCheck out;
    out.gram = Eigen::MatrixXd(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            out.gram(i, j) = std::abs(lambdas[static_cast<std::size_t>(i)]->dot(*lambdas[static_cast<std::size_t>(j)]));
            if (i != j) out.max_off_diagonal = std::max(out.max_off_diagonal, out.gram(i, j));
        }
    }
    out.deterministic = out.max_off_diagonal < kDeterminismTolerance;
    return out;
}

BasisSearchResult find_deterministic_basis(const Ket& initial, const Operator& evolution,
                                           const MeasurementModel& basis_b, const SearchPolicy& search) {
    if (initial.size() != 2 || basis_b.dim() != 2 || evolution.rows() != 2 || evolution.cols() != 2) {
        throw InvalidInput("deterministic basis search is implemented for qubits only");
    }
    require_unit_ket(initial, "initial state");
    require_unitary(evolution, "evolution");

    // Largest normalized overlap |<lambda_i|lambda_j>| for the A basis at x;
    // an outcome of B with zero probability leaves nothing to discriminate.
    auto residual = [&](const Point& x) {
        const MeasurementModel a = MeasurementModel::bloch(x[0], x[1]);
        std::array<Ket, 2> v{Ket::Zero(2), Ket::Zero(2)};
        for (Index b = 0; b < 2; ++b) {
            for (Index i = 0; i < 2; ++i) {
                const Complex amp = basis_b.ket(b).dot(evolution * a.ket(i)) * a.ket(i).dot(initial);
                v[static_cast<std::size_t>(b)] += amp * a.ket(i);
            }
        }
        const double p0 = v[0].squaredNorm();
        const double p1 = v[1].squaredNorm();
        if (p0 < kOmittedBranch || p1 < kOmittedBranch) return 0.0;
        return std::abs(v[0].dot(v[1])) / std::sqrt(p0 * p1);
    };

    const std::vector<double> values = evaluate_bloch_grid(residual, search);
    const std::size_t idx = argmin_with_ties(values);
    Point best = grid_point(idx, search);
    double best_value = values[idx];
    const double target = std::min(search.tolerance, kDeterminismTolerance) * 1e-2;
    if (best_value > target) {
        const Point step{std::numbers::pi / static_cast<double>(search.theta_steps - 1),
                         2 * std::numbers::pi / static_cast<double>(search.phi_steps)};
        const SimplexResult refined = nelder_mead(residual, best, step, search.max_iterations, 1e-15, target);
        if (refined.value < best_value) {
            best = canonical_angles(refined.x);
            best_value = refined.value;
        }
    }
    MeasurementModel basis = MeasurementModel::bloch(best[0], best[1]);
    if (best_value < kDeterminismTolerance) {
        return DeterministicBasis{std::move(basis), BlochAngles{best[0], best[1]}, best_value};
    }
    return BasisNotFound{best_value, std::move(basis)};
}

} // namespace eventstate
