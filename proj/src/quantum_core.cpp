#include "eventstate/quantum_core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "eventstate/errors.hpp"

namespace eventstate {

namespace {

constexpr Complex kI{0.0, 1.0};

void require_square(const Operator& op, std::string_view what) {
    if (op.rows() == 0 || op.rows() != op.cols()) {
        throw DimensionMismatch(std::string(what) + ": expected a non-empty square matrix, got " +
                                std::to_string(op.rows()) + "x" + std::to_string(op.cols()));
    }
}

} // namespace

const NumericPolicy& default_policy() {
    static const NumericPolicy policy{};
    return policy;
}

std::string DensityReport::summary() const {
    std::ostringstream os;
    os << (passed() ? "pass" : "fail") << " (hermiticity defect " << hermiticity_defect
       << ", trace defect " << trace_defect << ", min eigenvalue " << min_eigenvalue;
    if (!finite) os << ", non-finite entries";
    os << ")";
    return os.str();
}

bool all_finite(const Operator& op) {
    return op.real().allFinite() && op.imag().allFinite();
}

double hermiticity_defect(const Operator& op) {
    if (op.rows() != op.cols()) return std::numeric_limits<double>::infinity();
    return (op - op.adjoint()).cwiseAbs().maxCoeff();
}

double unitarity_defect(const Operator& op) {
    if (op.rows() != op.cols() || op.rows() == 0) return std::numeric_limits<double>::infinity();
    return (op.adjoint() * op - Operator::Identity(op.rows(), op.cols())).cwiseAbs().maxCoeff();
}

bool is_unitary(const Operator& op, double tol) {
    return all_finite(op) && unitarity_defect(op) <= tol;
}

void require_unitary(const Operator& op, std::string_view what, const NumericPolicy& policy) {
    require_square(op, what);
    const double defect = unitarity_defect(op);
    if (!all_finite(op) || !(defect <= policy.unitarity)) {
        std::ostringstream os;
        os << what << ": not unitary (max |U^dag U - I| = " << defect << ")";
        throw InvalidInput(os.str());
    }
}

void require_unit_ket(const Ket& psi, std::string_view what, const NumericPolicy& policy) {
    if (psi.size() == 0) throw DimensionMismatch(std::string(what) + ": empty ket");
    const double n = psi.norm();
    if (!std::isfinite(n) || std::abs(n - 1.0) > policy.normalization) {
        std::ostringstream os;
        os << what << ": ket norm " << n << " differs from 1";
        throw InvalidInput(os.str());
    }
}

DensityReport validate_density(const Operator& op, const NumericPolicy& policy) {
    DensityReport r;
    if (op.rows() == 0 || op.rows() != op.cols()) {
        r.finite = false;
        r.hermitian = r.unit_trace = r.positive = false;
        r.hermiticity_defect = r.trace_defect = std::numeric_limits<double>::infinity();
        r.min_eigenvalue = -std::numeric_limits<double>::infinity();
        return r;
    }
    r.finite = all_finite(op);
    if (!r.finite) {
        r.hermitian = r.unit_trace = r.positive = false;
        r.hermiticity_defect = r.trace_defect = std::numeric_limits<double>::infinity();
        r.min_eigenvalue = -std::numeric_limits<double>::infinity();
        return r;
    }
    r.hermiticity_defect = hermiticity_defect(op);
    r.trace_defect = std::abs(op.trace() - 1.0);
    r.min_eigenvalue = hermitian_eigenvalues(op).minCoeff();
    r.hermitian = r.hermiticity_defect <= policy.hermiticity;
    r.unit_trace = r.trace_defect <= policy.trace;
    r.positive = r.min_eigenvalue >= -policy.eigenvalue_floor;
    return r;
}

DensityMatrix::DensityMatrix(Operator m, const NumericPolicy& policy) : m_(std::move(m)) {
    const DensityReport report = validate_density(m_, policy);
    if (!report.passed()) throw InvalidInput("invalid density matrix: " + report.summary());
}

DensityMatrix DensityMatrix::pure(const Ket& psi) {
    require_unit_ket(psi, "pure state");
    return DensityMatrix(psi * psi.adjoint());
}

DensityMatrix DensityMatrix::maximally_mixed(Index dim) {
    if (dim < 1) throw DimensionMismatch("maximally mixed state needs dim >= 1");
    return DensityMatrix(Operator::Identity(dim, dim) / static_cast<double>(dim));
}

MeasurementModel::MeasurementModel(Operator basis, std::vector<double> labels,
                                   const NumericPolicy& policy)
    : basis_(std::move(basis)), labels_(std::move(labels)) {
    require_square(basis_, "measurement basis");
    if (static_cast<Index>(labels_.size()) != basis_.cols()) {
        throw DimensionMismatch("measurement basis: " + std::to_string(basis_.cols()) +
                                " kets but " + std::to_string(labels_.size()) + " labels");
    }
    const double defect = unitarity_defect(basis_);
    if (!all_finite(basis_) || !(defect <= policy.orthonormality)) {
        std::ostringstream os;
        os << "measurement basis: kets are not orthonormal (max |<i|j> - delta_ij| = " << defect << ")";
        throw InvalidInput(os.str());
    }
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (!std::isfinite(labels_[i])) throw InvalidInput("measurement basis: non-finite label");
        for (std::size_t j = 0; j < i; ++j) {
            if (labels_[i] == labels_[j]) throw InvalidInput("measurement basis: duplicate outcome label");
        }
    }
}

MeasurementModel MeasurementModel::named(std::string_view name) {
    // Textbook phases: |-z> = |1>, |+-x> = (|0> +- |1>)/sqrt2, |+-y> = (|0> +- i|1>)/sqrt2.
    const double r = 1.0 / std::sqrt(2.0);
    Operator b(2, 2);
    if (name == "Sz") {
        b = Operator::Identity(2, 2);
    } else if (name == "Sx") {
        b << r, r, r, -r;
    } else if (name == "Sy") {
        b << r, r, Complex(0, r), Complex(0, -r);
    } else {
        throw InvalidInput("unknown named basis '" + std::string(name) + "' (expected Sz, Sx or Sy)");
    }
    return MeasurementModel(std::move(b), {1.0, -1.0});
}

Ket bloch_ket(double theta, double phi) {
    Ket k(2);
    k << std::cos(theta / 2), std::exp(kI * phi) * std::sin(theta / 2);
    return k;
}

MeasurementModel MeasurementModel::bloch(double theta, double phi) {
    Operator b(2, 2);
    b.col(0) = bloch_ket(theta, phi);
    b(0, 1) = std::sin(theta / 2);
    b(1, 1) = -std::exp(kI * phi) * std::cos(theta / 2);
    return MeasurementModel(std::move(b), {1.0, -1.0});
}

MeasurementModel MeasurementModel::computational(Index dim) {
    std::vector<double> labels(static_cast<std::size_t>(dim));
    for (Index i = 0; i < dim; ++i) labels[static_cast<std::size_t>(i)] = static_cast<double>(i);
    return MeasurementModel(Operator::Identity(dim, dim), std::move(labels));
}

Operator MeasurementModel::projector(Index i) const {
    return basis_.col(i) * basis_.col(i).adjoint();
}

Operator MeasurementModel::observable() const {
    Operator obs = Operator::Zero(dim(), dim());
    for (Index i = 0; i < dim(); ++i) obs += labels_[static_cast<std::size_t>(i)] * projector(i);
    return obs;
}

bool MeasurementModel::same_basis(const MeasurementModel& other, double tol) const {
    if (other.dim() != dim() || other.labels_ != labels_) return false;
    for (Index i = 0; i < dim(); ++i) {
        // |<a|b>| = 1 iff equal up to phase for unit kets
        if (std::abs(std::abs(basis_.col(i).dot(other.basis_.col(i))) - 1.0) > tol) return false;
    }
    return true;
}

BlochAngles bloch_angles(const Ket& psi) {
    if (psi.size() != 2) throw DimensionMismatch("Bloch angles need a qubit ket");
    const Complex a = psi(0);
    const Complex b = psi(1);
    const double n2 = std::norm(a) + std::norm(b);
    const Complex ab = std::conj(a) * b;
    const double x = 2.0 * ab.real() / n2;
    const double y = 2.0 * ab.imag() / n2;
    const double z = (std::norm(a) - std::norm(b)) / n2;
    BlochAngles out;
    out.theta = std::acos(std::clamp(z, -1.0, 1.0));
    double phi = (std::hypot(x, y) < 1e-14) ? 0.0 : std::atan2(y, x);
    if (phi < 0) phi += 2 * std::numbers::pi;
    out.phi = phi;
    return out;
}

Operator tensor_product(const Operator& a, const Operator& b) {
    Operator out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i) {
        for (Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

Ket tensor_product(const Ket& a, const Ket& b) {
    Ket out(a.size() * b.size());
    for (Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
    return out;
}

Operator partial_trace(const Operator& op, std::span<const Index> dims, std::span<const bool> keep) {
    if (dims.size() != keep.size() || dims.empty()) {
        throw DimensionMismatch("partial trace: dims and keep mask differ in length");
    }
    Index total = 1;
    Index kept = 1;
    for (std::size_t f = 0; f < dims.size(); ++f) {
        if (dims[f] < 1) throw DimensionMismatch("partial trace: factor dimension < 1");
        total *= dims[f];
        if (keep[f]) kept *= dims[f];
    }
    if (op.rows() != total || op.cols() != total) {
        throw DimensionMismatch("partial trace: operator dim " + std::to_string(op.rows()) +
                                " does not match factor product " + std::to_string(total));
    }

    // Split a flat index into (kept index, traced index) once per basis state.
    std::vector<Index> kept_of(static_cast<std::size_t>(total));
    std::vector<Index> traced_of(static_cast<std::size_t>(total));
    for (Index flat = 0; flat < total; ++flat) {
        Index rem = flat;
        Index k = 0, kstride = 1, t = 0, tstride = 1;
        for (std::size_t f = dims.size(); f-- > 0;) {
            const Index digit = rem % dims[f];
            rem /= dims[f];
            if (keep[f]) {
                k += digit * kstride;
                kstride *= dims[f];
            } else {
                t += digit * tstride;
                tstride *= dims[f];
            }
        }
        kept_of[static_cast<std::size_t>(flat)] = k;
        traced_of[static_cast<std::size_t>(flat)] = t;
    }

    Operator out = Operator::Zero(kept, kept);
    for (Index c = 0; c < total; ++c) {
        const auto cu = static_cast<std::size_t>(c);
        for (Index r = 0; r < total; ++r) {
            const auto ru = static_cast<std::size_t>(r);
            if (traced_of[ru] == traced_of[cu]) out(kept_of[ru], kept_of[cu]) += op(r, c);
        }
    }
    return out;
}

Operator partial_trace(const Operator& op, Index dA, Index dB, Keep keep) {
    const std::array<Index, 2> dims{dA, dB};
    const std::array<bool, 2> mask{keep == Keep::A, keep == Keep::B};
    return partial_trace(op, dims, mask);
}

DensityMatrix partial_trace(const DensityMatrix& rho, Index dA, Index dB, Keep keep) {
    return DensityMatrix(partial_trace(rho.matrix(), dA, dB, keep));
}

Eigen::VectorXd hermitian_eigenvalues(const Operator& op) {
    const Operator h = 0.5 * (op + op.adjoint());
    Eigen::SelfAdjointEigenSolver<Operator> solver(h, Eigen::EigenvaluesOnly);
    return solver.eigenvalues();
}

double entropy_bits(const Eigen::VectorXd& spectrum, double floor) {
    double s = 0.0;
    for (Index i = 0; i < spectrum.size(); ++i) {
        const double lam = spectrum(i);
        if (lam < -floor) {
            std::ostringstream os;
            os << "entropy: eigenvalue " << lam << " below PSD tolerance";
            throw InvalidInput(os.str());
        }
        if (lam > 0.0) s -= lam * std::log2(lam);
    }
    return std::max(s, 0.0);
}

double von_neumann_entropy(const DensityMatrix& rho) {
    return entropy_bits(hermitian_eigenvalues(rho.matrix()));
}

double trace_norm(const Operator& op) {
    Eigen::JacobiSVD<Operator> svd(op);
    return svd.singularValues().sum();
}

double trace_distance(const DensityMatrix& rho, const DensityMatrix& sigma) {
    if (rho.dim() != sigma.dim()) throw DimensionMismatch("trace distance: dimension mismatch");
    return 0.5 * trace_norm(rho.matrix() - sigma.matrix());
}

Operator dephase(const Operator& rho, const Operator& basis) {
    if (basis.rows() != rho.rows() || basis.cols() != rho.cols()) {
        throw DimensionMismatch("dephase: basis dim does not match state dim");
    }
    const Operator in_basis = basis.adjoint() * rho * basis;
    const Operator diag = in_basis.diagonal().asDiagonal();
    return basis * diag * basis.adjoint();
}

double relative_entropy_of_coherence(const DensityMatrix& rho, const Operator& basis) {
    if (basis.rows() != rho.dim() || basis.cols() != rho.dim()) {
        throw DimensionMismatch("coherence: basis dim does not match state dim");
    }
    if (!is_unitary(basis, default_policy().orthonormality)) {
        throw InvalidInput("coherence: basis kets are not orthonormal");
    }
    const Operator in_basis = basis.adjoint() * rho.matrix() * basis;
    const Eigen::VectorXd populations = in_basis.diagonal().real();
    const double c = entropy_bits(populations) - entropy_bits(hermitian_eigenvalues(rho.matrix()));
    return std::max(c, 0.0);
}

double relative_entropy_of_coherence(const DensityMatrix& rho, const MeasurementModel& basis) {
    return relative_entropy_of_coherence(rho, basis.basis());
}

double max_off_diagonal(const Operator& rho, const Operator& basis) {
    Operator in_basis = basis.adjoint() * rho * basis;
    in_basis.diagonal().setZero();
    return in_basis.size() == 0 ? 0.0 : in_basis.cwiseAbs().maxCoeff();
}

namespace pauli {

Operator identity() { return Operator::Identity(2, 2); }

Operator x() {
    Operator m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

Operator y() {
    Operator m(2, 2);
    m << 0, -kI, kI, 0;
    return m;
}

Operator z() {
    Operator m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

Operator by_axis(char axis) {
    switch (axis) {
    case 'x': return x();
    case 'y': return y();
    case 'z': return z();
    default: throw InvalidInput(std::string("unknown rotation axis '") + axis + "'");
    }
}

} // namespace pauli

Operator rotation(char axis, double angle) {
    return std::cos(angle / 2) * pauli::identity() - kI * std::sin(angle / 2) * pauli::by_axis(axis);
}

Operator hadamard() {
    Operator h(2, 2);
    h << 1, 1, 1, -1;
    return h / std::sqrt(2.0);
}

Propagator::Propagator(const Operator& hamiltonian) {
    require_square(hamiltonian, "Hamiltonian");
    if (!all_finite(hamiltonian) || hermiticity_defect(hamiltonian) > default_policy().hermiticity) {
        throw InvalidInput("Hamiltonian is not Hermitian");
    }
    const Operator h = 0.5 * (hamiltonian + hamiltonian.adjoint());
    zero_ = h.cwiseAbs().maxCoeff() == 0.0;
    Eigen::SelfAdjointEigenSolver<Operator> solver(h);
    vectors_ = solver.eigenvectors();
    energies_ = solver.eigenvalues();
}

Propagator Propagator::stationary(Index dim) {
    return Propagator(Operator::Zero(dim, dim));
}

Operator Propagator::operator()(double tau) const {
    if (zero_) return Operator::Identity(dim(), dim());
    Eigen::VectorXcd phases(energies_.size());
    for (Index i = 0; i < energies_.size(); ++i) phases(i) = std::exp(-kI * energies_(i) * tau);
    return vectors_ * phases.asDiagonal() * vectors_.adjoint();
}

} // namespace eventstate
