#pragma once

// Dense linear algebra and quantum-information primitives. Everything here is
// a pure function of its inputs; matrices are Eigen column-major storage but
// all indexing is (row, col) with row-major serialization.

#include <complex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace eventstate {

using Complex = std::complex<double>;
using Operator = Eigen::MatrixXcd;
using Ket = Eigen::VectorXcd;
using Index = Eigen::Index;

/// Tolerances shared by every validity check in the library.
struct NumericPolicy {
    double hermiticity = 1e-10;    // max |rho_ij - conj(rho_ji)|
    double trace = 1e-10;          // |Tr rho - 1|
    double eigenvalue_floor = 1e-10; // eigenvalues in [-floor, 0) are clamped to 0
    double unitarity = 1e-10;      // max entry of |U^dag U - I|
    double normalization = 1e-10;  // | ||psi|| - 1 |
    double orthonormality = 1e-10; // max |<i|j> - delta_ij|
};

const NumericPolicy& default_policy();

struct DensityReport {
    double hermiticity_defect = 0.0;
    double trace_defect = 0.0;
    double min_eigenvalue = 0.0;
    bool finite = true;
    bool hermitian = true;
    bool unit_trace = true;
    bool positive = true;

    bool passed() const { return finite && hermitian && unit_trace && positive; }
    std::string summary() const;
};

/// Never throws; reports every defect of `op` against the policy.
DensityReport validate_density(const Operator& op, const NumericPolicy& policy = default_policy());

/// A validated density matrix. Construction fails with InvalidInput when
/// validate_density does not pass.
class DensityMatrix {
public:
    explicit DensityMatrix(Operator m, const NumericPolicy& policy = default_policy());

    static DensityMatrix pure(const Ket& psi);
    static DensityMatrix maximally_mixed(Index dim);

    const Operator& matrix() const noexcept { return m_; }
    Index dim() const noexcept { return m_.rows(); }

private:
    Operator m_;
};

double hermiticity_defect(const Operator& op);
double unitarity_defect(const Operator& op);
bool is_unitary(const Operator& op, double tol = default_policy().unitarity);
void require_unitary(const Operator& op, std::string_view what,
                     const NumericPolicy& policy = default_policy());
void require_unit_ket(const Ket& psi, std::string_view what,
                      const NumericPolicy& policy = default_policy());
bool all_finite(const Operator& op);

/// Orthonormal projective basis with real outcome labels. Column i of
/// basis() is the ket |alpha_i>.
class MeasurementModel {
public:
    MeasurementModel(Operator basis, std::vector<double> labels,
                     const NumericPolicy& policy = default_policy());

    /// "Sz", "Sx" or "Sy"; labels +1 for the positive eigenvector, -1 otherwise.
    static MeasurementModel named(std::string_view name);
    /// Qubit basis {|n+>, |n->} along the Bloch direction (theta, phi), labels +1/-1.
    static MeasurementModel bloch(double theta, double phi);
    /// Computational basis with labels 0..dim-1.
    static MeasurementModel computational(Index dim);

    Index dim() const noexcept { return basis_.rows(); }
    const Operator& basis() const noexcept { return basis_; }
    const std::vector<double>& labels() const noexcept { return labels_; }
    Ket ket(Index i) const { return basis_.col(i); }
    Operator projector(Index i) const;
    Operator observable() const;

    /// Same kets up to per-ket phase, same ordering and labels.
    bool same_basis(const MeasurementModel& other, double tol = 1e-10) const;

private:
    Operator basis_;
    std::vector<double> labels_;
};

struct BlochAngles {
    double theta = 0.0;
    double phi = 0.0;
};

/// Bloch angles of a qubit ket, theta in [0, pi], phi in [0, 2 pi).
BlochAngles bloch_angles(const Ket& psi);
Ket bloch_ket(double theta, double phi);

Operator tensor_product(const Operator& a, const Operator& b);
Ket tensor_product(const Ket& a, const Ket& b);

enum class Keep { A, B };

Operator partial_trace(const Operator& op, Index dA, Index dB, Keep keep);
DensityMatrix partial_trace(const DensityMatrix& rho, Index dA, Index dB, Keep keep);
/// Multi-factor partial trace; factor i is kept when keep[i] is true.
Operator partial_trace(const Operator& op, std::span<const Index> dims, std::span<const bool> keep);

/// Ascending eigenvalues of the Hermitian part of op.
Eigen::VectorXd hermitian_eigenvalues(const Operator& op);

/// -sum lambda log2 lambda over a spectrum, clamping [-floor, 0) to 0.
double entropy_bits(const Eigen::VectorXd& spectrum, double floor = default_policy().eigenvalue_floor);

double von_neumann_entropy(const DensityMatrix& rho);
double trace_norm(const Operator& op);
double trace_distance(const DensityMatrix& rho, const DensityMatrix& sigma);

/// Keeps only the diagonal of rho in the orthonormal basis whose columns are `basis`.
Operator dephase(const Operator& rho, const Operator& basis);
/// S(dephase(rho)) - S(rho). `basis` columns must be orthonormal.
double relative_entropy_of_coherence(const DensityMatrix& rho, const Operator& basis);
double relative_entropy_of_coherence(const DensityMatrix& rho, const MeasurementModel& basis);

/// Largest |entry| of rho outside the diagonal when expressed in `basis`.
double max_off_diagonal(const Operator& rho, const Operator& basis);

namespace pauli {
Operator identity();
Operator x();
Operator y();
Operator z();
Operator by_axis(char axis);
} // namespace pauli

/// exp(-i angle sigma_axis / 2).
Operator rotation(char axis, double angle);
Operator hadamard();

/// U(tau) = exp(-i tau H) for a fixed Hermitian H (hbar = 1), via one
/// eigendecomposition. Negative tau gives the inverse evolution.
class Propagator {
public:
    explicit Propagator(const Operator& hamiltonian);
    static Propagator stationary(Index dim);

    Operator operator()(double tau) const;
    Index dim() const noexcept { return vectors_.rows(); }
    bool is_zero() const noexcept { return zero_; }

private:
    Operator vectors_;
    Eigen::VectorXd energies_;
    bool zero_ = false;
};

} // namespace eventstate
