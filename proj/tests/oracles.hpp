#pragma once

// Independent reference computations. These are written from the defining
// formulas with explicit index loops and do not call the library routines
// they are compared against.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "eventstate/quantum_core.hpp"

namespace oracle {

using eventstate::Complex;
using eventstate::Index;
using eventstate::Ket;
using eventstate::Operator;

inline Operator kron(const Operator& a, const Operator& b) {
    Operator out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j)
            for (Index k = 0; k < b.rows(); ++k)
                for (Index l = 0; l < b.cols(); ++l) out(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
    return out;
}

inline Ket kron(const Ket& a, const Ket& b) {
    Ket out(a.size() * b.size());
    for (Index i = 0; i < a.size(); ++i)
        for (Index k = 0; k < b.size(); ++k) out(i * b.size() + k) = a(i) * b(k);
    return out;
}

/// Tr_B (keep_a) or Tr_A as an explicit sum over the traced basis.
inline Operator partial_trace(const Operator& rho, Index da, Index db, bool keep_a) {
    if (keep_a) {
        Operator out = Operator::Zero(da, da);
        for (Index i = 0; i < da; ++i)
            for (Index j = 0; j < da; ++j)
                for (Index k = 0; k < db; ++k) out(i, j) += rho(i * db + k, j * db + k);
        return out;
    }
    Operator out = Operator::Zero(db, db);
    for (Index k = 0; k < db; ++k)
        for (Index l = 0; l < db; ++l)
            for (Index i = 0; i < da; ++i) out(k, l) += rho(i * db + k, i * db + l);
    return out;
}

inline double binary_entropy(double p) {
    auto h = [](double x) { return x > 0 ? -x * std::log2(x) : 0.0; };
    return h(p) + h(1 - p);
}

/// -sum lambda log2 lambda from a complex eigensolver (no Hermitian assumption).
inline double entropy(const Operator& rho) {
    Eigen::ComplexEigenSolver<Operator> es(rho);
    double s = 0.0;
    for (Index i = 0; i < rho.rows(); ++i) {
        const double l = es.eigenvalues()(i).real();
        if (l > 1e-15) s -= l * std::log2(l);
    }
    return s;
}

/// exp(-i tau H) by the matrix exponential.
inline Operator propagate(const Operator& h, double tau) {
    const Operator m = Complex(0.0, -tau) * h;
    return m.exp();
}

/// Timelike detector state from its double-sum definition:
/// sum <b|U|a><a|rho|a'><a'|U^dag|b> |a b><a' b|.
inline Operator tl_instant(const Operator& rho, const Operator& va, const Operator& vb, const Operator& u) {
    const Index da = va.cols();
    const Index db = vb.cols();
    Operator out = Operator::Zero(da * db, da * db);
    for (Index b = 0; b < db; ++b)
        for (Index a = 0; a < da; ++a)
            for (Index ap = 0; ap < da; ++ap) {
                const Complex amp = vb.col(b).dot(u * va.col(a)) * va.col(a).dot(rho * va.col(ap)) *
                                    (u * va.col(ap)).dot(vb.col(b));
                const Ket left = kron(Ket(va.col(a)), Ket(vb.col(b)));
                const Ket right = kron(Ket(va.col(ap)), Ket(vb.col(b)));
                out += amp * left * right.adjoint();
            }
    return out;
}

/// Spacelike detector state: Born weights of the joint record kets on a diagonal.
inline Operator sl_instant(const Operator& rho, const Operator& va, const Operator& vb) {
    const Index da = va.cols();
    const Index db = vb.cols();
    Operator out = Operator::Zero(da * db, da * db);
    for (Index a = 0; a < da; ++a)
        for (Index b = 0; b < db; ++b) {
            const Ket k = kron(Ket(va.col(a)), Ket(vb.col(b)));
            out += k.dot(rho * k).real() * k * k.adjoint();
        }
    return out;
}

/// Conditional pure states of a timelike pair and their weights.
struct Lambdas {
    std::vector<double> p;
    std::vector<Ket> lambda; // empty ket when p == 0
};

inline Lambdas lambdas(const Ket& phi, const Operator& va, const Operator& vb, const Operator& u) {
    Lambdas out;
    for (Index b = 0; b < vb.cols(); ++b) {
        Ket v = Ket::Zero(va.rows());
        double p = 0.0;
        for (Index a = 0; a < va.cols(); ++a) {
            const Complex c = vb.col(b).dot(u * va.col(a)) * va.col(a).dot(phi);
            v += c * va.col(a);
            p += std::norm(c);
        }
        out.p.push_back(p);
        out.lambda.push_back(p > 1e-14 ? Ket(v / std::sqrt(p)) : Ket());
    }
    return out;
}

/// Largest success probability over a theta x phi grid of qubit projective
/// measurements {|n><n|, I - |n><n|}, guessing hypothesis 1 on |n>.
inline double helstrom_grid(double p1, const Operator& s1, double p2, const Operator& s2, int n_theta, int n_phi) {
    double best = 0.0;
    for (int i = 0; i <= n_theta; ++i) {
        for (int j = 0; j < n_phi; ++j) {
            const double th = std::numbers::pi * i / n_theta;
            const double ph = 2 * std::numbers::pi * j / n_phi;
            Ket n(2);
            n << std::cos(th / 2), std::polar(std::sin(th / 2), ph);
            const Operator p = n * n.adjoint();
            const Operator q = Operator::Identity(2, 2) - p;
            best = std::max(best, p1 * (p * s1).trace().real() + p2 * (q * s2).trace().real());
        }
    }
    return best;
}

/// Sample covariance of (T_A, T_A + L) with T_A ~ Exp(gamma_a), L ~ Exp(gamma_b),
/// and the standard error of that estimate.
struct McEstimate {
    double covariance = 0.0;
    double standard_error = 0.0;
};

inline McEstimate mc_tl_covariance(double gamma_a, double gamma_b, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> ea(gamma_a), eb(gamma_b);
    std::vector<double> x(n), y(n);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = ea(rng);
        y[i] = x[i] + eb(rng);
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double c = 0, c2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = (x[i] - mx) * (y[i] - my);
        c += z;
        c2 += z * z;
    }
    c /= static_cast<double>(n);
    const double var_z = c2 / static_cast<double>(n) - c * c;
    return {c * static_cast<double>(n) / static_cast<double>(n - 1), std::sqrt(var_z / static_cast<double>(n))};
}

/// Spacelike fuzzy state as a direct double sum over detection bins of the
/// separately evolved input, registered on the record diagonal.
inline Operator sl_fuzzy(const Operator& rho, const Operator& va, const Operator& vb, const Operator& ha,
                         const Operator& hb, const std::vector<double>& times, const std::vector<double>& pa,
                         const std::vector<double>& pb) {
    const Index da = va.cols();
    const Index db = vb.cols();
    Operator out = Operator::Zero(da * db, da * db);
    for (std::size_t k = 0; k < times.size(); ++k)
        for (std::size_t l = 0; l < times.size(); ++l) {
            if (pa[k] == 0.0 || pb[l] == 0.0) continue;
            const Operator u = kron(propagate(ha, times[k] - times[0]), propagate(hb, times[l] - times[0]));
            out += pa[k] * pb[l] * sl_instant(u * rho * u.adjoint(), va, vb);
        }
    return out / out.trace().real();
}

/// Timelike fuzzy state: system evolves until t_A, then for t_B - t_A.
inline Operator tl_fuzzy(const Operator& rho, const Operator& va, const Operator& vb, const Operator& h,
                         const std::vector<double>& times, const std::vector<double>& pa,
                         const std::vector<std::vector<double>>& pb_given_a) {
    Operator out = Operator::Zero(va.cols() * vb.cols(), va.cols() * vb.cols());
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (pa[k] == 0.0) continue;
        const Operator uk = propagate(h, times[k] - times[0]);
        const Operator rk = uk * rho * uk.adjoint();
        for (std::size_t l = k; l < times.size(); ++l) {
            if (pb_given_a[k][l] == 0.0) continue;
            out += pa[k] * pb_given_a[k][l] * tl_instant(rk, va, vb, propagate(h, times[l] - times[k]));
        }
    }
    return out / out.trace().real();
}

/// Textbook correlator Tr(rho A (x) B) with A, B built from kets and labels.
inline double bipartite_correlator(const Operator& rho, const Operator& va, const std::vector<double>& la,
                                   const Operator& vb, const std::vector<double>& lb) {
    Operator a = Operator::Zero(va.rows(), va.rows());
    Operator b = Operator::Zero(vb.rows(), vb.rows());
    for (Index i = 0; i < va.cols(); ++i) a += la[static_cast<std::size_t>(i)] * va.col(i) * va.col(i).adjoint();
    for (Index i = 0; i < vb.cols(); ++i) b += lb[static_cast<std::size_t>(i)] * vb.col(i) * vb.col(i).adjoint();
    return (rho * kron(a, b)).trace().real();
}

} // namespace oracle
