#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace fire {

// Throws if any entry is NaN/Inf. Used at library entry points; inner loops
// stay unchecked.
template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* who) {
    if (!m.allFinite()) throw std::invalid_argument(std::string(who) + ": non-finite entry");
}

template <typename Derived>
double frobenius_norm(const Eigen::MatrixBase<Derived>& m) {
    return m.norm();
}

struct SpectralNormResult {
    double value = 0.0;
    bool converged = false;
    int iterations = 0;
};

// Largest singular value by power iteration on the Gram matrix of the smaller
// dimension. Non-convergence within max_iter is flagged, not fatal.
SpectralNormResult spectral_norm(const Eigen::MatrixXd& m, double tol = 1e-12, int max_iter = 10000);

struct SvdResult {
    Eigen::MatrixXd u;                // rows x k, orthonormal columns
    Eigen::VectorXd singular_values;  // length k = min(rows, cols), nonincreasing
    Eigen::MatrixXd vt;               // k x cols, orthonormal rows
};

// Thin SVD of a small dense matrix by one-sided Jacobi on the taller
// orientation. Accuracy over speed: this is the ground-truth oracle the rest
// of the library is checked against.
SvdResult svd_small(const Eigen::MatrixXd& m);

// Closest orthonormal-column matrix to w in Frobenius norm, computed as U*Vt
// from the thin SVD. Requires rows >= cols and full column rank
// (sigma_min >= 1e-10 * sigma_max); below that the factor is not unique and
// we refuse rather than pick silently.
Eigen::MatrixXd polar_orthogonal_factor_exact(const Eigen::MatrixXd& w);

}  // namespace fire
