#pragma once

#include "fire/layers.hpp"
#include "fire/nn.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace fire {

// Squared Frobenius error between two equal-shaped matrices.
template <typename DerivedA, typename DerivedB>
double sfe(const Eigen::MatrixBase<DerivedA>& w, const Eigen::MatrixBase<DerivedB>& w_tilde) {
    if (w.rows() != w_tilde.rows() || w.cols() != w_tilde.cols())
        throw std::invalid_argument("sfe: shape mismatch");
    return (w - w_tilde).squaredNorm();
}

// Sum of per-layer SFE over weight matrices; biases excluded.
double sfe_network(const NetworkParams& a, const NetworkParams& b);

// Deviation from isometry, Gram formed on the smaller dimension:
// ||W^T W - I||_F^2 when rows >= cols, ||W W^T - I||_F^2 otherwise.
double dfi(const Matrix& w);

// Theorem orientation: always the column Gram ||W^T W - I||_F^2. Equals
// dfi(w) for rows >= cols; for wide matrices it is >= 1 and the DfI-based
// bounds are vacuous.
double dfi_columns(const Matrix& w);

// C = H H^T / ||H||_F^2; symmetric PSD with unit trace.
Matrix normalized_feature_covariance(const Matrix& h);

// Effective rank: smallest k with (sum of top-k sigma) / (sum of all nonzero
// sigma) >= 1 - delta. Input must be nonincreasing with at least one positive
// value; trailing numerical zeros (below sigma_1 * 1e-12) are dropped.
int srank(const Vector& singular_values, double delta);

// Closed-form activity scores under isotropic Gaussian input and a
// positive-homogeneous activation: s_j = ||w_j|| / mean_k ||w_k|| over the
// columns of w. Scores average to 1 by construction.
Vector activity_scores_closed_form(const Matrix& w);

// Number of scores strictly below tau.
int dormant_count(const Vector& scores, double tau);

// Rescale so the empirical second moment X^T X / n is exactly the identity.
// Requires n >= dim and full column rank.
Matrix whiten_columns(const Matrix& z);

struct BoundCheck {
    double measured = 0.0;
    double bound = 0.0;
    bool holds = false;       // measured <= bound + slack
    bool applicable = true;   // false when the theorem premise fails (eps >= 1)
    std::string context;

    static constexpr double slack = 1e-9;
};

// Feature-covariance stability bound at the given layer (1-indexed feature
// depth; ReLU at every layer, bias-free networks).
BoundCheck check_theorem1(const NetworkParams& theta, const NetworkParams& theta_tilde,
                          const Matrix& z, int layer);

struct HessianSigmaMaxResult {
    double value = 0.0;
    bool converged = false;
    int iterations = 0;
};

// Largest absolute Hessian eigenvalue of the mean-reduced loss via power
// iteration on Hessian-vector products.
HessianSigmaMaxResult hessian_sigma_max(const NetworkParams& params, const Matrix& batch,
                                        const Matrix& targets, LossKind kind, double tol = 1e-6,
                                        int max_iter = 200, uint64_t seed = 0x48e55);

// Curvature bound from layerwise DfI for bias-free ReLU MLPs with squared
// loss on an exactly whitened batch.
BoundCheck check_theorem2(const NetworkParams& params, const Matrix& z, const Matrix& targets,
                          LossKind kind);

// Effective-rank lower bound for features Phi = Z * W. Encoded as
// measured = -srank, bound = -ceil(...) so holds means srank >= bound.
BoundCheck check_theorem3(const Matrix& w, const Matrix& z, double delta);

// Activity-score interval from DfI. measured = worst distance outside the
// interval (negative = margin), bound = 0.
BoundCheck check_theorem4(const Matrix& w);

struct PlasticityReport {
    std::vector<double> dfi_per_layer;
    double total_sfe_vs_reference = 0.0;
    bool has_reference = false;
    std::vector<int> srank_per_layer;           // of each weight matrix spectrum, at delta
    std::vector<Vector> activity_scores;        // closed-form, per layer
    std::vector<int> dormant_per_layer;         // at tau
    std::optional<double> hessian_sigma_max;
    double srank_delta = 0.1;
    double dormant_tau = 0.025;
};

PlasticityReport plasticity_report(const NetworkParams& params,
                                   const NetworkParams* reference = nullptr, double delta = 0.1,
                                   double tau = 0.025);

}  // namespace fire
