#include "fire/verify.hpp"

#include "fire/linalg.hpp"
#include "fire/metrics.hpp"
#include "fire/nn.hpp"
#include "fire/orthogonalize.hpp"

#include <cmath>
#include <random>

namespace fire {

namespace {

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double std_dev = 1.0) {
    std::normal_distribution<double> g(0.0, std_dev);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = g(rng);
    return m;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
    std::uniform_int_distribution<int> d(lo, hi);
    return d(rng);
}

double uniform_real(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(rng);
}

// Tall matrix with column Gram near the identity; dfi shrinks toward the
// target by halving the perturbation until it fits.
Matrix near_isometry(std::mt19937_64& rng, int rows, int cols, double dfi_target) {
    const Matrix q = newton_schulz(gaussian(rows, cols, rng), 40);
    double scale = 1.0;
    for (int attempt = 0; attempt < 60; ++attempt) {
        Matrix w = q + scale * uniform_real(rng, 0.0, 0.5) *
                           gaussian(rows, cols, rng, 1.0 / std::sqrt(static_cast<double>(rows)));
        if (dfi_columns(w) <= dfi_target) return w;
        scale *= 0.5;
    }
    return q;
}

void account(VerifierResult& res, const BoundCheck& check) {
    ++res.cases;
    if (!check.applicable) {
        ++res.not_applicable;
        return;
    }
    res.worst_margin = std::max(res.worst_margin, check.measured - check.bound);
    if (!check.holds) {
        ++res.violations;
        if (res.first_failure.empty()) res.first_failure = check.context;
    }
}

}  // namespace

VerifierResult verify_theorem1(int cases, uint64_t seed) {
    VerifierResult res;
    res.name = "theorem1_feature_covariance";
    std::mt19937_64 rng(seed);
    for (int c = 0; c < cases; ++c) {
        const int L = uniform_int(rng, 2, 3);
        std::vector<int> dims(static_cast<size_t>(L) + 1);
        for (auto& d : dims) d = uniform_int(rng, 2, 16);
        Architecture arch;
        for (int l = 0; l < L; ++l) arch.layers.push_back(LayerSpec::make_dense(dims[l], dims[l + 1]));
        arch.use_bias = false;

        for (int attempt = 0;; ++attempt) {
            NetworkParams theta = init_network(arch, rng());
            const double spread = uniform_real(rng, 0.5, 2.0);
            for_each_matrix(theta, [&](Matrix& m) { m *= spread; });
            NetworkParams theta_tilde = theta;
            const double pert = uniform_real(rng, 1e-6, 1.0);
            for (auto& lw : theta_tilde.layers)
                lw.dense += pert * gaussian(lw.dense.rows(), lw.dense.cols(), rng,
                                            1.0 / std::sqrt(static_cast<double>(lw.dense.cols())));
            const int n = uniform_int(rng, 2, 16);
            const Matrix z = gaussian(n, dims[0], rng);
            const int layer = uniform_int(rng, 1, L);
            try {
                account(res, check_theorem1(theta, theta_tilde, z, layer));
                break;
            } catch (const std::invalid_argument&) {
                if (attempt > 50) throw;  // dead-feature draw; reroll
            }
        }
    }
    return res;
}

VerifierResult verify_theorem2(int cases, uint64_t seed) {
    VerifierResult res;
    res.name = "theorem2_hessian_curvature";
    std::mt19937_64 rng(seed);
    for (int c = 0; c < cases; ++c) {
        const int d0 = uniform_int(rng, 2, 8);
        const int d1 = uniform_int(rng, 2, 8);
        const int d2 = uniform_int(rng, 2, 8);
        const int n = uniform_int(rng, d0 + 1, 24);
        Architecture arch;
        arch.layers = {LayerSpec::make_dense(d0, d1), LayerSpec::make_dense(d1, d2)};
        arch.use_bias = false;
        NetworkParams params = init_network(arch, rng());
        const double spread = uniform_real(rng, 0.4, 1.6);
        for_each_matrix(params, [&](Matrix& m) { m *= spread; });

        const Matrix z = whiten_columns(gaussian(n, d0, rng));
        const Matrix targets = gaussian(n, d2, rng);
        account(res, check_theorem2(params, z, targets, LossKind::squared));
    }
    return res;
}

VerifierResult verify_theorem3(int cases, uint64_t seed) {
    VerifierResult res;
    res.name = "theorem3_effective_rank";
    std::mt19937_64 rng(seed);
    for (int c = 0; c < cases; ++c) {
        const int b = uniform_int(rng, 2, 8);
        const int a = uniform_int(rng, b, 12);
        const int n = uniform_int(rng, a + 1, 24);
        const Matrix w = near_isometry(rng, a, b, uniform_real(rng, 1e-4, 0.95));
        Matrix z = gaussian(n, a, rng);
        if (uniform_int(rng, 0, 1) == 1) z = whiten_columns(z);  // exercise the Sigma_Z = I branch
        const double delta = uniform_real(rng, 0.02, 0.6);
        account(res, check_theorem3(w, z, delta));
    }
    return res;
}

VerifierResult verify_theorem4(int cases, uint64_t seed) {
    VerifierResult res;
    res.name = "theorem4_activity_scores";
    std::mt19937_64 rng(seed);
    for (int c = 0; c < cases; ++c) {
        const int b = uniform_int(rng, 2, 12);
        const int a = uniform_int(rng, b, 16);
        const Matrix w = near_isometry(rng, a, b, uniform_real(rng, 1e-4, 0.95));
        account(res, check_theorem4(w));
    }
    return res;
}

VerifierResult verify_lemma_eigenvalue_interval(int cases, uint64_t seed) {
    VerifierResult res;
    res.name = "lemma_eigenvalue_interval";
    std::mt19937_64 rng(seed);
    for (int c = 0; c < cases; ++c) {
        const int cols = uniform_int(rng, 2, 10);
        const int rows = uniform_int(rng, cols, 16);
        // arbitrary W: the interval [1-eps, 1+eps] holds for any deviation
        const Matrix w = gaussian(rows, cols, rng, uniform_real(rng, 0.1, 1.2) /
                                                       std::sqrt(static_cast<double>(rows)));
        const double eps = std::sqrt(dfi_columns(w));
        const SvdResult svd = svd_small(w);
        BoundCheck check;
        check.bound = 0.0;
        double worst = -1e300;
        for (Eigen::Index i = 0; i < svd.singular_values.size(); ++i) {
            const double mu = svd.singular_values[i] * svd.singular_values[i];
            worst = std::max(worst, std::max((1.0 - eps) - mu, mu - (1.0 + eps)));
        }
        check.measured = worst;
        check.holds = check.measured <= check.bound + BoundCheck::slack;
        check.context = "lemma eps=" + std::to_string(eps);
        account(res, check);
    }
    return res;
}

VerifierResult verify_corollary_dormancy(int cases, uint64_t seed) {
    VerifierResult res;
    res.name = "corollary_no_dormant_neurons";
    std::mt19937_64 rng(seed);
    const double tau = 0.025;
    const double dfi_cap = (1.0 - tau * tau) / (1.0 + tau * tau);  // squared below
    for (int c = 0; c < cases; ++c) {
        const int b = uniform_int(rng, 2, 12);
        const int a = uniform_int(rng, b, 16);
        const Matrix w = near_isometry(rng, a, b, uniform_real(rng, 1e-6, dfi_cap * dfi_cap));
        BoundCheck check;
        check.measured = static_cast<double>(dormant_count(activity_scores_closed_form(w), tau));
        check.bound = 0.0;
        check.holds = check.measured <= 0.0;  // zero tolerance
        check.context = "corollary dfi=" + std::to_string(dfi_columns(w));
        account(res, check);
    }
    return res;
}

std::vector<VerifierResult> verify_all() {
    return {verify_theorem1(),  verify_theorem2(), verify_theorem3(),
            verify_theorem4(),  verify_lemma_eigenvalue_interval(),
            verify_corollary_dormancy()};
}

}  // namespace fire
