#include "fire/metrics.hpp"

#include "fire/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace fire {

double sfe_network(const NetworkParams& a, const NetworkParams& b) {
    if (!a.same_architecture(b)) throw std::invalid_argument("sfe_network: architecture mismatch");
    double total = 0.0;
    for (size_t l = 0; l < a.layers.size(); ++l) {
        const auto& la = a.layers[l];
        const auto& lb = b.layers[l];
        if (la.kind == LayerKind::dense) total += sfe(la.dense, lb.dense);
        else for (size_t s = 0; s < la.conv.size(); ++s) total += sfe(la.conv[s], lb.conv[s]);
    }
    return total;
}

double dfi(const Matrix& w) {
    require_finite(w, "dfi");
    if (w.rows() >= w.cols()) {
        Matrix g = w.transpose() * w;
        g.diagonal().array() -= 1.0;
        return g.squaredNorm();
    }
    Matrix g = w * w.transpose();
    g.diagonal().array() -= 1.0;
    return g.squaredNorm();
}

double dfi_columns(const Matrix& w) {
    require_finite(w, "dfi_columns");
    Matrix g = w.transpose() * w;
    g.diagonal().array() -= 1.0;
    return g.squaredNorm();
}

Matrix normalized_feature_covariance(const Matrix& h) {
    require_finite(h, "normalized_feature_covariance");
    const double sq = h.squaredNorm();
    if (sq == 0.0) throw std::invalid_argument("normalized_feature_covariance: all-zero features");
    return (h * h.transpose()) / sq;
}

int srank(const Vector& singular_values, double delta) {
    if (delta <= 0.0 || delta >= 1.0) throw std::invalid_argument("srank: delta must be in (0,1)");
    if (singular_values.size() == 0) throw std::invalid_argument("srank: empty spectrum");
    for (Eigen::Index i = 0; i + 1 < singular_values.size(); ++i)
        if (singular_values[i] < singular_values[i + 1])
            throw std::invalid_argument("srank: spectrum must be nonincreasing");
    const double smax = singular_values[0];
    if (!(smax > 0.0)) throw std::invalid_argument("srank: all-zero spectrum");

    Eigen::Index d = 0;
    double total = 0.0;
    for (Eigen::Index i = 0; i < singular_values.size(); ++i) {
        if (singular_values[i] <= smax * 1e-12) break;
        total += singular_values[i];
        ++d;
    }
    double partial = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) {
        partial += singular_values[k];
        if (partial / total >= 1.0 - delta) return static_cast<int>(k + 1);
    }
    return static_cast<int>(d);
}

Vector activity_scores_closed_form(const Matrix& w) {
    require_finite(w, "activity_scores_closed_form");
    Vector norms(w.cols());
    for (Eigen::Index j = 0; j < w.cols(); ++j) norms[j] = w.col(j).norm();
    const double mean = norms.mean();
    if (mean == 0.0) throw std::invalid_argument("activity_scores_closed_form: all-zero matrix");
    return norms / mean;
}

int dormant_count(const Vector& scores, double tau) {
    if (tau <= 0.0 || tau >= 1.0) throw std::invalid_argument("dormant_count: tau must be in (0,1)");
    int n = 0;
    for (Eigen::Index i = 0; i < scores.size(); ++i)
        if (scores[i] < tau) ++n;
    return n;
}

Matrix whiten_columns(const Matrix& z) {
    require_finite(z, "whiten_columns");
    if (z.rows() < z.cols()) throw std::invalid_argument("whiten_columns: need rows >= cols");
    const double n = static_cast<double>(z.rows());
    Matrix cov = z.transpose() * z / n;
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
    const Vector& evals = es.eigenvalues();
    if (evals[0] <= evals[evals.size() - 1] * 1e-12 || evals[0] <= 0.0)
        throw std::invalid_argument("whiten_columns: rank-deficient batch");
    Matrix inv_sqrt =
        es.eigenvectors() * evals.cwiseInverse().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
    return z * inv_sqrt;
}

namespace {

// Theorem-1 feature recursion: H^0 = Z, H^l = ReLU(H^{l-1} W_l^T). Weights are
// stored d_out x d_in, so the batch multiplies the transpose.
Matrix features_at_layer(const NetworkParams& net, const Matrix& z, int layer) {
    Matrix h = z;
    for (int l = 0; l < layer; ++l)
        h = (h * net.layers[static_cast<size_t>(l)].dense.transpose()).cwiseMax(0.0);
    return h;
}

void require_dense_bias_free(const NetworkParams& net, const char* who) {
    for (const auto& lw : net.layers) {
        if (lw.kind != LayerKind::dense)
            throw std::invalid_argument(std::string(who) + ": dense layers only");
        if (lw.bias && lw.bias->size() > 0 && lw.bias->norm() != 0.0)
            throw std::invalid_argument(std::string(who) + ": bias-free networks only");
    }
}

}  // namespace

BoundCheck check_theorem1(const NetworkParams& theta, const NetworkParams& theta_tilde,
                          const Matrix& z, int layer) {
    if (!theta.same_architecture(theta_tilde))
        throw std::invalid_argument("check_theorem1: architecture mismatch");
    require_dense_bias_free(theta, "check_theorem1");
    require_dense_bias_free(theta_tilde, "check_theorem1");
    const int L = static_cast<int>(theta.layers.size());
    if (layer < 1 || layer > L) throw std::invalid_argument("check_theorem1: layer out of range");

    const Matrix h = features_at_layer(theta, z, layer);
    const Matrix ht = features_at_layer(theta_tilde, z, layer);
    const double m_l = std::min(h.norm(), ht.norm());
    if (m_l == 0.0) throw std::invalid_argument("check_theorem1: zero feature norm at the layer");

    BoundCheck out;
    out.measured = (normalized_feature_covariance(h) - normalized_feature_covariance(ht)).squaredNorm();

    // B_l = max spectral norm of the two layer-l weights; products and the
    // 1/B^2 sum run up to the probed layer
    double b_prod_sq = 1.0;
    double inv_sq_sum = 0.0;
    for (int l = 0; l < layer; ++l) {
        const double b1 = spectral_norm(theta.layers[static_cast<size_t>(l)].dense, 1e-13, 20000).value;
        const double b2 = spectral_norm(theta_tilde.layers[static_cast<size_t>(l)].dense, 1e-13, 20000).value;
        const double b = std::max(b1, b2);
        if (b <= 0.0) throw std::invalid_argument("check_theorem1: zero spectral norm layer");
        b_prod_sq *= b * b;
        inv_sq_sum += 1.0 / (b * b);
    }
    const double total_sfe = sfe_network(theta, theta_tilde);
    out.bound = 16.0 * z.squaredNorm() / (m_l * m_l) * b_prod_sq * inv_sq_sum * total_sfe;
    out.holds = out.measured <= out.bound + BoundCheck::slack;
    std::ostringstream ctx;
    ctx << "theorem1 layer=" << layer << " L=" << L << " n=" << z.rows() << " sfe=" << total_sfe;
    out.context = ctx.str();
    return out;
}

HessianSigmaMaxResult hessian_sigma_max(const NetworkParams& params, const Matrix& batch,
                                        const Matrix& targets, LossKind kind, double tol,
                                        int max_iter, uint64_t seed) {
    HessianSigmaMaxResult res;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    NetworkParams v = zeros_like(params);
    for_each_tensor(v, [&](Matrix& m) { m = m.unaryExpr([&](double) { return gauss(rng); }); },
                    [&](Vector& b) { b = b.unaryExpr([&](double) { return gauss(rng); }); });
    const double vn = param_norm(v);
    if (vn == 0.0) return res;
    param_scale(v, 1.0 / vn);

    double est = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        NetworkParams hv = hvp(params, batch, targets, kind, v);
        const double hn = param_norm(hv);
        res.iterations = it + 1;
        if (hn == 0.0) {
            res.value = 0.0;
            res.converged = true;
            return res;
        }
        param_scale(hv, 1.0 / hn);
        v = std::move(hv);
        if (it > 0 && std::abs(hn - est) <= tol * std::max(hn, 1e-300)) {
            res.value = hn;
            res.converged = true;
            return res;
        }
        est = hn;
    }
    res.value = est;
    res.converged = false;
    return res;
}

BoundCheck check_theorem2(const NetworkParams& params, const Matrix& z, const Matrix& targets,
                          LossKind kind) {
    if (kind != LossKind::squared)
        throw std::invalid_argument("check_theorem2: squared loss only (beta not computable otherwise)");
    require_dense_bias_free(params, "check_theorem2");

    const size_t L = params.layers.size();
    // nu_k = 1 + sqrt(DfI(W_k)); the smaller-dimension Gram gives the same
    // lambda_max control with fewer vacuous terms
    std::vector<double> nu(L);
    for (size_t l = 0; l < L; ++l) nu[l] = 1.0 + std::sqrt(dfi(params.layers[l].dense));

    const double beta = 1.0;
    ForwardCache cache = forward(params, z);
    double gamma = 0.0;
    for (Eigen::Index i = 0; i < cache.logits.rows(); ++i)
        gamma = std::max(gamma, (cache.logits.row(i) - targets.row(i)).norm());

    double gn_term = 0.0;
    for (size_t k = 0; k < L; ++k) {
        double prod = 1.0;
        for (size_t j = 0; j < L; ++j)
            if (j != k) prod *= nu[j];
        gn_term += prod;
    }
    double pair_term = 0.0;
    for (size_t k = 0; k < L; ++k) {
        for (size_t l = k + 1; l < L; ++l) {
            double prod = 1.0;
            for (size_t j = 0; j < L; ++j)
                if (j != k && j != l) prod *= nu[j];
            pair_term += prod;
        }
    }

    BoundCheck out;
    out.bound = beta * gn_term + 2.0 * gamma * pair_term;
    out.measured = hessian_sigma_max(params, z, targets, kind, 1e-8, 500).value;
    out.holds = out.measured <= out.bound + BoundCheck::slack;
    std::ostringstream ctx;
    ctx << "theorem2 L=" << L << " n=" << z.rows() << " gamma=" << gamma;
    out.context = ctx.str();
    return out;
}

BoundCheck check_theorem3(const Matrix& w, const Matrix& z, double delta) {
    if (delta <= 0.0 || delta >= 1.0) throw std::invalid_argument("check_theorem3: delta in (0,1)");
    if (z.cols() != w.rows()) throw std::invalid_argument("check_theorem3: Z cols must match W rows");

    BoundCheck out;
    const double eps = std::sqrt(dfi_columns(w));
    if (eps >= 1.0) {
        out.applicable = false;
        out.holds = true;
        out.context = "theorem3 not applicable: eps >= 1";
        return out;
    }

    const Matrix phi = z * w;
    const SvdResult phi_svd = svd_small(phi);
    const int rank_phi = srank(phi_svd.singular_values, delta);

    const Matrix q = polar_orthogonal_factor_exact(w);
    const double n = static_cast<double>(z.rows());
    const Matrix m = q.transpose() * (z.transpose() * z / n) * q;
    const SvdResult m_svd = svd_small(m);
    const Vector& eta = m_svd.singular_values;
    Eigen::Index d = 0;
    for (Eigen::Index i = 0; i < eta.size(); ++i)
        if (eta[i] > eta[0] * 1e-12) ++d;
    if (d == 0) throw std::invalid_argument("check_theorem3: Q^T Sigma_Z Q has rank zero");
    const double eta_ratio = eta[0] / eta[d - 1];

    const double rho = std::sqrt((1.0 + eps) / (1.0 - eps)) * std::sqrt(eta_ratio);
    const double raw = (1.0 - delta) * static_cast<double>(d) / (delta * rho + (1.0 - delta));
    // tiny shave before ceil so fp noise cannot overstate the bound
    const int k_bound = static_cast<int>(std::ceil(raw - 1e-9));

    out.measured = -static_cast<double>(rank_phi);
    out.bound = -static_cast<double>(k_bound);
    out.holds = out.measured <= out.bound + BoundCheck::slack;
    std::ostringstream ctx;
    ctx << "theorem3 eps=" << eps << " delta=" << delta << " d=" << d << " srank=" << rank_phi
        << " bound=" << k_bound;
    out.context = ctx.str();
    return out;
}

BoundCheck check_theorem4(const Matrix& w) {
    BoundCheck out;
    const double eps = std::sqrt(dfi_columns(w));
    if (eps >= 1.0) {
        out.applicable = false;
        out.holds = true;
        out.context = "theorem4 not applicable: eps >= 1";
        return out;
    }
    const Vector scores = activity_scores_closed_form(w);
    const double lo = std::sqrt((1.0 - eps) / (1.0 + eps));
    const double hi = std::sqrt((1.0 + eps) / (1.0 - eps));
    double worst = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < scores.size(); ++j)
        worst = std::max(worst, std::max(lo - scores[j], scores[j] - hi));
    out.measured = worst;
    out.bound = 0.0;
    out.holds = out.measured <= out.bound + BoundCheck::slack;
    std::ostringstream ctx;
    ctx << "theorem4 eps=" << eps << " interval=[" << lo << "," << hi << "]";
    out.context = ctx.str();
    return out;
}

PlasticityReport plasticity_report(const NetworkParams& params, const NetworkParams* reference,
                                   double delta, double tau) {
    PlasticityReport rep;
    rep.srank_delta = delta;
    rep.dormant_tau = tau;
    for (const auto& lw : params.layers) {
        double layer_dfi = 0.0;
        Vector scores;
        int layer_srank = 0;
        if (lw.kind == LayerKind::dense) {
            layer_dfi = dfi(lw.dense);
            scores = activity_scores_closed_form(lw.dense.transpose());  // neurons are rows
            layer_srank = srank(svd_small(lw.dense).singular_values, delta);
        } else {
            // conv: average DfI over slices, report the first slice's spectrum
            double acc = 0.0;
            for (const auto& s : lw.conv) acc += dfi(s);
            layer_dfi = acc / static_cast<double>(lw.conv.size());
            scores = activity_scores_closed_form(lw.conv[0].transpose());
            layer_srank = srank(svd_small(lw.conv[0]).singular_values, delta);
        }
        rep.dfi_per_layer.push_back(layer_dfi);
        rep.srank_per_layer.push_back(layer_srank);
        rep.dormant_per_layer.push_back(dormant_count(scores, tau));
        rep.activity_scores.push_back(std::move(scores));
    }
    if (reference) {
        rep.has_reference = true;
        rep.total_sfe_vs_reference = sfe_network(*reference, params);
    }
    return rep;
}

}  // namespace fire
