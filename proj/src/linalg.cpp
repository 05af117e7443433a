#include "fire/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace fire {

SpectralNormResult spectral_norm(const Eigen::MatrixXd& m, double tol, int max_iter) {
    require_finite(m, "spectral_norm");
    if (tol <= 0) throw std::invalid_argument("spectral_norm: tol must be positive");
    if (max_iter <= 0) throw std::invalid_argument("spectral_norm: max_iter must be positive");

    SpectralNormResult res;
    if (m.size() == 0) return res;

    // iterate on the smaller Gram matrix
    const bool tall = m.rows() >= m.cols();
    const Eigen::MatrixXd& a = m;
    const Eigen::Index n = tall ? m.cols() : m.rows();

    // fixed-seed start vector keeps the function pure and repeatable
    std::mt19937_64 rng(0x5eed5eedULL);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = gauss(rng);
    double vn = v.norm();
    if (vn == 0) v.setOnes();
    v /= v.norm();

    double est = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXd w;
        if (tall) w = a.transpose() * (a * v);
        else w = a * (a.transpose() * v);
        const double wn = w.norm();
        res.iterations = it + 1;
        if (wn == 0.0) {  // v in the null space; for a zero matrix this is the answer
            res.value = 0.0;
            res.converged = true;
            return res;
        }
        const double next = std::sqrt(wn);  // ||A^T A v|| -> sigma^2 as v aligns
        v = w / wn;
        if (it > 0 && std::abs(next - est) <= tol * std::max(next, 1e-300)) {
            res.value = next;
            res.converged = true;
            return res;
        }
        est = next;
    }
    res.value = est;
    res.converged = false;
    return res;
}

namespace {

// one-sided Jacobi on a tall matrix (rows >= cols); returns U (thin), sigma, V
void jacobi_svd_tall(Eigen::MatrixXd a, Eigen::MatrixXd& u, Eigen::VectorXd& sigma,
                     Eigen::MatrixXd& v) {
    const Eigen::Index n = a.cols();
    v = Eigen::MatrixXd::Identity(n, n);

    const double eps = 1e-15;
    const int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (Eigen::Index p = 0; p + 1 < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double app = a.col(p).squaredNorm();
                const double aqq = a.col(q).squaredNorm();
                const double apq = a.col(p).dot(a.col(q));
                if (std::abs(apq) <= eps * std::sqrt(app * aqq) || apq == 0.0) continue;
                rotated = true;
                // Jacobi rotation zeroing the (p,q) entry of A^T A
                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                Eigen::VectorXd ap = a.col(p);
                a.col(p) = c * ap - s * a.col(q);
                a.col(q) = s * ap + c * a.col(q);
                Eigen::VectorXd vp = v.col(p);
                v.col(p) = c * vp - s * v.col(q);
                v.col(q) = s * vp + c * v.col(q);
            }
        }
        if (!rotated) break;
    }

    sigma.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) sigma[j] = a.col(j).norm();

    // sort nonincreasing
    std::vector<Eigen::Index> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index i, Eigen::Index j) { return sigma[i] > sigma[j]; });

    u.resize(a.rows(), n);
    Eigen::MatrixXd vs(n, n);
    Eigen::VectorXd ss(n);
    const double smax = sigma[order[0]];
    for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::Index src = order[static_cast<size_t>(j)];
        ss[j] = sigma[src];
        vs.col(j) = v.col(src);
        if (sigma[src] > smax * 1e-290 && sigma[src] > 0.0) {
            u.col(j) = a.col(src) / sigma[src];
        } else {
            u.col(j).setZero();  // filled by basis completion below
        }
    }
    sigma = ss;
    v = vs;

    // complete U to orthonormal columns where sigma vanished
    for (Eigen::Index j = 0; j < n; ++j) {
        if (u.col(j).norm() > 0.5) continue;
        for (Eigen::Index cand = 0; cand < a.rows(); ++cand) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(a.rows());
            e[cand] = 1.0;
            for (int pass = 0; pass < 2; ++pass)
                for (Eigen::Index k = 0; k < n; ++k)
                    if (k != j && u.col(k).norm() > 0.5) e -= u.col(k).dot(e) * u.col(k);
            const double en = e.norm();
            if (en > 0.5) {
                u.col(j) = e / en;
                break;
            }
        }
    }
}

}  // namespace

SvdResult svd_small(const Eigen::MatrixXd& m) {
    require_finite(m, "svd_small");
    if (m.rows() <= 0 || m.cols() <= 0) throw std::invalid_argument("svd_small: empty matrix");
    if (static_cast<long long>(m.rows()) * m.cols() > 1000000LL)
        throw std::invalid_argument("svd_small: matrix larger than the 1e6-entry desk-scale limit");

    SvdResult r;
    Eigen::MatrixXd u, v;
    Eigen::VectorXd s;
    if (m.rows() >= m.cols()) {
        jacobi_svd_tall(m, u, s, v);
        r.u = u;
        r.singular_values = s;
        r.vt = v.transpose();
    } else {
        jacobi_svd_tall(m.transpose(), u, s, v);
        r.u = v;
        r.singular_values = s;
        r.vt = u.transpose();
    }
    return r;
}

Eigen::MatrixXd polar_orthogonal_factor_exact(const Eigen::MatrixXd& w) {
    require_finite(w, "polar_orthogonal_factor_exact");
    if (w.rows() < w.cols())
        throw std::invalid_argument("polar_orthogonal_factor_exact: requires rows >= cols");
    SvdResult svd = svd_small(w);
    const double smax = svd.singular_values[0];
    const double smin = svd.singular_values[svd.singular_values.size() - 1];
    if (smax <= 0.0 || smin < 1e-10 * smax)
        throw std::runtime_error(
            "polar_orthogonal_factor_exact: rank-deficient input, polar factor not unique");
    return svd.u * svd.vt;
}

}  // namespace fire
