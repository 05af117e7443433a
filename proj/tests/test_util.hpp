#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>

namespace testutil {

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, uint64_t seed,
                                double std_dev = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, std_dev);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = g(rng);
    return m;
}

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                                double std_dev = 1.0) {
    std::normal_distribution<double> g(0.0, std_dev);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = g(rng);
    return m;
}

// Haar-ish orthonormal columns via QR of a Gaussian draw, signs fixed so the
// map is deterministic.
inline Eigen::MatrixXd random_orthonormal(Eigen::Index rows, Eigen::Index cols,
                                          std::mt19937_64& rng) {
    Eigen::MatrixXd g = gaussian(rows, cols, rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
    Eigen::MatrixXd r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < cols; ++j)
        if (r(j, j) < 0) q.col(j) = -q.col(j);
    return q;
}

// W = U diag(sigma) V^T with sigma log-spaced in [smax/cond, smax]
inline Eigen::MatrixXd with_condition_number(Eigen::Index rows, Eigen::Index cols, double cond,
                                             double smax, std::mt19937_64& rng) {
    Eigen::MatrixXd u = random_orthonormal(rows, cols, rng);
    Eigen::MatrixXd v = random_orthonormal(cols, cols, rng);
    Eigen::VectorXd s(cols);
    for (Eigen::Index i = 0; i < cols; ++i) {
        const double t = cols == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(cols - 1);
        s[i] = smax * std::pow(1.0 / cond, t);
    }
    return u * s.asDiagonal() * v.transpose();
}

}  // namespace testutil
