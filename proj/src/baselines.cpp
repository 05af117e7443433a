#include "fire/baselines.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace fire {

ReinitMethod reinit_method_from_name(const std::string& name) {
    if (name == "none") return ReinitMethod::none;
    if (name == "fire") return ReinitMethod::fire;
    if (name == "full_reset") return ReinitMethod::full_reset;
    if (name == "shrink_perturb") return ReinitMethod::shrink_perturb;
    if (name == "redo") return ReinitMethod::redo;
    throw std::invalid_argument("unknown reinit method '" + name + "'");
}

const char* reinit_method_name(ReinitMethod m) {
    switch (m) {
        case ReinitMethod::none: return "none";
        case ReinitMethod::fire: return "fire";
        case ReinitMethod::full_reset: return "full_reset";
        case ReinitMethod::shrink_perturb: return "shrink_perturb";
        case ReinitMethod::redo: return "redo";
    }
    return "?";
}

RegularizerKind regularizer_kind_from_name(const std::string& name) {
    if (name == "none") return RegularizerKind::none;
    if (name == "l2_init") return RegularizerKind::l2_init;
    if (name == "parseval") return RegularizerKind::parseval;
    throw std::invalid_argument("unknown regularizer '" + name + "'");
}

const char* regularizer_kind_name(RegularizerKind k) {
    switch (k) {
        case RegularizerKind::none: return "none";
        case RegularizerKind::l2_init: return "l2_init";
        case RegularizerKind::parseval: return "parseval";
    }
    return "?";
}

NetworkParams full_reset(const Architecture& arch, uint64_t seed) {
    return init_network(arch, seed);
}

NetworkParams shrink_perturb(const NetworkParams& theta, const NetworkParams& theta0,
                             double lambda) {
    if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("shrink_perturb: lambda in [0,1]");
    NetworkParams out = theta;
    for_each_tensor_pair(out, theta0,
                         [&](Matrix& t, const Matrix& t0) { t = (1.0 - lambda) * t + lambda * t0; },
                         [&](Vector& t, const Vector& t0) { t = (1.0 - lambda) * t + lambda * t0; });
    return out;
}

PenaltyGradient l2_init_gradient(const NetworkParams& theta, const NetworkParams& theta0,
                                 double strength) {
    if (!theta.same_architecture(theta0))
        throw std::invalid_argument("l2_init_gradient: architecture mismatch");
    PenaltyGradient out;
    out.grad = zeros_like(theta);
    for (size_t l = 0; l < theta.layers.size(); ++l) {
        const auto& a = theta.layers[l];
        const auto& b = theta0.layers[l];
        auto& g = out.grad.layers[l];
        if (a.kind == LayerKind::dense) {
            out.penalty += strength * (a.dense - b.dense).squaredNorm();
            g.dense = 2.0 * strength * (a.dense - b.dense);
        } else {
            for (size_t s = 0; s < a.conv.size(); ++s) {
                out.penalty += strength * (a.conv[s] - b.conv[s]).squaredNorm();
                g.conv[s] = 2.0 * strength * (a.conv[s] - b.conv[s]);
            }
        }
    }
    return out;
}

MatrixPenaltyGradient parseval_gradient(const Matrix& w, double strength, double s) {
    if (s <= 0.0) throw std::invalid_argument("parseval_gradient: s must be > 0");
    MatrixPenaltyGradient out;
    const Matrix dev = w * w.transpose() - s * Matrix::Identity(w.rows(), w.rows());
    out.penalty = strength * dev.squaredNorm();
    out.grad = 4.0 * strength * dev * w;
    return out;
}

PenaltyGradient parseval_gradient_network(const NetworkParams& theta, double strength, double s) {
    PenaltyGradient out;
    out.grad = zeros_like(theta);
    for (size_t l = 0; l < theta.layers.size(); ++l) {
        const auto& a = theta.layers[l];
        auto& g = out.grad.layers[l];
        if (a.kind == LayerKind::dense) {
            auto pg = parseval_gradient(a.dense, strength, s);
            out.penalty += pg.penalty;
            g.dense = pg.grad;
        } else {
            for (size_t si = 0; si < a.conv.size(); ++si) {
                auto pg = parseval_gradient(a.conv[si], strength, s);
                out.penalty += pg.penalty;
                g.conv[si] = pg.grad;
            }
        }
    }
    return out;
}

NetworkParams redo_reset(const NetworkParams& params,
                         const std::vector<Vector>& mean_abs_activation, double tau,
                         uint64_t seed) {
    if (tau < 0.0 || tau >= 1.0) throw std::invalid_argument("redo_reset: tau in [0,1)");
    const size_t L = params.layers.size();
    if (L < 1) throw std::invalid_argument("redo_reset: empty network");
    if (mean_abs_activation.size() + 1 != L)
        throw std::invalid_argument("redo_reset: need activation stats for every hidden layer");

    NetworkParams out = params;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    for (size_t l = 0; l + 1 < L; ++l) {
        const auto& spec = params.arch.layers[l];
        const auto& next_spec = params.arch.layers[l + 1];
        if (spec.kind != LayerKind::dense || next_spec.kind != LayerKind::dense)
            throw std::invalid_argument("redo_reset: only dense layers are supported");
        const Vector& act = mean_abs_activation[l];
        if (act.size() != spec.out_dim)
            throw std::invalid_argument("redo_reset: activation stats size mismatch at layer " +
                                        std::to_string(l));
        const double layer_mean = act.mean();
        const double std_dev = std::sqrt(2.0 / static_cast<double>(spec.in_dim));
        for (int u = 0; u < spec.out_dim; ++u) {
            const double score = layer_mean > 0.0 ? act[u] / layer_mean : 0.0;
            if (score >= tau) continue;
            for (int j = 0; j < spec.in_dim; ++j) out.layers[l].dense(u, j) = std_dev * gauss(rng);
            out.layers[l + 1].dense.col(u).setZero();
        }
    }
    return out;
}

}  // namespace fire
