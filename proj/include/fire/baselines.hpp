#pragma once

#include "fire/layers.hpp"
#include "fire/nn.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fire {

enum class ReinitMethod { none, fire, full_reset, shrink_perturb, redo };

struct ReinitSpec {
    ReinitMethod method = ReinitMethod::none;
    double lambda = 0.8;  // shrink & perturb coefficient
    int iters = 10;       // Newton-Schulz iterations for fire
    double tau = 0.025;   // ReDo dormancy threshold
    uint64_t seed = 0;    // seeds the reset draws

    void validate() const {
        if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("reinit: lambda must be in [0,1]");
        if (tau <= 0.0 || tau >= 1.0) throw std::invalid_argument("reinit: tau must be in (0,1)");
        if (method == ReinitMethod::fire && iters < 1)
            throw std::invalid_argument("reinit: fire needs iters >= 1");
    }
};

ReinitMethod reinit_method_from_name(const std::string& name);
const char* reinit_method_name(ReinitMethod m);

enum class RegularizerKind { none, l2_init, parseval };

struct RegularizerSpec {
    RegularizerKind kind = RegularizerKind::none;
    double strength = 0.0;       // lambda
    double parseval_scale = 1.0; // s

    void validate() const {
        if (strength < 0.0) throw std::invalid_argument("regularizer: strength must be >= 0");
        if (parseval_scale <= 0.0) throw std::invalid_argument("regularizer: parseval_scale must be > 0");
    }
};

RegularizerKind regularizer_kind_from_name(const std::string& name);
const char* regularizer_kind_name(RegularizerKind k);

// Fresh parameters from the initializer distribution, deterministic per seed.
NetworkParams full_reset(const Architecture& arch, uint64_t seed);

// theta <- (1-lambda)*theta + lambda*theta0, entrywise over all tensors.
NetworkParams shrink_perturb(const NetworkParams& theta, const NetworkParams& theta0, double lambda);

struct PenaltyGradient {
    double penalty = 0.0;
    NetworkParams grad;
};

// Penalty sum_l strength*||W_l - W0_l||_F^2 over weight matrices (biases
// excluded); gradient 2*strength*(W - W0) per matrix.
PenaltyGradient l2_init_gradient(const NetworkParams& theta, const NetworkParams& theta0,
                                 double strength);

struct MatrixPenaltyGradient {
    double penalty = 0.0;
    Matrix grad;
};

// Penalty strength*||W W^T - s I||_F^2, gradient 4*strength*(W W^T - s I)*W.
MatrixPenaltyGradient parseval_gradient(const Matrix& w, double strength, double s);

// Network-level Parseval term summed over weight matrices.
PenaltyGradient parseval_gradient_network(const NetworkParams& theta, double strength, double s);

// ReDo: units whose empirical activity score drops below tau get their
// incoming weights redrawn from the initializer distribution and their
// outgoing weights zeroed. mean_abs_activation[l] holds E|h_i| for the units
// of layer l (hidden layers only, l = 0 .. L-2).
NetworkParams redo_reset(const NetworkParams& params,
                         const std::vector<Vector>& mean_abs_activation, double tau, uint64_t seed);

}  // namespace fire
