#pragma once

#include "fire/layers.hpp"

#include <cstdint>
#include <random>

namespace fire {

enum class LossKind { squared, cross_entropy };

// He Gaussian init, std = sqrt(2 / fan_in); biases zero. Deterministic per seed.
NetworkParams init_network(const Architecture& arch, uint64_t seed);

// Fill already-shaped layer weights with a fresh He draw from rng (used by the
// reset-style baselines so their draws match the initializer distribution).
void he_fill(LayerWeights& lw, std::mt19937_64& rng);

struct ForwardCache {
    std::vector<Matrix> inputs;   // inputs[l]: batch fed to layer l, n x in_size
    std::vector<Matrix> preacts;  // preacts[l]: layer l output before activation, n x out_size
    Matrix logits;                // final output (after optional final activation)

    // post-activation features of layer l as seen by the next layer
    const Matrix& activation(size_t l) const {
        return l + 1 < inputs.size() ? inputs[l + 1] : logits;
    }
};

// Rows of `batch` are samples. ReLU after every layer except optionally the
// last (arch.final_activation). ReLU derivative at 0 is taken as 0.
ForwardCache forward(const NetworkParams& params, const Matrix& batch);

// Mean-reduced loss. For squared: (1/n) sum_i 0.5*||u_i - t_i||^2.
// For cross_entropy: targets are one-hot (or soft) rows against softmax(u).
double loss_value(const Matrix& logits, const Matrix& targets, LossKind kind);

struct BackwardResult {
    double loss = 0.0;
    NetworkParams grad;
};

BackwardResult backward(const NetworkParams& params, const Matrix& batch, const Matrix& targets,
                        LossKind kind);

// Hessian-vector product by symmetric finite differences of gradients,
// h = 1e-4 * ||theta|| / ||v||.
NetworkParams hvp(const NetworkParams& params, const Matrix& batch, const Matrix& targets,
                  LossKind kind, const NetworkParams& direction);

Matrix one_hot(const Eigen::VectorXi& labels, int num_classes);
double accuracy(const Matrix& logits, const Eigen::VectorXi& labels);

}  // namespace fire
