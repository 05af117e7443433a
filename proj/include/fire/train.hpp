#pragma once

#include "fire/baselines.hpp"
#include "fire/nn.hpp"

#include <cstdint>

namespace fire {

enum class OptimizerKind { sgd, adam };

OptimizerKind optimizer_from_name(const std::string& name);
const char* optimizer_name(OptimizerKind k);

struct TrainConfig {
    OptimizerKind optimizer = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double warmup_fraction = 0.1;  // of the planned steps, lr ramps 0 -> target
    double grad_clip = 0.5;        // global norm; <= 0 disables
    int batch_size = 128;
    int epochs_per_chunk = 50;
    uint64_t seed = 0;
    RegularizerSpec regularizer;

    void validate() const {
        if (learning_rate < 0.0) throw std::invalid_argument("train: learning_rate must be >= 0");
        if (warmup_fraction < 0.0 || warmup_fraction >= 1.0)
            throw std::invalid_argument("train: warmup_fraction must be in [0,1)");
        if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
        if (epochs_per_chunk < 1) throw std::invalid_argument("train: epochs_per_chunk must be >= 1");
        regularizer.validate();
    }
};

struct StepStats {
    double loss = 0.0;       // data loss + regularizer penalty
    double grad_norm = 0.0;  // post-clip global norm
    double lr = 0.0;
};

// Owns the optimizer state for one training segment. The warmup schedule is
// planned over total_steps; Adam moments start fresh (they are reset at every
// chunk boundary). theta0 is the run-start initialization the l2_init
// regularizer pulls toward.
class Trainer {
  public:
    Trainer(TrainConfig config, int64_t total_steps, const NetworkParams* theta0 = nullptr);

    StepStats step(NetworkParams& params, const Matrix& batch, const Matrix& targets, LossKind kind);

    double lr_at(int64_t step_index) const;
    int64_t steps_taken() const { return step_; }

  private:
    TrainConfig config_;
    int64_t total_steps_ = 0;
    int64_t warmup_steps_ = 0;
    int64_t step_ = 0;
    const NetworkParams* theta0_ = nullptr;
    bool state_ready_ = false;
    NetworkParams m_;  // Adam first moment
    NetworkParams v_;  // Adam second moment
};

}  // namespace fire
