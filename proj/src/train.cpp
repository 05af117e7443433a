#include "fire/train.hpp"

#include <cmath>

namespace fire {

OptimizerKind optimizer_from_name(const std::string& name) {
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "adam") return OptimizerKind::adam;
    throw std::invalid_argument("unknown optimizer '" + name + "'");
}

const char* optimizer_name(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

Trainer::Trainer(TrainConfig config, int64_t total_steps, const NetworkParams* theta0)
    : config_(std::move(config)), total_steps_(total_steps), theta0_(theta0) {
    config_.validate();
    if (total_steps_ < 1) throw std::invalid_argument("trainer: total_steps must be >= 1");
    warmup_steps_ = static_cast<int64_t>(std::ceil(config_.warmup_fraction * static_cast<double>(total_steps_)));
    if (config_.regularizer.kind == RegularizerKind::l2_init && theta0_ == nullptr)
        throw std::invalid_argument("trainer: l2_init needs the run-start parameters");
}

double Trainer::lr_at(int64_t step_index) const {
    if (warmup_steps_ <= 0) return config_.learning_rate;
    if (step_index + 1 >= warmup_steps_) return config_.learning_rate;
    return config_.learning_rate * static_cast<double>(step_index + 1) /
           static_cast<double>(warmup_steps_);
}

StepStats Trainer::step(NetworkParams& params, const Matrix& batch, const Matrix& targets,
                        LossKind kind) {
    StepStats stats;

    BackwardResult back = backward(params, batch, targets, kind);
    stats.loss = back.loss;

    if (config_.regularizer.kind == RegularizerKind::l2_init) {
        auto pg = l2_init_gradient(params, *theta0_, config_.regularizer.strength);
        stats.loss += pg.penalty;
        param_axpy(1.0, pg.grad, back.grad);
    } else if (config_.regularizer.kind == RegularizerKind::parseval) {
        auto pg = parseval_gradient_network(params, config_.regularizer.strength,
                                            config_.regularizer.parseval_scale);
        stats.loss += pg.penalty;
        param_axpy(1.0, pg.grad, back.grad);
    }

    double gnorm = param_norm(back.grad);
    if (config_.grad_clip > 0.0 && gnorm > config_.grad_clip) {
        param_scale(back.grad, config_.grad_clip / gnorm);
        gnorm = config_.grad_clip;
    }
    stats.grad_norm = gnorm;

    const double lr = lr_at(step_);
    stats.lr = lr;

    if (config_.optimizer == OptimizerKind::sgd) {
        param_axpy(-lr, back.grad, params);
    } else {
        if (!state_ready_) {
            m_ = zeros_like(params);
            v_ = zeros_like(params);
            state_ready_ = true;
        }
        constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
        const double t = static_cast<double>(step_ + 1);
        const double bc1 = 1.0 - std::pow(beta1, t);
        const double bc2 = 1.0 - std::pow(beta2, t);

        size_t li = 0;
        auto adam_update = [&](Matrix& p, const Matrix& g, Matrix& m, Matrix& v) {
            m = beta1 * m + (1.0 - beta1) * g;
            v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
            p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
        };
        for (li = 0; li < params.layers.size(); ++li) {
            auto& lp = params.layers[li];
            auto& lg = back.grad.layers[li];
            auto& lm = m_.layers[li];
            auto& lv = v_.layers[li];
            if (lp.kind == LayerKind::dense) adam_update(lp.dense, lg.dense, lm.dense, lv.dense);
            else
                for (size_t s = 0; s < lp.conv.size(); ++s)
                    adam_update(lp.conv[s], lg.conv[s], lm.conv[s], lv.conv[s]);
            if (lp.bias) {
                Vector& b = *lp.bias;
                Vector& gb = *lg.bias;
                Vector& mb = *lm.bias;
                Vector& vb = *lv.bias;
                mb = beta1 * mb + (1.0 - beta1) * gb;
                vb = beta2 * vb + (1.0 - beta2) * gb.cwiseProduct(gb);
                b.array() -= lr * (mb.array() / bc1) / ((vb.array() / bc2).sqrt() + eps);
            }
        }
    }
    ++step_;
    return stats;
}

}  // namespace fire
