#include "fire/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace fire {

void he_fill(LayerWeights& lw, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto fill = [&](Matrix& m, double std_dev) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)  // row-major order, fixed for reproducibility
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = std_dev * gauss(rng);
    };
    if (lw.kind == LayerKind::dense) {
        fill(lw.dense, std::sqrt(2.0 / static_cast<double>(lw.dense.cols())));
    } else {
        const double fan_in = static_cast<double>(lw.conv[0].cols()) * lw.kernel_h * lw.kernel_w;
        for (auto& s : lw.conv) fill(s, std::sqrt(2.0 / fan_in));
    }
    if (lw.bias) lw.bias->setZero();
}

NetworkParams init_network(const Architecture& arch, uint64_t seed) {
    arch.validate();
    NetworkParams p;
    p.arch = arch;
    std::mt19937_64 rng(seed);
    for (const auto& spec : arch.layers) {
        LayerWeights lw;
        lw.kind = spec.kind;
        if (spec.kind == LayerKind::dense) {
            lw.dense.resize(spec.out_dim, spec.in_dim);
        } else {
            lw.kernel_h = spec.kernel_h;
            lw.kernel_w = spec.kernel_w;
            lw.conv.assign(static_cast<size_t>(spec.kernel_h) * spec.kernel_w,
                           Matrix(spec.out_channels, spec.in_channels));
        }
        if (arch.use_bias)
            lw.bias = Vector::Zero(spec.kind == LayerKind::dense ? spec.out_dim : spec.out_channels);
        he_fill(lw, rng);
        p.layers.push_back(std::move(lw));
    }
    return p;
}

namespace {

// conv forward for one layer: batch rows are flattened C_in x H x W images.
// out[n, c_out, y, x] = sum_{i,j} (S_ij * in[n, :, y+i, x+j])[c_out] + bias[c_out]
Matrix conv_forward(const LayerSpec& spec, const LayerWeights& lw, const Matrix& in) {
    const int ci = spec.in_channels, co = spec.out_channels;
    const int ih = spec.in_h, iw = spec.in_w;
    const int oh = spec.out_h(), ow = spec.out_w();
    const Eigen::Index n = in.rows();
    Matrix out = Matrix::Zero(n, static_cast<Eigen::Index>(co) * oh * ow);

    Eigen::VectorXd px(ci), py(co);
    for (Eigen::Index s = 0; s < n; ++s) {
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                py.setZero();
                for (int i = 0; i < spec.kernel_h; ++i) {
                    for (int j = 0; j < spec.kernel_w; ++j) {
                        const Matrix& slice = lw.conv[static_cast<size_t>(i) * spec.kernel_w + j];
                        for (int c = 0; c < ci; ++c)
                            px[c] = in(s, (static_cast<Eigen::Index>(c) * ih + (y + i)) * iw + (x + j));
                        py.noalias() += slice * px;
                    }
                }
                for (int c = 0; c < co; ++c) {
                    double v = py[c];
                    if (lw.bias) v += (*lw.bias)[c];
                    out(s, (static_cast<Eigen::Index>(c) * oh + y) * ow + x) = v;
                }
            }
        }
    }
    return out;
}

// gradients of one conv layer given upstream dOut; returns dIn and fills gw/gb
Matrix conv_backward(const LayerSpec& spec, const LayerWeights& lw, const Matrix& in,
                     const Matrix& dout, LayerWeights& gw) {
    const int ci = spec.in_channels, co = spec.out_channels;
    const int ih = spec.in_h, iw = spec.in_w;
    const int oh = spec.out_h(), ow = spec.out_w();
    const Eigen::Index n = in.rows();
    Matrix din = Matrix::Zero(n, in.cols());

    Eigen::VectorXd px(ci), gy(co);
    for (Eigen::Index s = 0; s < n; ++s) {
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                for (int c = 0; c < co; ++c)
                    gy[c] = dout(s, (static_cast<Eigen::Index>(c) * oh + y) * ow + x);
                if (gw.bias) *gw.bias += gy;
                for (int i = 0; i < spec.kernel_h; ++i) {
                    for (int j = 0; j < spec.kernel_w; ++j) {
                        const size_t si = static_cast<size_t>(i) * spec.kernel_w + j;
                        const Matrix& slice = lw.conv[si];
                        for (int c = 0; c < ci; ++c)
                            px[c] = in(s, (static_cast<Eigen::Index>(c) * ih + (y + i)) * iw + (x + j));
                        gw.conv[si].noalias() += gy * px.transpose();
                        Eigen::VectorXd gin = slice.transpose() * gy;
                        for (int c = 0; c < ci; ++c)
                            din(s, (static_cast<Eigen::Index>(c) * ih + (y + i)) * iw + (x + j)) += gin[c];
                    }
                }
            }
        }
    }
    return din;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix p = logits;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double mx = p.row(i).maxCoeff();
        p.row(i) = (p.row(i).array() - mx).exp();
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

}  // namespace

ForwardCache forward(const NetworkParams& params, const Matrix& batch) {
    if (batch.cols() != params.arch.input_size())
        throw std::invalid_argument("forward: batch width does not match network input size");
    ForwardCache cache;
    Matrix h = batch;
    const size_t L = params.layers.size();
    cache.inputs.reserve(L);
    cache.preacts.reserve(L);
    for (size_t l = 0; l < L; ++l) {
        const auto& spec = params.arch.layers[l];
        const auto& lw = params.layers[l];
        cache.inputs.push_back(h);
        Matrix pre;
        if (spec.kind == LayerKind::dense) {
            pre.noalias() = h * lw.dense.transpose();
            if (lw.bias) pre.rowwise() += lw.bias->transpose();
        } else {
            pre = conv_forward(spec, lw, h);
        }
        cache.preacts.push_back(pre);
        const bool act = (l + 1 < L) || params.arch.final_activation;
        h = act ? pre.cwiseMax(0.0) : pre;
    }
    cache.logits = h;
    return cache;
}

double loss_value(const Matrix& logits, const Matrix& targets, LossKind kind) {
    if (logits.rows() != targets.rows() || logits.cols() != targets.cols())
        throw std::invalid_argument("loss_value: logits/targets shape mismatch");
    const double n = static_cast<double>(logits.rows());
    if (kind == LossKind::squared) return 0.5 * (logits - targets).squaredNorm() / n;
    // cross entropy over softmax rows, log-sum-exp stabilized
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double mx = logits.row(i).maxCoeff();
        const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
        total += targets.row(i).sum() * lse - targets.row(i).dot(logits.row(i));
    }
    return total / n;
}

BackwardResult backward(const NetworkParams& params, const Matrix& batch, const Matrix& targets,
                        LossKind kind) {
    ForwardCache cache = forward(params, batch);
    if (cache.logits.rows() != targets.rows() || cache.logits.cols() != targets.cols())
        throw std::invalid_argument("backward: targets shape mismatch");

    BackwardResult out;
    out.loss = loss_value(cache.logits, targets, kind);
    out.grad = zeros_like(params);

    const double n = static_cast<double>(batch.rows());
    Matrix delta;  // dL/d(pre-activation of current layer)
    if (kind == LossKind::squared) delta = (cache.logits - targets) / n;
    else delta = (softmax_rows(cache.logits) - targets) / n;

    const size_t L = params.layers.size();
    if (params.arch.final_activation)
        delta = delta.cwiseProduct((cache.preacts[L - 1].array() > 0.0).cast<double>().matrix());

    for (size_t li = L; li-- > 0;) {
        const auto& spec = params.arch.layers[li];
        const auto& lw = params.layers[li];
        auto& gw = out.grad.layers[li];
        Matrix din;
        if (spec.kind == LayerKind::dense) {
            gw.dense.noalias() = delta.transpose() * cache.inputs[li];
            if (gw.bias) *gw.bias = delta.colwise().sum().transpose();
            if (li > 0) din.noalias() = delta * lw.dense;
        } else {
            din = conv_backward(spec, lw, cache.inputs[li], delta, gw);
        }
        if (li > 0) {
            delta = din.cwiseProduct((cache.preacts[li - 1].array() > 0.0).cast<double>().matrix());
        }
    }
    return out;
}

NetworkParams hvp(const NetworkParams& params, const Matrix& batch, const Matrix& targets,
                  LossKind kind, const NetworkParams& direction) {
    const double vnorm = param_norm(direction);
    if (vnorm == 0.0) throw std::invalid_argument("hvp: zero direction");
    const double tnorm = param_norm(params);
    const double h = 1e-4 * (tnorm > 0.0 ? tnorm : 1.0) / vnorm;

    NetworkParams plus = params, minus = params;
    param_axpy(h, direction, plus);
    param_axpy(-h, direction, minus);
    BackwardResult gp = backward(plus, batch, targets, kind);
    BackwardResult gm = backward(minus, batch, targets, kind);
    param_axpy(-1.0, gm.grad, gp.grad);
    param_scale(gp.grad, 1.0 / (2.0 * h));
    return gp.grad;
}

Matrix one_hot(const Eigen::VectorXi& labels, int num_classes) {
    Matrix t = Matrix::Zero(labels.size(), num_classes);
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes)
            throw std::invalid_argument("one_hot: label out of range");
        t(i, labels[i]) = 1.0;
    }
    return t;
}

double accuracy(const Matrix& logits, const Eigen::VectorXi& labels) {
    if (logits.rows() != labels.size()) throw std::invalid_argument("accuracy: size mismatch");
    if (logits.rows() == 0) return 0.0;
    Eigen::Index hits = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::Index best = 0;
        logits.row(i).maxCoeff(&best);
        if (best == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

}  // namespace fire
