#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fire {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class LayerKind { dense, conv };

// Static description of one layer. Dense layers map in_dim -> out_dim.
// Conv layers are stride-1, valid-padding, applied on an input image of
// in_channels x in_h x in_w; output spatial dims follow from the kernel.
struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    // dense
    int in_dim = 0;
    int out_dim = 0;
    // conv
    int in_channels = 0;
    int out_channels = 0;
    int kernel_h = 0;
    int kernel_w = 0;
    int in_h = 0;
    int in_w = 0;

    static LayerSpec make_dense(int in_dim, int out_dim) {
        LayerSpec s;
        s.kind = LayerKind::dense;
        s.in_dim = in_dim;
        s.out_dim = out_dim;
        return s;
    }
    static LayerSpec make_conv(int in_c, int out_c, int kh, int kw, int in_h, int in_w) {
        LayerSpec s;
        s.kind = LayerKind::conv;
        s.in_channels = in_c;
        s.out_channels = out_c;
        s.kernel_h = kh;
        s.kernel_w = kw;
        s.in_h = in_h;
        s.in_w = in_w;
        return s;
    }

    int out_h() const { return in_h - kernel_h + 1; }
    int out_w() const { return in_w - kernel_w + 1; }
    // flattened dimensions seen by the layer chain
    int input_size() const {
        return kind == LayerKind::dense ? in_dim : in_channels * in_h * in_w;
    }
    int output_size() const {
        return kind == LayerKind::dense ? out_dim : out_channels * out_h() * out_w();
    }
};

struct Architecture {
    std::vector<LayerSpec> layers;
    bool final_activation = false;  // ReLU on the last layer's output
    bool use_bias = true;

    int input_size() const { return layers.front().input_size(); }
    int output_size() const { return layers.back().output_size(); }

    void validate() const {
        if (layers.empty()) throw std::invalid_argument("architecture: no layers");
        for (size_t l = 0; l < layers.size(); ++l) {
            const auto& s = layers[l];
            if (s.kind == LayerKind::dense) {
                if (s.in_dim <= 0 || s.out_dim <= 0)
                    throw std::invalid_argument("architecture: dense layer " + std::to_string(l) + " has nonpositive dims");
            } else {
                if (s.in_channels <= 0 || s.out_channels <= 0 || s.kernel_h <= 0 || s.kernel_w <= 0)
                    throw std::invalid_argument("architecture: conv layer " + std::to_string(l) + " has nonpositive dims");
                if (s.out_h() <= 0 || s.out_w() <= 0)
                    throw std::invalid_argument("architecture: conv layer " + std::to_string(l) + " kernel larger than input");
            }
            if (l + 1 < layers.size() && layers[l + 1].input_size() != layers[l].output_size())
                throw std::invalid_argument("architecture: layer " + std::to_string(l + 1) +
                                            " input size does not match previous output size");
        }
    }

    static Architecture mlp(int input_dim, const std::vector<int>& hidden, int num_outputs) {
        Architecture a;
        int prev = input_dim;
        for (int h : hidden) {
            a.layers.push_back(LayerSpec::make_dense(prev, h));
            prev = h;
        }
        a.layers.push_back(LayerSpec::make_dense(prev, num_outputs));
        return a;
    }
};

// One layer's parameters. Dense weights are stored d_out x d_in (each row is
// one output unit's incoming weights). Conv weights are kernel_h*kernel_w
// spatial slices, each C_out x C_in, indexed slice = i*kernel_w + j.
struct LayerWeights {
    LayerKind kind = LayerKind::dense;
    Matrix dense;
    std::vector<Matrix> conv;
    int kernel_h = 0;
    int kernel_w = 0;
    std::optional<Vector> bias;

    int slice_count() const { return kernel_h * kernel_w; }
    bool same_shape(const LayerWeights& o) const {
        if (kind != o.kind || bias.has_value() != o.bias.has_value()) return false;
        if (bias && bias->size() != o.bias->size()) return false;
        if (kind == LayerKind::dense)
            return dense.rows() == o.dense.rows() && dense.cols() == o.dense.cols();
        if (kernel_h != o.kernel_h || kernel_w != o.kernel_w || conv.size() != o.conv.size()) return false;
        for (size_t s = 0; s < conv.size(); ++s)
            if (conv[s].rows() != o.conv[s].rows() || conv[s].cols() != o.conv[s].cols()) return false;
        return true;
    }
};

struct NetworkParams {
    Architecture arch;
    std::vector<LayerWeights> layers;

    size_t layer_count() const { return layers.size(); }
    bool same_architecture(const NetworkParams& o) const {
        if (layers.size() != o.layers.size()) return false;
        for (size_t l = 0; l < layers.size(); ++l)
            if (!layers[l].same_shape(o.layers[l])) return false;
        return true;
    }
};

// Apply fn to every parameter tensor (weight matrices, conv slices, biases).
// Biases are passed as column matrices via an Eigen::Map-free copy-in/out;
// to keep things allocation-free we expose matrices and vectors separately.
inline void for_each_matrix(NetworkParams& p, const std::function<void(Matrix&)>& fn) {
    for (auto& lw : p.layers) {
        if (lw.kind == LayerKind::dense) fn(lw.dense);
        else for (auto& s : lw.conv) fn(s);
    }
}
inline void for_each_matrix(const NetworkParams& p, const std::function<void(const Matrix&)>& fn) {
    for (const auto& lw : p.layers) {
        if (lw.kind == LayerKind::dense) fn(lw.dense);
        else for (const auto& s : lw.conv) fn(s);
    }
}
inline void for_each_tensor(NetworkParams& p, const std::function<void(Matrix&)>& mfn,
                            const std::function<void(Vector&)>& vfn) {
    for (auto& lw : p.layers) {
        if (lw.kind == LayerKind::dense) mfn(lw.dense);
        else for (auto& s : lw.conv) mfn(s);
        if (lw.bias) vfn(*lw.bias);
    }
}
inline void for_each_tensor(const NetworkParams& p, const std::function<void(const Matrix&)>& mfn,
                            const std::function<void(const Vector&)>& vfn) {
    for (const auto& lw : p.layers) {
        if (lw.kind == LayerKind::dense) mfn(lw.dense);
        else for (const auto& s : lw.conv) mfn(s);
        if (lw.bias) vfn(*lw.bias);
    }
}

// Pairwise traversal; shapes must match.
void for_each_tensor_pair(NetworkParams& a, const NetworkParams& b,
                          const std::function<void(Matrix&, const Matrix&)>& mfn,
                          const std::function<void(Vector&, const Vector&)>& vfn);

NetworkParams zeros_like(const NetworkParams& p);
size_t param_count(const NetworkParams& p);
double param_dot(const NetworkParams& a, const NetworkParams& b);
double param_norm(const NetworkParams& p);
// y += alpha * x
void param_axpy(double alpha, const NetworkParams& x, NetworkParams& y);
void param_scale(NetworkParams& p, double alpha);

}  // namespace fire
