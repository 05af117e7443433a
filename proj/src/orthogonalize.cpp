#include "fire/orthogonalize.hpp"

#include "fire/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace fire {

NsCoefficients NsCoefficients::from_name(const std::string& name) {
    if (name == "cubic" || name == "paper_cubic") return paper_cubic();
    if (name == "quintic" || name == "appendix_quintic") return appendix_quintic();
    if (name == "muon" || name == "muon_quintic") return muon_quintic();
    throw std::invalid_argument("unknown coefficient set '" + name + "' (expected cubic|quintic|muon)");
}

const char* NsCoefficients::name() const {
    switch (label) {
        case Label::paper_cubic: return "paper_cubic";
        case Label::appendix_quintic: return "appendix_quintic";
        case Label::muon_quintic: return "muon_quintic";
        default: return "custom";
    }
}

Matrix newton_schulz(const Matrix& w, int iters, const NsCoefficients& coeffs) {
    require_finite(w, "newton_schulz");
    if (iters < 0) throw std::invalid_argument("newton_schulz: iters must be >= 0");
    const double norm = w.norm();
    if (norm == 0.0) throw std::invalid_argument("newton_schulz: all-zero input, normalization undefined");

    const bool wide = w.rows() < w.cols();
    Matrix x = wide ? Matrix(w.transpose() / norm) : Matrix(w / norm);
    for (int k = 0; k < iters; ++k) {
        const Matrix gram = x.transpose() * x;
        if (coeffs.c == 0.0) {
            x = coeffs.a * x + coeffs.b * (x * gram);
        } else {
            const Matrix xg = x * gram;
            x = coeffs.a * x + coeffs.b * xg + coeffs.c * (xg * gram);
        }
    }
    return wide ? Matrix(x.transpose()) : x;
}

Matrix fire_dense(const Matrix& w, int iters, const NsCoefficients& coeffs) {
    if (iters < 1) throw std::invalid_argument("fire_dense: iters must be >= 1");
    const double scale = std::sqrt(static_cast<double>(w.rows()) / static_cast<double>(w.cols()));
    return scale * newton_schulz(w, iters, coeffs);
}

LayerWeights fire_conv(const LayerWeights& k, int iters, const NsCoefficients& coeffs) {
    if (k.kind != LayerKind::conv) throw std::invalid_argument("fire_conv: not a conv layer");
    if (iters < 1) throw std::invalid_argument("fire_conv: iters must be >= 1");
    if (k.conv.empty() || static_cast<int>(k.conv.size()) != k.slice_count())
        throw std::invalid_argument("fire_conv: slice count does not match kernel dims");

    const double c_out = static_cast<double>(k.conv[0].rows());
    const double c_in = static_cast<double>(k.conv[0].cols());
    const double scale = std::sqrt(c_out / c_in) / (static_cast<double>(k.kernel_h) * k.kernel_w);

    LayerWeights out = k;
    for (size_t s = 0; s < k.conv.size(); ++s) {
        try {
            out.conv[s] = scale * newton_schulz(k.conv[s], iters, coeffs);
        } catch (const std::exception& e) {
            throw std::runtime_error("fire_conv: slice " + std::to_string(s) + ": " + e.what());
        }
    }
    return out;
}

LayerWeights fire_layer(const LayerWeights& lw, int iters, const NsCoefficients& coeffs) {
    if (lw.kind == LayerKind::conv) return fire_conv(lw, iters, coeffs);
    LayerWeights out = lw;
    out.dense = fire_dense(lw.dense, iters, coeffs);
    return out;
}

NetworkParams fire_network(const NetworkParams& params, int iters, const NsCoefficients& coeffs,
                           const std::vector<bool>& layer_mask) {
    std::vector<bool> mask = layer_mask;
    if (mask.empty()) mask.assign(params.layers.size(), true);
    if (mask.size() != params.layers.size())
        throw std::invalid_argument("fire_network: mask length does not match layer count");

    NetworkParams out = params;
    for (size_t l = 0; l < params.layers.size(); ++l) {
        if (!mask[l]) continue;
        try {
            out.layers[l] = fire_layer(params.layers[l], iters, coeffs);
        } catch (const std::exception& e) {
            throw std::runtime_error("fire_network: layer " + std::to_string(l) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace fire
