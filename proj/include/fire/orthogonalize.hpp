#pragma once

#include "fire/layers.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace fire {

// Polynomial coefficients for the Newton-Schulz update
//   X <- a*X + b*X*(X^T X) + c*X*(X^T X)^2.
// c == 0 gives the two-term cubic form.
struct NsCoefficients {
    enum class Label { paper_cubic, appendix_quintic, muon_quintic, custom };

    double a = 1.5;
    double b = -0.5;
    double c = 0.0;
    Label label = Label::paper_cubic;

    static NsCoefficients paper_cubic() { return {1.5, -0.5, 0.0, Label::paper_cubic}; }
    static NsCoefficients appendix_quintic() { return {2.0, -1.5, 0.5, Label::appendix_quintic}; }
    static NsCoefficients muon_quintic() { return {3.4445, -4.7750, 2.0315, Label::muon_quintic}; }
    static NsCoefficients custom(double a, double b, double c) { return {a, b, c, Label::custom}; }
    static NsCoefficients from_name(const std::string& name);

    const char* name() const;
    // iteration count defaults: 10 for the cubic (the normative recurrence),
    // 5 for the faster quintic variants
    int default_iters() const { return label == Label::paper_cubic ? 10 : 5; }
};

// Newton-Schulz iteration from X0 = w / ||w||_F, run for exactly `iters` loop
// bodies. Wide inputs are transposed internally so the Gram is always formed
// on the smaller dimension; the result is transposed back.
Matrix newton_schulz(const Matrix& w, int iters, const NsCoefficients& coeffs = NsCoefficients::paper_cubic());

// Dense-layer reinitializer: orthogonalize, then restore output scale by
// sqrt(d_out / d_in).
Matrix fire_dense(const Matrix& w, int iters, const NsCoefficients& coeffs = NsCoefficients::paper_cubic());

// Conv-layer reinitializer: every spatial slice orthogonalized independently,
// then scaled by sqrt(C_out / C_in) / (k_h * k_w). Bias untouched.
LayerWeights fire_conv(const LayerWeights& k, int iters, const NsCoefficients& coeffs = NsCoefficients::paper_cubic());

LayerWeights fire_layer(const LayerWeights& lw, int iters, const NsCoefficients& coeffs = NsCoefficients::paper_cubic());

// Apply the reinitializer to every layer whose mask entry is true; unmasked
// layers and all biases are returned bit-identical.
NetworkParams fire_network(const NetworkParams& params, int iters,
                           const NsCoefficients& coeffs = NsCoefficients::paper_cubic(),
                           const std::vector<bool>& layer_mask = {});

}  // namespace fire
