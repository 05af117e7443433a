#include "fire/layers.hpp"

#include <cmath>

namespace fire {

void for_each_tensor_pair(NetworkParams& a, const NetworkParams& b,
                          const std::function<void(Matrix&, const Matrix&)>& mfn,
                          const std::function<void(Vector&, const Vector&)>& vfn) {
    if (!a.same_architecture(b))
        throw std::invalid_argument("for_each_tensor_pair: architecture mismatch");
    for (size_t l = 0; l < a.layers.size(); ++l) {
        auto& la = a.layers[l];
        const auto& lb = b.layers[l];
        if (la.kind == LayerKind::dense) mfn(la.dense, lb.dense);
        else for (size_t s = 0; s < la.conv.size(); ++s) mfn(la.conv[s], lb.conv[s]);
        if (la.bias) vfn(*la.bias, *lb.bias);
    }
}

NetworkParams zeros_like(const NetworkParams& p) {
    NetworkParams z = p;
    for_each_tensor(z, [](Matrix& m) { m.setZero(); }, [](Vector& v) { v.setZero(); });
    return z;
}

size_t param_count(const NetworkParams& p) {
    size_t n = 0;
    for_each_tensor(p, [&](const Matrix& m) { n += static_cast<size_t>(m.size()); },
                    [&](const Vector& v) { n += static_cast<size_t>(v.size()); });
    return n;
}

double param_dot(const NetworkParams& a, const NetworkParams& b) {
    double acc = 0.0;
    NetworkParams& ma = const_cast<NetworkParams&>(a);
    for_each_tensor_pair(ma, b,
                         [&](Matrix& x, const Matrix& y) { acc += (x.array() * y.array()).sum(); },
                         [&](Vector& x, const Vector& y) { acc += x.dot(y); });
    return acc;
}

double param_norm(const NetworkParams& p) { return std::sqrt(param_dot(p, p)); }

void param_axpy(double alpha, const NetworkParams& x, NetworkParams& y) {
    for_each_tensor_pair(y, x, [&](Matrix& yy, const Matrix& xx) { yy += alpha * xx; },
                         [&](Vector& yy, const Vector& xx) { yy += alpha * xx; });
}

void param_scale(NetworkParams& p, double alpha) {
    for_each_tensor(p, [&](Matrix& m) { m *= alpha; }, [&](Vector& v) { v *= alpha; });
}

}  // namespace fire
