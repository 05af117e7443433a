#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fire/checkpoint.hpp"
#include "fire/metrics.hpp"
#include "fire/nn.hpp"
#include "fire/train.hpp"
#include "param_test_utils.hpp"
#include "test_util.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace fire;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

using paramtest::assemble_hessian;
using paramtest::fd_gradient;
using paramtest::pack;

Architecture tiny_conv_arch() {
    Architecture a;
    a.layers.push_back(LayerSpec::make_conv(1, 2, 2, 2, 4, 4));  // 1x4x4 -> 2x3x3
    a.layers.push_back(LayerSpec::make_dense(18, 3));
    return a;
}

}  // namespace

TEST_CASE("init is deterministic and He-scaled") {
    Architecture arch = Architecture::mlp(64, {64}, 64);
    NetworkParams a = init_network(arch, 9);
    NetworkParams b = init_network(arch, 9);
    CHECK(sfe_network(a, b) == 0.0);
    CHECK(sfe_network(a, init_network(arch, 10)) > 0.0);

    double var = 0.0;
    int n = 0;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        NetworkParams p = init_network(arch, seed);
        var += p.layers[0].dense.squaredNorm();
        n += static_cast<int>(p.layers[0].dense.size());
    }
    const double expect = 2.0 / 64.0;
    CHECK(var / n > 0.8 * expect);
    CHECK(var / n < 1.2 * expect);
}

TEST_CASE("fresh layers sit closer to isometry than scaled ones") {
    Architecture arch = Architecture::mlp(256, {256}, 10);
    NetworkParams p = init_network(arch, 3);
    const MatrixXd& w = p.layers[0].dense;
    CHECK(dfi(w) < dfi(MatrixXd(3.0 * w)));
}

TEST_CASE("zero input through a bias-free ReLU net gives zero logits") {
    Architecture arch = Architecture::mlp(5, {7}, 3);
    arch.use_bias = false;
    NetworkParams p = init_network(arch, 2);
    auto cache = forward(p, MatrixXd::Zero(4, 5));
    CHECK(cache.logits.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identity single layer without activation passes the batch through") {
    Architecture arch;
    arch.layers.push_back(LayerSpec::make_dense(4, 4));
    arch.use_bias = false;
    NetworkParams p = init_network(arch, 0);
    p.layers[0].dense = MatrixXd::Identity(4, 4);
    MatrixXd batch = testutil::gaussian(6, 4, 12);
    CHECK((forward(p, batch).logits - batch).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward matches an independent scalar-loop oracle") {
    Architecture arch = Architecture::mlp(4, {5}, 2);
    NetworkParams p = init_network(arch, 21);
    MatrixXd batch = testutil::gaussian(3, 4, 22);
    auto cache = forward(p, batch);

    for (int s = 0; s < 3; ++s) {
        // layer 1
        std::vector<double> h1(5);
        for (int u = 0; u < 5; ++u) {
            double acc = (*p.layers[0].bias)[u];
            for (int j = 0; j < 4; ++j) acc += p.layers[0].dense(u, j) * batch(s, j);
            h1[u] = acc > 0 ? acc : 0.0;
        }
        for (int u = 0; u < 2; ++u) {
            double acc = (*p.layers[1].bias)[u];
            for (int j = 0; j < 5; ++j) acc += p.layers[1].dense(u, j) * h1[j];
            CHECK(std::abs(cache.logits(s, u) - acc) < 1e-12);
        }
    }
}

TEST_CASE("cached activations equal a second forward pass") {
    Architecture arch = Architecture::mlp(6, {8, 8}, 4);
    NetworkParams p = init_network(arch, 31);
    MatrixXd batch = testutil::gaussian(5, 6, 32);
    auto c1 = forward(p, batch);
    auto c2 = forward(p, batch);
    CHECK((c1.logits - c2.logits).cwiseAbs().maxCoeff() == 0.0);
    for (size_t l = 0; l < c1.inputs.size(); ++l)
        CHECK((c1.inputs[l] - c2.inputs[l]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gradient vanishes at an interpolating point under squared loss") {
    Architecture arch = Architecture::mlp(3, {6}, 2);
    NetworkParams p = init_network(arch, 44);
    MatrixXd batch = testutil::gaussian(5, 3, 45);
    MatrixXd targets = forward(p, batch).logits;
    auto res = backward(p, batch, targets, LossKind::squared);
    CHECK(res.loss == 0.0);
    CHECK(param_norm(res.grad) == 0.0);
}

TEST_CASE("duplicating the batch leaves the mean-reduced gradient unchanged") {
    Architecture arch = Architecture::mlp(4, {5}, 3);
    NetworkParams p = init_network(arch, 50);
    MatrixXd x = testutil::gaussian(4, 4, 51);
    Eigen::VectorXi y(4);
    y << 0, 2, 1, 2;
    MatrixXd t = one_hot(y, 3);

    MatrixXd x2(8, 4);
    x2 << x, x;
    MatrixXd t2(8, 3);
    t2 << t, t;
    auto g1 = backward(p, x, t, LossKind::cross_entropy);
    auto g2 = backward(p, x2, t2, LossKind::cross_entropy);
    param_axpy(-1.0, g1.grad, g2.grad);
    CHECK(param_norm(g2.grad) < 1e-14);
}

TEST_CASE("analytic gradients match central differences on 100 seeded nets") {
    std::mt19937_64 rng(5);
    int conv_cases = 0;
    for (int c = 0; c < 100; ++c) {
        const bool use_conv = c % 5 == 0;
        Architecture arch;
        if (use_conv) {
            arch = tiny_conv_arch();
            ++conv_cases;
        } else {
            const int d0 = 2 + static_cast<int>(rng() % 4);
            const int d1 = 2 + static_cast<int>(rng() % 6);
            const int d2 = 2 + static_cast<int>(rng() % 3);
            arch = Architecture::mlp(d0, {d1}, d2);
        }
        arch.use_bias = c % 3 != 0;
        NetworkParams p = init_network(arch, rng());
        REQUIRE(param_count(p) <= 500);

        const int n = 2 + static_cast<int>(rng() % 5);
        MatrixXd x = testutil::gaussian(n, arch.input_size(), rng);
        const LossKind kind = c % 2 == 0 ? LossKind::cross_entropy : LossKind::squared;
        MatrixXd t;
        if (kind == LossKind::cross_entropy) {
            Eigen::VectorXi y(n);
            for (int i = 0; i < n; ++i) y[i] = static_cast<int>(rng() % arch.output_size());
            t = one_hot(y, arch.output_size());
        } else {
            t = testutil::gaussian(n, arch.output_size(), rng);
        }

        VectorXd analytic = pack(backward(p, x, t, kind).grad);
        VectorXd fd = fd_gradient(p, x, t, kind, 1e-6);
        CHECK((analytic - fd).norm() <= 1e-5 * std::max(1e-8, analytic.norm()));
    }
    CHECK(conv_cases == 20);
}

TEST_CASE("hvp matches the explicitly assembled Hessian on a quadratic loss") {
    Architecture arch;
    arch.layers.push_back(LayerSpec::make_dense(4, 3));
    arch.use_bias = false;
    NetworkParams p = init_network(arch, 60);
    REQUIRE(param_count(p) <= 50);
    MatrixXd x = testutil::gaussian(8, 4, 61);
    MatrixXd t = testutil::gaussian(8, 3, 62);

    MatrixXd hess = assemble_hessian(p, x, t, LossKind::squared);
    std::mt19937_64 rng(63);
    for (int c = 0; c < 5; ++c) {
        NetworkParams v = zeros_like(p);
        for_each_matrix(v, [&](Matrix& m) { m = testutil::gaussian(m.rows(), m.cols(), rng); });
        VectorXd hv = pack(hvp(p, x, t, LossKind::squared, v));
        VectorXd expect = hess * pack(v);
        CHECK((hv - expect).norm() <= 1e-6 * expect.norm());
    }
}

TEST_CASE("hvp is linear and symmetric") {
    Architecture arch = Architecture::mlp(3, {4}, 2);
    NetworkParams p = init_network(arch, 70);
    MatrixXd x = testutil::gaussian(6, 3, 71);
    MatrixXd t = testutil::gaussian(6, 2, 72);

    std::mt19937_64 rng(73);
    NetworkParams u = zeros_like(p), v = zeros_like(p);
    for_each_tensor(u, [&](Matrix& m) { m = testutil::gaussian(m.rows(), m.cols(), rng); },
                    [&](Vector& b) { b = testutil::gaussian(b.size(), 1, rng).col(0); });
    for_each_tensor(v, [&](Matrix& m) { m = testutil::gaussian(m.rows(), m.cols(), rng); },
                    [&](Vector& b) { b = testutil::gaussian(b.size(), 1, rng).col(0); });

    NetworkParams v2 = zeros_like(p);
    param_axpy(2.0, v, v2);
    VectorXd hv = pack(hvp(p, x, t, LossKind::squared, v));
    VectorXd hv2 = pack(hvp(p, x, t, LossKind::squared, v2));
    CHECK((hv2 - 2.0 * hv).norm() <= 1e-5 * hv2.norm());

    const double uhv = pack(u).dot(hv);
    const double vhu = pack(v).dot(pack(hvp(p, x, t, LossKind::squared, u)));
    CHECK(std::abs(uhv - vhu) <= 1e-5 * std::max(std::abs(uhv), std::abs(vhu)));

    CHECK_THROWS_AS(hvp(p, x, t, LossKind::squared, zeros_like(p)), std::invalid_argument);
}

TEST_CASE("hessian power iteration agrees with the eigensolver on a tiny net") {
    Architecture arch;
    arch.layers.push_back(LayerSpec::make_dense(3, 3));
    arch.use_bias = false;
    NetworkParams p = init_network(arch, 80);
    MatrixXd x = testutil::gaussian(12, 3, 81);
    MatrixXd t = testutil::gaussian(12, 3, 82);

    MatrixXd hess = assemble_hessian(p, x, t, LossKind::squared);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (hess + hess.transpose()));
    const double expect = es.eigenvalues().cwiseAbs().maxCoeff();
    auto r = hessian_sigma_max(p, x, t, LossKind::squared, 1e-10, 500);
    CHECK(r.converged);
    CHECK(std::abs(r.value - expect) <= 1e-4 * expect);
}

TEST_CASE("hessian measurement at a zero-loss point keeps only the Gauss-Newton part") {
    // linear net, squared loss, targets = predictions: gamma = 0 and the
    // Hessian is (1/n) X^T X (per output), measured exactly
    Architecture arch;
    arch.layers.push_back(LayerSpec::make_dense(3, 2));
    arch.use_bias = false;
    NetworkParams p = init_network(arch, 90);
    MatrixXd x = whiten_columns(testutil::gaussian(16, 3, 91));
    MatrixXd t = forward(p, x).logits;
    auto r = hessian_sigma_max(p, x, t, LossKind::squared, 1e-10, 500);
    CHECK(r.value == doctest::Approx(1.0).epsilon(1e-6));  // lambda_max(Sigma_Z) = 1 whitened
}

TEST_CASE("curvature scales with the layer like the explicit oracle says") {
    Architecture arch = Architecture::mlp(3, {4}, 2);
    arch.use_bias = false;
    NetworkParams p = init_network(arch, 95);
    MatrixXd x = testutil::gaussian(10, 3, 96);
    MatrixXd t = testutil::gaussian(10, 2, 97);

    for (double c : {1.0, 2.0}) {
        NetworkParams q = p;
        q.layers[1].dense *= c;
        MatrixXd hess = assemble_hessian(q, x, t, LossKind::squared);
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (hess + hess.transpose()));
        auto r = hessian_sigma_max(q, x, t, LossKind::squared, 1e-10, 500);
        CHECK(std::abs(r.value - es.eigenvalues().cwiseAbs().maxCoeff()) <=
              1e-4 * es.eigenvalues().cwiseAbs().maxCoeff());
    }
}

TEST_CASE("trainer: zero learning rate leaves parameters untouched") {
    Architecture arch = Architecture::mlp(4, {5}, 3);
    NetworkParams p = init_network(arch, 100);
    NetworkParams before = p;
    TrainConfig tc;
    tc.learning_rate = 0.0;
    tc.warmup_fraction = 0.0;
    MatrixXd x = testutil::gaussian(6, 4, 101);
    Eigen::VectorXi y(6);
    y << 0, 1, 2, 0, 1, 2;
    for (auto opt : {OptimizerKind::sgd, OptimizerKind::adam}) {
        tc.optimizer = opt;
        Trainer tr(tc, 10);
        tr.step(p, x, one_hot(y, 3), LossKind::cross_entropy);
        CHECK(sfe_network(p, before) == 0.0);
    }
}

TEST_CASE("trainer clips the global gradient norm") {
    Architecture arch = Architecture::mlp(4, {5}, 3);
    NetworkParams p = init_network(arch, 110);
    p.layers[0].dense *= 50.0;  // blow up the gradient
    TrainConfig tc;
    tc.optimizer = OptimizerKind::sgd;
    tc.grad_clip = 0.5;
    tc.warmup_fraction = 0.0;
    MatrixXd x = testutil::gaussian(6, 4, 111);
    MatrixXd t = 100.0 * testutil::gaussian(6, 3, 112);
    Trainer tr(tc, 10);
    auto stats = tr.step(p, x, t, LossKind::squared);
    CHECK(stats.grad_norm == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("warmup ramps the learning rate linearly") {
    TrainConfig tc;
    tc.learning_rate = 1e-2;
    tc.warmup_fraction = 0.1;
    Trainer tr(tc, 100);  // 10 warmup steps
    CHECK(tr.lr_at(0) == doctest::Approx(1e-3));
    CHECK(tr.lr_at(4) == doctest::Approx(5e-3));
    CHECK(tr.lr_at(9) == doctest::Approx(1e-2));
    CHECK(tr.lr_at(50) == doctest::Approx(1e-2));
}

TEST_CASE("adam makes progress on a quadratic toy problem") {
    Architecture arch;
    arch.layers.push_back(LayerSpec::make_dense(4, 4));
    arch.use_bias = false;
    NetworkParams p = init_network(arch, 120);
    MatrixXd x = testutil::gaussian(32, 4, 121);
    MatrixXd t = forward(init_network(arch, 122), x).logits;  // realizable target
    TrainConfig tc;
    tc.optimizer = OptimizerKind::adam;
    tc.learning_rate = 1e-2;
    tc.warmup_fraction = 0.0;
    tc.grad_clip = 0.0;
    Trainer tr(tc, 100);
    const double first = loss_value(forward(p, x).logits, t, LossKind::squared);
    double last = first;
    for (int s = 0; s < 100; ++s) last = tr.step(p, x, t, LossKind::squared).loss;
    CHECK(last < 0.5 * first);
}

TEST_CASE("checkpoint round trip is bit-exact") {
    Architecture arch = Architecture::mlp(6, {9}, 4);
    NetworkParams p = init_network(arch, 130);
    const std::string dir = (std::filesystem::temp_directory_path() / "fire_ckpt_test").string();
    std::filesystem::remove_all(dir);
    save_checkpoint(dir, {p, 42, 1234, 3});
    Checkpoint loaded = load_checkpoint(dir);
    CHECK(loaded.seed == 42);
    CHECK(loaded.step == 1234);
    CHECK(loaded.chunk == 3);
    bool identical = loaded.params.same_architecture(p);
    for_each_tensor_pair(loaded.params, p,
                         [&](Matrix& a, const Matrix& b) { identical &= (a.array() == b.array()).all(); },
                         [&](Vector& a, const Vector& b) { identical &= (a.array() == b.array()).all(); });
    CHECK(identical);

    // a second save must produce byte-identical blobs
    const std::string dir2 = dir + "_2";
    std::filesystem::remove_all(dir2);
    save_checkpoint(dir2, loaded);
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        std::ifstream f1(e.path(), std::ios::binary);
        std::ifstream f2(std::filesystem::path(dir2) / e.path().filename(), std::ios::binary);
        std::string a((std::istreambuf_iterator<char>(f1)), {});
        std::string b((std::istreambuf_iterator<char>(f2)), {});
        CHECK(a == b);
    }
    std::filesystem::remove_all(dir);
    std::filesystem::remove_all(dir2);
}

TEST_CASE("checkpoint round trip covers conv layers") {
    Architecture arch = tiny_conv_arch();
    NetworkParams p = init_network(arch, 140);
    const std::string dir = (std::filesystem::temp_directory_path() / "fire_ckpt_conv").string();
    std::filesystem::remove_all(dir);
    save_checkpoint(dir, {p, 7, 1, 0});
    Checkpoint loaded = load_checkpoint(dir);
    CHECK(loaded.params.same_architecture(p));
    CHECK(sfe_network(loaded.params, p) == 0.0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint loader rejects corrupted byte counts") {
    Architecture arch = Architecture::mlp(3, {3}, 2);
    NetworkParams p = init_network(arch, 150);
    const std::string dir = (std::filesystem::temp_directory_path() / "fire_ckpt_bad").string();
    std::filesystem::remove_all(dir);
    save_checkpoint(dir, {p, 0, 0, 0});
    std::ofstream f(std::filesystem::path(dir) / "t0000.bin", std::ios::binary | std::ios::trunc);
    f << "short";
    f.close();
    CHECK_THROWS_AS(load_checkpoint(dir), std::runtime_error);
    std::filesystem::remove_all(dir);
}
