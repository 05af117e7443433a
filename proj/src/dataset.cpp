#include "fire/dataset.hpp"

#include <random>

namespace fire {

Dataset generate_dataset(const DatasetSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Dataset ds;
    ds.class_means.resize(spec.num_classes, spec.input_dim);
    for (int c = 0; c < spec.num_classes; ++c) {
        Vector m(spec.input_dim);
        for (int j = 0; j < spec.input_dim; ++j) m[j] = gauss(rng);
        const double n = m.norm();
        ds.class_means.row(c) = (n > 0 ? (spec.radius / n) * m : m).transpose();
    }

    auto draw_split = [&](int per_class, Matrix& x, Eigen::VectorXi& y) {
        const int total = per_class * spec.num_classes;
        x.resize(total, spec.input_dim);
        y.resize(total);
        int r = 0;
        for (int c = 0; c < spec.num_classes; ++c) {
            for (int s = 0; s < per_class; ++s, ++r) {
                for (int j = 0; j < spec.input_dim; ++j)
                    x(r, j) = ds.class_means(c, j) + spec.noise * gauss(rng);
                y[r] = c;
            }
        }
    };
    draw_split(spec.samples_per_class, ds.train_x, ds.train_y);
    draw_split(spec.test_samples_per_class, ds.test_x, ds.test_y);
    return ds;
}

}  // namespace fire
