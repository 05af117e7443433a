#pragma once

#include "fire/layers.hpp"

#include <cstdint>
#include <string>

namespace fire {

// Gaussian-cluster classification data: one random unit-sphere mean per class
// scaled by `radius`, isotropic noise around it. Train and test are disjoint
// draws from the same clusters.
struct DatasetSpec {
    std::string generator = "gaussian_clusters";
    int num_classes = 10;
    int input_dim = 32;
    int samples_per_class = 500;
    int test_samples_per_class = 100;
    double noise = 0.5;
    double radius = 2.0;
    uint64_t seed = 1;

    void validate() const {
        if (generator != "gaussian_clusters")
            throw std::invalid_argument("dataset: unknown generator '" + generator + "'");
        if (num_classes < 2) throw std::invalid_argument("dataset: need at least 2 classes");
        if (input_dim < 1) throw std::invalid_argument("dataset: input_dim must be >= 1");
        if (samples_per_class < 1 || test_samples_per_class < 1)
            throw std::invalid_argument("dataset: samples per class must be >= 1");
        if (noise < 0.0) throw std::invalid_argument("dataset: noise must be >= 0");
        if (radius <= 0.0) throw std::invalid_argument("dataset: radius must be > 0");
    }
};

struct Dataset {
    Matrix train_x;           // n_train x input_dim
    Eigen::VectorXi train_y;  // class indices
    Matrix test_x;
    Eigen::VectorXi test_y;
    Matrix class_means;       // num_classes x input_dim
};

Dataset generate_dataset(const DatasetSpec& spec);

}  // namespace fire
