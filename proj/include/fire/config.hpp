#pragma once

#include "fire/baselines.hpp"
#include "fire/dataset.hpp"
#include "fire/orthogonalize.hpp"
#include "fire/train.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fire {

enum class Protocol { warm_start, continual, class_incremental };

Protocol protocol_from_name(const std::string& name);
const char* protocol_name(Protocol p);

struct MetricsConfig {
    int cadence = 1;           // epochs between records; epoch 0 and the last epoch always log
    double srank_delta = 0.1;
    double dormant_tau = 0.025;
    bool hessian = false;      // measure Hessian sigma_max at each chunk start
    int hessian_batch = 256;

    void validate() const {
        if (cadence < 1) throw std::invalid_argument("metrics: cadence must be >= 1");
        if (srank_delta <= 0.0 || srank_delta >= 1.0)
            throw std::invalid_argument("metrics: srank_delta in (0,1)");
        if (dormant_tau <= 0.0 || dormant_tau >= 1.0)
            throw std::invalid_argument("metrics: dormant_tau in (0,1)");
        if (hessian_batch < 1) throw std::invalid_argument("metrics: hessian_batch must be >= 1");
    }
};

struct ExperimentConfig {
    Protocol protocol = Protocol::continual;
    int num_chunks = 0;          // 0 = protocol default (2 / 10 / 20)
    double warm_fraction = 0.1;  // warm_start first-chunk share of the data

    DatasetSpec dataset;
    std::vector<int> hidden = {128, 128};
    TrainConfig train;
    ReinitSpec reinit;
    NsCoefficients coeffs = NsCoefficients::paper_cubic();
    MetricsConfig metrics;

    std::vector<uint64_t> seeds = {1, 2, 3};
    std::string output_dir = "fire_out";

    int resolved_num_chunks() const;
    void validate() const;
};

// Parses the nested key-value config format: one "dotted.key value" pair per
// line, '#' starts a comment. Unknown keys are hard errors.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// The resolved configuration, printable and re-parseable.
std::string config_to_text(const ExperimentConfig& cfg);

}  // namespace fire
