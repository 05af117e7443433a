#pragma once

#include "fire/checkpoint.hpp"
#include "fire/config.hpp"
#include "fire/dataset.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fire {

struct TaskStream {
    Protocol protocol = Protocol::continual;
    int num_chunks = 0;
    std::vector<std::vector<int>> chunk_indices;  // into the train set, cumulative
};

TaskStream build_task_stream(const ExperimentConfig& cfg, const Dataset& ds);

struct MetricRecord {
    std::string run_id;
    std::string method;
    uint64_t seed = 0;
    int chunk = 0;
    int epoch = 0;  // 0 = evaluated right after the chunk-start reinit, before training
    std::string split;  // train | test
    double loss = 0.0;
    double accuracy = 0.0;
    double sfe_pre_reset = 0.0;
    double sfe_pre_reset_norm = 0.0;  // sfe / squared weight norm of the pre-reset network
    std::vector<double> dfi_per_layer;         // test rows only
    int srank_features = -1;                   // -1 = not measured
    int dormant_total = -1;
    std::optional<double> hessian_sigma_max;
    double wall_clock_s = 0.0;
};

std::string csv_header(size_t num_layers);
std::string csv_row(const MetricRecord& r, size_t num_layers);

struct RunResult {
    std::string run_id;
    std::vector<MetricRecord> records;
    std::string csv_path;
};

// One seed of one configuration. Writes records_<run_id>.csv (flushed after
// every row) and chunk-boundary checkpoints under <output>/<run_id>/.
// resume_from_chunk >= 1 restarts from that chunk's pre-reinit checkpoint and
// replays only the remaining chunks (records go to a *_resumed CSV).
RunResult run_single(const ExperimentConfig& cfg, uint64_t seed, int resume_from_chunk = -1,
                     const std::string& run_id_override = "");

// All seeds, optionally in parallel worker threads (jobs = 0 picks the
// hardware count). Runs are independent; output is identical for any jobs.
std::vector<RunResult> run_experiment(const ExperimentConfig& cfg, int jobs = 1);

// One run per iteration count (method forced to fire), plus an NS-trajectory
// log (ns_trajectory.csv) of SFE and DfI as functions of the iteration index,
// computed on the final pre-reset weights of the first listed run.
std::vector<RunResult> run_ablation_iters(const ExperimentConfig& cfg,
                                          const std::vector<int>& iters_list, int jobs = 1);

struct NsTrajectoryPoint {
    int iter = 0;
    double sfe_ns = 0.0;        // vs original weights, unscaled NS output
    double sfe_fire = 0.0;      // vs original weights, with the FIRE rescale
    double dfi_ns_mean = 0.0;   // mean per-layer DfI of the unscaled NS output
    double dfi_fire_mean = 0.0;
};

std::vector<NsTrajectoryPoint> ns_trajectory(const NetworkParams& params, int max_iters,
                                             const NsCoefficients& coeffs);

// Resolves cfg.output_dir against the FIRE_OUTPUT_ROOT environment variable.
std::string resolve_output_dir(const std::string& output_dir);

}  // namespace fire
