#include "fire/experiment.hpp"

#include "fire/metrics.hpp"
#include "fire/orthogonalize.hpp"
#include "fire/train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <thread>

namespace fire {

namespace fs = std::filesystem;

namespace {

uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c = 0) {
    // splitmix64 over the combined words
    uint64_t x = a * 0x9e3779b97f4a7c15ULL + b * 0xbf58476d1ce4e5b9ULL + c * 0x94d049bb133111ebULL;
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

std::string fmt_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string resolve_output_dir(const std::string& output_dir) {
    if (!output_dir.empty() && output_dir.front() == '/') return output_dir;
    const char* root = std::getenv("FIRE_OUTPUT_ROOT");
    if (root == nullptr || *root == '\0') return output_dir;
    return (fs::path(root) / output_dir).string();
}

TaskStream build_task_stream(const ExperimentConfig& cfg, const Dataset& ds) {
    TaskStream ts;
    ts.protocol = cfg.protocol;
    ts.num_chunks = cfg.resolved_num_chunks();
    const int n = static_cast<int>(ds.train_y.size());

    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(mix_seed(cfg.dataset.seed, 0xc0ffee));
    std::shuffle(order.begin(), order.end(), rng);

    ts.chunk_indices.resize(static_cast<size_t>(ts.num_chunks));
    if (cfg.protocol == Protocol::warm_start) {
        const int first = std::max(1, static_cast<int>(std::ceil(cfg.warm_fraction * n)));
        ts.chunk_indices[0].assign(order.begin(), order.begin() + first);
        ts.chunk_indices[1] = order;
    } else if (cfg.protocol == Protocol::continual) {
        for (int k = 0; k < ts.num_chunks; ++k) {
            const int upto = (k + 1 == ts.num_chunks)
                                 ? n
                                 : std::max(1, static_cast<int>(std::llround(
                                                   static_cast<double>(n) * (k + 1) / ts.num_chunks)));
            ts.chunk_indices[static_cast<size_t>(k)].assign(order.begin(), order.begin() + upto);
        }
    } else {
        const int classes_per_phase = cfg.dataset.num_classes / ts.num_chunks;
        for (int k = 0; k < ts.num_chunks; ++k) {
            const int max_class = (k + 1) * classes_per_phase;
            auto& idx = ts.chunk_indices[static_cast<size_t>(k)];
            for (int i : order)
                if (ds.train_y[i] < max_class) idx.push_back(i);
        }
    }
    return ts;
}

std::string csv_header(size_t num_layers) {
    std::string h =
        "run_id,method,seed,chunk,epoch,split,loss,accuracy,sfe_pre_reset,sfe_pre_reset_norm";
    for (size_t l = 0; l < num_layers; ++l) h += ",dfi_l" + std::to_string(l);
    h += ",srank_features,dormant_total,hessian_sigma_max,wall_clock_s";
    return h;
}

std::string csv_row(const MetricRecord& r, size_t num_layers) {
    std::string row = r.run_id + "," + r.method + "," + std::to_string(r.seed) + "," +
                      std::to_string(r.chunk) + "," + std::to_string(r.epoch) + "," + r.split +
                      "," + fmt_real(r.loss) + "," + fmt_real(r.accuracy) + "," +
                      fmt_real(r.sfe_pre_reset) + "," + fmt_real(r.sfe_pre_reset_norm);
    for (size_t l = 0; l < num_layers; ++l)
        row += "," + (l < r.dfi_per_layer.size() ? fmt_real(r.dfi_per_layer[l]) : std::string());
    row += ",";
    if (r.srank_features >= 0) row += std::to_string(r.srank_features);
    row += ",";
    if (r.dormant_total >= 0) row += std::to_string(r.dormant_total);
    row += ",";
    if (r.hessian_sigma_max) row += fmt_real(*r.hessian_sigma_max);
    row += "," + fmt_real(r.wall_clock_s);
    return row;
}

namespace {

Matrix rows_of(const Matrix& x, const std::vector<int>& idx, size_t limit) {
    const size_t n = std::min(idx.size(), limit);
    Matrix out(static_cast<Eigen::Index>(n), x.cols());
    for (size_t i = 0; i < n; ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
    return out;
}

Eigen::VectorXi labels_of(const Eigen::VectorXi& y, const std::vector<int>& idx, size_t limit) {
    const size_t n = std::min(idx.size(), limit);
    Eigen::VectorXi out(static_cast<Eigen::Index>(n));
    for (size_t i = 0; i < n; ++i) out[static_cast<Eigen::Index>(i)] = y[idx[i]];
    return out;
}

// empirical per-unit activity stats over the cached hidden activations
std::vector<Vector> mean_abs_activations(const NetworkParams& params, const ForwardCache& cache) {
    std::vector<Vector> stats;
    const size_t L = params.layers.size();
    for (size_t l = 0; l + 1 < L; ++l) {
        const Matrix& h = cache.activation(l);
        stats.push_back(h.cwiseAbs().colwise().mean().transpose());
    }
    return stats;
}

double layer_dfi(const LayerWeights& lw) {
    if (lw.kind == LayerKind::dense) return dfi(lw.dense);
    double acc = 0.0;
    for (const auto& s : lw.conv) acc += dfi(s);
    return acc / static_cast<double>(lw.conv.size());
}

int dormant_total_from_stats(const std::vector<Vector>& stats, double tau) {
    int total = 0;
    for (const auto& act : stats) {
        const double mean = act.mean();
        for (Eigen::Index i = 0; i < act.size(); ++i) {
            const double score = mean > 0.0 ? act[i] / mean : 0.0;
            if (score < tau) ++total;
        }
    }
    return total;
}

// srank of the last hidden layer's features from the eigenvalues of the
// feature Gram (cheap at every epoch; svd_small stays the oracle in tests)
int feature_srank(const NetworkParams& params, const ForwardCache& cache, double delta) {
    const size_t L = params.layers.size();
    const Matrix& phi = L >= 2 ? cache.activation(L - 2) : cache.logits;
    Eigen::SelfAdjointEigenSolver<Matrix> es(phi.transpose() * phi);
    Vector evals = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    std::sort(evals.data(), evals.data() + evals.size(), std::greater<double>());
    if (!(evals[0] > 0.0)) return 0;
    return srank(evals, delta);
}

struct RunContext {
    const ExperimentConfig& cfg;
    const Dataset& ds;
    const TaskStream& stream;
    Matrix test_targets;
    std::chrono::steady_clock::time_point t0;
    std::ofstream csv;
    size_t num_layers = 0;
    std::vector<MetricRecord>* records = nullptr;
};

void log_eval(RunContext& ctx, const NetworkParams& params, const std::string& run_id,
              uint64_t seed, int chunk, int epoch, const std::vector<int>& chunk_idx,
              double sfe_event, double sfe_event_norm, std::optional<double> hessian) {
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - ctx.t0);
    MetricRecord base;
    base.run_id = run_id;
    base.method = reinit_method_name(ctx.cfg.reinit.method);
    base.seed = seed;
    base.chunk = chunk;
    base.epoch = epoch;
    base.sfe_pre_reset = sfe_event;
    base.sfe_pre_reset_norm = sfe_event_norm;
    base.wall_clock_s = elapsed.count();

    // train split: the current chunk's data, capped
    {
        Matrix x = rows_of(ctx.ds.train_x, chunk_idx, 2048);
        Eigen::VectorXi y = labels_of(ctx.ds.train_y, chunk_idx, 2048);
        ForwardCache cache = forward(params, x);
        Matrix targets = one_hot(y, ctx.cfg.dataset.num_classes);
        MetricRecord r = base;
        r.split = "train";
        r.loss = loss_value(cache.logits, targets, LossKind::cross_entropy);
        r.accuracy = accuracy(cache.logits, y);
        ctx.csv << csv_row(r, ctx.num_layers) << "\n";
        ctx.csv.flush();
        if (ctx.records) ctx.records->push_back(std::move(r));
    }
    // test split carries the weight/feature metrics
    {
        ForwardCache cache = forward(params, ctx.ds.test_x);
        MetricRecord r = base;
        r.split = "test";
        r.loss = loss_value(cache.logits, ctx.test_targets, LossKind::cross_entropy);
        r.accuracy = accuracy(cache.logits, ctx.ds.test_y);
        for (const auto& lw : params.layers) r.dfi_per_layer.push_back(layer_dfi(lw));
        r.srank_features = feature_srank(params, cache, ctx.cfg.metrics.srank_delta);
        r.dormant_total =
            dormant_total_from_stats(mean_abs_activations(params, cache), ctx.cfg.metrics.dormant_tau);
        r.hessian_sigma_max = hessian;
        ctx.csv << csv_row(r, ctx.num_layers) << "\n";
        ctx.csv.flush();
        if (ctx.records) ctx.records->push_back(std::move(r));
    }
}

NetworkParams apply_reinit(const ExperimentConfig& cfg, const NetworkParams& params,
                           const Dataset& ds, const std::vector<int>& chunk_idx, uint64_t run_seed,
                           int chunk) {
    const uint64_t draw_seed = mix_seed(cfg.reinit.seed, run_seed, static_cast<uint64_t>(chunk));
    switch (cfg.reinit.method) {
        case ReinitMethod::none:
            return params;
        case ReinitMethod::fire:
            return fire_network(params, cfg.reinit.iters, cfg.coeffs);
        case ReinitMethod::full_reset:
            return full_reset(params.arch, draw_seed);
        case ReinitMethod::shrink_perturb: {
            NetworkParams theta0 = init_network(params.arch, draw_seed);
            return shrink_perturb(params, theta0, cfg.reinit.lambda);
        }
        case ReinitMethod::redo: {
            Matrix x = rows_of(ds.train_x, chunk_idx, 1024);
            ForwardCache cache = forward(params, x);
            return redo_reset(params, mean_abs_activations(params, cache), cfg.reinit.tau, draw_seed);
        }
    }
    throw std::logic_error("apply_reinit: unreachable");
}

}  // namespace

RunResult run_single(const ExperimentConfig& cfg, uint64_t seed, int resume_from_chunk,
                     const std::string& run_id_override) {
    cfg.validate();
    const Dataset ds = generate_dataset(cfg.dataset);
    const TaskStream stream = build_task_stream(cfg, ds);
    const int num_chunks = stream.num_chunks;
    if (resume_from_chunk >= num_chunks)
        throw std::invalid_argument("run_single: resume chunk out of range");

    const std::string run_id = run_id_override.empty()
                                   ? std::string(reinit_method_name(cfg.reinit.method)) + "_seed" +
                                         std::to_string(seed)
                                   : run_id_override;
    const fs::path outdir = resolve_output_dir(cfg.output_dir);
    const fs::path rundir = outdir / run_id;
    fs::create_directories(rundir);

    Architecture arch =
        Architecture::mlp(cfg.dataset.input_dim, cfg.hidden, cfg.dataset.num_classes);
    arch.validate();

    RunResult result;
    result.run_id = run_id;
    const bool resuming = resume_from_chunk >= 1;
    result.csv_path =
        (outdir / ("records_" + run_id + (resuming ? "_resumed" : "") + ".csv")).string();

    RunContext ctx{cfg, ds, stream, one_hot(ds.test_y, cfg.dataset.num_classes),
                   std::chrono::steady_clock::now(), std::ofstream(result.csv_path, std::ios::trunc),
                   arch.layers.size(), &result.records};
    if (!ctx.csv) throw std::runtime_error("run_single: cannot write " + result.csv_path);
    ctx.csv << "# fire-metrics-csv v1\n" << csv_header(ctx.num_layers) << "\n";
    ctx.csv.flush();

    NetworkParams params;
    NetworkParams theta0;  // run-start anchor for l2_init
    uint64_t global_step = 0;
    int first_chunk = 0;
    if (resuming) {
        Checkpoint loaded =
            load_checkpoint((rundir / ("ckpt_chunk" + std::to_string(resume_from_chunk) + "_pre")).string());
        params = std::move(loaded.params);
        if (!params.same_architecture(init_network(arch, 0)))
            throw std::runtime_error("run_single: checkpoint architecture does not match config");
        params.arch = arch;
        global_step = loaded.step;
        first_chunk = resume_from_chunk;
        theta0 = init_network(arch, mix_seed(seed, 0x1217));  // reproduces the run-start draw
    } else {
        params = init_network(arch, mix_seed(seed, 0x1217));
        theta0 = params;
        save_checkpoint((rundir / "ckpt_init").string(), {params, seed, 0, 0});
    }

    for (int chunk = first_chunk; chunk < num_chunks; ++chunk) {
        const auto& chunk_idx = stream.chunk_indices[static_cast<size_t>(chunk)];
        double sfe_event = 0.0;
        double sfe_event_norm = 0.0;
        if (chunk > 0) {
            if (!resuming || chunk > first_chunk)
                save_checkpoint((rundir / ("ckpt_chunk" + std::to_string(chunk) + "_pre")).string(),
                                {params, seed, global_step, chunk});
            NetworkParams pre = params;
            params = apply_reinit(cfg, params, ds, chunk_idx, seed, chunk);
            sfe_event = cfg.reinit.method == ReinitMethod::none ? 0.0 : sfe_network(pre, params);
            double pre_sq = 0.0;
            for_each_matrix(pre, [&](const Matrix& m) { pre_sq += m.squaredNorm(); });
            sfe_event_norm = pre_sq > 0.0 ? sfe_event / pre_sq : 0.0;
            save_checkpoint((rundir / ("ckpt_chunk" + std::to_string(chunk) + "_post")).string(),
                            {params, seed, global_step, chunk});
        }

        std::optional<double> hessian;
        if (cfg.metrics.hessian) {
            // curvature of the squared loss on the incoming chunk: tracks the
            // weight conditioning the DfI theory bounds, not the classifier's
            // confidence (cross-entropy curvature vanishes at confident fits)
            Matrix hx = rows_of(ds.train_x, chunk_idx, static_cast<size_t>(cfg.metrics.hessian_batch));
            Matrix ht = one_hot(labels_of(ds.train_y, chunk_idx,
                                          static_cast<size_t>(cfg.metrics.hessian_batch)),
                                cfg.dataset.num_classes);
            hessian = hessian_sigma_max(params, hx, ht, LossKind::squared, 1e-3, 60).value;
        }
        log_eval(ctx, params, run_id, seed, chunk, 0, chunk_idx, sfe_event, sfe_event_norm, hessian);

        const int epochs = cfg.train.epochs_per_chunk *
                           (cfg.protocol == Protocol::warm_start && chunk == 0 ? 10 : 1);
        const int n_chunk = static_cast<int>(chunk_idx.size());
        const int steps_per_epoch = (n_chunk + cfg.train.batch_size - 1) / cfg.train.batch_size;
        TrainConfig tc = cfg.train;
        tc.seed = seed;
        Trainer trainer(tc, static_cast<int64_t>(epochs) * steps_per_epoch, &theta0);

        std::vector<int> order = chunk_idx;
        for (int epoch = 1; epoch <= epochs; ++epoch) {
            std::mt19937_64 shuffle_rng(
                mix_seed(seed, static_cast<uint64_t>(chunk) + 1, static_cast<uint64_t>(epoch)));
            std::shuffle(order.begin(), order.end(), shuffle_rng);
            for (int b = 0; b < steps_per_epoch; ++b) {
                const int lo = b * cfg.train.batch_size;
                const int hi = std::min(n_chunk, lo + cfg.train.batch_size);
                std::vector<int> batch_idx(order.begin() + lo, order.begin() + hi);
                Matrix x = rows_of(ds.train_x, batch_idx, batch_idx.size());
                Matrix t = one_hot(labels_of(ds.train_y, batch_idx, batch_idx.size()),
                                   cfg.dataset.num_classes);
                trainer.step(params, x, t, LossKind::cross_entropy);
                ++global_step;
            }
            if (epoch % cfg.metrics.cadence == 0 || epoch == epochs)
                log_eval(ctx, params, run_id, seed, chunk, epoch, chunk_idx, sfe_event,
                         sfe_event_norm, std::nullopt);
        }
    }
    save_checkpoint((rundir / "ckpt_final").string(), {params, seed, global_step, num_chunks - 1});
    return result;
}

namespace {

std::vector<RunResult> run_many(const std::vector<std::pair<ExperimentConfig, uint64_t>>& jobs_list,
                                const std::vector<std::string>& run_ids, int jobs) {
    if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
    jobs = std::max(1, std::min<int>(jobs, static_cast<int>(jobs_list.size())));

    std::vector<RunResult> results(jobs_list.size());
    std::vector<std::string> errors(jobs_list.size());
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= jobs_list.size()) return;
            try {
                results[i] = run_single(jobs_list[i].first, jobs_list[i].second, -1, run_ids[i]);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (size_t i = 0; i < errors.size(); ++i)
        if (!errors[i].empty())
            throw std::runtime_error("run '" + run_ids[i] + "' failed: " + errors[i]);
    return results;
}

}  // namespace

std::vector<RunResult> run_experiment(const ExperimentConfig& cfg, int jobs) {
    cfg.validate();
    const fs::path outdir = resolve_output_dir(cfg.output_dir);
    fs::create_directories(outdir);
    {
        std::ofstream cf(outdir / (std::string("config_") + reinit_method_name(cfg.reinit.method) + ".txt"));
        cf << config_to_text(cfg);
    }
    std::vector<std::pair<ExperimentConfig, uint64_t>> jobs_list;
    std::vector<std::string> run_ids;
    for (uint64_t seed : cfg.seeds) {
        jobs_list.emplace_back(cfg, seed);
        run_ids.push_back(std::string(reinit_method_name(cfg.reinit.method)) + "_seed" +
                          std::to_string(seed));
    }
    return run_many(jobs_list, run_ids, jobs);
}

std::vector<NsTrajectoryPoint> ns_trajectory(const NetworkParams& params, int max_iters,
                                             const NsCoefficients& coeffs) {
    std::vector<NsTrajectoryPoint> out;
    for (int k = 1; k <= max_iters; ++k) {
        NsTrajectoryPoint pt;
        pt.iter = k;
        double dfi_ns = 0.0, dfi_fire = 0.0;
        double tensors = 0.0;
        auto add = [&](const Matrix& w, double scale) {
            const Matrix ns = newton_schulz(w, k, coeffs);
            pt.sfe_ns += sfe(w, ns);
            pt.sfe_fire += sfe(w, Matrix(scale * ns));
            dfi_ns += dfi(ns);
            dfi_fire += dfi(Matrix(scale * ns));
            tensors += 1.0;
        };
        for (const auto& lw : params.layers) {
            if (lw.kind == LayerKind::dense) {
                add(lw.dense, std::sqrt(static_cast<double>(lw.dense.rows()) / lw.dense.cols()));
            } else {
                const double scale = std::sqrt(static_cast<double>(lw.conv[0].rows()) / lw.conv[0].cols()) /
                                     (static_cast<double>(lw.kernel_h) * lw.kernel_w);
                for (const auto& s : lw.conv) add(s, scale);
            }
        }
        pt.dfi_ns_mean = dfi_ns / tensors;
        pt.dfi_fire_mean = dfi_fire / tensors;
        out.push_back(pt);
    }
    return out;
}

std::vector<RunResult> run_ablation_iters(const ExperimentConfig& cfg,
                                          const std::vector<int>& iters_list, int jobs) {
    if (iters_list.empty()) throw std::invalid_argument("run_ablation_iters: empty iters list");
    const fs::path outdir = resolve_output_dir(cfg.output_dir);
    fs::create_directories(outdir);

    std::vector<std::pair<ExperimentConfig, uint64_t>> jobs_list;
    std::vector<std::string> run_ids;
    for (int it : iters_list) {
        ExperimentConfig c = cfg;
        c.reinit.method = ReinitMethod::fire;
        c.reinit.iters = it;
        c.validate();
        for (uint64_t seed : c.seeds) {
            jobs_list.emplace_back(c, seed);
            run_ids.push_back("fire_it" + std::to_string(it) + "_seed" + std::to_string(seed));
        }
    }
    std::vector<RunResult> results = run_many(jobs_list, run_ids, jobs);

    // SFE/DfI as functions of the NS iteration index, on the final pre-reset
    // weights of the most-converged run (largest iteration count, first seed)
    const int ref_iters = *std::max_element(iters_list.begin(), iters_list.end());
    const fs::path ref_run =
        outdir / ("fire_it" + std::to_string(ref_iters) + "_seed" + std::to_string(cfg.seeds.front()));
    const int last_boundary = cfg.resolved_num_chunks() - 1;
    if (last_boundary >= 1) {
        Checkpoint pre = load_checkpoint(
            (ref_run / ("ckpt_chunk" + std::to_string(last_boundary) + "_pre")).string());
        const int max_it = std::max(30, *std::max_element(iters_list.begin(), iters_list.end()));
        auto traj = ns_trajectory(pre.params, max_it, cfg.coeffs);
        std::ofstream tf(outdir / "ns_trajectory.csv", std::ios::trunc);
        tf << "# fire-ns-trajectory-csv v1\niter,sfe_ns,sfe_fire,dfi_ns_mean,dfi_fire_mean\n";
        for (const auto& pt : traj)
            tf << pt.iter << "," << fmt_real(pt.sfe_ns) << "," << fmt_real(pt.sfe_fire) << ","
               << fmt_real(pt.dfi_ns_mean) << "," << fmt_real(pt.dfi_fire_mean) << "\n";
    }
    return results;
}

}  // namespace fire
