#include "fire/checkpoint.hpp"
#include "fire/config.hpp"
#include "fire/experiment.hpp"
#include "fire/metrics.hpp"
#include "fire/orthogonalize.hpp"
#include "fire/report.hpp"
#include "fire/verify.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

void apply_overrides(fire::ExperimentConfig& cfg, const std::vector<uint64_t>& seeds,
                     const std::string& output) {
    if (!seeds.empty()) cfg.seeds = seeds;
    if (!output.empty()) cfg.output_dir = output;
    cfg.validate();
}

int cmd_orthogonalize(const std::string& ckpt_path, int iters, const std::string& coeffs_name) {
    fire::Checkpoint ckpt = fire::load_checkpoint(ckpt_path);
    const auto coeffs = fire::NsCoefficients::from_name(coeffs_name);
    if (iters <= 0) iters = coeffs.default_iters();
    ckpt.params = fire::fire_network(ckpt.params, iters, coeffs);
    fire::save_checkpoint(ckpt_path, ckpt);
    std::printf("orthogonalized %s in place (%d iterations, %s coefficients)\n", ckpt_path.c_str(),
                iters, coeffs.name());
    return 0;
}

int cmd_metrics(const std::string& ckpt_path, const std::string& reference_path, double delta,
                double tau, const std::string& csv_out) {
    fire::Checkpoint ckpt = fire::load_checkpoint(ckpt_path);
    fire::Checkpoint ref;
    const fire::NetworkParams* ref_params = nullptr;
    if (!reference_path.empty()) {
        ref = fire::load_checkpoint(reference_path);
        ref_params = &ref.params;
    }
    fire::PlasticityReport rep = fire::plasticity_report(ckpt.params, ref_params, delta, tau);

    std::printf("checkpoint %s  (step %llu, chunk %d)\n", ckpt_path.c_str(),
                static_cast<unsigned long long>(ckpt.step), ckpt.chunk);
    if (rep.has_reference)
        std::printf("total SFE vs reference: %.6g\n", rep.total_sfe_vs_reference);
    std::printf("%-6s %14s %10s %12s\n", "layer", "dfi", "srank", "dormant");
    for (size_t l = 0; l < rep.dfi_per_layer.size(); ++l)
        std::printf("%-6zu %14.6g %10d %12d\n", l, rep.dfi_per_layer[l], rep.srank_per_layer[l],
                    rep.dormant_per_layer[l]);

    if (!csv_out.empty()) {
        std::FILE* f = std::fopen(csv_out.c_str(), "w");
        if (!f) {
            std::fprintf(stderr, "cannot write %s\n", csv_out.c_str());
            return 1;
        }
        std::fprintf(f, "# fire-plasticity-csv v1 (srank_delta=%.17g dormant_tau=%.17g)\n", delta, tau);
        std::fprintf(f, "layer,dfi,srank,dormant,sfe_vs_reference\n");
        for (size_t l = 0; l < rep.dfi_per_layer.size(); ++l)
            std::fprintf(f, "%zu,%.17g,%d,%d,%s\n", l, rep.dfi_per_layer[l], rep.srank_per_layer[l],
                         rep.dormant_per_layer[l],
                         l == 0 && rep.has_reference ? std::to_string(rep.total_sfe_vs_reference).c_str()
                                                     : "");
        std::fclose(f);
    }
    return 0;
}

int cmd_verify() {
    auto results = fire::verify_all();
    bool all_ok = true;
    for (const auto& r : results) {
        std::printf("[%s] %-32s cases=%d violations=%d n/a=%d worst_margin=%.3g\n",
                    r.passed() ? "PASS" : "FAIL", r.name.c_str(), r.cases, r.violations,
                    r.not_applicable, r.worst_margin);
        if (!r.passed()) {
            std::printf("       first failure: %s\n", r.first_failure.c_str());
            all_ok = false;
        }
    }
    return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FIRE: orthonormal weight reinitialization, metrics, and desk-scale experiments"};
    app.require_subcommand(1);

    // orthogonalize
    std::string ckpt_path, coeffs_name = "cubic";
    int iters = 0;
    auto* ortho = app.add_subcommand("orthogonalize", "apply FIRE in place to a saved checkpoint");
    ortho->add_option("checkpoint", ckpt_path, "checkpoint directory")->required();
    ortho->add_option("--iters", iters, "Newton-Schulz iterations (default: per coefficient set)");
    ortho->add_option("--coeffs", coeffs_name, "cubic | quintic | muon");

    // metrics
    std::string metrics_ckpt, reference_path, csv_out;
    double delta = 0.1, tau = 0.025;
    auto* met = app.add_subcommand("metrics", "plasticity report for a checkpoint");
    met->add_option("checkpoint", metrics_ckpt, "checkpoint directory")->required();
    met->add_option("--reference", reference_path, "reference checkpoint for the SFE column");
    met->add_option("--delta", delta, "srank delta");
    met->add_option("--tau", tau, "dormancy threshold");
    met->add_option("--csv", csv_out, "also write the report as CSV");

    // verify
    app.add_subcommand("verify", "run all theorem verifiers; exit 0 iff every bound holds");

    // run
    std::string run_config, output_override;
    std::vector<uint64_t> seed_override;
    int jobs = 0, resume_chunk = -1;
    auto* run = app.add_subcommand("run", "run the experiment described by a config file");
    run->add_option("config", run_config, "config file")->required();
    run->add_option("--seed", seed_override, "override the seeds list")->delimiter(',');
    run->add_option("--output", output_override, "override output_dir");
    run->add_option("--jobs", jobs, "parallel runs (0 = hardware)");
    run->add_option("--resume-from-chunk", resume_chunk,
                    "resume the (single) seed from this chunk's pre-reinit checkpoint");

    // ablate
    std::string ablate_config, ablate_output;
    std::vector<uint64_t> ablate_seeds;
    std::vector<int> ablate_iters = {1, 5, 10, 30};
    int ablate_jobs = 0;
    auto* abl = app.add_subcommand("ablate", "FIRE iteration-count ablation plus NS trajectories");
    abl->add_option("config", ablate_config, "config file")->required();
    abl->add_option("--iters", ablate_iters, "iteration counts")->delimiter(',');
    abl->add_option("--seed", ablate_seeds, "override the seeds list")->delimiter(',');
    abl->add_option("--output", ablate_output, "override output_dir");
    abl->add_option("--jobs", ablate_jobs, "parallel runs (0 = hardware)");

    // report
    std::string report_dir;
    auto* rep = app.add_subcommand("report", "aggregate records CSVs into summary tables");
    rep->add_option("dir", report_dir, "experiment output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (ortho->parsed()) return cmd_orthogonalize(ckpt_path, iters, coeffs_name);
        if (met->parsed()) return cmd_metrics(metrics_ckpt, reference_path, delta, tau, csv_out);
        if (app.get_subcommand("verify")->parsed()) return cmd_verify();
        if (run->parsed()) {
            fire::ExperimentConfig cfg = fire::load_config(run_config);
            apply_overrides(cfg, seed_override, output_override);
            if (resume_chunk >= 1) {
                if (cfg.seeds.size() != 1)
                    throw std::invalid_argument("--resume-from-chunk needs exactly one seed");
                auto res = fire::run_single(cfg, cfg.seeds[0], resume_chunk);
                std::printf("resumed run %s -> %s\n", res.run_id.c_str(), res.csv_path.c_str());
                return 0;
            }
            auto results = fire::run_experiment(cfg, jobs);
            for (const auto& r : results)
                std::printf("run %s -> %s (%zu records)\n", r.run_id.c_str(), r.csv_path.c_str(),
                            r.records.size());
            return 0;
        }
        if (abl->parsed()) {
            fire::ExperimentConfig cfg = fire::load_config(ablate_config);
            apply_overrides(cfg, ablate_seeds, ablate_output);
            auto results = fire::run_ablation_iters(cfg, ablate_iters, ablate_jobs);
            for (const auto& r : results)
                std::printf("run %s -> %s\n", r.run_id.c_str(), r.csv_path.c_str());
            return 0;
        }
        if (rep->parsed()) {
            fire::Report r = fire::report(report_dir);
            std::fputs(fire::report_text_table(r).c_str(), stdout);
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
