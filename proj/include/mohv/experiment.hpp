#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mohv/config.hpp"
#include "mohv/errors.hpp"
#include "mohv/log.hpp"
#include "mohv/report.hpp"
#include "mohv/trainer.hpp"

namespace mohv {

// Artifact layout of one experiment directory:
//
//   resolved_config.ini           the exact settings used
//   summary.csv                   one row per method over all seeds
//   error_report.txt              only if a run aborted
//   <method>/seed_<s>/records.jsonl    one JSON object per evaluation step
//   <method>/seed_<s>/summary.json     seeds, final HV, diagnostics, final losses
//   <method>/seed_<s>/network_<i>.ckpt network and optimizer checkpoints
//   <method>/seed_<s>/validation.csv   the validation samples
//   <method>/seed_<s>/fronts.svg       final losses of the plotted samples

struct ExperimentResult {
    std::filesystem::path directory;
    std::vector<SummaryRow> summary;
};

namespace detail {

inline std::ofstream open_out(std::filesystem::path const& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    return os;
}

inline void make_dirs(std::filesystem::path const& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

inline void write_summary_file(std::filesystem::path const& dir, std::vector<SummaryRow> const& rows) {
    auto os = open_out(dir / "summary.csv");
    write_summary_csv(os, rows);
    if (!os) throw IoError("write failed: " + (dir / "summary.csv").string());
}

inline void write_run_artifacts(std::filesystem::path const& dir, ExperimentConfig const& cfg, std::string const& method,
                                Ensemble const& ensemble, RunRecord const& record, Dataset const& data) {
    make_dirs(dir);
    {
        auto os = open_out(dir / "records.jsonl");
        write_records_jsonl(os, record);
    }
    {
        auto os = open_out(dir / "summary.json");
        os << run_summary_json(record, method).dump(2) << '\n';
    }
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
        auto os = open_out(dir / ("network_" + std::to_string(i) + ".ckpt"));
        write_checkpoint(os, ensemble.networks[i], ensemble.optimizers[i]);
    }
    {
        auto os = open_out(dir / "validation.csv");
        write_dataset(os, ensemble.problem, "validation", data.validation);
    }
    {
        auto os = open_out(dir / "fronts.svg");
        os << emit_front_plot(record, cfg.plot, ensemble.problem, data.validation);
    }
}

} // namespace detail

/// Trains every (method, seed) combination and writes the artifact tree
/// under `out`. A training abort writes the completed runs, the summary so
/// far and an error report, then rethrows.
inline ExperimentResult run_experiment(ExperimentConfig const& cfg, std::filesystem::path const& out) {
    try {
        cfg.validate();
    } catch (ContractViolation const& e) {
        throw ConfigError(e.what());
    }
    detail::make_dirs(out);
    {
        auto os = detail::open_out(out / "resolved_config.ini");
        write_config(os, cfg);
    }

    ExperimentResult result{out, {}};
    for (auto const& m : cfg.methods) {
        SummaryRow row;
        row.method = to_string(m.method);
        double seconds = 0.0;
        for (std::size_t r = 0; r < cfg.repeat; ++r) {
            std::uint64_t const seed = cfg.seed_for(r);
            TrainConfig const tc = cfg.train_config(m, seed);
            Dataset const data = make_dataset(tc.problem, fan_out_seeds(seed, tc.networks).data);
            log::info(std::string("training ") + row.method + " seed " + std::to_string(seed));
            auto const start = std::chrono::steady_clock::now();
            std::pair<Ensemble, RunRecord> run;
            try {
                run = train(tc, data);
            } catch (TrainingAborted const& e) {
                result.summary.push_back(row);
                detail::write_summary_file(out, result.summary);
                auto os = detail::open_out(out / "error_report.txt");
                os << "method: " << row.method << "\nseed: " << seed << "\niteration: " << e.iteration
                   << "\nnetwork: " << e.network << "\nsample: " << e.sample << "\nmessage: " << e.what() << '\n';
                throw;
            }
            seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            row.final_hv.push_back(run.second.final_mean_hv());
            detail::write_run_artifacts(out / row.method / ("seed_" + std::to_string(seed)), cfg, row.method,
                                        run.first, run.second, data);
        }
        // Wall-clock time would break byte-identical summaries.
        row.runtime_seconds = cfg.base.strict_deterministic ? 0.0 : seconds;
        result.summary.push_back(std::move(row));
    }
    detail::write_summary_file(out, result.summary);
    return result;
}

struct TuningPoint {
    double learning_rate = 0.0;
    double beta1 = 0.0;
    double median_hv = 0.0;
};

struct TuningResult {
    TuningPoint best;
    std::vector<TuningPoint> grid;
};

/// Grid search over (learning rate, beta1) for the first configured method.
/// Scores are the median final mean validation HV over the repeats; ties go
/// to the smaller learning rate, then the smaller beta1.
inline TuningResult tuning_grid(ExperimentConfig const& cfg, std::vector<double> gammas, std::vector<double> betas) {
    require(!gammas.empty() && !betas.empty(), "tuning_grid: empty grid");
    cfg.validate();
    std::sort(gammas.begin(), gammas.end());
    std::sort(betas.begin(), betas.end());
    TuningResult result;
    bool first = true;
    for (double g : gammas) {
        for (double b : betas) {
            MethodConfig m = cfg.methods.front();
            m.optimizer.learning_rate = g;
            m.optimizer.beta1 = b;
            std::vector<double> hvs;
            for (std::size_t r = 0; r < cfg.repeat; ++r)
                hvs.push_back(train(cfg.train_config(m, cfg.seed_for(r))).second.final_mean_hv());
            TuningPoint point{g, b, quantile(hvs, 0.5)};
            result.grid.push_back(point);
            if (first || point.median_hv > result.best.median_hv) result.best = point;
            first = false;
        }
    }
    return result;
}

} // namespace mohv
