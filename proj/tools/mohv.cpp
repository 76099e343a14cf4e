// mohv: run, tune and plot hypervolume-trained network ensembles.
//
// Exit codes: 0 success, 1 unexpected error, 2 configuration or usage
// error, 3 training aborted, 4 file I/O error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mohv/mohv.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { ok = 0, other = 1, config_error = 2, training_error = 3, io_error = 4 };

struct GlobalOptions {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    bool strict = false;
    std::string out;
    bool verbose = false;
};

mohv::ExperimentConfig load_config(std::string const& path, GlobalOptions const& g) {
    std::ifstream in(path);
    if (!in) throw mohv::IoError("cannot read config " + path);
    auto cfg = mohv::parse_config(in);
    if (g.seed) cfg.base.seed = *g.seed;
    if (g.threads) cfg.base.threads = *g.threads;
    if (g.strict) cfg.base.strict_deterministic = true;
    return cfg;
}

// --out, else the config's `output` (under MOHV_OUTPUT_ROOT when relative),
// else <MOHV_OUTPUT_ROOT or ./runs>/<config file stem>.
fs::path output_dir(GlobalOptions const& g, mohv::ExperimentConfig const& cfg, std::string const& config_path) {
    if (!g.out.empty()) return g.out;
    char const* env = std::getenv("MOHV_OUTPUT_ROOT");
    fs::path const root = env && *env ? fs::path(env) : fs::path("runs");
    if (!cfg.output_dir.empty()) {
        fs::path const p(cfg.output_dir);
        return p.is_absolute() || !(env && *env) ? p : root / p;
    }
    return root / fs::path(config_path).stem();
}

std::vector<double> parse_grid(std::string const& text, char const* name) {
    std::vector<double> out;
    for (auto const& part : mohv::detail::split(text, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(part, &used));
            if (used != part.size()) throw std::invalid_argument(part);
        } catch (std::exception const&) {
            throw mohv::ConfigError(std::string(name) + ": not a number: '" + part + "'", 0, name);
        }
    }
    if (out.empty()) throw mohv::ConfigError(std::string(name) + " is empty", 0, name);
    return out;
}

int cmd_run(std::string const& config_path, GlobalOptions const& g) {
    auto const cfg = load_config(config_path, g);
    auto const dir = output_dir(g, cfg, config_path);
    auto const result = mohv::run_experiment(cfg, dir);
    for (auto const& row : result.summary)
        std::cout << row.method << ": median final HV " << mohv::detail::format_double(mohv::quantile(row.final_hv, 0.5))
                  << " over " << row.final_hv.size() << " seed(s)\n";
    std::cout << "artifacts: " << dir.string() << '\n';
    return ok;
}

int cmd_tune(std::string const& config_path, std::string const& gamma_grid, std::string const& beta_grid,
             GlobalOptions const& g) {
    auto const cfg = load_config(config_path, g);
    auto const gammas = parse_grid(gamma_grid, "--gamma-grid");
    auto const betas = parse_grid(beta_grid, "--beta1-grid");
    auto const result = mohv::tuning_grid(cfg, gammas, betas);

    auto const dir = output_dir(g, cfg, config_path);
    mohv::detail::make_dirs(dir);
    auto os = mohv::detail::open_out(dir / "tuning.csv");
    os << "learning_rate,beta1,median_hv\n";
    for (auto const& p : result.grid)
        os << mohv::detail::format_double(p.learning_rate) << ',' << mohv::detail::format_double(p.beta1) << ','
           << mohv::detail::format_double(p.median_hv) << '\n';
    std::cout << "best: learning_rate " << result.best.learning_rate << ", beta1 " << result.best.beta1
              << ", median HV " << mohv::detail::format_double(result.best.median_hv) << '\n';
    std::cout << "grid: " << (dir / "tuning.csv").string() << '\n';
    return ok;
}

// Plot samples from the experiment's resolved config, if there is one.
std::vector<std::size_t> configured_samples(fs::path const& run_dir) {
    for (auto dir = run_dir; !dir.empty() && dir != dir.root_path(); dir = dir.parent_path()) {
        auto const candidate = dir / "resolved_config.ini";
        if (fs::exists(candidate)) {
            std::ifstream in(candidate);
            return mohv::parse_config(in).plot.samples;
        }
    }
    return {};
}

int plot_one(fs::path const& run_dir, std::optional<std::vector<std::size_t>> const& samples, fs::path const& target) {
    std::ifstream summary_in(run_dir / "summary.json");
    std::ifstream data_in(run_dir / "validation.csv");
    if (!summary_in || !data_in) throw mohv::IoError(run_dir.string() + " is not a run directory");
    nlohmann::json summary;
    try {
        summary = nlohmann::json::parse(summary_in);
    } catch (nlohmann::json::exception const& e) {
        throw mohv::IoError((run_dir / "summary.json").string() + ": " + e.what());
    }
    auto const data = mohv::read_dataset(data_in);
    auto const problem = mohv::problem_by_name(data.problem);

    mohv::PlotSpec spec;
    spec.samples = samples ? *samples : configured_samples(run_dir);
    auto const losses = mohv::final_losses_from_json(summary);
    auto const svg = mohv::emit_front_plot(losses, spec, problem, data.samples);
    auto os = mohv::detail::open_out(target);
    os << svg;
    std::cout << target.string() << '\n';
    return ok;
}

int cmd_plot(std::string const& run_dir, std::optional<std::vector<std::size_t>> const& samples, GlobalOptions const& g) {
    fs::path const root(run_dir);
    std::vector<fs::path> runs;
    if (fs::exists(root / "summary.json")) {
        runs.push_back(root);
    } else if (fs::is_directory(root)) {
        for (auto const& entry : fs::recursive_directory_iterator(root))
            if (entry.path().filename() == "summary.json") runs.push_back(entry.path().parent_path());
        std::sort(runs.begin(), runs.end());
    }
    if (runs.empty()) throw mohv::IoError("no run directories under " + run_dir);
    for (auto const& r : runs) {
        fs::path target = r / "fronts.svg";
        if (!g.out.empty()) {
            mohv::detail::make_dirs(g.out);
            auto rel = fs::relative(r, root).string();
            std::replace(rel.begin(), rel.end(), '/', '_');
            target = fs::path(g.out) / ((rel == "." ? std::string("run") : rel) + ".svg");
        }
        plot_one(r, samples, target);
    }
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Train network ensembles that predict per-sample Pareto fronts by hypervolume maximization"};
    app.require_subcommand(1);
    GlobalOptions g;
    std::uint64_t seed = 0;
    std::size_t threads = 0;
    auto* seed_opt = app.add_option("--seed", seed, "Master seed (overrides the config)");
    auto* threads_opt = app.add_option("--threads", threads, "Worker threads per training run")->check(CLI::PositiveNumber);
    app.add_flag("--strict-deterministic", g.strict, "Single-threaded, byte-reproducible outputs");
    app.add_option("--out", g.out, "Output directory (default: $MOHV_OUTPUT_ROOT or ./runs)");
    app.add_flag("-v,--verbose", g.verbose, "Log progress");

    std::string config_path;
    auto* run = app.add_subcommand("run", "Train all configured methods and seeds");
    run->add_option("config", config_path, "Experiment config file")->required();
    run->fallthrough();

    std::string gamma_grid = "1e-1,1e-2,1e-3,1e-4,1e-5";
    std::string beta_grid = "0.5,0.9,0.99";
    auto* tune = app.add_subcommand("tune", "Grid search learning rate and beta1");
    tune->add_option("config", config_path, "Experiment config file")->required();
    tune->add_option("--gamma-grid", gamma_grid, "Comma-separated learning rates")->capture_default_str();
    tune->add_option("--beta1-grid", beta_grid, "Comma-separated beta1 values")->capture_default_str();
    tune->fallthrough();

    std::string run_dir;
    std::vector<std::size_t> samples;
    auto* plot = app.add_subcommand("plot", "Redraw front plots of finished runs");
    plot->add_option("run-dir", run_dir, "Run or experiment directory")->required();
    auto* samples_opt = plot->add_option("--samples", samples, "Validation sample ids to draw")->delimiter(',');
    plot->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (CLI::ParseError const& e) {
        int const code = app.exit(e);
        return code == 0 ? ok : config_error;
    }
    if (*seed_opt) g.seed = seed;
    if (*threads_opt) g.threads = threads;
    if (g.verbose) mohv::log::set_level(mohv::log::Level::info);

    try {
        if (*run) return cmd_run(config_path, g);
        if (*tune) return cmd_tune(config_path, gamma_grid, beta_grid, g);
        if (*plot) {
            std::optional<std::vector<std::size_t>> chosen;
            if (*samples_opt) chosen = samples;
            return cmd_plot(run_dir, chosen, g);
        }
    } catch (mohv::ConfigError const& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    } catch (mohv::TrainingAborted const& e) {
        std::cerr << "training aborted: " << e.what() << '\n';
        return training_error;
    } catch (mohv::IoError const& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return io_error;
    } catch (std::exception const& e) {
        std::cerr << "error: " << e.what() << '\n';
        return other;
    }
    return other;
}
