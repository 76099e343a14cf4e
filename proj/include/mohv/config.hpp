#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mohv/errors.hpp"
#include "mohv/trainer.hpp"

namespace mohv {

// Experiment configuration: a flat `key = value` document. Global keys come
// first; `[<method>]` sections override optimizer and weighting settings for
// one method. `#` starts a comment. Unknown keys are rejected.
//
//   problem = regression_mse_mse
//   networks = 5
//   reference = 20, 20
//   repeat = 5
//   [hv_per_sample]
//   learning_rate = 1e-3
//   beta1 = 0.5
//   [linear_scalarization]
//   weights = 1,0; 0.75,0.25; 0.5,0.5; 0.25,0.75; 0,1

struct PlotSpec {
    // Validation sample ids to draw; empty draws none (axes only).
    std::vector<std::size_t> samples;
    // Dashed true-front polylines under the markers.
    bool overlay_front = true;
    std::size_t front_resolution = 200;
    // Axis ranges {lo1, hi1, lo2, hi2}; empty means fitted to the data.
    std::vector<double> range;
};

struct MethodConfig {
    Method method = Method::hv_per_sample;
    AdamSettings optimizer;
    WeightOptions weighting;
    std::vector<std::vector<double>> fixed_weights;
};

struct ExperimentConfig {
    TrainConfig base;
    std::vector<MethodConfig> methods;
    std::size_t repeat = 1;
    std::string output_dir;
    PlotSpec plot;

    // Seeds used for the repeats: base.seed, base.seed + 1, ...
    [[nodiscard]] std::uint64_t seed_for(std::size_t r) const { return base.seed + r; }

    [[nodiscard]] TrainConfig train_config(MethodConfig const& m, std::uint64_t seed) const {
        TrainConfig c = base;
        c.method = m.method;
        c.optimizer = m.optimizer;
        c.weighting = m.weighting;
        c.fixed_weights = m.method == Method::linear_scalarization ? m.fixed_weights : std::vector<std::vector<double>>{};
        c.seed = seed;
        return c;
    }

    void validate() const {
        require(!methods.empty(), "ExperimentConfig: no methods");
        require(repeat >= 1, "ExperimentConfig: repeat must be >= 1");
        for (auto const& m : methods) train_config(m, base.seed).validate();
    }
};

inline Method method_from_string(std::string const& s) {
    for (auto m : {Method::hv_per_sample, Method::hv_average, Method::linear_scalarization})
        if (s == to_string(m)) return m;
    throw ConfigError("unknown method '" + s + "'");
}

/// Tuned (learning rate, beta1) per problem and method.
inline std::pair<double, double> default_optimizer(ProblemSpec const& problem, Method method) {
    bool const ls = method == Method::linear_scalarization;
    switch (problem.kind) {
    case ProblemKind::regression:
        if (problem.objectives() == 3) return {ls ? 1e-4 : 1e-3, ls ? 0.99 : 0.5};
        if (problem.losses[1] == LossKind::mse) return {ls ? 1e-4 : 1e-3, ls ? 0.99 : 0.5};
        if (problem.losses[1] == LossKind::l1) return {ls ? 1e-4 : 1e-3, 0.99};
        return {ls ? 1e-4 : 1e-3, ls ? 0.9 : 0.99};
    case ProblemKind::strictly_convex:
    case ProblemKind::counter_example:
        return {method == Method::hv_average ? 1e-3 : 1e-2, 0.9};
    case ProblemKind::linear:
        return {ls ? 1e-2 : 1e-4, 0.9};
    case ProblemKind::non_convex:
        return {ls ? 1e-5 : 1e-3, 0.9};
    }
    return {1e-3, 0.9};
}

/// Evenly spread trade-offs (1,0), ..., (0,1) for two objectives.
inline std::vector<std::vector<double>> default_scalarization_weights(std::size_t networks, std::size_t n) {
    if (n != 2) throw ConfigError("linear_scalarization with " + std::to_string(n) + " objectives needs explicit weights");
    std::vector<std::vector<double>> w;
    for (std::size_t i = 0; i < networks; ++i) {
        double const t = networks == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(networks - 1);
        w.push_back({1.0 - t, t});
    }
    return w;
}

namespace detail {

inline std::string trim(std::string const& s) {
    auto const b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    auto const e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(std::string const& s, char sep) {
    std::vector<std::string> parts;
    std::string part;
    std::istringstream in(s);
    while (std::getline(in, part, sep)) parts.push_back(trim(part));
    if (!s.empty() && s.back() == sep) parts.emplace_back();
    return parts;
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <class T>
std::string join(std::vector<T> const& values, char const* sep, auto&& fmt) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += sep;
        out += fmt(values[i]);
    }
    return out;
}

class ValueParser {
public:
    ValueParser(std::size_t line, std::string key) : line_(line), key_(std::move(key)) {}

    [[noreturn]] void fail(std::string const& what) const { throw ConfigError(key_ + ": " + what, line_, key_); }

    double real(std::string const& v) const {
        double out = 0.0;
        auto const [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) fail("expected a number, got '" + v + "'");
        return out;
    }

    std::uint64_t integer(std::string const& v) const {
        std::uint64_t out = 0;
        auto const [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty())
            fail("expected a nonnegative integer, got '" + v + "'");
        return out;
    }

    bool boolean(std::string const& v) const {
        if (v == "true" || v == "on" || v == "1") return true;
        if (v == "false" || v == "off" || v == "0") return false;
        fail("expected true/false, got '" + v + "'");
    }

    std::vector<double> reals(std::string const& v) const {
        std::vector<double> out;
        if (v.empty()) return out;
        for (auto const& part : split(v, ',')) out.push_back(real(part));
        return out;
    }

    std::vector<std::size_t> integers(std::string const& v) const {
        std::vector<std::size_t> out;
        if (v.empty()) return out;
        for (auto const& part : split(v, ',')) out.push_back(static_cast<std::size_t>(integer(part)));
        return out;
    }

    // Rows separated by ';', entries by ','.
    std::vector<std::vector<double>> matrix(std::string const& v) const {
        std::vector<std::vector<double>> out;
        for (auto const& row : split(v, ';')) out.push_back(reals(row));
        return out;
    }

    ReferencePoint reference(std::vector<double> coords) const {
        try {
            return ReferencePoint(std::move(coords));
        } catch (ContractViolation const& e) {
            fail(e.what());
        }
    }

private:
    std::size_t line_;
    std::string key_;
};

struct MethodOverrides {
    Method method{};
    std::size_t line = 0;
    std::optional<double> learning_rate, beta1, beta2, epsilon, weight_decay;
    std::optional<bool> rank, normalize;
    std::optional<std::vector<std::vector<double>>> weights;
};

} // namespace detail

/// Parses a config document. Errors carry the offending line and key.
inline ExperimentConfig parse_config(std::istream& in) {
    using detail::ValueParser;
    ExperimentConfig cfg;
    std::optional<std::string> problem_name;
    std::optional<std::vector<double>> reference;
    std::optional<std::vector<std::vector<double>>> sample_refs;
    std::optional<std::vector<Method>> method_list;
    std::size_t reference_line = 0, sample_ref_line = 0, methods_line = 0;
    AdamSettings global_adam;
    std::optional<double> global_lr, global_beta1;
    std::vector<detail::MethodOverrides> sections;
    std::vector<std::string> seen_global;

    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        auto const hash = raw.find('#');
        std::string const line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("malformed section header '" + line + "'", line_no);
            std::string const name = detail::trim(line.substr(1, line.size() - 2));
            detail::MethodOverrides s;
            try {
                s.method = method_from_string(name);
            } catch (ConfigError const&) {
                throw ConfigError("unknown section '" + name + "'", line_no, name);
            }
            for (auto const& other : sections)
                if (other.method == s.method) throw ConfigError("duplicate section '" + name + "'", line_no, name);
            s.line = line_no;
            sections.push_back(s);
            continue;
        }

        auto const eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("expected 'key = value', got '" + line + "'", line_no);
        std::string const key = detail::trim(line.substr(0, eq));
        std::string const value = detail::trim(line.substr(eq + 1));
        ValueParser v(line_no, key);

        if (!sections.empty()) {
            auto& s = sections.back();
            if (key == "learning_rate") s.learning_rate = v.real(value);
            else if (key == "beta1") s.beta1 = v.real(value);
            else if (key == "beta2") s.beta2 = v.real(value);
            else if (key == "epsilon") s.epsilon = v.real(value);
            else if (key == "weight_decay") s.weight_decay = v.real(value);
            else if (key == "rank") s.rank = v.boolean(value);
            else if (key == "normalize") s.normalize = v.boolean(value);
            else if (key == "weights") s.weights = v.matrix(value);
            else throw ConfigError("unknown key '" + key + "' in section [" + std::string(to_string(s.method)) + "]", line_no, key);
            continue;
        }

        if (std::find(seen_global.begin(), seen_global.end(), key) != seen_global.end())
            throw ConfigError("duplicate key '" + key + "'", line_no, key);
        seen_global.push_back(key);

        auto& b = cfg.base;
        if (key == "problem") problem_name = value;
        else if (key == "networks") b.networks = v.integer(value);
        else if (key == "iterations") b.iterations = v.integer(value);
        else if (key == "batch_size") b.batch_size = v.integer(value);
        else if (key == "reference") { reference = v.reals(value); reference_line = line_no; }
        else if (key == "sample_references") { sample_refs = v.matrix(value); sample_ref_line = line_no; }
        else if (key == "hidden") b.hidden = v.integers(value);
        else if (key == "seed") b.seed = v.integer(value);
        else if (key == "eval_every") b.eval_every = v.integer(value);
        else if (key == "threads") b.threads = v.integer(value);
        else if (key == "strict_deterministic") b.strict_deterministic = v.boolean(value);
        else if (key == "train_count") b.problem.train_count = v.integer(value);
        else if (key == "validation_count") b.problem.validation_count = v.integer(value);
        else if (key == "repeat") cfg.repeat = v.integer(value);
        else if (key == "output") cfg.output_dir = value;
        else if (key == "methods") {
            methods_line = line_no;
            method_list.emplace();
            for (auto const& name : detail::split(value, ',')) {
                try {
                    method_list->push_back(method_from_string(name));
                } catch (ConfigError const& e) {
                    throw ConfigError(e.what(), line_no, key);
                }
            }
        }
        else if (key == "learning_rate") global_lr = v.real(value);
        else if (key == "beta1") global_beta1 = v.real(value);
        else if (key == "beta2") global_adam.beta2 = v.real(value);
        else if (key == "epsilon") global_adam.epsilon = v.real(value);
        else if (key == "weight_decay") global_adam.weight_decay = v.real(value);
        else if (key == "rank") b.weighting.rank = v.boolean(value);
        else if (key == "normalize") b.weighting.normalize = v.boolean(value);
        else if (key == "plot_samples") cfg.plot.samples = v.integers(value);
        else if (key == "plot_front") cfg.plot.overlay_front = v.boolean(value);
        else if (key == "plot_resolution") cfg.plot.front_resolution = v.integer(value);
        else if (key == "plot_range") {
            cfg.plot.range = v.reals(value);
            if (cfg.plot.range.size() != 4) v.fail("expected lo1, hi1, lo2, hi2");
        }
        else throw ConfigError("unknown key '" + key + "'", line_no, key);
    }

    if (!problem_name) throw ConfigError("missing required key 'problem'", 0, "problem");
    {
        auto const train_count = cfg.base.problem.train_count;
        auto const validation_count = cfg.base.problem.validation_count;
        try {
            cfg.base.problem = problem_by_name(*problem_name);
        } catch (ContractViolation const& e) {
            throw ConfigError(e.what(), 0, "problem");
        }
        if (cfg.base.problem.kind == ProblemKind::regression) {
            cfg.base.problem.train_count = train_count;
            cfg.base.problem.validation_count = validation_count;
        }
    }
    std::size_t const n = cfg.base.problem.objectives();
    if (reference) {
        ValueParser v(reference_line, "reference");
        if (reference->size() != n) v.fail("expected " + std::to_string(n) + " coordinates");
        cfg.base.ref = v.reference(*reference);
    } else {
        cfg.base.ref = ReferencePoint(std::vector<double>(n, 20.0));
    }
    if (sample_refs) {
        ValueParser v(sample_ref_line, "sample_references");
        cfg.base.sample_refs.clear();
        for (auto const& row : *sample_refs) {
            if (row.size() != n) v.fail("expected " + std::to_string(n) + " coordinates per reference point");
            cfg.base.sample_refs.push_back(v.reference(row));
        }
    }

    std::vector<Method> chosen;
    if (method_list) {
        chosen = *method_list;
        for (auto const& s : sections)
            if (std::find(chosen.begin(), chosen.end(), s.method) == chosen.end())
                throw ConfigError("section [" + std::string(to_string(s.method)) + "] is not listed in 'methods'", s.line);
    } else {
        for (auto const& s : sections) chosen.push_back(s.method);
        if (chosen.empty()) chosen.push_back(Method::hv_per_sample);
    }
    if (chosen.empty()) throw ConfigError("'methods' is empty", methods_line, "methods");

    for (auto m : chosen) {
        MethodConfig mc;
        mc.method = m;
        auto const [lr, beta1] = default_optimizer(cfg.base.problem, m);
        mc.optimizer = global_adam;
        mc.optimizer.learning_rate = global_lr.value_or(lr);
        mc.optimizer.beta1 = global_beta1.value_or(beta1);
        mc.weighting = cfg.base.weighting;
        auto const it = std::find_if(sections.begin(), sections.end(), [&](auto const& s) { return s.method == m; });
        if (it != sections.end()) {
            if (it->learning_rate) mc.optimizer.learning_rate = *it->learning_rate;
            if (it->beta1) mc.optimizer.beta1 = *it->beta1;
            if (it->beta2) mc.optimizer.beta2 = *it->beta2;
            if (it->epsilon) mc.optimizer.epsilon = *it->epsilon;
            if (it->weight_decay) mc.optimizer.weight_decay = *it->weight_decay;
            if (it->rank) mc.weighting.rank = *it->rank;
            if (it->normalize) mc.weighting.normalize = *it->normalize;
            if (it->weights) {
                if (m != Method::linear_scalarization)
                    throw ConfigError("'weights' only applies to linear_scalarization", it->line, "weights");
                mc.fixed_weights = *it->weights;
            }
        }
        if (m == Method::linear_scalarization && mc.fixed_weights.empty())
            mc.fixed_weights = default_scalarization_weights(cfg.base.networks, n);
        cfg.methods.push_back(std::move(mc));
    }

    try {
        cfg.validate();
    } catch (ContractViolation const& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

inline ExperimentConfig parse_config(std::string const& text) {
    std::istringstream in(text);
    return parse_config(in);
}

/// Writes a fully resolved config that parses back to the same settings.
inline void write_config(std::ostream& os, ExperimentConfig const& cfg) {
    using detail::format_double;
    auto const reals = [](std::span<double const> v) {
        return detail::join(std::vector<double>(v.begin(), v.end()), ", ", format_double);
    };
    auto const ints = [](auto const& v) { return detail::join(v, ", ", [](auto x) { return std::to_string(x); }); };
    auto const& b = cfg.base;

    os << "problem = " << b.problem.name << '\n';
    if (b.problem.kind == ProblemKind::regression) {
        os << "train_count = " << b.problem.train_count << '\n';
        os << "validation_count = " << b.problem.validation_count << '\n';
    }
    os << "networks = " << b.networks << '\n';
    os << "iterations = " << b.iterations << '\n';
    os << "batch_size = " << b.batch_size << '\n';
    os << "reference = " << reals(b.ref.coords()) << '\n';
    if (!b.sample_refs.empty())
        os << "sample_references = "
           << detail::join(b.sample_refs, "; ", [&](ReferencePoint const& r) { return reals(r.coords()); }) << '\n';
    os << "hidden = " << ints(b.hidden) << '\n';
    os << "seed = " << b.seed << '\n';
    os << "repeat = " << cfg.repeat << '\n';
    os << "eval_every = " << b.eval_every << '\n';
    os << "threads = " << b.threads << '\n';
    os << "strict_deterministic = " << (b.strict_deterministic ? "true" : "false") << '\n';
    if (!cfg.output_dir.empty()) os << "output = " << cfg.output_dir << '\n';
    os << "plot_samples = " << ints(cfg.plot.samples) << '\n';
    os << "plot_front = " << (cfg.plot.overlay_front ? "true" : "false") << '\n';
    os << "plot_resolution = " << cfg.plot.front_resolution << '\n';
    if (!cfg.plot.range.empty()) os << "plot_range = " << reals(cfg.plot.range) << '\n';
    os << "methods = " << detail::join(cfg.methods, ", ", [](MethodConfig const& m) { return std::string(to_string(m.method)); })
       << '\n';
    for (auto const& m : cfg.methods) {
        os << "\n[" << to_string(m.method) << "]\n";
        os << "learning_rate = " << format_double(m.optimizer.learning_rate) << '\n';
        os << "beta1 = " << format_double(m.optimizer.beta1) << '\n';
        os << "beta2 = " << format_double(m.optimizer.beta2) << '\n';
        os << "epsilon = " << format_double(m.optimizer.epsilon) << '\n';
        os << "weight_decay = " << format_double(m.optimizer.weight_decay) << '\n';
        os << "rank = " << (m.weighting.rank ? "true" : "false") << '\n';
        os << "normalize = " << (m.weighting.normalize ? "true" : "false") << '\n';
        if (m.method == Method::linear_scalarization)
            os << "weights = "
               << detail::join(m.fixed_weights, "; ", [&](std::vector<double> const& w) { return reals(w); }) << '\n';
    }
}

} // namespace mohv
