#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mohv/errors.hpp"
#include "mohv/hypervolume.hpp"
#include "mohv/pareto.hpp"

namespace mohv {

enum class ProblemKind { regression, strictly_convex, linear, non_convex, counter_example };

enum class LossPair { mse_mse, mse_l1, mse_scaled_mse };

enum class LossKind {
    mse,               // (y - z)^2
    l1,                // |y - z|
    scaled_mse,        // (y - z)^2 / 100
    squared_euclidean, // |z - c|^2
    euclidean,         // |z - c|
    power_euclidean,   // |z - c|^power
    exp_saturating,    // x (1 - exp(-|z - c|^2)), x = sample input
};

struct Sample {
    std::size_t id = 0;
    std::vector<double> input;
    // One entry per objective: a scalar target for regression, a center for
    // the geometric cases.
    std::vector<std::vector<double>> targets;
};

struct ProblemSpec {
    std::string name;
    ProblemKind kind = ProblemKind::regression;
    std::vector<LossKind> losses;
    double power = 1.01;
    std::size_t input_dim = 1;
    std::size_t output_dim = 1;
    std::size_t train_count = 200;
    std::size_t validation_count = 200;
    // Fixed training set for the two-sample problems; empty for regression.
    std::vector<Sample> fixed_samples;

    [[nodiscard]] std::size_t objectives() const noexcept { return losses.size(); }
};

struct Dataset {
    std::vector<Sample> train;
    std::vector<Sample> validation;
};

inline char const* to_string(LossPair pair) {
    switch (pair) {
    case LossPair::mse_mse: return "mse_mse";
    case LossPair::mse_l1: return "mse_l1";
    case LossPair::mse_scaled_mse: return "mse_scaled_mse";
    }
    return "?";
}

inline char const* to_string(ProblemKind kind) {
    switch (kind) {
    case ProblemKind::regression: return "regression";
    case ProblemKind::strictly_convex: return "strictly_convex";
    case ProblemKind::linear: return "linear";
    case ProblemKind::non_convex: return "non_convex";
    case ProblemKind::counter_example: return "counter_example";
    }
    return "?";
}

namespace detail {

inline Sample regression_sample(std::size_t id, double x, bool three_objectives) {
    Sample s{id, {x}, {{std::cos(x)}, {std::sin(x)}}};
    if (three_objectives) s.targets.push_back({std::sin(x + std::numbers::pi)});
    return s;
}

inline Sample centers_sample(std::size_t id, std::vector<double> c1, std::vector<double> c2) {
    Sample s{id, {c1[0], c1[1], c2[0], c2[1]}, {}};
    s.targets = {std::move(c1), std::move(c2)};
    return s;
}

inline Sample non_convex_sample(std::size_t id, double x) { return Sample{id, {x}, {{1.0}, {-1.0}}}; }

} // namespace detail

/// Cos/sin regression (plus sin(x + pi) for three objectives).
inline ProblemSpec regression_problem(LossPair pair, bool three_objectives = false) {
    ProblemSpec spec;
    spec.kind = ProblemKind::regression;
    if (three_objectives) {
        require(pair == LossPair::mse_mse, "three-objective regression uses MSE on every objective");
        spec.name = "regression_3obj";
        spec.losses = {LossKind::mse, LossKind::mse, LossKind::mse};
    } else {
        spec.name = std::string("regression_") + to_string(pair);
        LossKind second = pair == LossPair::mse_mse ? LossKind::mse
                        : pair == LossPair::mse_l1  ? LossKind::l1
                                                    : LossKind::scaled_mse;
        spec.losses = {LossKind::mse, second};
    }
    spec.input_dim = 1;
    spec.output_dim = 1;
    return spec;
}

/// The two-sample geometric and non-convex problems.
///
/// Centers for the strictly convex and linear cases and the scalar inputs
/// of the non-convex case are configuration defaults; the counter-example
/// uses centers [0,0],[1,1] and [0.05,0.4],[0.5,0.5] with exponents 2 and 1.01.
inline ProblemSpec two_sample_problem(ProblemKind kind) {
    ProblemSpec spec;
    spec.kind = kind;
    spec.name = to_string(kind);
    spec.train_count = spec.validation_count = 2;
    switch (kind) {
    case ProblemKind::strictly_convex:
    case ProblemKind::linear: {
        auto const loss = kind == ProblemKind::linear ? LossKind::euclidean : LossKind::squared_euclidean;
        spec.losses = {loss, loss};
        spec.input_dim = 4;
        spec.output_dim = 2;
        spec.fixed_samples = {detail::centers_sample(0, {0.0, 0.0}, {1.0, 1.0}),
                              detail::centers_sample(1, {0.25, 0.1}, {0.75, 0.9})};
        break;
    }
    case ProblemKind::counter_example:
        spec.losses = {LossKind::squared_euclidean, LossKind::power_euclidean};
        spec.power = 1.01;
        spec.input_dim = 4;
        spec.output_dim = 2;
        spec.fixed_samples = {detail::centers_sample(0, {0.0, 0.0}, {1.0, 1.0}),
                              detail::centers_sample(1, {0.05, 0.4}, {0.5, 0.5})};
        break;
    case ProblemKind::non_convex:
        spec.losses = {LossKind::exp_saturating, LossKind::exp_saturating};
        spec.input_dim = 1;
        spec.output_dim = 1;
        spec.fixed_samples = {detail::non_convex_sample(0, 1.0), detail::non_convex_sample(1, 1.5)};
        break;
    case ProblemKind::regression:
        throw ContractViolation("two_sample_problem: regression is not a two-sample problem");
    }
    return spec;
}

/// Look a problem up by the name stored in dataset and run files.
inline ProblemSpec problem_by_name(std::string const& name) {
    if (name == "regression_mse_mse") return regression_problem(LossPair::mse_mse);
    if (name == "regression_mse_l1") return regression_problem(LossPair::mse_l1);
    if (name == "regression_mse_scaled_mse") return regression_problem(LossPair::mse_scaled_mse);
    if (name == "regression_3obj") return regression_problem(LossPair::mse_mse, true);
    if (name == "strictly_convex") return two_sample_problem(ProblemKind::strictly_convex);
    if (name == "linear") return two_sample_problem(ProblemKind::linear);
    if (name == "non_convex") return two_sample_problem(ProblemKind::non_convex);
    if (name == "counter_example") return two_sample_problem(ProblemKind::counter_example);
    throw ContractViolation("unknown problem '" + name + "'");
}

/// Training inputs uniform on [0, 2pi] from `seed`; validation inputs evenly
/// spaced on [0, 2pi] (both ends included).
inline Dataset make_regression_dataset(std::size_t count, std::uint64_t seed, bool three_objectives) {
    require(count >= 1, "make_regression_dataset: count must be >= 1");
    Dataset d;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 2.0 * std::numbers::pi);
    for (std::size_t k = 0; k < count; ++k) d.train.push_back(detail::regression_sample(k, dist(rng), three_objectives));
    for (std::size_t k = 0; k < count; ++k) {
        double const x = count == 1 ? 0.0 : 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(count - 1);
        d.validation.push_back(detail::regression_sample(k, x, three_objectives));
    }
    return d;
}

inline Dataset make_dataset(ProblemSpec const& spec, std::uint64_t seed) {
    if (spec.kind == ProblemKind::regression) {
        Dataset d = make_regression_dataset(spec.train_count, seed, spec.objectives() == 3);
        if (spec.validation_count != spec.train_count) {
            d.validation = make_regression_dataset(spec.validation_count, seed, spec.objectives() == 3).validation;
        }
        return d;
    }
    return Dataset{spec.fixed_samples, spec.fixed_samples};
}

namespace detail {

// Loss of objective j and (optionally) its gradient w.r.t. the network output.
inline double objective_loss(ProblemSpec const& spec, std::size_t j, Sample const& sample,
                             std::span<double const> output, std::span<double> grad) {
    auto const& target = sample.targets[j];
    require(target.size() == output.size(), "loss: output/target dimension mismatch");
    std::size_t const dim = output.size();
    auto diff = [&](std::size_t d) { return output[d] - target[d]; };
    double sq = 0.0;
    for (std::size_t d = 0; d < dim; ++d) sq += diff(d) * diff(d);
    bool const want = !grad.empty();

    switch (spec.losses[j]) {
    case LossKind::mse:
    case LossKind::squared_euclidean:
        if (want) for (std::size_t d = 0; d < dim; ++d) grad[d] = 2.0 * diff(d);
        return sq;
    case LossKind::scaled_mse:
        if (want) for (std::size_t d = 0; d < dim; ++d) grad[d] = 2.0 * diff(d) / 100.0;
        return sq / 100.0;
    case LossKind::l1: {
        double value = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            value += std::abs(diff(d));
            if (want) grad[d] = diff(d) > 0.0 ? 1.0 : diff(d) < 0.0 ? -1.0 : 0.0;
        }
        return value;
    }
    case LossKind::euclidean: {
        double const norm = std::sqrt(sq);
        if (want) for (std::size_t d = 0; d < dim; ++d) grad[d] = norm > 0.0 ? diff(d) / norm : 0.0;
        return norm;
    }
    case LossKind::power_euclidean: {
        double const norm = std::sqrt(sq);
        if (want)
            for (std::size_t d = 0; d < dim; ++d)
                grad[d] = norm > 0.0 ? spec.power * std::pow(norm, spec.power - 2.0) * diff(d) : 0.0;
        return std::pow(norm, spec.power);
    }
    case LossKind::exp_saturating: {
        double const scale = sample.input.at(0);
        double const e = std::exp(-sq);
        if (want) for (std::size_t d = 0; d < dim; ++d) grad[d] = scale * e * 2.0 * diff(d);
        return scale * (1.0 - e);
    }
    }
    return 0.0;
}

} // namespace detail

/// All n losses of one sample for a network output. When `jacobian` is
/// non-empty it receives dL_j/dz as an n x output_dim row-major block.
inline void evaluate_losses(ProblemSpec const& spec, Sample const& sample, std::span<double const> output,
                            std::span<double> losses, std::span<double> jacobian = {}) {
    std::size_t const n = spec.objectives();
    require(losses.size() == n, "evaluate_losses: loss buffer size");
    require(jacobian.empty() || jacobian.size() == n * output.size(), "evaluate_losses: jacobian buffer size");
    require(sample.targets.size() == n, "evaluate_losses: sample has wrong target count");
    for (std::size_t j = 0; j < n; ++j) {
        auto g = jacobian.empty() ? std::span<double>{} : jacobian.subspan(j * output.size(), output.size());
        losses[j] = detail::objective_loss(spec, j, sample, output, g);
    }
}

inline LossVector evaluate_losses(ProblemSpec const& spec, Sample const& sample, std::span<double const> output) {
    LossVector l(spec.objectives());
    evaluate_losses(spec, sample, output, l);
    return l;
}

/// Per-sample regression losses for a scalar prediction.
inline LossVector regression_losses(double prediction, Sample const& sample, LossPair pair) {
    require(std::isfinite(prediction), "regression_losses: non-finite prediction");
    auto spec = regression_problem(pair, false);
    if (sample.targets.size() == 3) spec = regression_problem(LossPair::mse_mse, true);
    double const z[] = {prediction};
    return evaluate_losses(spec, sample, z);
}

/// Losses of the two-sample problems for a network output.
inline LossVector two_sample_losses(std::span<double const> output, Sample const& sample, ProblemKind kind) {
    auto const spec = two_sample_problem(kind);
    require(output.size() == spec.output_dim, "two_sample_losses: output dimension mismatch");
    return evaluate_losses(spec, sample, output);
}

/// Dense polyline of Pareto-optimal loss vectors for one sample.
///
/// Every suite front is the image of one scalar parameter t in [0, 1]:
///  - regression: z runs from the smallest to the largest target (two
///    objectives: from y1 to y2);
///  - geometric cases: z runs along the segment from center 1 to center 2;
///  - non-convex: z runs from 1 to -1.
/// Dominated points and exact duplicates are pruned; the remaining points
/// keep parameter order, which is ascending in L1.
inline StackedLosses true_front_oracle(Sample const& sample, ProblemSpec const& spec, std::size_t resolution) {
    require(resolution >= 2, "true_front_oracle: resolution must be >= 2");
    std::size_t const n = spec.objectives();
    std::vector<double> from, to;
    switch (spec.kind) {
    case ProblemKind::regression:
        if (n == 2) {
            from = sample.targets[0];
            to = sample.targets[1];
        } else {
            double lo = sample.targets[0][0], hi = lo;
            for (auto const& t : sample.targets) {
                lo = std::min(lo, t[0]);
                hi = std::max(hi, t[0]);
            }
            from = {lo};
            to = {hi};
        }
        break;
    case ProblemKind::strictly_convex:
    case ProblemKind::linear:
    case ProblemKind::counter_example:
        from = sample.targets[0];
        to = sample.targets[1];
        break;
    case ProblemKind::non_convex:
        from = {1.0};
        to = {-1.0};
        break;
    }

    StackedLosses curve(0, n);
    std::vector<double> z(from.size());
    for (std::size_t r = 0; r < resolution; ++r) {
        double const t = static_cast<double>(r) / static_cast<double>(resolution - 1);
        for (std::size_t d = 0; d < z.size(); ++d) z[d] = from[d] + t * (to[d] - from[d]);
        curve.push_back(evaluate_losses(spec, sample, z));
    }

    auto const partition = non_dominated_sort(curve);
    StackedLosses front(0, n);
    for (std::size_t r = 0; r < curve.size(); ++r) {
        if (partition.rank[r] != 0) continue;
        bool duplicate = false;
        for (std::size_t q = 0; q < front.size() && !duplicate; ++q)
            duplicate = std::equal(curve[r].begin(), curve[r].end(), front[q].begin());
        if (!duplicate) front.push_back(curve[r]);
    }
    return front;
}

/// Best HV reachable by at most p points picked from the discretized true
/// front (two objectives). Dynamic program over the front sorted by L1:
/// best[m][i] is the HV of the best m-point subset whose last point is i.
inline double oracle_max_hv(Sample const& sample, ProblemSpec const& spec, std::size_t p, ReferencePoint const& ref,
                            std::size_t grid) {
    if (spec.objectives() != 2) throw UnsupportedDimension(spec.objectives());
    require(p >= 1 && p <= 8, "oracle_max_hv: p must be in [1, 8]");
    require(grid >= 2 && grid <= 512, "oracle_max_hv: grid must be in [2, 512]");
    require(ref.size() == 2, "oracle_max_hv: reference dimension mismatch");

    auto const front = true_front_oracle(sample, spec, grid);
    std::vector<std::array<double, 2>> pts;
    for (std::size_t i = 0; i < front.size(); ++i)
        if (front(i, 0) < ref[0] && front(i, 1) < ref[1]) pts.push_back({front(i, 0), front(i, 1)});
    if (pts.empty()) return 0.0;
    std::sort(pts.begin(), pts.end());

    std::size_t const g = pts.size();
    std::vector<double> prev(g), cur(g);
    double best = 0.0;
    for (std::size_t i = 0; i < g; ++i) {
        prev[i] = (ref[0] - pts[i][0]) * (ref[1] - pts[i][1]);
        best = std::max(best, prev[i]);
    }
    for (std::size_t m = 2; m <= p; ++m) {
        for (std::size_t i = 0; i < g; ++i) {
            double v = -std::numeric_limits<double>::infinity();
            for (std::size_t h = 0; h < i; ++h)
                if (std::isfinite(prev[h]))
                    v = std::max(v, prev[h] + (ref[0] - pts[i][0]) * (pts[h][1] - pts[i][1]));
            cur[i] = v;
            best = std::max(best, v);
        }
        std::swap(prev, cur);
    }
    return best;
}

// Dataset text format:
//
//   # mohv-dataset problem=<name> split=<train|validation> count=<N>
//   id,input_0,...,target_<j>_<d>,...
//   <one row per sample>
inline void write_dataset(std::ostream& os, ProblemSpec const& spec, std::string const& split,
                          std::span<Sample const> samples) {
    os << "# mohv-dataset problem=" << spec.name << " split=" << split << " count=" << samples.size() << '\n';
    os << "id";
    if (!samples.empty()) {
        for (std::size_t d = 0; d < samples.front().input.size(); ++d) os << ",input_" << d;
        for (std::size_t j = 0; j < samples.front().targets.size(); ++j)
            for (std::size_t d = 0; d < samples.front().targets[j].size(); ++d) os << ",target_" << j << '_' << d;
    }
    os << '\n';
    char buf[32];
    for (auto const& s : samples) {
        os << s.id;
        for (double v : s.input) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            os << ',' << buf;
        }
        for (auto const& t : s.targets)
            for (double v : t) {
                std::snprintf(buf, sizeof buf, "%.17g", v);
                os << ',' << buf;
            }
        os << '\n';
    }
}

struct DatasetFile {
    std::string problem;
    std::string split;
    std::vector<Sample> samples;
};

inline DatasetFile read_dataset(std::istream& is) {
    DatasetFile out;
    std::string line;
    if (!std::getline(is, line) || line.rfind("# mohv-dataset", 0) != 0) throw IoError("dataset: missing header line");
    std::istringstream header(line.substr(14));
    std::string field;
    std::size_t count = 0;
    while (header >> field) {
        auto const eq = field.find('=');
        if (eq == std::string::npos) continue;
        auto const key = field.substr(0, eq);
        auto const value = field.substr(eq + 1);
        if (key == "problem") out.problem = value;
        else if (key == "split") out.split = value;
        else if (key == "count") count = std::stoul(value);
    }
    if (!std::getline(is, line)) throw IoError("dataset: missing column line");

    std::size_t inputs = 0;
    std::vector<std::size_t> target_dims;
    std::istringstream columns(line);
    while (std::getline(columns, field, ',')) {
        if (field.rfind("input_", 0) == 0) {
            ++inputs;
        } else if (field.rfind("target_", 0) == 0) {
            auto const j = std::stoul(field.substr(7, field.find('_', 7) - 7));
            if (j >= target_dims.size()) target_dims.resize(j + 1, 0);
            ++target_dims[j];
        }
    }
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::vector<double> values;
        std::string cell;
        std::getline(row, cell, ',');
        Sample s;
        s.id = std::stoul(cell);
        while (std::getline(row, cell, ',')) values.push_back(std::stod(cell));
        std::size_t expected = inputs;
        for (auto d : target_dims) expected += d;
        if (values.size() != expected) throw IoError("dataset: row has wrong column count");
        s.input.assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(inputs));
        std::size_t pos = inputs;
        for (auto d : target_dims) {
            s.targets.emplace_back(values.begin() + static_cast<std::ptrdiff_t>(pos),
                                   values.begin() + static_cast<std::ptrdiff_t>(pos + d));
            pos += d;
        }
        out.samples.push_back(std::move(s));
    }
    if (out.samples.size() != count) throw IoError("dataset: sample count does not match header");
    return out;
}

} // namespace mohv
