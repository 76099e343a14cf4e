#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mohv/dynamic_loss.hpp"
#include "mohv/errors.hpp"
#include "mohv/hypervolume.hpp"
#include "mohv/log.hpp"
#include "mohv/neural.hpp"
#include "mohv/pareto.hpp"
#include "mohv/problems.hpp"

namespace mohv {

enum class Method { hv_per_sample, hv_average, linear_scalarization };

inline char const* to_string(Method m) {
    switch (m) {
    case Method::hv_per_sample: return "hv_per_sample";
    case Method::hv_average: return "hv_average";
    case Method::linear_scalarization: return "linear_scalarization";
    }
    return "?";
}

struct TrainConfig {
    ProblemSpec problem = regression_problem(LossPair::mse_mse);
    std::size_t networks = 5;
    std::size_t iterations = 20000;
    std::size_t batch_size = 0; // 0 = full batch
    ReferencePoint ref{20.0, 20.0};
    // Optional reference point per sample id, for problems with a fixed
    // sample set (training and validation samples coincide). Empty means
    // `ref` is used for every sample.
    std::vector<ReferencePoint> sample_refs;
    Method method = Method::hv_per_sample;
    // One row of n nonnegative weights per network (linear scalarization only).
    std::vector<std::vector<double>> fixed_weights;
    AdamSettings optimizer;
    WeightOptions weighting;
    std::vector<std::size_t> hidden{100, 100};
    std::uint64_t seed = 1;
    std::size_t eval_every = 250;
    std::size_t threads = 1;
    // Single-threaded, fixed reduction order.
    bool strict_deterministic = false;

    void validate() const {
        std::size_t const n = problem.objectives();
        require(n == 2 || n == 3, "TrainConfig: problem must have 2 or 3 objectives");
        require(networks >= 1, "TrainConfig: need at least one network");
        require(iterations >= 1, "TrainConfig: need at least one iteration");
        require(eval_every >= 1, "TrainConfig: eval_every must be >= 1");
        require(ref.size() == n, "TrainConfig: reference point dimension does not match the problem");
        if (!sample_refs.empty()) {
            require(!problem.fixed_samples.empty(), "TrainConfig: per-sample reference points need a fixed sample set");
            require(sample_refs.size() == problem.fixed_samples.size(), "TrainConfig: need one reference point per sample");
            for (auto const& r : sample_refs) require(r.size() == n, "TrainConfig: reference point dimension mismatch");
        }
        if (method == Method::linear_scalarization) {
            require(fixed_weights.size() == networks, "TrainConfig: need one weight vector per network");
            for (auto const& w : fixed_weights) {
                require(w.size() == n, "TrainConfig: weight vector dimension mismatch");
                for (double v : w) require(std::isfinite(v) && v >= 0.0, "TrainConfig: weights must be >= 0");
            }
        }
    }
};

struct RunSeeds {
    std::uint64_t master = 0;
    std::uint64_t data = 0;
    std::uint64_t shuffle = 0;
    std::vector<std::uint64_t> init;
};

/// Derived streams: 0 = data, 1 = shuffle, 2 + i = network i.
inline RunSeeds fan_out_seeds(std::uint64_t master, std::size_t networks) {
    RunSeeds s;
    s.master = master;
    s.data = split_seed(master, 0);
    s.shuffle = split_seed(master, 1);
    for (std::size_t i = 0; i < networks; ++i) s.init.push_back(split_seed(master, 2 + i));
    return s;
}

struct EvalPoint {
    std::size_t iteration = 0;
    double mean_hv = 0.0;
    std::vector<double> sample_hv;
    std::vector<LossVector> network_mean_loss;
};

struct RunRecord {
    RunSeeds seeds;
    std::vector<EvalPoint> evals;
    // Validation losses after the last iteration, one p x n block per sample.
    std::vector<StackedLosses> final_losses;
    // Fraction of adjacent validation samples with the same network order along L1.
    double ordering_consistency = 1.0;
    std::size_t outside_reference_events = 0;

    [[nodiscard]] double final_mean_hv() const { return evals.empty() ? 0.0 : evals.back().mean_hv; }
};

struct Ensemble {
    ProblemSpec problem;
    std::vector<Mlp> networks;
    std::vector<Adam> optimizers;

    [[nodiscard]] std::size_t size() const noexcept { return networks.size(); }
};

struct Evaluation {
    double mean_hv = 0.0;
    std::vector<double> sample_hv;
    std::vector<StackedLosses> losses;
};

namespace detail {

template <class Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    threads = std::min(threads, count);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < count; i += threads) fn(i);
        });
    for (auto& th : pool) th.join();
}

inline Eigen::MatrixXd input_matrix(std::span<Sample const> samples, std::span<std::size_t const> idx,
                                    std::size_t input_dim) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(input_dim), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) {
        auto const& in = samples[idx[c]].input;
        require(in.size() == input_dim, "sample input dimension does not match the network");
        for (std::size_t d = 0; d < input_dim; ++d)
            x(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(c)) = in[d];
    }
    return x;
}

} // namespace detail

/// Losses of every network on every sample, without touching the ensemble.
inline std::vector<StackedLosses> ensemble_losses(Ensemble const& ensemble, std::span<Sample const> samples) {
    std::size_t const p = ensemble.size();
    std::size_t const n = ensemble.problem.objectives();
    std::vector<std::size_t> idx(samples.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto const x = detail::input_matrix(samples, idx, ensemble.problem.input_dim);
    std::vector<StackedLosses> out(samples.size(), StackedLosses(p, n));
    for (std::size_t i = 0; i < p; ++i) {
        Eigen::MatrixXd const z = ensemble.networks[i].forward(x);
        for (std::size_t k = 0; k < samples.size(); ++k) {
            std::span<double const> zk(z.data() + k * z.rows(), static_cast<std::size_t>(z.rows()));
            evaluate_losses(ensemble.problem, samples[k], zk, out[k][i]);
        }
    }
    return out;
}

/// Mean and per-sample HV of the full stacked loss set of each sample.
/// `refs` holds either one reference point for all samples or one per sample.
inline Evaluation evaluate(Ensemble const& ensemble, std::span<Sample const> samples,
                           std::span<ReferencePoint const> refs) {
    require(!samples.empty(), "evaluate: empty sample list");
    require(refs.size() == 1 || refs.size() == samples.size(), "evaluate: reference point count mismatch");
    Evaluation e;
    e.losses = ensemble_losses(ensemble, samples);
    for (std::size_t k = 0; k < samples.size(); ++k)
        e.sample_hv.push_back(hv(e.losses[k], refs.size() == 1 ? refs[0] : refs[k]));
    e.mean_hv = std::accumulate(e.sample_hv.begin(), e.sample_hv.end(), 0.0) / static_cast<double>(samples.size());
    return e;
}

inline Evaluation evaluate(Ensemble const& ensemble, std::span<Sample const> samples, ReferencePoint const& ref) {
    return evaluate(ensemble, samples, std::span<ReferencePoint const>(&ref, 1));
}

/// Fraction of adjacent sample pairs whose network order (ascending L1,
/// ties by index) is identical. 1.0 with fewer than two samples.
inline double ordering_diagnostic(std::span<StackedLosses const> per_sample) {
    if (per_sample.size() < 2) return 1.0;
    auto order_of = [](StackedLosses const& l) {
        require(l.dims() == 2, "ordering_diagnostic: needs two objectives");
        std::vector<std::size_t> order(l.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return l(a, 0) < l(b, 0); });
        return order;
    };
    std::size_t same = 0;
    auto prev = order_of(per_sample[0]);
    for (std::size_t k = 1; k < per_sample.size(); ++k) {
        auto cur = order_of(per_sample[k]);
        if (cur == prev) ++same;
        prev = std::move(cur);
    }
    return static_cast<double>(same) / static_cast<double>(per_sample.size() - 1);
}

inline double ordering_diagnostic(Ensemble const& ensemble, std::span<Sample const> samples) {
    auto const losses = ensemble_losses(ensemble, samples);
    return ordering_diagnostic(std::span<StackedLosses const>(losses));
}

inline Ensemble make_ensemble(TrainConfig const& config, RunSeeds const& seeds) {
    Ensemble e;
    e.problem = config.problem;
    std::vector<std::size_t> sizes{config.problem.input_dim};
    sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
    sizes.push_back(config.problem.output_dim);
    for (std::size_t i = 0; i < config.networks; ++i) {
        e.networks.emplace_back(sizes, seeds.init[i]);
        e.optimizers.emplace_back(e.networks.back(), config.optimizer);
    }
    return e;
}

/// Trains the ensemble. Every iteration: losses of all networks on the
/// batch, loss weights from the chosen method, one backward pass per
/// network on the weighted loss, one Adam step per network.
inline std::pair<Ensemble, RunRecord> train(TrainConfig const& config, Dataset const& data) {
    config.validate();
    require(!data.train.empty() && !data.validation.empty(), "train: empty dataset");
    std::size_t const p = config.networks;
    std::size_t const n = config.problem.objectives();
    std::size_t const out_dim = config.problem.output_dim;
    std::size_t const threads = config.strict_deterministic ? 1 : std::max<std::size_t>(1, config.threads);

    RunRecord record;
    record.seeds = fan_out_seeds(config.seed, p);
    Ensemble ensemble = make_ensemble(config, record.seeds);

    std::size_t const train_count = data.train.size();
    std::size_t const batch = (config.batch_size == 0 || config.batch_size >= train_count) ? train_count : config.batch_size;
    std::vector<std::size_t> order(train_count);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(record.seeds.shuffle);
    std::size_t cursor = 0;
    bool const full_batch = batch == train_count;
    Eigen::MatrixXd const full_inputs = detail::input_matrix(data.train, order, config.problem.input_dim);

    auto ref_for = [&](Sample const& s) -> ReferencePoint const& {
        return config.sample_refs.empty() ? config.ref : config.sample_refs.at(s.id);
    };
    std::vector<ReferencePoint> validation_refs;
    for (auto const& s : data.validation) validation_refs.push_back(ref_for(s));

    auto record_eval = [&](std::size_t iteration) {
        auto const e = evaluate(ensemble, data.validation, validation_refs);
        EvalPoint point;
        point.iteration = iteration;
        point.mean_hv = e.mean_hv;
        point.sample_hv = e.sample_hv;
        point.network_mean_loss.assign(p, LossVector(n, 0.0));
        for (auto const& l : e.losses)
            for (std::size_t i = 0; i < p; ++i)
                for (std::size_t j = 0; j < n; ++j) point.network_mean_loss[i][j] += l(i, j);
        for (auto& row : point.network_mean_loss)
            for (auto& v : row) v /= static_cast<double>(e.losses.size());
        record.evals.push_back(std::move(point));
        return e;
    };
    record_eval(0);

    // Mean losses live in averaged loss space, so their reference point is
    // the mean of the batch samples' reference points.
    auto mean_reference = [&](std::vector<std::size_t> const& idx) {
        if (config.sample_refs.empty()) return config.ref;
        std::vector<double> c(n, 0.0);
        for (auto k : idx)
            for (std::size_t j = 0; j < n; ++j) c[j] += ref_for(data.train[k])[j];
        for (auto& v : c) v /= static_cast<double>(idx.size());
        return ReferencePoint(std::move(c));
    };

    std::vector<Tape> tapes(p);
    std::vector<Eigen::MatrixXd> outputs(p);
    std::vector<StackedLosses> losses;
    std::vector<std::vector<double>> jacobians; // [k * p + i] -> n x out_dim
    std::vector<WeightMatrix> weights;
    std::vector<std::size_t> batch_idx;
    bool warned_outside = false;

    for (std::size_t it = 1; it <= config.iterations; ++it) {
        if (full_batch) {
            batch_idx = order;
        } else {
            batch_idx.clear();
            while (batch_idx.size() < batch) {
                if (cursor == 0) std::shuffle(order.begin(), order.end(), shuffle_rng);
                batch_idx.push_back(order[cursor]);
                cursor = (cursor + 1) % train_count;
            }
        }
        std::size_t const b = batch_idx.size();
        Eigen::MatrixXd const x = full_batch ? full_inputs : detail::input_matrix(data.train, batch_idx, config.problem.input_dim);

        losses.assign(b, StackedLosses(p, n));
        jacobians.assign(b * p, std::vector<double>(n * out_dim));

        detail::parallel_for(p, threads, [&](std::size_t i) {
            outputs[i] = ensemble.networks[i].forward(x, &tapes[i]);
            for (std::size_t k = 0; k < b; ++k) {
                std::span<double const> zk(outputs[i].data() + k * out_dim, out_dim);
                evaluate_losses(config.problem, data.train[batch_idx[k]], zk, losses[k][i], jacobians[k * p + i]);
            }
        });

        for (std::size_t k = 0; k < b; ++k)
            for (std::size_t i = 0; i < p; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    if (!std::isfinite(losses[k](i, j))) {
                        std::ostringstream msg;
                        msg << "non-finite loss at iteration " << it << ", network " << i << ", sample "
                            << data.train[batch_idx[k]].id << " (objective " << j << " = " << losses[k](i, j) << ")";
                        throw TrainingAborted(msg.str(), it, i, data.train[batch_idx[k]].id);
                    }

        // Loss weights, one matrix per batch sample.
        switch (config.method) {
        case Method::hv_per_sample:
            weights.assign(b, WeightMatrix{});
            detail::parallel_for(b, threads, [&](std::size_t k) {
                weights[k] = per_sample_weights(losses[k], ref_for(data.train[batch_idx[k]]), config.weighting);
            });
            break;
        case Method::hv_average: {
            StackedLosses mean(p, n);
            for (std::size_t k = 0; k < b; ++k)
                for (std::size_t i = 0; i < p; ++i)
                    for (std::size_t j = 0; j < n; ++j) mean(i, j) += losses[k](i, j);
            for (std::size_t i = 0; i < p; ++i)
                for (std::size_t j = 0; j < n; ++j) mean(i, j) /= static_cast<double>(b);
            weights.assign(b, average_loss_weights(mean, mean_reference(batch_idx), config.weighting));
            break;
        }
        case Method::linear_scalarization: {
            WeightMatrix fixed{RowTable<WeightTag>(config.fixed_weights), 0};
            weights.assign(b, fixed);
            break;
        }
        }

        std::size_t outside = 0;
        if (config.method == Method::hv_average) outside = weights.front().outside_reference;
        else for (auto const& w : weights) outside += w.outside_reference;
        if (outside > 0) {
            record.outside_reference_events += outside;
            if (!warned_outside) {
                log::warn("loss vectors outside the reference box at iteration " + std::to_string(it) +
                          "; using uniform pull-back weights for them");
                warned_outside = true;
            }
        }

        detail::parallel_for(p, threads, [&](std::size_t i) {
            Eigen::MatrixXd upstream(static_cast<Eigen::Index>(out_dim), static_cast<Eigen::Index>(b));
            double const inv_b = 1.0 / static_cast<double>(b);
            for (std::size_t k = 0; k < b; ++k) {
                auto const& jac = jacobians[k * p + i];
                for (std::size_t d = 0; d < out_dim; ++d) {
                    double g = 0.0;
                    for (std::size_t j = 0; j < n; ++j) g += weights[k].per_network(i, j) * jac[j * out_dim + d];
                    upstream(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k)) = g * inv_b;
                }
            }
            auto const grad = ensemble.networks[i].backward(tapes[i], upstream);
            ensemble.optimizers[i].step(ensemble.networks[i], grad);
        });

        if (it % config.eval_every == 0 || it == config.iterations) {
            auto const e = record_eval(it);
            if (it == config.iterations) record.final_losses = e.losses;
        }
    }

    if (n == 2) record.ordering_consistency = ordering_diagnostic(std::span<StackedLosses const>(record.final_losses));
    return {std::move(ensemble), std::move(record)};
}

inline std::pair<Ensemble, RunRecord> train(TrainConfig const& config) {
    auto const seeds = fan_out_seeds(config.seed, config.networks);
    return train(config, make_dataset(config.problem, seeds.data));
}

} // namespace mohv
