#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "mohv/errors.hpp"
#include "mohv/hypervolume.hpp"
#include "mohv/pareto.hpp"

namespace mohv {

struct WeightTag;

/// Loss weights for each network, one row of n nonnegative entries per network.
struct WeightMatrix {
    RowTable<WeightTag> per_network;
    std::size_t outside_reference = 0;
};

/// Switches between the ranked, normalized dynamic loss (default) and the
/// plain HV-gradient weighting used for ablations.
struct WeightOptions {
    // Split the loss vectors into domination-ranked fronts and weight each
    // front by the gradient of its own HV. Without ranking only the
    // non-dominated front gets weights; dominated networks get zero rows.
    bool rank = true;
    // Scale every nonzero row to unit Euclidean length.
    bool normalize = true;
};

namespace detail {

inline void normalize_rows(RowTable<WeightTag>& w) {
    for (std::size_t i = 0; i < w.size(); ++i) {
        double norm2 = 0.0;
        for (double v : w[i]) norm2 += v * v;
        if (norm2 <= 0.0) continue;
        double const norm = std::sqrt(norm2);
        for (double& v : w[i]) v /= norm;
    }
}

} // namespace detail

/// Weights for one sample's stacked losses: sort into fronts, take the HV
/// gradient of every front against `ref`, normalize per network and
/// reassemble in network order.
inline WeightMatrix per_sample_weights(StackedLosses const& stacked, ReferencePoint const& ref,
                                       WeightOptions const& options = {}) {
    require(!stacked.empty(), "per_sample_weights: no networks");
    require(stacked.dims() == ref.size(), "per_sample_weights: reference dimension mismatch");

    WeightMatrix out{RowTable<WeightTag>(stacked.size(), stacked.dims()), 0};
    auto const partition = non_dominated_sort(stacked);
    std::size_t const used_fronts = options.rank ? partition.fronts.size() : 1;

    for (std::size_t l = 0; l < used_fronts; ++l) {
        auto const& members = partition.fronts[l];
        auto const front = select_rows(stacked, std::span<std::size_t const>(members));
        auto const grad = hv_gradient(front, ref);
        out.outside_reference += grad.outside_reference;
        for (std::size_t m = 0; m < members.size(); ++m)
            for (std::size_t j = 0; j < stacked.dims(); ++j)
                out.per_network(members[m], j) = grad.per_point(m, j);
    }
    if (options.normalize) detail::normalize_rows(out.per_network);
    return out;
}

/// Same weighting applied once to the batch-mean losses of every network.
inline WeightMatrix average_loss_weights(StackedLosses const& mean_losses, ReferencePoint const& ref,
                                         WeightOptions const& options = {}) {
    return per_sample_weights(mean_losses, ref, options);
}

/// Batch mean of sum_j weight_ij * L_ij for each network i. Weights are
/// plain numbers here: nothing downstream differentiates through them.
inline std::vector<double> joint_loss_value(std::span<StackedLosses const> stacked_per_sample,
                                            std::span<WeightMatrix const> weights_per_sample) {
    require(stacked_per_sample.size() == weights_per_sample.size(), "joint_loss_value: sample count mismatch");
    require(!stacked_per_sample.empty(), "joint_loss_value: empty batch");
    std::size_t const p = stacked_per_sample.front().size();
    std::size_t const n = stacked_per_sample.front().dims();
    std::vector<double> total(p, 0.0);
    for (std::size_t k = 0; k < stacked_per_sample.size(); ++k) {
        auto const& losses = stacked_per_sample[k];
        auto const& weights = weights_per_sample[k].per_network;
        require(losses.size() == p && losses.dims() == n && weights.size() == p && weights.dims() == n,
                "joint_loss_value: shape mismatch");
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = 0; j < n; ++j) total[i] += weights(i, j) * losses(i, j);
    }
    for (auto& t : total) t /= static_cast<double>(stacked_per_sample.size());
    return total;
}

} // namespace mohv
