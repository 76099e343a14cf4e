#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <vector>

#include "mohv/errors.hpp"

namespace mohv {

// One network's loss values for one sample.
using LossVector = std::vector<double>;

/// Dense row-major table of `rows x dims` doubles.
///
/// The tag parameter keeps loss matrices, HV gradients and loss weights
/// from being mixed up; they share storage and accessors but do not
/// convert into each other implicitly.
template <class Tag>
class RowTable {
public:
    RowTable() = default;

    RowTable(std::size_t rows, std::size_t dims, double fill = 0.0)
        : rows_(rows), dims_(dims), data_(rows * dims, fill) {}

    RowTable(std::initializer_list<std::initializer_list<double>> rows) {
        for (auto const& r : rows) push_back(std::span<double const>(r.begin(), r.size()));
    }

    explicit RowTable(std::vector<std::vector<double>> const& rows) {
        for (auto const& r : rows) push_back(r);
    }

    template <class OtherTag>
    static RowTable retag(RowTable<OtherTag> const& other) {
        RowTable out(other.size(), other.dims());
        std::copy(other.data().begin(), other.data().end(), out.data_.begin());
        return out;
    }

    [[nodiscard]] std::size_t size() const noexcept { return rows_; }
    [[nodiscard]] std::size_t dims() const noexcept { return dims_; }
    [[nodiscard]] bool empty() const noexcept { return rows_ == 0; }

    std::span<double const> operator[](std::size_t i) const { return {data_.data() + i * dims_, dims_}; }
    std::span<double> operator[](std::size_t i) { return {data_.data() + i * dims_, dims_}; }

    double operator()(std::size_t i, std::size_t j) const { return data_[i * dims_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * dims_ + j]; }

    void push_back(std::span<double const> row) {
        if (rows_ == 0 && dims_ == 0) dims_ = row.size();
        require(row.size() == dims_, "row dimension mismatch");
        data_.insert(data_.end(), row.begin(), row.end());
        ++rows_;
    }

    [[nodiscard]] std::vector<double> const& data() const noexcept { return data_; }

    [[nodiscard]] std::vector<double> row_vector(std::size_t i) const {
        auto r = (*this)[i];
        return {r.begin(), r.end()};
    }

    [[nodiscard]] bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(RowTable const& a, RowTable const& b) {
        return a.rows_ == b.rows_ && a.dims_ == b.dims_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t dims_ = 0;
    std::vector<double> data_;
};

struct LossTag;

// Row i holds network i's loss vector for one sample.
using StackedLosses = RowTable<LossTag>;

/// Domination ranks. `rank[i]` is the front index of row i; `fronts[l]`
/// lists the rows of front l in ascending order.
struct FrontPartition {
    std::vector<std::size_t> rank;
    std::vector<std::vector<std::size_t>> fronts;
};

/// Weak Pareto dominance for minimization: a is no worse in every
/// objective and strictly better in at least one.
inline bool dominates(std::span<double const> a, std::span<double const> b) {
    require(a.size() == b.size(), "dominates: dimension mismatch");
    bool strictly_better = false;
    for (std::size_t j = 0; j < a.size(); ++j) {
        if (a[j] > b[j]) return false;
        if (a[j] < b[j]) strictly_better = true;
    }
    return strictly_better;
}

inline bool dominates(LossVector const& a, LossVector const& b) {
    return dominates(std::span<double const>(a), std::span<double const>(b));
}

/// Deb's fast non-dominated sort, O(p^2 n).
///
/// Duplicated rows never dominate each other and land in the same front.
template <class Tag>
FrontPartition non_dominated_sort(RowTable<Tag> const& points) {
    require(points.all_finite(), "non_dominated_sort: non-finite entry");
    std::size_t const p = points.size();
    FrontPartition out;
    out.rank.assign(p, 0);
    if (p == 0) return out;

    std::vector<std::vector<std::size_t>> dominated_by(p);
    std::vector<std::size_t> domination_count(p, 0);
    for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = a + 1; b < p; ++b) {
            if (dominates(points[a], points[b])) {
                dominated_by[a].push_back(b);
                ++domination_count[b];
            } else if (dominates(points[b], points[a])) {
                dominated_by[b].push_back(a);
                ++domination_count[a];
            }
        }
    }

    std::vector<std::size_t> current;
    for (std::size_t i = 0; i < p; ++i)
        if (domination_count[i] == 0) current.push_back(i);

    std::size_t level = 0;
    while (!current.empty()) {
        std::sort(current.begin(), current.end());
        std::vector<std::size_t> next;
        for (auto i : current) {
            out.rank[i] = level;
            for (auto j : dominated_by[i])
                if (--domination_count[j] == 0) next.push_back(j);
        }
        out.fronts.push_back(std::move(current));
        current = std::move(next);
        ++level;
    }
    return out;
}

/// Rows selected by `indices`, in that order.
template <class Tag>
RowTable<Tag> select_rows(RowTable<Tag> const& table, std::span<std::size_t const> indices) {
    RowTable<Tag> out(0, table.dims());
    for (auto i : indices) out.push_back(table[i]);
    return out;
}

} // namespace mohv
