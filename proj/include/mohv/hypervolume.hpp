#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "mohv/errors.hpp"
#include "mohv/pareto.hpp"

namespace mohv {

/// Upper bounds of the region of interest in loss space. Every coordinate
/// must be finite and strictly positive.
class ReferencePoint {
public:
    ReferencePoint() = default;

    explicit ReferencePoint(std::vector<double> coords) : coords_(std::move(coords)) {
        for (double c : coords_)
            require(std::isfinite(c) && c > 0.0, "reference point coordinates must be finite and > 0");
    }

    ReferencePoint(std::initializer_list<double> coords) : ReferencePoint(std::vector<double>(coords)) {}

    [[nodiscard]] std::size_t size() const noexcept { return coords_.size(); }
    double operator[](std::size_t j) const { return coords_[j]; }
    [[nodiscard]] std::span<double const> coords() const noexcept { return coords_; }

    // Largest attainable hypervolume: the box spanned by the origin and the reference point.
    [[nodiscard]] double volume() const {
        double v = 1.0;
        for (double c : coords_) v *= c;
        return v;
    }

    friend bool operator==(ReferencePoint const&, ReferencePoint const&) = default;

private:
    std::vector<double> coords_;
};

struct GradientTag;

/// Per-point HV sensitivity magnitudes, i.e. -dHV/dL_j (all entries >= 0).
struct HvGradient {
    RowTable<GradientTag> per_point;
    // Rows that sat on or beyond the reference box and got the uniform fallback.
    std::size_t outside_reference = 0;
};

namespace detail {

using Point2 = std::array<double, 2>;

inline void check_dims(std::size_t n) {
    if (n != 2 && n != 3) throw UnsupportedDimension(n);
}

inline bool inside(std::span<double const> point, ReferencePoint const& ref) {
    for (std::size_t j = 0; j < point.size(); ++j)
        if (!(point[j] < ref[j])) return false;
    return true;
}

// Area dominated by `pts` inside [.., rx] x [.., ry]. Points must lie strictly
// below the reference in both coordinates. Sort then sweep.
inline double area_2d(std::vector<Point2> pts, double rx, double ry) {
    std::sort(pts.begin(), pts.end());
    double area = 0.0;
    double level = ry;
    for (auto const& q : pts) {
        if (q[1] < level) {
            area += (rx - q[0]) * (level - q[1]);
            level = q[1];
        }
    }
    return area;
}

inline double volume_3d(std::vector<std::array<double, 3>> pts, ReferencePoint const& ref) {
    std::sort(pts.begin(), pts.end(), [](auto const& a, auto const& b) { return a[2] < b[2]; });
    std::vector<Point2> slab;
    slab.reserve(pts.size());
    double volume = 0.0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
        slab.push_back({pts[k][0], pts[k][1]});
        double const top = (k + 1 < pts.size()) ? pts[k + 1][2] : ref[2];
        double const height = top - pts[k][2];
        if (height > 0.0) volume += area_2d(slab, ref[0], ref[1]) * height;
    }
    return volume;
}

} // namespace detail

/// Hypervolume of the union of the boxes [point, ref]. Points that are not
/// strictly inside the reference box contribute nothing.
template <class Tag>
double hv(RowTable<Tag> const& points, ReferencePoint const& ref) {
    std::size_t const n = points.empty() ? ref.size() : points.dims();
    detail::check_dims(n);
    require(ref.size() == n, "hv: reference dimension mismatch");
    require(points.all_finite(), "hv: non-finite point");

    if (n == 2) {
        std::vector<detail::Point2> pts;
        for (std::size_t i = 0; i < points.size(); ++i)
            if (detail::inside(points[i], ref)) pts.push_back({points(i, 0), points(i, 1)});
        return detail::area_2d(std::move(pts), ref[0], ref[1]);
    }
    std::vector<std::array<double, 3>> pts;
    for (std::size_t i = 0; i < points.size(); ++i)
        if (detail::inside(points[i], ref)) pts.push_back({points(i, 0), points(i, 1), points(i, 2)});
    return detail::volume_3d(std::move(pts), ref);
}

/// Magnitude of the HV gradient for every point of a mutually non-dominated set.
///
/// Entry (i, j) is the measure of the face of point i's box orthogonal to
/// axis j that no other box covers, which equals -dHV/dL_ij.
///
/// Tie handling:
///  - identical rows are collapsed and receive identical gradients;
///  - a point sharing a coordinate value with a different point has a
///    one-sided derivative there; its row is set to zero;
///  - a point not strictly inside the reference box gets (1/sqrt(n), ...)
///    so it is still pulled back towards the region of interest.
template <class Tag>
HvGradient hv_gradient(RowTable<Tag> const& points, ReferencePoint const& ref) {
    std::size_t const p = points.size();
    std::size_t const n = p ? points.dims() : ref.size();
    detail::check_dims(n);
    require(ref.size() == n, "hv_gradient: reference dimension mismatch");
    require(points.all_finite(), "hv_gradient: non-finite point");

    HvGradient out{RowTable<GradientTag>(p, n), 0};
    if (p == 0) return out;

    for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = 0; b < p; ++b)
            if (a != b && dominates(points[a], points[b]))
                throw ContractViolation("hv_gradient: input contains a dominated point");

    // Collapse exact duplicates among the points inside the reference box.
    std::vector<std::size_t> representative(p, p);
    std::vector<std::size_t> unique;
    for (std::size_t i = 0; i < p; ++i) {
        if (!detail::inside(points[i], ref)) {
            double const u = 1.0 / std::sqrt(static_cast<double>(n));
            for (std::size_t j = 0; j < n; ++j) out.per_point(i, j) = u;
            ++out.outside_reference;
            continue;
        }
        for (auto u : unique) {
            if (std::equal(points[i].begin(), points[i].end(), points[u].begin())) {
                representative[i] = u;
                break;
            }
        }
        if (representative[i] == p) {
            representative[i] = i;
            unique.push_back(i);
        }
    }

    std::vector<bool> tied(p, false);
    for (auto a : unique)
        for (auto b : unique)
            if (a != b)
                for (std::size_t j = 0; j < n; ++j)
                    if (points(a, j) == points(b, j)) tied[a] = true;

    if (n == 2) {
        // Ascending L1 means descending L2 for mutually non-dominated points.
        std::vector<std::size_t> order = unique;
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return points(a, 0) < points(b, 0); });
        for (std::size_t m = 0; m < order.size(); ++m) {
            auto const i = order[m];
            if (tied[i]) continue;
            double const prev_l2 = m == 0 ? ref[1] : points(order[m - 1], 1);
            double const next_l1 = m + 1 == order.size() ? ref[0] : points(order[m + 1], 0);
            out.per_point(i, 0) = prev_l2 - points(i, 1);
            out.per_point(i, 1) = next_l1 - points(i, 0);
        }
    } else {
        for (auto i : unique) {
            if (tied[i]) continue;
            for (std::size_t j = 0; j < 3; ++j) {
                std::size_t const k = (j + 1) % 3;
                std::size_t const l = (j + 2) % 3;
                // Boxes of points below i along axis j, clipped to i's face.
                std::vector<detail::Point2> covering;
                for (auto q : unique) {
                    if (q == i || !(points(q, j) < points(i, j))) continue;
                    covering.push_back({std::max(points(q, k), points(i, k)), std::max(points(q, l), points(i, l))});
                }
                double const face = (ref[k] - points(i, k)) * (ref[l] - points(i, l));
                double const covered = detail::area_2d(std::move(covering), ref[k], ref[l]);
                out.per_point(i, j) = std::max(0.0, face - covered);
            }
        }
    }

    for (std::size_t i = 0; i < p; ++i) {
        auto const r = representative[i];
        if (r == p || r == i) continue;
        for (std::size_t j = 0; j < n; ++j) out.per_point(i, j) = out.per_point(r, j);
    }
    return out;
}

} // namespace mohv
