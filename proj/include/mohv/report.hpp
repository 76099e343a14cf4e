#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mohv/config.hpp"
#include "mohv/problems.hpp"
#include "mohv/trainer.hpp"

namespace mohv {

// Network i is drawn with palette[i % 8].
inline constexpr std::array<char const*, 8> palette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

namespace detail {

inline std::string fmt(double v, int digits = 3) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

struct Panel {
    std::size_t x_axis, y_axis;
    double x_lo, x_hi, y_lo, y_hi;
};

constexpr double panel_size = 420.0;
constexpr double margin = 56.0;

inline void draw_panel(std::ostream& os, Panel const& pn, double offset_x, std::span<StackedLosses const> markers,
                       std::span<StackedLosses const> fronts) {
    double const plot = panel_size - 2.0 * margin;
    auto sx = [&](double v) { return offset_x + margin + (v - pn.x_lo) / (pn.x_hi - pn.x_lo) * plot; };
    auto sy = [&](double v) { return panel_size - margin - (v - pn.y_lo) / (pn.y_hi - pn.y_lo) * plot; };

    os << "<g>\n";
    os << "<rect x=\"" << fmt(offset_x + margin) << "\" y=\"" << fmt(margin) << "\" width=\"" << fmt(plot)
       << "\" height=\"" << fmt(plot) << "\" fill=\"none\" stroke=\"#000\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        double const fx = pn.x_lo + (pn.x_hi - pn.x_lo) * t / 4.0;
        double const fy = pn.y_lo + (pn.y_hi - pn.y_lo) * t / 4.0;
        os << "<line x1=\"" << fmt(sx(fx)) << "\" y1=\"" << fmt(panel_size - margin) << "\" x2=\"" << fmt(sx(fx))
           << "\" y2=\"" << fmt(panel_size - margin + 5) << "\" stroke=\"#000\"/>\n";
        os << "<text x=\"" << fmt(sx(fx)) << "\" y=\"" << fmt(panel_size - margin + 18)
           << "\" text-anchor=\"middle\">" << fmt(fx, 3) << "</text>\n";
        os << "<line x1=\"" << fmt(offset_x + margin - 5) << "\" y1=\"" << fmt(sy(fy)) << "\" x2=\""
           << fmt(offset_x + margin) << "\" y2=\"" << fmt(sy(fy)) << "\" stroke=\"#000\"/>\n";
        os << "<text x=\"" << fmt(offset_x + margin - 8) << "\" y=\"" << fmt(sy(fy) + 4)
           << "\" text-anchor=\"end\">" << fmt(fy, 3) << "</text>\n";
    }
    os << "<text x=\"" << fmt(offset_x + panel_size / 2) << "\" y=\"" << fmt(panel_size - 12)
       << "\" text-anchor=\"middle\">L" << pn.x_axis + 1 << "</text>\n";
    os << "<text x=\"" << fmt(offset_x + 16) << "\" y=\"" << fmt(panel_size / 2)
       << "\" text-anchor=\"middle\" transform=\"rotate(-90 " << fmt(offset_x + 16) << ' ' << fmt(panel_size / 2)
       << ")\">L" << pn.y_axis + 1 << "</text>\n";

    for (auto const& front : fronts) {
        os << "<polyline fill=\"none\" stroke=\"#888\" stroke-dasharray=\"4 3\" points=\"";
        for (std::size_t r = 0; r < front.size(); ++r)
            os << (r ? " " : "") << fmt(sx(front(r, pn.x_axis))) << ',' << fmt(sy(front(r, pn.y_axis)));
        os << "\"/>\n";
    }
    for (auto const& block : markers)
        for (std::size_t i = 0; i < block.size(); ++i)
            os << "<circle cx=\"" << fmt(sx(block(i, pn.x_axis))) << "\" cy=\"" << fmt(sy(block(i, pn.y_axis)))
               << "\" r=\"4\" fill=\"" << palette[i % palette.size()] << "\"/>\n";
    os << "</g>\n";
}

} // namespace detail

/// Loss-space scatter of the final network losses on the selected validation
/// samples. Two objectives give one panel; three give the pairwise
/// projections (L1,L2), (L1,L3), (L2,L3) side by side.
inline std::string emit_front_plot(std::span<StackedLosses const> final_losses, PlotSpec const& spec,
                                   ProblemSpec const& problem, std::span<Sample const> validation) {
    std::size_t const n = problem.objectives();
    require(final_losses.size() == validation.size(), "emit_front_plot: losses and samples differ in count");
    require(spec.range.empty() || spec.range.size() == 4, "emit_front_plot: range needs four values");

    std::vector<StackedLosses> markers;
    std::vector<StackedLosses> fronts;
    for (auto id : spec.samples) {
        auto const it = std::find_if(validation.begin(), validation.end(), [&](Sample const& s) { return s.id == id; });
        require(it != validation.end(), "emit_front_plot: sample id " + std::to_string(id) + " is not in the validation set");
        markers.push_back(final_losses[static_cast<std::size_t>(it - validation.begin())]);
        if (spec.overlay_front) fronts.push_back(true_front_oracle(*it, problem, std::max<std::size_t>(2, spec.front_resolution)));
    }

    std::vector<std::pair<std::size_t, std::size_t>> pairs{{0, 1}};
    if (n == 3) pairs = {{0, 1}, {0, 2}, {1, 2}};

    auto axis_max = [&](std::size_t j) {
        double m = 0.0;
        for (auto const* set : {&markers, &fronts})
            for (auto const& block : *set)
                for (std::size_t r = 0; r < block.size(); ++r) m = std::max(m, block(r, j));
        return m > 0.0 ? m * 1.05 : 1.0;
    };

    std::ostringstream os;
    double const width = detail::panel_size * static_cast<double>(pairs.size());
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::fmt(width, 0) << "\" height=\""
       << detail::fmt(detail::panel_size, 0) << "\" viewBox=\"0 0 " << detail::fmt(width, 0) << ' '
       << detail::fmt(detail::panel_size, 0) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        auto const [a, b] = pairs[k];
        detail::Panel pn{a, b, 0.0, axis_max(a), 0.0, axis_max(b)};
        if (!spec.range.empty() && n == 2) {
            pn.x_lo = spec.range[0];
            pn.x_hi = spec.range[1];
            pn.y_lo = spec.range[2];
            pn.y_hi = spec.range[3];
            require(pn.x_hi > pn.x_lo && pn.y_hi > pn.y_lo, "emit_front_plot: empty axis range");
        }
        detail::draw_panel(os, pn, detail::panel_size * static_cast<double>(k), markers, fronts);
    }
    os << "</svg>\n";
    return os.str();
}

inline std::string emit_front_plot(RunRecord const& record, PlotSpec const& spec, ProblemSpec const& problem,
                                   std::span<Sample const> validation) {
    return emit_front_plot(std::span<StackedLosses const>(record.final_losses), spec, problem, validation);
}

/// Linear-interpolation quantile of `values` (q in [0, 1]).
inline double quantile(std::vector<double> values, double q) {
    require(!values.empty(), "quantile: empty input");
    std::sort(values.begin(), values.end());
    double const pos = q * static_cast<double>(values.size() - 1);
    auto const lo = static_cast<std::size_t>(pos);
    auto const hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

struct SummaryRow {
    std::string method;
    std::vector<double> final_hv; // one per seed
    double runtime_seconds = 0.0;
};

inline constexpr char const* summary_header = "method,seeds,median_hv,iqr_low,iqr_high,runtime_seconds";

/// One row per method. With a single seed the IQR columns stay empty.
inline void write_summary_csv(std::ostream& os, std::span<SummaryRow const> rows) {
    os << summary_header << '\n';
    for (auto const& r : rows) {
        os << r.method << ',' << r.final_hv.size() << ',';
        if (r.final_hv.empty()) {
            os << ",,,";
        } else {
            os << detail::format_double(quantile(r.final_hv, 0.5)) << ',';
            if (r.final_hv.size() > 1)
                os << detail::format_double(quantile(r.final_hv, 0.25)) << ','
                   << detail::format_double(quantile(r.final_hv, 0.75)) << ',';
            else
                os << ",,";
        }
        os << detail::fmt(r.runtime_seconds, 3) << '\n';
    }
}

inline nlohmann::json to_json(EvalPoint const& e) {
    return {{"iteration", e.iteration},
            {"mean_hv", e.mean_hv},
            {"sample_hv", e.sample_hv},
            {"network_mean_loss", e.network_mean_loss}};
}

/// One JSON object per evaluation step.
inline void write_records_jsonl(std::ostream& os, RunRecord const& record) {
    for (auto const& e : record.evals) os << to_json(e).dump() << '\n';
}

inline nlohmann::json run_summary_json(RunRecord const& record, std::string const& method) {
    nlohmann::json losses = nlohmann::json::array();
    for (auto const& block : record.final_losses) {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t i = 0; i < block.size(); ++i) rows.push_back(block.row_vector(i));
        losses.push_back(std::move(rows));
    }
    return {{"method", method},
            {"seeds",
             {{"master", record.seeds.master},
              {"data", record.seeds.data},
              {"shuffle", record.seeds.shuffle},
              {"init", record.seeds.init}}},
            {"evaluations", record.evals.size()},
            {"final_iteration", record.evals.empty() ? 0 : record.evals.back().iteration},
            {"final_mean_hv", record.final_mean_hv()},
            {"ordering_consistency", record.ordering_consistency},
            {"outside_reference_events", record.outside_reference_events},
            {"final_losses", std::move(losses)}};
}

/// Final per-sample losses stored by run_summary_json.
inline std::vector<StackedLosses> final_losses_from_json(nlohmann::json const& summary) {
    std::vector<StackedLosses> out;
    for (auto const& block : summary.at("final_losses"))
        out.emplace_back(block.get<std::vector<std::vector<double>>>());
    return out;
}

} // namespace mohv
