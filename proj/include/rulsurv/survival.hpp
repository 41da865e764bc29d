#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "rulsurv/common.hpp"
#include "rulsurv/stats.hpp"

namespace rulsurv {

/// How a discrete survival curve is read between its grid points.
enum class CurveInterp {
    Step,    // right-continuous step function (Kaplan-Meier style)
    Linear,  // piecewise linear between grid points, anchored at S(0) = 1
};

/// Discrete monotone non-increasing survival function S(t) over a time grid.
struct SurvivalCurve {
    std::vector<double> times;          // strictly increasing
    std::vector<double> probabilities;  // in [0, 1], non-increasing
    CurveInterp interp = CurveInterp::Step;

    bool valid() const {
        if (times.size() != probabilities.size() || times.empty()) return false;
        for (std::size_t i = 0; i < times.size(); ++i) {
            const double p = probabilities[i];
            if (!(p >= 0.0 && p <= 1.0)) return false;
            if (i > 0 && !(times[i] > times[i - 1])) return false;
            if (i > 0 && p > probabilities[i - 1]) return false;
        }
        return true;
    }

    /// S(t). Before the first grid point the curve is 1 (step) or the linear
    /// ramp from the implicit anchor (0, 1); past the last point it is flat.
    double eval(double t) const {
        require(!times.empty(), "SurvivalCurve::eval: empty curve");
        if (interp == CurveInterp::Step) {
            if (t < times.front()) return 1.0;
            const auto it = std::upper_bound(times.begin(), times.end(), t);
            const auto idx = static_cast<std::size_t>(std::distance(times.begin(), it)) - 1;
            return probabilities[idx];
        }
        if (t <= 0.0) return 1.0;
        if (t >= times.back()) return probabilities.back();
        double t0 = 0.0;
        double p0 = 1.0;
        for (std::size_t i = 0; i < times.size(); ++i) {
            if (t <= times[i]) {
                const double span = times[i] - t0;
                if (span <= 0.0) return probabilities[i];
                const double frac = (t - t0) / span;
                return p0 + (probabilities[i] - p0) * frac;
            }
            t0 = times[i];
            p0 = probabilities[i];
        }
        return probabilities.back();
    }
};

enum class GridKind { Continuous, Discrete };

/// Event-horizon grid: either every unique observed time (continuous models)
/// or floor(sqrt(#uncensored)) quantile bins of the uncensored times.
struct TimeGrid {
    std::vector<double> points;  // continuous: unique times; discrete: interior bin boundaries
    GridKind kind = GridKind::Continuous;

    std::size_t n_bins() const {
        return kind == GridKind::Discrete ? points.size() + 1 : points.size();
    }
};

inline TimeGrid time_grid(std::span<const double> times, const std::vector<bool>& events,
                          GridKind kind) {
    require(!times.empty(), "time_grid: empty training set");
    require(times.size() == events.size(), "time_grid: times/events size mismatch");

    TimeGrid grid;
    grid.kind = kind;
    if (kind == GridKind::Continuous) {
        grid.points.assign(times.begin(), times.end());
        std::sort(grid.points.begin(), grid.points.end());
        grid.points.erase(std::unique(grid.points.begin(), grid.points.end()),
                          grid.points.end());
        return grid;
    }

    std::vector<double> uncensored;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (events[i]) uncensored.push_back(times[i]);
    }
    const auto k = static_cast<std::size_t>(std::floor(std::sqrt(
        static_cast<double>(uncensored.size()))));
    require(k >= 1, "time_grid: no uncensored observations");
    for (std::size_t i = 1; i < k; ++i) {
        grid.points.push_back(quantile(uncensored, static_cast<double>(i) / static_cast<double>(k)));
    }
    // duplicate quantiles collapse; the grid must stay strictly increasing
    grid.points.erase(std::unique(grid.points.begin(), grid.points.end()), grid.points.end());
    return grid;
}

/// Kaplan-Meier product-limit estimate. Censored records leave the risk set
/// without contributing a step. All-censored input gives S identically 1.
inline SurvivalCurve km_fit(std::span<const double> times, const std::vector<bool>& events) {
    require(!times.empty(), "km_fit: empty input");
    require(times.size() == events.size(), "km_fit: times/events size mismatch");

    // events and risk-set exits per distinct time
    std::map<double, std::pair<std::size_t, std::size_t>> counts;  // time -> (deaths, total)
    for (std::size_t i = 0; i < times.size(); ++i) {
        auto& c = counts[times[i]];
        if (events[i]) ++c.first;
        ++c.second;
    }

    SurvivalCurve curve;
    curve.interp = CurveInterp::Step;
    double at_risk = static_cast<double>(times.size());
    double s = 1.0;
    for (const auto& [t, c] : counts) {
        const auto [deaths, total] = c;
        if (deaths > 0) {
            s *= 1.0 - static_cast<double>(deaths) / at_risk;
            curve.times.push_back(t);
            curve.probabilities.push_back(s);
        }
        at_risk -= static_cast<double>(total);
    }
    if (curve.times.empty()) {
        curve.times.push_back(*std::max_element(times.begin(), times.end()));
        curve.probabilities.push_back(1.0);
    }
    return curve;
}

/// Best/worst-case envelopes around the Kaplan-Meier estimate. The upper
/// bound treats every censored record as never failing; the lower bound
/// converts each censoring into an immediate event.
inline std::pair<SurvivalCurve, SurvivalCurve> km_bounds(std::span<const double> times,
                                                         const std::vector<bool>& events) {
    require(!times.empty(), "km_bounds: empty input");
    require(times.size() == events.size(), "km_bounds: times/events size mismatch");

    const double horizon = *std::max_element(times.begin(), times.end());
    std::vector<double> upper_times(times.begin(), times.end());
    std::vector<bool> lower_events(times.size(), true);
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!events[i]) upper_times[i] = horizon + 1.0;  // beyond every event time
    }
    SurvivalCurve upper = km_fit(upper_times, events);
    SurvivalCurve lower = km_fit(times, lower_events);
    return {std::move(upper), std::move(lower)};
}

/// Restricted mean lifetime: the area under the KM curve from 0 to the
/// largest observed time.
inline double km_restricted_mean(std::span<const double> times, const std::vector<bool>& events) {
    const SurvivalCurve km = km_fit(times, events);
    const double horizon = *std::max_element(times.begin(), times.end());
    double area = 0.0;
    double prev_t = 0.0;
    double prev_s = 1.0;
    for (std::size_t i = 0; i < km.times.size() && km.times[i] <= horizon; ++i) {
        area += prev_s * (km.times[i] - prev_t);
        prev_t = km.times[i];
        prev_s = km.probabilities[i];
    }
    area += prev_s * (horizon - prev_t);
    return area;
}

}  // namespace rulsurv
