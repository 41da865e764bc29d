#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rulsurv/common.hpp"
#include "rulsurv/stats.hpp"
#include "rulsurv/survival.hpp"

namespace rulsurv {

/// Time of the first crossing of S = 0.5. Step curves cross at the step;
/// linear curves interpolate between grid points (anchored at S(0) = 1).
/// A curve that never reaches 0.5 yields the last grid time.
inline double median_survival_time(const SurvivalCurve& curve) {
    require(!curve.times.empty(), "median_survival_time: empty curve");
    if (curve.interp == CurveInterp::Step) {
        for (std::size_t i = 0; i < curve.times.size(); ++i) {
            if (curve.probabilities[i] <= 0.5) return curve.times[i];
        }
        return curve.times.back();
    }
    double t0 = 0.0;
    double p0 = 1.0;
    for (std::size_t i = 0; i < curve.times.size(); ++i) {
        const double t1 = curve.times[i];
        const double p1 = curve.probabilities[i];
        if (p0 <= 0.5) return t0;  // already at or below the level
        if (p1 <= 0.5) {
            if (p0 == p1) return t1;
            return t0 + (p0 - 0.5) / (p0 - p1) * (t1 - t0);
        }
        t0 = t1;
        p0 = p1;
    }
    return curve.times.back();
}

/// Mean absolute error with a hinge for censored records: an uncensored
/// record contributes |t - that|, a censored one max(t - that, 0).
inline double mae_hinge(std::span<const double> predictions, std::span<const double> times,
                        const std::vector<bool>& events) {
    require(!predictions.empty(), "mae_hinge: empty input");
    require(predictions.size() == times.size() && times.size() == events.size(),
            "mae_hinge: size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        acc += events[i] ? std::abs(times[i] - predictions[i])
                         : std::max(times[i] - predictions[i], 0.0);
    }
    return acc / static_cast<double>(predictions.size());
}

namespace detail {

// Event-time point masses of a KM curve, with the mass the curve never
// releases assigned to the last event time.
struct KmMasses {
    std::vector<double> times;
    std::vector<double> masses;
};

inline KmMasses km_masses(const SurvivalCurve& km) {
    KmMasses out;
    double prev = 1.0;
    for (std::size_t i = 0; i < km.times.size(); ++i) {
        const double drop = prev - km.probabilities[i];
        if (drop > 0.0) {
            out.times.push_back(km.times[i]);
            out.masses.push_back(drop);
        }
        prev = km.probabilities[i];
    }
    if (prev > 0.0 && !out.times.empty()) out.masses.back() += prev;
    return out;
}

// Conditional expectation of the event time given survival past c, under the
// KM point masses. Falls back to c itself when no mass lies beyond it.
inline double margin_time(const KmMasses& km, double c) {
    double mass = 0.0;
    double weighted = 0.0;
    for (std::size_t i = 0; i < km.times.size(); ++i) {
        if (km.times[i] > c) {
            mass += km.masses[i];
            weighted += km.masses[i] * km.times[i];
        }
    }
    if (mass <= 0.0) return c;
    return weighted / mass;
}

}  // namespace detail

/// MAE with censored targets replaced by the KM margin time and confidence
/// weights w = 1 - S_km(t). Records censored before the first training event
/// get zero weight and are excluded.
inline double mae_margin(std::span<const double> predictions, std::span<const double> times,
                         const std::vector<bool>& events, const SurvivalCurve& train_km) {
    require(!predictions.empty(), "mae_margin: empty input");
    require(predictions.size() == times.size() && times.size() == events.size(),
            "mae_margin: size mismatch");

    const auto masses = detail::km_masses(train_km);
    double weight_sum = 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        double target = times[i];
        double weight = 1.0;
        if (!events[i]) {
            weight = 1.0 - train_km.eval(times[i]);
            if (weight <= 0.0) continue;
            target = detail::margin_time(masses, times[i]);
        }
        weight_sum += weight;
        acc += weight * std::abs(target - predictions[i]);
    }
    require(weight_sum > 0.0, "mae_margin: every record has zero weight");
    return acc / weight_sum;
}

/// Jackknife pseudo-values of the KM restricted mean lifetime, one per record:
/// pseudo_i = N * theta - (N - 1) * theta_without_i.
inline std::vector<double> pseudo_observations(std::span<const double> times,
                                               const std::vector<bool>& events) {
    const std::size_t n = times.size();
    require(n >= 2, "pseudo_observations: need at least two records");
    const double theta = km_restricted_mean(times, events);

    std::vector<double> out(n);
    std::vector<double> t_rest(n - 1);
    std::vector<bool> e_rest(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t k = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            t_rest[k] = times[j];
            e_rest[k] = events[j];
            ++k;
        }
        const double theta_minus = km_restricted_mean(t_rest, e_rest);
        out[i] = static_cast<double>(n) * theta - static_cast<double>(n - 1) * theta_minus;
    }
    return out;
}

/// MAE with censored targets replaced by their jackknife pseudo-observation
/// (computed over the evaluation set itself) and the same confidence weights
/// as the margin variant (taken from the training KM).
inline double mae_pseudo(std::span<const double> predictions, std::span<const double> times,
                         const std::vector<bool>& events, std::span<const double> train_times,
                         const std::vector<bool>& train_events) {
    require(predictions.size() == times.size() && times.size() == events.size(),
            "mae_pseudo: size mismatch");
    require(times.size() >= 2, "mae_pseudo: need at least two records");

    const SurvivalCurve train_km = km_fit(train_times, train_events);
    const bool any_censored = std::any_of(events.begin(), events.end(), [](bool e) { return !e; });
    std::vector<double> pseudo;
    if (any_censored) pseudo = pseudo_observations(times, events);

    double weight_sum = 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        double target = times[i];
        double weight = 1.0;
        if (!events[i]) {
            weight = 1.0 - train_km.eval(times[i]);
            if (weight <= 0.0) continue;
            target = pseudo[i];
        }
        weight_sum += weight;
        acc += weight * std::abs(target - predictions[i]);
    }
    require(weight_sum > 0.0, "mae_pseudo: every record has zero weight");
    return acc / weight_sum;
}

/// Plain MAE against the pre-censoring event times.
inline double true_mae(std::span<const double> predictions,
                       std::span<const double> uncensored_times) {
    require(!predictions.empty(), "true_mae: empty input");
    require(predictions.size() == uncensored_times.size(), "true_mae: size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        acc += std::abs(uncensored_times[i] - predictions[i]);
    }
    return acc / static_cast<double>(predictions.size());
}

/// Signed gap between the true MAE and a censoring-aware variant; positive
/// means the variant underestimates the true error.
inline double emae(double true_mae_value, double censored_variant) {
    return true_mae_value - censored_variant;
}

struct DCalibration {
    double p_value = 0.0;
    std::array<std::size_t, 10> decile_counts{};
    double chi_square = 0.0;

    bool calibrated() const { return p_value > 0.05; }
};

/// Distribution calibration: S_i(t_i) over the uncensored records should be
/// uniform on [0, 1]. Pearson chi-square against equal deciles, 9 dof.
inline DCalibration d_calibration(const std::vector<SurvivalCurve>& curves,
                                  std::span<const double> times, const std::vector<bool>& events) {
    require(curves.size() == times.size() && times.size() == events.size(),
            "d_calibration: size mismatch");
    std::size_t n_uncensored = 0;
    for (bool e : events) n_uncensored += e ? 1 : 0;
    require(n_uncensored >= 10,
            "d_calibration: need at least 10 uncensored records, got " +
                std::to_string(n_uncensored));

    DCalibration result;
    for (std::size_t i = 0; i < curves.size(); ++i) {
        if (!events[i]) continue;
        const double p = curves[i].eval(times[i]);
        auto decile = static_cast<std::size_t>(p * 10.0);
        if (decile > 9) decile = 9;  // p == 1 falls in the top decile
        ++result.decile_counts[decile];
    }

    const double expected = static_cast<double>(n_uncensored) / 10.0;
    double chi2 = 0.0;
    for (std::size_t d = 0; d < 10; ++d) {
        const double diff = static_cast<double>(result.decile_counts[d]) - expected;
        chi2 += diff * diff / expected;
    }
    result.chi_square = chi2;
    result.p_value = chi_square_upper_tail(chi2, 9);
    return result;
}

/// Cumulative relative accuracy over K inspection windows:
///   RA(k) = 1 - |actual - predicted| / actual,  w_k = k / sum(k),
///   CRA = sum w_k RA(k).
/// The literal form with a leading K factor is available behind the flag;
/// it scales perfect predictions to K rather than 1.
inline double cra(std::span<const double> rul_predictions, std::span<const double> actual_ruls,
                  bool multiply_by_k = false) {
    const std::size_t k = rul_predictions.size();
    require(k >= 1, "cra: need at least one inspection window");
    require(actual_ruls.size() == k, "cra: size mismatch");

    double weight_norm = 0.0;
    for (std::size_t i = 1; i <= k; ++i) weight_norm += static_cast<double>(i);

    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        require(actual_ruls[i] > 0.0, "cra: actual RUL must be positive at every window");
        const double ra = 1.0 - std::abs(actual_ruls[i] - rul_predictions[i]) / actual_ruls[i];
        acc += static_cast<double>(i + 1) / weight_norm * ra;
    }
    return multiply_by_k ? static_cast<double>(k) * acc : acc;
}

struct StratifiedCurves {
    SurvivalCurve mean;
    SurvivalCurve below;  // records with covariate <= the quantile value
    SurvivalCurve above;
};

/// Pointwise mean of a set of curves sharing one grid.
inline SurvivalCurve mean_curve(const std::vector<SurvivalCurve>& curves) {
    require(!curves.empty(), "mean_curve: no curves");
    SurvivalCurve out = curves.front();
    for (std::size_t c = 1; c < curves.size(); ++c) {
        require(curves[c].times == out.times, "mean_curve: grids differ");
        for (std::size_t i = 0; i < out.probabilities.size(); ++i) {
            out.probabilities[i] += curves[c].probabilities[i];
        }
    }
    for (double& p : out.probabilities) p /= static_cast<double>(curves.size());
    return out;
}

/// Splits records at a covariate quantile and averages the predicted curves
/// of each side plus the whole set. `predict` must put every curve on one
/// shared grid.
inline StratifiedCurves stratified_curves(
    const std::function<SurvivalCurve(std::span<const double>)>& predict,
    const std::vector<std::vector<double>>& features, std::size_t covariate_index,
    double quantile_level) {
    require(!features.empty(), "stratified_curves: empty test set");
    require(quantile_level > 0.0 && quantile_level < 1.0,
            "stratified_curves: quantile must lie in (0, 1)");

    std::vector<double> values;
    values.reserve(features.size());
    for (const auto& row : features) {
        require(covariate_index < row.size(), "stratified_curves: covariate index out of range");
        values.push_back(row[covariate_index]);
    }
    const double cut = quantile(values, quantile_level);

    std::vector<SurvivalCurve> all;
    std::vector<SurvivalCurve> below;
    std::vector<SurvivalCurve> above;
    for (const auto& row : features) {
        SurvivalCurve curve = predict(row);
        (row[covariate_index] <= cut ? below : above).push_back(curve);
        all.push_back(std::move(curve));
    }
    require(!below.empty() && !above.empty(),
            "stratified_curves: a stratum is empty at quantile " +
                std::to_string(quantile_level));

    StratifiedCurves out;
    out.mean = mean_curve(all);
    out.below = mean_curve(below);
    out.above = mean_curve(above);
    return out;
}

}  // namespace rulsurv
