#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "rulsurv/common.hpp"
#include "rulsurv/rng.hpp"
#include "rulsurv/survival.hpp"

namespace rulsurv {

struct MtlrConfig {
    std::size_t hidden_size = 0;   // 0 = linear model
    double learning_rate = 8e-5;
    std::size_t epochs = 5000;
    double penalty = 0.01;         // L2 on weight matrices
    double dropout = 0.25;         // hidden layer only, training only
    std::size_t batch_size = 0;    // 0 = full batch
    bool early_stopping = false;   // hold out 30% of training as validation
    std::size_t patience = 100;
    std::uint64_t seed = 0;
};

/// Discrete-time survival model over K quantile bins. The event horizon is
/// cut at the K-1 interior quantiles of the uncensored training times; a
/// record's outcome is the bin containing its time, and the model scores the
/// K monotone outcome sequences with one logistic unit per boundary.
struct MtlrModel {
    std::vector<double> boundaries;      // K-1 interior bin boundaries, ascending
    std::vector<std::vector<double>> w;  // (K-1) x rep_dim boundary-unit weights
    std::vector<double> b;               // K-1 biases
    // optional ReLU representation layer
    std::vector<std::vector<double>> hidden_w;  // hidden_size x d
    std::vector<double> hidden_b;
    std::size_t dimension = 0;

    std::size_t n_bins() const { return boundaries.size() + 1; }
    bool has_hidden() const { return !hidden_w.empty(); }
};

namespace detail {

// Hidden-layer activation (no dropout), or the input itself for linear models.
inline std::vector<double> mtlr_representation(const MtlrModel& model,
                                               std::span<const double> x) {
    if (!model.has_hidden()) return {x.begin(), x.end()};
    std::vector<double> h(model.hidden_w.size());
    for (std::size_t j = 0; j < h.size(); ++j) {
        double s = model.hidden_b[j];
        for (std::size_t k = 0; k < x.size(); ++k) s += model.hidden_w[j][k] * x[k];
        h[j] = std::max(s, 0.0);
    }
    return h;
}

// Outcome probabilities over the K bins from the K-1 boundary activations:
// P(j) ~ exp(sum_{k >= j} a_k); the last bin's score is the empty sum.
inline std::vector<double> mtlr_bin_probs_from_activations(std::span<const double> a) {
    std::vector<double> scores(a.size() + 1, 0.0);
    double suffix = 0.0;
    for (std::size_t j = a.size(); j-- > 0;) {
        suffix += a[j];
        scores[j] = suffix;
    }
    const double max_score = *std::max_element(scores.begin(), scores.end());
    double norm = 0.0;
    for (double& s : scores) {
        s = std::exp(s - max_score);
        norm += s;
    }
    for (double& s : scores) s /= norm;
    return scores;
}

// Index of the bin containing time t under the (tau_{j-1}, tau_j] convention.
inline std::size_t mtlr_bin_of(const std::vector<double>& boundaries, double t) {
    const auto it = std::lower_bound(boundaries.begin(), boundaries.end(), t);
    return static_cast<std::size_t>(std::distance(boundaries.begin(), it));
}

}  // namespace detail

/// Probability mass over the K bins for one input.
inline std::vector<double> mtlr_bin_probabilities(const MtlrModel& model,
                                                  std::span<const double> x) {
    require(x.size() == model.dimension, "mtlr: feature dimension mismatch (expected " +
                                             std::to_string(model.dimension) + ", got " +
                                             std::to_string(x.size()) + ")");
    const auto rep = detail::mtlr_representation(model, x);
    std::vector<double> a(model.b.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
        double s = model.b[j];
        for (std::size_t k = 0; k < rep.size(); ++k) s += model.w[j][k] * rep[k];
        a[j] = s;
    }
    return detail::mtlr_bin_probs_from_activations(a);
}

/// Survival curve on the interior boundaries: S(tau_m) = P(outcome beyond m).
/// Non-increasing by construction (each step removes one bin's mass).
inline SurvivalCurve mtlr_predict(const MtlrModel& model, std::span<const double> x) {
    const auto probs = mtlr_bin_probabilities(model, x);
    SurvivalCurve curve;
    curve.interp = CurveInterp::Linear;
    if (model.boundaries.empty()) {
        // single-bin model carries no timing information
        curve.times = {1.0};
        curve.probabilities = {0.0};
        return curve;
    }
    curve.times = model.boundaries;
    curve.probabilities.resize(model.boundaries.size());
    double tail = 1.0;
    for (std::size_t m = 0; m < model.boundaries.size(); ++m) {
        tail -= probs[m];
        curve.probabilities[m] = std::clamp(tail, 0.0, 1.0);
    }
    for (std::size_t m = 1; m < curve.probabilities.size(); ++m) {
        curve.probabilities[m] = std::min(curve.probabilities[m], curve.probabilities[m - 1]);
    }
    return curve;
}

/// Fits MTLR by Adam on the penalized log-likelihood. Censored records
/// marginalize over every outcome bin at or after the bin containing the
/// censoring time. K = floor(sqrt(#uncensored)).
inline MtlrModel mtlr_fit(const std::vector<std::vector<double>>& x,
                          std::span<const double> times, const std::vector<bool>& events,
                          const MtlrConfig& config = {}) {
    const std::size_t n = x.size();
    require(n > 0 && times.size() == n && events.size() == n, "mtlr_fit: shape mismatch");
    const std::size_t dim = x[0].size();

    bool any_event = false;
    for (std::size_t i = 0; i < n; ++i) any_event = any_event || events[i];
    require(any_event, "mtlr_fit: no uncensored records (K = 0)");

    MtlrModel model;
    model.dimension = dim;
    model.boundaries = time_grid(times, events, GridKind::Discrete).points;
    const std::size_t n_units = model.boundaries.size();
    const bool hidden = config.hidden_size > 0;
    const std::size_t rep_dim = hidden ? config.hidden_size : dim;

    Rng rng(config.seed);
    model.w.assign(n_units, std::vector<double>(rep_dim, 0.0));
    model.b.assign(n_units, 0.0);
    if (hidden) {
        model.hidden_w.assign(config.hidden_size, std::vector<double>(dim));
        model.hidden_b.assign(config.hidden_size, 0.0);
        const double scale = std::sqrt(2.0 / static_cast<double>(dim));
        for (auto& row : model.hidden_w) {
            for (double& v : row) v = scale * rng.normal();
        }
    }
    if (n_units == 0) return model;  // K = 1: nothing to learn

    std::vector<std::size_t> first_bin(n);
    for (std::size_t i = 0; i < n; ++i) {
        first_bin[i] = detail::mtlr_bin_of(model.boundaries, times[i]);
    }

    // d(log-likelihood)/d a_k = q_k - F_k, with F the outcome CDF and q the
    // CDF restricted to the bins consistent with the record
    auto loglik_and_delta = [&](std::size_t i, std::span<const double> a,
                                std::vector<double>& delta) -> double {
        const auto probs = detail::mtlr_bin_probs_from_activations(a);
        const std::size_t start = first_bin[i];
        double mass = 0.0;
        if (events[i]) {
            mass = probs[start];
        } else {
            for (std::size_t j = start; j < probs.size(); ++j) mass += probs[j];
        }
        mass = std::max(mass, 1e-300);

        double cdf = 0.0;
        double cdf_consistent = 0.0;
        for (std::size_t k = 0; k < n_units; ++k) {
            cdf += probs[k];
            if (events[i]) {
                cdf_consistent = start <= k ? 1.0 : 0.0;
            } else if (k >= start) {
                cdf_consistent += probs[k] / mass;
            }
            delta[k] = cdf_consistent - cdf;
        }
        return std::log(mass);
    };

    auto activations = [&](std::span<const double> rep, std::vector<double>& a) {
        for (std::size_t j = 0; j < n_units; ++j) {
            double s = model.b[j];
            for (std::size_t k = 0; k < rep.size(); ++k) s += model.w[j][k] * rep[k];
            a[j] = s;
        }
    };

    auto mean_nll = [&](const std::vector<std::size_t>& idx) -> double {
        double loss = 0.0;
        std::vector<double> a(n_units);
        std::vector<double> delta(n_units);
        for (std::size_t i : idx) {
            const auto rep = detail::mtlr_representation(model, x[i]);
            activations(rep, a);
            loss -= loglik_and_delta(i, a, delta);
        }
        return loss / static_cast<double>(idx.size());
    };

    std::vector<std::size_t> train_idx(n);
    std::iota(train_idx.begin(), train_idx.end(), std::size_t{0});
    std::vector<std::size_t> val_idx;
    if (config.early_stopping && n >= 10) {
        rng.shuffle(train_idx);
        const std::size_t n_val = n * 3 / 10;
        val_idx.assign(train_idx.end() - static_cast<std::ptrdiff_t>(n_val), train_idx.end());
        train_idx.resize(n - n_val);
    }

    // gradient buffers mirror the parameter layout
    std::vector<std::vector<double>> gw(n_units, std::vector<double>(rep_dim));
    std::vector<double> gb(n_units);
    std::vector<std::vector<double>> ghw;
    std::vector<double> ghb;
    if (hidden) {
        ghw.assign(config.hidden_size, std::vector<double>(dim));
        ghb.assign(config.hidden_size, 0.0);
    }

    const std::size_t n_params =
        n_units * (rep_dim + 1) + (hidden ? config.hidden_size * (dim + 1) : 0);
    std::vector<double> adam_m(n_params, 0.0);
    std::vector<double> adam_v(n_params, 0.0);
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kAdamEps = 1e-8;
    std::size_t adam_step = 0;

    auto best_w = model.w;
    auto best_b = model.b;
    auto best_hw = model.hidden_w;
    auto best_hb = model.hidden_b;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    bool stopped_early = false;

    std::vector<std::size_t> batch_order = train_idx;
    const std::size_t batch =
        config.batch_size == 0 ? train_idx.size() : std::min(config.batch_size, train_idx.size());
    const double keep = 1.0 - config.dropout;

    std::vector<double> a(n_units);
    std::vector<double> delta(n_units);

    for (std::size_t epoch = 0; epoch < config.epochs && !stopped_early; ++epoch) {
        rng.shuffle(batch_order);
        for (std::size_t begin = 0; begin < batch_order.size(); begin += batch) {
            const std::size_t end = std::min(begin + batch, batch_order.size());
            for (auto& row : gw) std::fill(row.begin(), row.end(), 0.0);
            std::fill(gb.begin(), gb.end(), 0.0);
            for (auto& row : ghw) std::fill(row.begin(), row.end(), 0.0);
            std::fill(ghb.begin(), ghb.end(), 0.0);

            for (std::size_t bi = begin; bi < end; ++bi) {
                const std::size_t i = batch_order[bi];
                std::vector<double> rep = detail::mtlr_representation(model, x[i]);
                std::vector<bool> dropped;
                if (hidden && config.dropout > 0.0) {
                    dropped.resize(rep.size());
                    for (std::size_t h = 0; h < rep.size(); ++h) {
                        dropped[h] = rng.uniform() < config.dropout;
                        rep[h] = dropped[h] ? 0.0 : rep[h] / keep;
                    }
                }
                activations(rep, a);
                loglik_and_delta(i, a, delta);

                // NLL gradient: d(-loglik)/d a_j = -delta[j]
                for (std::size_t j = 0; j < n_units; ++j) {
                    const double dj = -delta[j];
                    for (std::size_t k = 0; k < rep_dim; ++k) gw[j][k] += dj * rep[k];
                    gb[j] += dj;
                }
                if (hidden) {
                    for (std::size_t h = 0; h < config.hidden_size; ++h) {
                        if (!dropped.empty() && dropped[h]) continue;
                        if (rep[h] <= 0.0) continue;  // ReLU gate
                        double back = 0.0;
                        for (std::size_t j = 0; j < n_units; ++j) back += -delta[j] * model.w[j][h];
                        if (!dropped.empty()) back /= keep;
                        for (std::size_t k = 0; k < dim; ++k) ghw[h][k] += back * x[i][k];
                        ghb[h] += back;
                    }
                }
            }

            const double inv_batch = 1.0 / static_cast<double>(end - begin);
            for (std::size_t j = 0; j < n_units; ++j) {
                for (std::size_t k = 0; k < rep_dim; ++k) {
                    gw[j][k] = gw[j][k] * inv_batch + config.penalty * model.w[j][k];
                }
                gb[j] *= inv_batch;
            }
            for (std::size_t h = 0; hidden && h < config.hidden_size; ++h) {
                for (std::size_t k = 0; k < dim; ++k) {
                    ghw[h][k] = ghw[h][k] * inv_batch + config.penalty * model.hidden_w[h][k];
                }
                ghb[h] *= inv_batch;
            }

            ++adam_step;
            const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam_step));
            const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam_step));
            std::size_t p = 0;
            auto adam_update = [&](double& param, double g) {
                adam_m[p] = kBeta1 * adam_m[p] + (1.0 - kBeta1) * g;
                adam_v[p] = kBeta2 * adam_v[p] + (1.0 - kBeta2) * g * g;
                param -= config.learning_rate * (adam_m[p] / bc1) /
                         (std::sqrt(adam_v[p] / bc2) + kAdamEps);
                ++p;
            };
            for (std::size_t j = 0; j < n_units; ++j) {
                for (std::size_t k = 0; k < rep_dim; ++k) adam_update(model.w[j][k], gw[j][k]);
            }
            for (std::size_t j = 0; j < n_units; ++j) adam_update(model.b[j], gb[j]);
            for (std::size_t h = 0; hidden && h < config.hidden_size; ++h) {
                for (std::size_t k = 0; k < dim; ++k) adam_update(model.hidden_w[h][k], ghw[h][k]);
            }
            for (std::size_t h = 0; hidden && h < config.hidden_size; ++h) {
                adam_update(model.hidden_b[h], ghb[h]);
            }
        }

        if (!val_idx.empty()) {
            const double val = mean_nll(val_idx);
            if (val < best_val - 1e-12) {
                best_val = val;
                best_w = model.w;
                best_b = model.b;
                best_hw = model.hidden_w;
                best_hb = model.hidden_b;
                since_best = 0;
            } else if (++since_best >= config.patience) {
                stopped_early = true;
            }
        }
    }
    if (!val_idx.empty() && std::isfinite(best_val)) {
        model.w = best_w;
        model.b = best_b;
        model.hidden_w = best_hw;
        model.hidden_b = best_hb;
    }
    return model;
}

}  // namespace rulsurv
