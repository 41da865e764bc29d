#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "rulsurv/common.hpp"
#include "rulsurv/stats.hpp"
#include "rulsurv/survival.hpp"

namespace rulsurv {

struct CoxConfig {
    double gradient_tolerance = 1e-9;  // max-norm convergence criterion
    std::size_t max_iterations = 100;
};

/// Proportional hazards model h(t|x) = h0(t) exp(x . theta) with a Breslow
/// baseline cumulative hazard fitted on the training event times.
struct CoxModel {
    std::vector<double> coefficients;
    std::vector<double> baseline_times;    // ascending event times
    std::vector<double> baseline_cumhaz;   // H0 at those times, non-decreasing

    std::size_t dimension() const { return coefficients.size(); }
};

namespace detail {

struct CoxData {
    const std::vector<std::vector<double>>* x = nullptr;
    std::vector<std::size_t> order;  // indices sorted by time ascending
};

inline CoxData cox_sort(const std::vector<std::vector<double>>& x,
                        std::span<const double> times) {
    CoxData d;
    d.x = &x;
    d.order.resize(times.size());
    std::iota(d.order.begin(), d.order.end(), std::size_t{0});
    std::stable_sort(d.order.begin(), d.order.end(),
                     [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
    return d;
}

}  // namespace detail

/// Breslow partial log-likelihood at the given coefficients.
inline double cox_log_partial_likelihood(const std::vector<std::vector<double>>& x,
                                         std::span<const double> times,
                                         const std::vector<bool>& events,
                                         std::span<const double> theta) {
    const std::size_t n = x.size();
    require(n > 0 && times.size() == n && events.size() == n,
            "cox_log_partial_likelihood: shape mismatch");
    const std::size_t dim = theta.size();

    const auto data = detail::cox_sort(x, times);
    auto risk_score = [&](std::size_t i) {
        double s = 0.0;
        for (std::size_t j = 0; j < dim; ++j) s += x[i][j] * theta[j];
        return s;
    };

    double loglik = 0.0;
    double sum_exp = 0.0;
    std::size_t pos = n;
    while (pos > 0) {
        // pull every record tied at this time into the risk set first
        const double t = times[data.order[pos - 1]];
        std::size_t group_begin = pos;
        while (group_begin > 0 && times[data.order[group_begin - 1]] == t) --group_begin;
        for (std::size_t k = group_begin; k < pos; ++k) {
            sum_exp += std::exp(risk_score(data.order[k]));
        }
        for (std::size_t k = group_begin; k < pos; ++k) {
            const std::size_t i = data.order[k];
            if (events[i]) loglik += risk_score(i) - std::log(sum_exp);
        }
        pos = group_begin;
    }
    return loglik;
}

/// Analytic gradient of the Breslow partial log-likelihood.
inline std::vector<double> cox_gradient(const std::vector<std::vector<double>>& x,
                                        std::span<const double> times,
                                        const std::vector<bool>& events,
                                        std::span<const double> theta) {
    const std::size_t n = x.size();
    const std::size_t dim = theta.size();
    const auto data = detail::cox_sort(x, times);

    std::vector<double> grad(dim, 0.0);
    std::vector<double> s1(dim, 0.0);
    double s0 = 0.0;
    std::size_t pos = n;
    while (pos > 0) {
        const double t = times[data.order[pos - 1]];
        std::size_t group_begin = pos;
        while (group_begin > 0 && times[data.order[group_begin - 1]] == t) --group_begin;
        for (std::size_t k = group_begin; k < pos; ++k) {
            const std::size_t i = data.order[k];
            double score = 0.0;
            for (std::size_t j = 0; j < dim; ++j) score += x[i][j] * theta[j];
            const double e = std::exp(score);
            s0 += e;
            for (std::size_t j = 0; j < dim; ++j) s1[j] += x[i][j] * e;
        }
        for (std::size_t k = group_begin; k < pos; ++k) {
            const std::size_t i = data.order[k];
            if (!events[i]) continue;
            for (std::size_t j = 0; j < dim; ++j) grad[j] += x[i][j] - s1[j] / s0;
        }
        pos = group_begin;
    }
    return grad;
}

/// Newton-Raphson fit of the Cox model. Converges when the gradient
/// max-norm drops below the tolerance; throws on separation (non-finite
/// likelihood), naming the diverging coefficient.
inline CoxModel cox_fit(const std::vector<std::vector<double>>& x,
                        std::span<const double> times, const std::vector<bool>& events,
                        const CoxConfig& config = {}) {
    const std::size_t n = x.size();
    require(n > 0 && times.size() == n && events.size() == n, "cox_fit: shape mismatch");
    const std::size_t dim = x[0].size();
    for (const auto& row : x) {
        require(row.size() == dim, "cox_fit: ragged feature matrix");
    }
    require(std::any_of(events.begin(), events.end(), [](bool e) { return e; }),
            "cox_fit: need at least one uncensored record");

    const auto data = detail::cox_sort(x, times);

    auto report_separation = [&](std::span<const double> theta) {
        std::size_t worst = 0;
        for (std::size_t j = 1; j < dim; ++j) {
            if (std::abs(theta[j]) > std::abs(theta[worst])) worst = j;
        }
        throw error("cox_fit: non-finite partial likelihood (separation); coefficient " +
                    std::to_string(worst) + " is diverging (value " +
                    std::to_string(theta[worst]) + ")");
    };

    // gradient and negative Hessian in one sweep over the risk sets
    auto derivatives = [&](const std::vector<double>& theta, std::vector<double>& grad,
                           std::vector<double>& neg_hess) {
        grad.assign(dim, 0.0);
        neg_hess.assign(dim * dim, 0.0);
        std::vector<double> s1(dim, 0.0);
        std::vector<double> s2(dim * dim, 0.0);
        double s0 = 0.0;
        std::size_t pos = n;
        while (pos > 0) {
            const double t = times[data.order[pos - 1]];
            std::size_t group_begin = pos;
            while (group_begin > 0 && times[data.order[group_begin - 1]] == t) --group_begin;
            for (std::size_t k = group_begin; k < pos; ++k) {
                const std::size_t i = data.order[k];
                double score = 0.0;
                for (std::size_t j = 0; j < dim; ++j) score += x[i][j] * theta[j];
                const double e = std::exp(score);
                s0 += e;
                for (std::size_t j = 0; j < dim; ++j) {
                    s1[j] += x[i][j] * e;
                    for (std::size_t l = 0; l <= j; ++l) s2[j * dim + l] += x[i][j] * x[i][l] * e;
                }
            }
            for (std::size_t k = group_begin; k < pos; ++k) {
                const std::size_t i = data.order[k];
                if (!events[i]) continue;
                for (std::size_t j = 0; j < dim; ++j) {
                    const double mj = s1[j] / s0;
                    grad[j] += x[i][j] - mj;
                    for (std::size_t l = 0; l <= j; ++l) {
                        neg_hess[j * dim + l] += s2[j * dim + l] / s0 - mj * (s1[l] / s0);
                    }
                }
            }
            pos = group_begin;
        }
        for (std::size_t j = 0; j < dim; ++j) {
            for (std::size_t l = j + 1; l < dim; ++l) neg_hess[j * dim + l] = neg_hess[l * dim + j];
        }
    };

    std::vector<double> theta(dim, 0.0);
    double loglik = cox_log_partial_likelihood(x, times, events, theta);
    std::vector<double> grad;
    std::vector<double> neg_hess;
    std::vector<double> step;

    for (std::size_t iter = 0; iter < config.max_iterations; ++iter) {
        derivatives(theta, grad, neg_hess);
        double grad_max = 0.0;
        for (double g : grad) grad_max = std::max(grad_max, std::abs(g));
        if (grad_max < config.gradient_tolerance) break;

        // damp the (possibly singular) Hessian until it factors
        double damping = 0.0;
        std::vector<double> h = neg_hess;
        while (!cholesky_solve(h, dim, grad, step)) {
            damping = damping == 0.0 ? 1e-8 : damping * 10.0;
            require(damping < 1e6, "cox_fit: Hessian cannot be stabilized");
            h = neg_hess;
            for (std::size_t j = 0; j < dim; ++j) h[j * dim + j] += damping;
        }

        // halve the step until the likelihood stops degrading
        double scale = 1.0;
        std::vector<double> candidate(dim);
        double new_loglik = -std::numeric_limits<double>::infinity();
        for (int halving = 0; halving < 40; ++halving) {
            for (std::size_t j = 0; j < dim; ++j) candidate[j] = theta[j] + scale * step[j];
            new_loglik = cox_log_partial_likelihood(x, times, events, candidate);
            if (std::isfinite(new_loglik) && new_loglik >= loglik - 1e-12) break;
            scale *= 0.5;
        }
        if (!std::isfinite(new_loglik)) report_separation(candidate);
        theta = candidate;
        loglik = new_loglik;
        for (double v : theta) {
            if (!std::isfinite(v) || std::abs(v) > 1e3) report_separation(theta);
        }
    }

    CoxModel model;
    model.coefficients = theta;

    // Breslow baseline cumulative hazard over the training event times
    double s0 = 0.0;
    std::size_t pos = n;
    std::vector<std::pair<double, double>> increments;  // (time, d_g / s0)
    while (pos > 0) {
        const double t = times[data.order[pos - 1]];
        std::size_t group_begin = pos;
        std::size_t deaths = 0;
        while (group_begin > 0 && times[data.order[group_begin - 1]] == t) --group_begin;
        for (std::size_t k = group_begin; k < pos; ++k) {
            const std::size_t i = data.order[k];
            double score = 0.0;
            for (std::size_t j = 0; j < dim; ++j) score += x[i][j] * theta[j];
            s0 += std::exp(score);
            if (events[i]) ++deaths;
        }
        if (deaths > 0) increments.emplace_back(t, static_cast<double>(deaths) / s0);
        pos = group_begin;
    }
    std::reverse(increments.begin(), increments.end());
    double cum = 0.0;
    for (const auto& [t, inc] : increments) {
        cum += inc;
        model.baseline_times.push_back(t);
        model.baseline_cumhaz.push_back(cum);
    }
    return model;
}

/// S(t|x) = exp(-H0(t) exp(x . theta)) over the training event-time grid.
inline SurvivalCurve cox_predict(const CoxModel& model, std::span<const double> x) {
    require(x.size() == model.dimension(),
            "cox_predict: feature dimension mismatch (expected " +
                std::to_string(model.dimension()) + ", got " + std::to_string(x.size()) + ")");
    double score = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) score += x[j] * model.coefficients[j];
    const double risk = std::exp(score);

    SurvivalCurve curve;
    curve.interp = CurveInterp::Linear;
    curve.times = model.baseline_times;
    curve.probabilities.resize(model.baseline_cumhaz.size());
    for (std::size_t i = 0; i < model.baseline_cumhaz.size(); ++i) {
        curve.probabilities[i] = std::exp(-model.baseline_cumhaz[i] * risk);
    }
    return curve;
}

}  // namespace rulsurv
