#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rulsurv/common.hpp"
#include "rulsurv/dsp.hpp"

namespace rulsurv {

inline constexpr std::size_t kNumFeatures = 12;

/// Canonical column order for every emitted dataset.
inline const std::array<std::string, kNumFeatures>& feature_names() {
    static const std::array<std::string, kNumFeatures> names = {
        "absolute_mean", "std",          "skewness",     "kurtosis",
        "entropy",       "rms",          "max_value",    "peak_to_peak",
        "crest_factor",  "clearance_factor", "shape_factor", "impulse"};
    return names;
}

/// The twelve time-domain descriptors of one signal window.
struct FeatureVector {
    double absolute_mean = 0.0;
    double std = 0.0;            // population form, 1/N
    double skewness = 0.0;
    double kurtosis = 0.0;       // raw fourth standardized moment
    double entropy = 0.0;        // Shannon entropy of the window histogram, nats
    double rms = 0.0;
    double max_value = 0.0;      // max |x|
    double peak_to_peak = 0.0;   // max |x| - min |x|
    double crest_factor = 0.0;   // max |x| / rms
    double clearance_factor = 0.0;
    double shape_factor = 0.0;   // rms / absolute_mean
    double impulse = 0.0;        // max |x| / absolute_mean

    std::array<double, kNumFeatures> to_array() const {
        return {absolute_mean, std,          skewness,     kurtosis,
                entropy,       rms,          max_value,    peak_to_peak,
                crest_factor,  clearance_factor, shape_factor, impulse};
    }

    static FeatureVector from_array(const std::array<double, kNumFeatures>& a) {
        FeatureVector f;
        f.absolute_mean = a[0];
        f.std = a[1];
        f.skewness = a[2];
        f.kurtosis = a[3];
        f.entropy = a[4];
        f.rms = a[5];
        f.max_value = a[6];
        f.peak_to_peak = a[7];
        f.crest_factor = a[8];
        f.clearance_factor = a[9];
        f.shape_factor = a[10];
        f.impulse = a[11];
        return f;
    }
};

/// Computes all twelve features for one window. A window with zero standard
/// deviation leaves skewness and kurtosis undefined, so the whole vector is
/// rejected; callers skip such windows.
inline FeatureVector extract_features(std::span<const double> samples,
                                      std::size_t entropy_bins = 50) {
    require(samples.size() >= 2, "extract_features: need at least two samples");
    require(entropy_bins >= 2, "extract_features: need at least two entropy bins");

    const auto n = static_cast<double>(samples.size());
    double sum = 0.0;
    double sum_abs = 0.0;
    double sum_sq = 0.0;
    double sum_sqrt_abs = 0.0;
    double max_abs = 0.0;
    double min_abs = std::abs(samples[0]);
    for (double x : samples) {
        const double a = std::abs(x);
        sum += x;
        sum_abs += a;
        sum_sq += x * x;
        sum_sqrt_abs += std::sqrt(a);
        max_abs = std::max(max_abs, a);
        min_abs = std::min(min_abs, a);
    }
    const double mu = sum / n;

    double m2 = 0.0;
    double m3 = 0.0;
    double m4 = 0.0;
    for (double x : samples) {
        const double d = x - mu;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;

    const double sigma = std::sqrt(m2);
    require(sigma > 0.0, "extract_features: degenerate signal (zero standard deviation)");

    FeatureVector f;
    f.absolute_mean = sum_abs / n;
    f.std = sigma;
    f.skewness = m3 / (sigma * sigma * sigma);
    f.kurtosis = m4 / (m2 * m2);
    f.rms = std::sqrt(sum_sq / n);
    f.max_value = max_abs;
    f.peak_to_peak = max_abs - min_abs;
    f.crest_factor = max_abs / f.rms;
    const double mean_sqrt_abs = sum_sqrt_abs / n;
    f.clearance_factor = max_abs / (mean_sqrt_abs * mean_sqrt_abs);
    f.shape_factor = f.rms / f.absolute_mean;
    f.impulse = max_abs / f.absolute_mean;

    const Pdf pdf = estimate_pdf(samples, entropy_bins);
    double entropy = 0.0;
    for (double p : pdf.bin_probabilities) {
        if (p > 0.0) entropy -= p * std::log(p);
    }
    f.entropy = entropy;

    return f;
}

}  // namespace rulsurv
