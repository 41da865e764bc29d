#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rulsurv/common.hpp"
#include "rulsurv/dsp.hpp"
#include "rulsurv/stats.hpp"

namespace rulsurv {

/// Tuning for the per-band drift detector.
struct DetectorConfig {
    double window_seconds = 600.0;     // T
    double eta = 5.0;                  // early-life sensitivity
    double lambda_kl = 2.0;            // end-of-life sensitivity, must stay below eta
    double end_of_life_minutes = 0.0;  // L
    std::size_t n_bins = 50;           // histogram bins for the band PDFs
    double half_width_hz = 5.0;        // critical band half width
    // Samples that make up one recorded minute. Duty-cycled rigs record a
    // short burst per minute, so one minute of elapsed time is not
    // sample_rate * 60 samples. Zero means continuous recording.
    std::size_t samples_per_minute = 0;

    double minutes_per_window() const { return window_seconds / 60.0; }

    void validate() const {
        require(window_seconds > 0.0, "DetectorConfig: window_seconds must be positive");
        require(eta > 0.0, "DetectorConfig: eta must be positive");
        require(lambda_kl > 0.0, "DetectorConfig: lambda_kl must be positive");
        require(end_of_life_minutes > 0.0, "DetectorConfig: end_of_life_minutes must be positive");
        require(eta / lambda_kl > 1.0, "DetectorConfig: eta/lambda_kl must exceed 1");
        require(n_bins >= 2, "DetectorConfig: n_bins must be >= 2");
        require(half_width_hz > 0.0, "DetectorConfig: half_width_hz must be positive");
    }
};

/// Exponentially decaying detection threshold:
///   th(w) = eta * sigma * exp(-beta * tau(w)),  beta = ln(eta/lambda) / L,
/// with tau(w) the elapsed minutes at window w. Decays from eta*sigma at
/// tau = 0 to lambda*sigma at tau = L.
inline double threshold(std::size_t window_index, double sigma_kl, const DetectorConfig& config) {
    config.validate();
    require(sigma_kl >= 0.0, "threshold: sigma_kl must be non-negative");
    const double beta = std::log(config.eta / config.lambda_kl) / config.end_of_life_minutes;
    const double tau = static_cast<double>(window_index) * config.minutes_per_window();
    return config.eta * sigma_kl * std::exp(-beta * tau);
}

/// Per-band detection trail: KL against the window-0 reference, first
/// differences, thresholds where evaluated, and the triggering window.
struct BandTrace {
    std::string band_label;
    std::vector<double> kl_values;   // one per window, kl_values[0] == 0
    std::vector<double> deltas;      // deltas[i] = kl[i+1] - kl[i]
    std::vector<double> thresholds;  // evaluated from window 2 on (>= 2 deltas)
    std::optional<std::size_t> detected_window;

    /// Threshold for window w, if one was evaluated there.
    std::optional<double> threshold_at(std::size_t w) const {
        if (w < 2 || w - 2 >= thresholds.size()) return std::nullopt;
        return thresholds[w - 2];
    }
};

/// Per-bearing annotation: minute of detected degradation onset (or L when
/// nothing triggered) plus the full trail of each critical band.
struct EventAnnotation {
    std::string bearing_id;
    double event_time_minutes = 0.0;
    double end_of_life_minutes = 0.0;
    std::array<BandTrace, kNumBands> per_band;
};

/// Runs the drift detector over one band's per-window magnitude sets.
///
/// Window 0 fixes both the reference PDF and the shared histogram edges.
/// Each window's KL divergence against that reference is differenced; the
/// running sample SD of the differences scales the decaying threshold, and
/// the first window after the burn-in (w > 5) whose |delta| exceeds it is
/// flagged. The trace stops at the detection window.
inline BandTrace detect_band(const std::vector<std::vector<double>>& band_windows,
                             const DetectorConfig& config, std::string band_label = {}) {
    config.validate();
    require(band_windows.size() >= 2, "detect_band: need at least two windows");

    BandTrace trace;
    trace.band_label = std::move(band_label);

    const Pdf reference = estimate_pdf(band_windows[0], config.n_bins);
    trace.kl_values.push_back(0.0);  // KL(P0 || P0)

    for (std::size_t w = 1; w < band_windows.size(); ++w) {
        require(!band_windows[w].empty(), "detect_band: empty window");
        const Pdf pw = estimate_pdf_on_edges(band_windows[w], reference.bin_edges);
        const double kl = kl_divergence(pw, reference);
        trace.deltas.push_back(kl - trace.kl_values.back());
        trace.kl_values.push_back(kl);

        if (w >= 2) {
            const double sigma = stddev_sample(trace.deltas);
            const double th = threshold(w, sigma, config);
            trace.thresholds.push_back(th);
            if (w > 5 && std::abs(trace.deltas.back()) > th) {
                trace.detected_window = w;
                break;
            }
        }
    }
    return trace;
}

/// Full event detection for one bearing: envelope spectrum per window,
/// critical-band extraction, drift detection per band, earliest trigger wins.
/// Bands that never trigger contribute the end of life L.
inline EventAnnotation detect_event(const Signal& signal, const BearingGeometry& geometry,
                                    double shaft_speed_hz, const DetectorConfig& config) {
    config.validate();
    require(signal.sample_rate > 0.0, "detect_event: sample rate must be positive");

    const double spm_f = config.samples_per_minute > 0
                             ? static_cast<double>(config.samples_per_minute)
                             : signal.sample_rate * 60.0;
    const auto window_samples =
        static_cast<std::size_t>(std::llround(config.minutes_per_window() * spm_f));
    require(window_samples >= 2, "detect_event: window shorter than two samples");

    const std::size_t n_windows = signal.samples.size() / window_samples;
    require(n_windows >= 7, "detect_event: signal too short (need at least 7 windows, got " +
                                std::to_string(n_windows) + ")");

    const CriticalBands bands = critical_bands(geometry, shaft_speed_hz, config.half_width_hz);
    const double nyquist = signal.sample_rate / 2.0;
    for (std::size_t b = 0; b < kNumBands; ++b) {
        require(bands.centers[b] < nyquist,
                std::string("detect_event: band ") + band_name(static_cast<Band>(b)) +
                    " lies above the Nyquist frequency");
    }

    // One envelope spectrum per window, sliced five ways.
    std::array<std::vector<std::vector<double>>, kNumBands> band_windows;
    for (auto& bw : band_windows) bw.reserve(n_windows);
    for (std::size_t w = 0; w < n_windows; ++w) {
        Signal window;
        window.sample_rate = signal.sample_rate;
        const auto begin = signal.samples.begin() + static_cast<std::ptrdiff_t>(w * window_samples);
        window.samples.assign(begin, begin + static_cast<std::ptrdiff_t>(window_samples));
        const SpectralFrame spectrum = envelope_spectrum(window);
        for (std::size_t b = 0; b < kNumBands; ++b) {
            band_windows[b].push_back(
                band_pass(spectrum, bands.centers[b], bands.half_width).magnitudes);
        }
    }

    EventAnnotation annotation;
    annotation.end_of_life_minutes = config.end_of_life_minutes;
    double t_event = config.end_of_life_minutes;
    for (std::size_t b = 0; b < kNumBands; ++b) {
        BandTrace trace =
            detect_band(band_windows[b], config, band_name(static_cast<Band>(b)));
        if (trace.detected_window) {
            // report the window's start minute
            const double t_band =
                static_cast<double>(*trace.detected_window) * config.minutes_per_window();
            t_event = std::min(t_event, t_band);
        }
        annotation.per_band[b] = std::move(trace);
    }
    annotation.event_time_minutes = t_event;
    return annotation;
}

}  // namespace rulsurv
