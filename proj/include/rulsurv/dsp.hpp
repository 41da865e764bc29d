#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rulsurv/common.hpp"
#include "rulsurv/fft.hpp"

namespace rulsurv {

/// Uniformly sampled vibration time series.
struct Signal {
    std::vector<double> samples;
    double sample_rate = 0.0;  // Hz
};

/// One-sided magnitude spectrum on a uniform frequency grid.
struct SpectralFrame {
    std::vector<double> magnitudes;
    double bin_width = 0.0;        // Hz
    double start_frequency = 0.0;  // Hz of magnitudes[0]

    double frequency_at(std::size_t i) const {
        return start_frequency + static_cast<double>(i) * bin_width;
    }
    double end_frequency() const {
        return magnitudes.empty() ? start_frequency
                                  : frequency_at(magnitudes.size() - 1);
    }
};

/// Rolling-element bearing geometry.
struct BearingGeometry {
    int n_rollers = 0;
    double roller_diameter_mm = 0.0;   // d
    double pitch_diameter_mm = 0.0;    // D
    double contact_angle_deg = 0.0;    // phi

    void validate() const {
        require(n_rollers >= 1, "BearingGeometry: n_rollers must be >= 1");
        require(roller_diameter_mm > 0.0, "BearingGeometry: roller diameter must be positive");
        require(roller_diameter_mm < pitch_diameter_mm,
                "BearingGeometry: roller diameter must be smaller than pitch diameter");
        require(contact_angle_deg >= 0.0 && contact_angle_deg < 90.0,
                "BearingGeometry: contact angle must lie in [0, 90) degrees");
    }
};

enum class Band : std::size_t { BPFO = 0, BPFI = 1, BSF = 2, FTF = 3, SF = 4 };

inline constexpr std::size_t kNumBands = 5;

inline const char* band_name(Band b) {
    static constexpr const char* names[kNumBands] = {"BPFO", "BPFI", "BSF", "FTF", "SF"};
    return names[static_cast<std::size_t>(b)];
}

/// The five fault-frequency band centers plus a shared half width.
struct CriticalBands {
    std::array<double, kNumBands> centers{};  // Hz, indexed by Band
    double half_width = 0.0;                  // Hz

    double center(Band b) const { return centers[static_cast<std::size_t>(b)]; }
};

/// Characteristic fault frequencies from geometry and shaft speed.
///   BPFO = n f_r / 2 (1 - d/D cos phi)
///   BPFI = n f_r / 2 (1 + d/D cos phi)
///   BSF  = D f_r / (2 d) (1 - (d/D cos phi)^2)
///   FTF  = f_r / 2 (1 - d/D cos phi)
///   SF   = f_r
inline CriticalBands critical_bands(const BearingGeometry& g, double shaft_speed_hz,
                                    double half_width_hz) {
    g.validate();
    require(shaft_speed_hz > 0.0, "critical_bands: shaft speed must be positive");
    require(half_width_hz > 0.0, "critical_bands: half width must be positive");

    const double ratio =
        g.roller_diameter_mm / g.pitch_diameter_mm * std::cos(g.contact_angle_deg * M_PI / 180.0);
    const double n = static_cast<double>(g.n_rollers);
    const double fr = shaft_speed_hz;

    CriticalBands cb;
    cb.centers[static_cast<std::size_t>(Band::BPFO)] = n * fr / 2.0 * (1.0 - ratio);
    cb.centers[static_cast<std::size_t>(Band::BPFI)] = n * fr / 2.0 * (1.0 + ratio);
    cb.centers[static_cast<std::size_t>(Band::BSF)] =
        g.pitch_diameter_mm * fr / (2.0 * g.roller_diameter_mm) * (1.0 - ratio * ratio);
    cb.centers[static_cast<std::size_t>(Band::FTF)] = fr / 2.0 * (1.0 - ratio);
    cb.centers[static_cast<std::size_t>(Band::SF)] = fr;
    cb.half_width = half_width_hz;
    return cb;
}

/// Envelope spectrum: magnitude of the analytic signal (the envelope),
/// then one-sided DFT magnitudes of that envelope.
/// bin_width = sample_rate / N; bins 0..floor(N/2) are retained.
inline SpectralFrame envelope_spectrum(const Signal& signal) {
    require(signal.sample_rate > 0.0, "envelope_spectrum: sample rate must be positive");
    require(signal.samples.size() >= 2, "envelope_spectrum: need at least two samples");

    const std::size_t n = signal.samples.size();
    const auto analytic = analytic_signal(signal.samples);

    std::vector<std::complex<double>> envelope(n);
    for (std::size_t i = 0; i < n; ++i) envelope[i] = {std::abs(analytic[i]), 0.0};
    fft(envelope, false);

    SpectralFrame frame;
    frame.bin_width = signal.sample_rate / static_cast<double>(n);
    frame.start_frequency = 0.0;
    frame.magnitudes.resize(n / 2 + 1);
    for (std::size_t k = 0; k <= n / 2; ++k) frame.magnitudes[k] = std::abs(envelope[k]);
    return frame;
}

/// Keeps the bins whose center frequencies fall in [center - hw, center + hw].
inline SpectralFrame band_pass(const SpectralFrame& spectrum, double center_hz,
                               double half_width_hz) {
    require(half_width_hz > 0.0, "band_pass: half width must be positive");
    require(spectrum.bin_width > 0.0, "band_pass: invalid spectrum");
    require(!spectrum.magnitudes.empty(), "band_pass: empty spectrum");

    const double lo = center_hz - half_width_hz;
    const double hi = center_hz + half_width_hz;

    const std::size_t n = spectrum.magnitudes.size();
    std::size_t first = n;
    std::size_t last = n;  // one past the end
    for (std::size_t i = 0; i < n; ++i) {
        const double f = spectrum.frequency_at(i);
        if (f >= lo && f <= hi) {
            if (first == n) first = i;
            last = i + 1;
        }
    }
    require(first < n, "band_pass: band [" + std::to_string(lo) + ", " + std::to_string(hi) +
                           "] Hz does not overlap the spectrum");

    SpectralFrame out;
    out.bin_width = spectrum.bin_width;
    out.start_frequency = spectrum.frequency_at(first);
    out.magnitudes.assign(spectrum.magnitudes.begin() + static_cast<std::ptrdiff_t>(first),
                          spectrum.magnitudes.begin() + static_cast<std::ptrdiff_t>(last));
    return out;
}

/// Discrete probability density over contiguous bins.
struct Pdf {
    std::vector<double> bin_probabilities;
    std::vector<double> bin_edges;  // size = probabilities + 1, strictly increasing
};

/// Histogram estimate over [min, max] of the values, normalized to sum 1.
/// A degenerate range (max == min == v) yields a single bin [v-0.5, v+0.5].
inline Pdf estimate_pdf(std::span<const double> values, std::size_t n_bins) {
    require(!values.empty(), "estimate_pdf: empty input");
    require(n_bins >= 2, "estimate_pdf: need at least two bins");

    double lo = values[0];
    double hi = values[0];
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }

    Pdf pdf;
    if (lo == hi) {
        pdf.bin_edges = {lo - 0.5, lo + 0.5};
        pdf.bin_probabilities = {1.0};
        return pdf;
    }

    pdf.bin_edges.resize(n_bins + 1);
    const double width = (hi - lo) / static_cast<double>(n_bins);
    for (std::size_t i = 0; i <= n_bins; ++i)
        pdf.bin_edges[i] = lo + static_cast<double>(i) * width;
    pdf.bin_edges.back() = hi;  // guard against rounding

    pdf.bin_probabilities.assign(n_bins, 0.0);
    const double inv_n = 1.0 / static_cast<double>(values.size());
    for (double v : values) {
        auto bin = static_cast<std::size_t>((v - lo) / width);
        if (bin >= n_bins) bin = n_bins - 1;  // v == hi lands in the last bin
        pdf.bin_probabilities[bin] += inv_n;
    }
    return pdf;
}

/// Histogram on fixed edges; values outside the range clamp to the edge bins.
inline Pdf estimate_pdf_on_edges(std::span<const double> values,
                                 const std::vector<double>& edges) {
    require(!values.empty(), "estimate_pdf_on_edges: empty input");
    require(edges.size() >= 2, "estimate_pdf_on_edges: need at least two edges");

    const std::size_t n_bins = edges.size() - 1;
    Pdf pdf;
    pdf.bin_edges = edges;
    pdf.bin_probabilities.assign(n_bins, 0.0);
    const double inv_n = 1.0 / static_cast<double>(values.size());
    for (double v : values) {
        const auto it = std::upper_bound(edges.begin(), edges.end(), v);
        std::size_t bin = 0;
        if (it == edges.begin()) {
            bin = 0;
        } else {
            bin = static_cast<std::size_t>(std::distance(edges.begin(), it)) - 1;
            if (bin >= n_bins) bin = n_bins - 1;
        }
        pdf.bin_probabilities[bin] += inv_n;
    }
    return pdf;
}

/// KL(p || q) = sum p ln(p / q), natural log. Both PDFs are smoothed with
/// epsilon = 1e-12 per bin and renormalized so empty bins stay finite.
inline double kl_divergence(const Pdf& p, const Pdf& q) {
    require(p.bin_edges == q.bin_edges, "kl_divergence: PDFs must share identical bin edges");

    constexpr double kEps = 1e-12;
    const std::size_t n = p.bin_probabilities.size();
    double p_norm = 0.0;
    double q_norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        p_norm += p.bin_probabilities[i] + kEps;
        q_norm += q.bin_probabilities[i] + kEps;
    }

    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double pi = (p.bin_probabilities[i] + kEps) / p_norm;
        const double qi = (q.bin_probabilities[i] + kEps) / q_norm;
        kl += pi * std::log(pi / qi);
    }
    return std::max(kl, 0.0);  // clamp tiny negative round-off
}

}  // namespace rulsurv
