#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "rulsurv/common.hpp"

namespace rulsurv {

namespace detail {

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey, in place. n must be a power of two.
inline void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        for (auto& x : a) x /= static_cast<double>(n);
    }
}

// Bluestein chirp-z transform for arbitrary n, built on a power-of-two convolution.
inline void fft_bluestein(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    std::size_t m = 1;
    while (m < 2 * n - 1) m <<= 1;

    // chirp[k] = exp(+/- i pi k^2 / n); k^2 mod 2n keeps the angle accurate for large k
    std::vector<std::complex<double>> chirp(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t k2 = (k * k) % (2 * n);
        const double ang = (inverse ? 1.0 : -1.0) * M_PI * static_cast<double>(k2) /
                           static_cast<double>(n);
        chirp[k] = {std::cos(ang), std::sin(ang)};
    }

    std::vector<std::complex<double>> x(m, {0.0, 0.0});
    std::vector<std::complex<double>> y(m, {0.0, 0.0});
    for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * chirp[k];
    y[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) {
        y[k] = std::conj(chirp[k]);
        y[m - k] = y[k];
    }

    fft_radix2(x, false);
    fft_radix2(y, false);
    for (std::size_t k = 0; k < m; ++k) x[k] *= y[k];
    fft_radix2(x, true);

    for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
    if (inverse) {
        for (auto& v : a) v /= static_cast<double>(n);
    }
}

}  // namespace detail

/// In-place discrete Fourier transform of arbitrary length.
/// Forward uses exp(-i 2 pi k j / n); inverse divides by n.
inline void fft(std::vector<std::complex<double>>& a, bool inverse = false) {
    require(!a.empty(), "fft: empty input");
    if (a.size() == 1) return;
    if (detail::is_power_of_two(a.size())) {
        detail::fft_radix2(a, inverse);
    } else {
        detail::fft_bluestein(a, inverse);
    }
}

/// Analytic signal via the frequency-domain construction: zero the negative
/// frequencies, double the positive ones, inverse transform.
inline std::vector<std::complex<double>> analytic_signal(std::span<const double> samples) {
    require(samples.size() >= 2, "analytic_signal: need at least two samples");
    const std::size_t n = samples.size();
    std::vector<std::complex<double>> spec(n);
    for (std::size_t i = 0; i < n; ++i) spec[i] = {samples[i], 0.0};
    fft(spec, false);
    // DC (and the Nyquist bin for even lengths) stay unscaled
    const std::size_t half = n / 2;
    for (std::size_t k = 1; k < half + (n % 2 ? 1 : 0); ++k) spec[k] *= 2.0;
    for (std::size_t k = half + 1; k < n; ++k) spec[k] = {0.0, 0.0};
    fft(spec, true);
    return spec;
}

}  // namespace rulsurv
