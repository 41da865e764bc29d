#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "rulsurv/features.hpp"
#include "rulsurv/rng.hpp"

using namespace rulsurv;

namespace {

// straight-line reimplementation of each descriptor, kept independent of
// the library code path
struct NaiveFeatures {
    double abs_mean, sd, skew, kurt, rms, max_abs, p2p, crest, clearance, shape, impulse;
};

NaiveFeatures naive(const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    double mu = 0.0;
    for (double v : x) mu += v;
    mu /= n;

    NaiveFeatures f{};
    double m2 = 0, m3 = 0, m4 = 0, sum_abs = 0, sum_sq = 0, sum_sqrt = 0;
    double max_abs = 0, min_abs = std::abs(x[0]);
    for (double v : x) {
        m2 += std::pow(v - mu, 2);
        m3 += std::pow(v - mu, 3);
        m4 += std::pow(v - mu, 4);
        sum_abs += std::abs(v);
        sum_sq += v * v;
        sum_sqrt += std::sqrt(std::abs(v));
        max_abs = std::max(max_abs, std::abs(v));
        min_abs = std::min(min_abs, std::abs(v));
    }
    f.abs_mean = sum_abs / n;
    f.sd = std::sqrt(m2 / n);
    f.skew = (m3 / n) / std::pow(f.sd, 3);
    f.kurt = (m4 / n) / std::pow(f.sd, 4);
    f.rms = std::sqrt(sum_sq / n);
    f.max_abs = max_abs;
    f.p2p = max_abs - min_abs;
    f.crest = max_abs / f.rms;
    f.clearance = max_abs / std::pow(sum_sqrt / n, 2);
    f.shape = f.rms / f.abs_mean;
    f.impulse = max_abs / f.abs_mean;
    return f;
}

}  // namespace

TEST_CASE("symmetric window has zero skewness") {
    const auto f = extract_features(std::vector<double>{1.0, 2.0, 3.0});
    CHECK_THAT(f.skewness, Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("hand-computed values for a two-sample window") {
    const auto f = extract_features(std::vector<double>{3.0, 4.0});
    CHECK_THAT(f.rms, Catch::Matchers::WithinAbs(3.5355339059, 1e-9));
    // peak-to-peak is max|x| - min|x|
    CHECK_THAT(f.peak_to_peak, Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(f.absolute_mean, Catch::Matchers::WithinAbs(3.5, 1e-12));
    CHECK_THAT(f.max_value, Catch::Matchers::WithinAbs(4.0, 1e-12));
}

TEST_CASE("constant window is rejected as degenerate") {
    CHECK_THROWS_AS(extract_features(std::vector<double>(16, 2.0)), error);
    CHECK_THROWS_AS(extract_features(std::vector<double>(16, 0.0)), error);
}

TEST_CASE("near-constant window drives the amplitude ratios to one") {
    std::vector<double> v(64, 5.0);
    v[0] = 5.0 * (1.0 + 1e-9);
    const auto f = extract_features(v);
    CHECK_THAT(f.crest_factor, Catch::Matchers::WithinAbs(1.0, 1e-6));
    CHECK_THAT(f.shape_factor, Catch::Matchers::WithinAbs(1.0, 1e-6));
    CHECK_THAT(f.impulse, Catch::Matchers::WithinAbs(1.0, 1e-6));
}

TEST_CASE("scale equivariance of the feature families") {
    Rng rng(41);
    std::vector<double> x(512);
    for (auto& v : x) v = rng.normal() + 0.3;
    std::vector<double> scaled = x;
    const double c = 7.25;
    for (auto& v : scaled) v *= c;

    const auto base = extract_features(x);
    const auto big = extract_features(scaled);

    // these scale with the signal
    CHECK_THAT(big.absolute_mean, Catch::Matchers::WithinRel(c * base.absolute_mean, 1e-10));
    CHECK_THAT(big.std, Catch::Matchers::WithinRel(c * base.std, 1e-10));
    CHECK_THAT(big.rms, Catch::Matchers::WithinRel(c * base.rms, 1e-10));
    CHECK_THAT(big.max_value, Catch::Matchers::WithinRel(c * base.max_value, 1e-10));
    CHECK_THAT(big.peak_to_peak, Catch::Matchers::WithinRel(c * base.peak_to_peak, 1e-10));
    // these are scale-free
    CHECK_THAT(big.skewness, Catch::Matchers::WithinAbs(base.skewness, 1e-10));
    CHECK_THAT(big.kurtosis, Catch::Matchers::WithinAbs(base.kurtosis, 1e-10));
    CHECK_THAT(big.crest_factor, Catch::Matchers::WithinAbs(base.crest_factor, 1e-10));
    CHECK_THAT(big.clearance_factor, Catch::Matchers::WithinAbs(base.clearance_factor, 1e-10));
    CHECK_THAT(big.shape_factor, Catch::Matchers::WithinAbs(base.shape_factor, 1e-10));
    CHECK_THAT(big.impulse, Catch::Matchers::WithinAbs(base.impulse, 1e-10));
}

TEST_CASE("standard normal draws land near the theoretical moments") {
    Rng rng(123);
    std::vector<double> x(100000);
    for (auto& v : x) v = rng.normal();
    const auto f = extract_features(x);
    CHECK(f.kurtosis > 2.9);
    CHECK(f.kurtosis < 3.1);
    CHECK(f.skewness > -0.05);
    CHECK(f.skewness < 0.05);
}

TEST_CASE("agreement with the naive reimplementation on random windows") {
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(8 + rng.uniform_below(256));
        for (auto& v : x) v = 3.0 * rng.normal() + rng.uniform();
        const auto got = extract_features(x);
        const auto want = naive(x);
        CHECK_THAT(got.absolute_mean, Catch::Matchers::WithinRel(want.abs_mean, 1e-9));
        CHECK_THAT(got.std, Catch::Matchers::WithinRel(want.sd, 1e-9));
        CHECK_THAT(got.skewness, Catch::Matchers::WithinAbs(want.skew, 1e-9));
        CHECK_THAT(got.kurtosis, Catch::Matchers::WithinRel(want.kurt, 1e-9));
        CHECK_THAT(got.rms, Catch::Matchers::WithinRel(want.rms, 1e-9));
        CHECK_THAT(got.max_value, Catch::Matchers::WithinRel(want.max_abs, 1e-9));
        CHECK_THAT(got.peak_to_peak, Catch::Matchers::WithinRel(want.p2p, 1e-9));
        CHECK_THAT(got.crest_factor, Catch::Matchers::WithinRel(want.crest, 1e-9));
        CHECK_THAT(got.clearance_factor, Catch::Matchers::WithinRel(want.clearance, 1e-9));
        CHECK_THAT(got.shape_factor, Catch::Matchers::WithinRel(want.shape, 1e-9));
        CHECK_THAT(got.impulse, Catch::Matchers::WithinRel(want.impulse, 1e-9));
    }
}

TEST_CASE("entropy is non-negative and maximal for a uniform spread") {
    Rng rng(9);
    std::vector<double> uniform(5000);
    for (auto& v : uniform) v = rng.uniform();
    std::vector<double> spiky(5000, 0.0);
    spiky[0] = 1.0;  // nearly all mass in one bin
    spiky[1] = 2.0;

    const auto fu = extract_features(uniform);
    const auto fs = extract_features(spiky);
    CHECK(fu.entropy >= 0.0);
    CHECK(fs.entropy >= 0.0);
    CHECK(fu.entropy > fs.entropy);
    // 50 uniform bins cap the entropy at ln(50)
    CHECK(fu.entropy <= std::log(50.0) + 1e-9);
}

TEST_CASE("feature vector round-trips through its array form") {
    Rng rng(13);
    std::vector<double> x(64);
    for (auto& v : x) v = rng.normal();
    const auto f = extract_features(x);
    const auto g = FeatureVector::from_array(f.to_array());
    CHECK(g.to_array() == f.to_array());
}
