#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rulsurv/common.hpp"
#include "rulsurv/csv.hpp"
#include "rulsurv/dataset.hpp"
#include "rulsurv/dsp.hpp"
#include "rulsurv/rng.hpp"

namespace rulsurv {

/// Parameters of the bundled vibration fixture: Gaussian background with an
/// amplitude-modulated tone injected at the fault minute. The modulation
/// frequency sits on one critical band, so the band's envelope-spectrum PDF
/// steps when the defect appears and keeps growing afterwards.
struct SyntheticBearingConfig {
    double sample_rate_hz = 256.0;
    std::size_t samples_per_minute = 1024;
    std::size_t minutes = 64;
    // -1 = healthy to end of recording
    int fault_minute = 30;
    double modulation_hz = 30.83;   // which critical band the defect excites
    double carrier_hz = 100.0;
    double noise_sigma = 1.0;
    double am_amplitude = 1.5;
    double am_depth = 0.8;
    double noise_floor_gain = 1.5;    // broadband rise once the defect is active
    double growth_per_minute = 0.02;  // staged defect: amplitude ramps up
    std::uint64_t seed = 1;
};

/// Geometry and shaft speed whose critical bands all sit below the fixture's
/// Nyquist frequency (128 Hz at the default rate).
inline BearingGeometry synthetic_geometry() {
    return BearingGeometry{8, 7.92, 34.55, 0.0};
}
inline double synthetic_shaft_speed_hz() { return 10.0; }

/// One recorded minute of the fixture.
inline Signal synthetic_minute(const SyntheticBearingConfig& config, std::size_t minute,
                               Rng& rng) {
    Signal s;
    s.sample_rate = config.sample_rate_hz;
    s.samples.resize(config.samples_per_minute);
    const bool faulty =
        config.fault_minute >= 0 && minute >= static_cast<std::size_t>(config.fault_minute);
    const double growth =
        faulty ? 1.0 + config.growth_per_minute *
                           static_cast<double>(minute - static_cast<std::size_t>(
                                                            config.fault_minute))
               : 0.0;
    const double sigma =
        config.noise_sigma * (faulty ? 1.0 + config.noise_floor_gain * growth : 1.0);
    for (std::size_t i = 0; i < config.samples_per_minute; ++i) {
        double v = sigma * rng.normal();
        if (faulty) {
            const double t = static_cast<double>(i) / config.sample_rate_hz;
            const double envelope =
                1.0 + config.am_depth * std::cos(2.0 * M_PI * config.modulation_hz * t);
            v += config.am_amplitude * growth * envelope *
                 std::cos(2.0 * M_PI * config.carrier_hz * t);
        }
        s.samples[i] = v;
    }
    return s;
}

/// Whole-bearing fixture as one concatenated signal.
inline Signal synthetic_bearing(const SyntheticBearingConfig& config) {
    Rng rng(config.seed);
    Signal out;
    out.sample_rate = config.sample_rate_hz;
    out.samples.reserve(config.samples_per_minute * config.minutes);
    for (std::size_t m = 0; m < config.minutes; ++m) {
        const Signal minute = synthetic_minute(config, m, rng);
        out.samples.insert(out.samples.end(), minute.samples.begin(), minute.samples.end());
    }
    return out;
}

struct SyntheticCorpusEntry {
    std::string bearing_id;
    int fault_minute = -1;
    std::size_t minutes = 0;
};

/// Writes a small run-to-failure corpus in the on-disk layout the loader
/// expects: <root>/<condition>/<bearing>/<minute>.csv with a header row and
/// horizontal/vertical columns. Returns the ground-truth fault minutes.
inline std::vector<SyntheticCorpusEntry> write_synthetic_corpus(
    const std::filesystem::path& root, const std::string& condition,
    const std::vector<SyntheticBearingConfig>& bearings) {
    require(!bearings.empty(), "write_synthetic_corpus: no bearings requested");
    std::vector<SyntheticCorpusEntry> manifest;
    for (std::size_t b = 0; b < bearings.size(); ++b) {
        const auto& config = bearings[b];
        const std::string bearing_id =
            "Bearing_" + condition + "_" + std::to_string(b + 1);
        const auto dir = root / condition / bearing_id;
        std::filesystem::create_directories(dir);

        Rng rng(config.seed);
        Rng vert_rng(config.seed ^ 0x5a5a5a5a5a5a5a5aULL);
        for (std::size_t m = 0; m < config.minutes; ++m) {
            const Signal minute = synthetic_minute(config, m, rng);
            std::string csv = "horizontal,vertical\n";
            for (double v : minute.samples) {
                csv += format_double(v);
                csv += ',';
                csv += format_double(config.noise_sigma * vert_rng.normal());
                csv += '\n';
            }
            write_file_atomic(dir / (std::to_string(m + 1) + ".csv"), csv);
        }
        manifest.push_back({bearing_id, config.fault_minute, config.minutes});
    }
    return manifest;
}

/// Hazard structure of the bundled supervised corpus.
enum class WeibullHazard {
    Proportional,     // log-linear scale, shared shape
    NonProportional,  // sign-interaction groups with crossing hazards
};

/// Bundled supervised corpus: standard-normal covariates, Weibull lifetimes.
/// The non-proportional variant drives the lifetime through |x1| (invisible
/// to a linear risk score, reachable by two greedy threshold splits) and
/// crosses the group hazards via different Weibull shapes.
inline SupervisedDataset weibull_corpus(std::size_t n, std::uint64_t seed,
                                        WeibullHazard hazard = WeibullHazard::NonProportional) {
    require(n >= 10, "weibull_corpus: need at least 10 records");
    Rng rng(seed);
    SupervisedDataset ds;
    ds.condition = "SIM";
    ds.provenance.seed = seed;
    ds.records.reserve(n);
    const double ln2 = std::log(2.0);
    for (std::size_t i = 0; i < n; ++i) {
        SurvivalRecord rec;
        rec.bearing_id = "sim_" + std::to_string(i % 10 + 1);
        rec.event = true;
        for (double& f : rec.features) f = rng.normal();

        const double x1 = rec.features[0];
        const double x2 = rec.features[1];
        const double x3 = rec.features[2];
        double shape = 3.0;
        double scale = 25.0 * std::exp(0.3 * x1 - 0.2 * x2 + 0.1 * x3);
        if (hazard == WeibullHazard::NonProportional) {
            const bool slow_group = std::abs(x1) > 0.6745;  // median of |x1|
            shape = slow_group ? 6.0 : 1.5;
            const double median = slow_group ? 50.0 : 20.0;
            scale = median / std::pow(ln2, 1.0 / shape) * std::exp(0.15 * x3);
        }
        rec.time = rng.weibull(shape, scale);
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

}  // namespace rulsurv
