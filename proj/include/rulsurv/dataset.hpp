#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "rulsurv/common.hpp"
#include "rulsurv/csv.hpp"
#include "rulsurv/detector.hpp"
#include "rulsurv/features.hpp"
#include "rulsurv/rng.hpp"
#include "rulsurv/stats.hpp"

namespace rulsurv {

/// One supervised observation: covariates, time to event or censoring,
/// and the event indicator (true = degradation observed).
struct SurvivalRecord {
    std::array<double, kNumFeatures> features{};
    double time = 0.0;   // minutes
    bool event = true;
    std::string bearing_id;
};

struct DatasetProvenance {
    std::size_t window_w = 0;
    int lag_l = 0;
    double censor_pct = 0.0;
    std::uint64_t seed = 0;
};

struct SupervisedDataset {
    std::vector<SurvivalRecord> records;
    std::string condition;  // C1 / C2 / C3
    DatasetProvenance provenance;

    std::vector<double> times() const {
        std::vector<double> t;
        t.reserve(records.size());
        for (const auto& r : records) t.push_back(r.time);
        return t;
    }
    std::vector<bool> events() const {
        std::vector<bool> e;
        e.reserve(records.size());
        for (const auto& r : records) e.push_back(r.event);
        return e;
    }
    std::vector<std::vector<double>> feature_matrix() const {
        std::vector<std::vector<double>> x;
        x.reserve(records.size());
        for (const auto& r : records) x.emplace_back(r.features.begin(), r.features.end());
        return x;
    }
};

/// Raw recording of one bearing: one short signal burst per recorded minute.
struct BearingRecording {
    std::string bearing_id;
    std::vector<Signal> minutes;
    std::size_t samples_per_minute = 0;

    Signal concatenated() const {
        Signal s;
        require(!minutes.empty(), "BearingRecording: no minutes");
        s.sample_rate = minutes.front().sample_rate;
        for (const auto& m : minutes) {
            s.samples.insert(s.samples.end(), m.samples.begin(), m.samples.end());
        }
        return s;
    }
};

/// Loads one bearing directory of numbered minute files (1.csv, 2.csv, ...),
/// each a two-column CSV (horizontal, vertical) with a header row. Only the
/// horizontal channel is kept. Missing or short files raise an error naming
/// the offender.
inline BearingRecording load_bearing(const std::filesystem::path& dir,
                                     double sample_rate_hz = 25600.0) {
    require(std::filesystem::is_directory(dir), "load_bearing: not a directory: " + dir.string());

    std::map<std::size_t, std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
        const std::string stem = entry.path().stem().string();
        if (stem.empty() || !std::all_of(stem.begin(), stem.end(),
                                         [](char c) { return c >= '0' && c <= '9'; })) {
            continue;
        }
        files[static_cast<std::size_t>(std::stoull(stem))] = entry.path();
    }
    require(!files.empty(), "load_bearing: no minute files in " + dir.string());

    const std::size_t last = files.rbegin()->first;
    BearingRecording rec;
    rec.bearing_id = dir.filename().string();
    std::string line;
    for (std::size_t minute = 1; minute <= last; ++minute) {
        const auto it = files.find(minute);
        require(it != files.end(), "load_bearing: missing minute file " + std::to_string(minute) +
                                       ".csv in " + dir.string());
        std::ifstream in(it->second);
        require(in.good(), "load_bearing: cannot open " + it->second.string());
        require(static_cast<bool>(std::getline(in, line)) && line.find(',') != std::string::npos,
                "load_bearing: expected two columns in " + it->second.string());

        Signal s;
        s.sample_rate = sample_rate_hz;
        if (rec.samples_per_minute > 0) s.samples.reserve(rec.samples_per_minute);
        while (std::getline(in, line)) {
            if (line.empty() || line == "\r") continue;
            require(line.find(',') != std::string::npos,
                    "load_bearing: short row in " + it->second.string());
            char* end = nullptr;
            const double v = std::strtod(line.c_str(), &end);
            require(end != line.c_str() && *end == ',',
                    "load_bearing: cannot parse row in " + it->second.string());
            s.samples.push_back(v);
        }
        if (rec.samples_per_minute == 0) {
            rec.samples_per_minute = s.samples.size();
        } else {
            require(s.samples.size() == rec.samples_per_minute,
                    "load_bearing: short file " + it->second.string() + " (" +
                        std::to_string(s.samples.size()) + " rows, expected " +
                        std::to_string(rec.samples_per_minute) + ")");
        }
        require(!s.samples.empty(), "load_bearing: short file " + it->second.string());
        rec.minutes.push_back(std::move(s));
    }
    return rec;
}

/// Per-minute feature vectors for a recording.
inline std::vector<FeatureVector> minute_features(const BearingRecording& rec,
                                                  std::size_t entropy_bins = 50) {
    std::vector<FeatureVector> out;
    out.reserve(rec.minutes.size());
    for (const auto& m : rec.minutes) out.push_back(extract_features(m.samples, entropy_bins));
    return out;
}

/// Builds supervised records for one bearing by rolling averages.
///
/// Minutes before the annotated event carry the countdown target
/// r_m = t_event - m + 1 (m = 1..t_event). Both covariates and targets are
/// averaged over w-minute windows; the lag shifts the covariate window
/// against the target window by (w - 1) + l minutes, so the per-condition
/// defaults l = -(w - 1) align the label with the window start.
inline std::vector<SurvivalRecord> to_supervised(const std::vector<FeatureVector>& per_minute,
                                                 const EventAnnotation& annotation,
                                                 std::size_t window_w, int lag_l) {
    require(window_w >= 1, "to_supervised: window must be >= 1");
    const auto t_event = static_cast<std::size_t>(std::llround(annotation.event_time_minutes));
    require(t_event <= per_minute.size(),
            "to_supervised: annotation beyond the available minutes");
    require(t_event >= window_w, "to_supervised: no usable windows (event at minute " +
                                     std::to_string(t_event) + ", window " +
                                     std::to_string(window_w) + ")");

    const int shift = static_cast<int>(window_w) - 1 + lag_l;
    std::vector<SurvivalRecord> records;
    for (std::size_t j = 0; j + window_w <= t_event; ++j) {
        const auto cov_begin = static_cast<long>(j) + shift;
        if (cov_begin < 0 || static_cast<std::size_t>(cov_begin) + window_w > t_event) continue;

        SurvivalRecord rec;
        rec.bearing_id = annotation.bearing_id;
        rec.event = true;

        std::array<double, kNumFeatures> acc{};
        for (std::size_t m = 0; m < window_w; ++m) {
            const auto f = per_minute[static_cast<std::size_t>(cov_begin) + m].to_array();
            for (std::size_t k = 0; k < kNumFeatures; ++k) acc[k] += f[k];
        }
        for (std::size_t k = 0; k < kNumFeatures; ++k) {
            rec.features[k] = acc[k] / static_cast<double>(window_w);
        }

        double target = 0.0;
        for (std::size_t m = 0; m < window_w; ++m) {
            // minute j+m (0-based) has t_event - (j+m) minutes left
            target += annotation.event_time_minutes - static_cast<double>(j + m);
        }
        rec.time = target / static_cast<double>(window_w);
        records.push_back(std::move(rec));
    }
    require(!records.empty(), "to_supervised: lag pushed every window out of range");
    return records;
}

/// Flips exactly round(pct * N) uniformly chosen records to censored and
/// redraws their times uniformly on (0, event time). Deterministic per seed;
/// features and record order are untouched.
inline SupervisedDataset apply_censoring(const SupervisedDataset& dataset, double pct,
                                         std::uint64_t seed) {
    require(pct >= 0.0 && pct < 1.0, "apply_censoring: pct must lie in [0, 1)");
    for (const auto& r : dataset.records) {
        require(r.event, "apply_censoring: dataset already contains censored records");
    }

    SupervisedDataset out = dataset;
    out.provenance.censor_pct = pct;
    out.provenance.seed = seed;
    const std::size_t n = out.records.size();
    const auto n_censor =
        static_cast<std::size_t>(std::floor(pct * static_cast<double>(n) + 0.5));
    if (n_censor == 0) return out;

    Rng rng(seed);
    std::vector<std::size_t> indices(n);
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    rng.shuffle(indices);
    indices.resize(n_censor);

    for (std::size_t i : indices) {
        auto& rec = out.records[i];
        double c = rng.uniform_open() * rec.time;
        while (c <= 0.0 || c >= rec.time) c = rng.uniform_open() * rec.time;
        rec.time = c;
        rec.event = false;
    }
    return out;
}

struct FoldSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Stratified k-fold split. Strata are the cross of the event indicator and
/// the event-time quartile (quartiles over the full dataset); each stratum is
/// shuffled and dealt round-robin so fold proportions track the global ones.
inline std::vector<FoldSplit> stratified_kfold(const SupervisedDataset& dataset, std::size_t k,
                                               std::uint64_t seed) {
    const std::size_t n = dataset.records.size();
    require(k >= 2, "stratified_kfold: need k >= 2");
    require(n >= k, "stratified_kfold: fewer records than folds");

    const auto times = dataset.times();
    const double q1 = quantile(times, 0.25);
    const double q2 = quantile(times, 0.50);
    const double q3 = quantile(times, 0.75);
    // censored strata first, then uncensored: dealing each block through a
    // continuous cursor keeps the censoring marginal of every fold within
    // one record of the global fraction
    auto stratum_of = [&](const SurvivalRecord& r) {
        std::size_t bin = 3;
        if (r.time <= q1) {
            bin = 0;
        } else if (r.time <= q2) {
            bin = 1;
        } else if (r.time <= q3) {
            bin = 2;
        }
        return (r.event ? 4 : 0) + bin;
    };

    std::map<std::size_t, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < n; ++i) strata[stratum_of(dataset.records[i])].push_back(i);

    Rng rng(seed);
    std::vector<std::vector<std::size_t>> fold_test(k);
    std::size_t cursor = 0;  // continues across strata to balance fold sizes
    for (auto& [key, members] : strata) {
        rng.shuffle(members);
        for (std::size_t i : members) {
            fold_test[cursor % k].push_back(i);
            ++cursor;
        }
    }

    std::vector<FoldSplit> splits(k);
    for (std::size_t f = 0; f < k; ++f) {
        std::sort(fold_test[f].begin(), fold_test[f].end());
        splits[f].test = fold_test[f];
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::binary_search(fold_test[f].begin(), fold_test[f].end(), i)) {
                splits[f].train.push_back(i);
            }
        }
    }
    return splits;
}

/// Per-feature z-score statistics, fitted on a training split only.
struct NormalizationStats {
    std::array<double, kNumFeatures> means{};
    std::array<double, kNumFeatures> sds{};  // population form
};

inline NormalizationStats zscore_fit(const SupervisedDataset& dataset,
                                     std::span<const std::size_t> indices = {}) {
    std::vector<std::size_t> all;
    if (indices.empty()) {
        all.resize(dataset.records.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        indices = all;
    }
    require(!indices.empty(), "zscore_fit: empty training split");

    NormalizationStats stats;
    const auto n = static_cast<double>(indices.size());
    for (std::size_t k = 0; k < kNumFeatures; ++k) {
        double sum = 0.0;
        for (std::size_t i : indices) sum += dataset.records[i].features[k];
        const double mu = sum / n;
        double ss = 0.0;
        for (std::size_t i : indices) {
            const double d = dataset.records[i].features[k] - mu;
            ss += d * d;
        }
        const double sd = std::sqrt(ss / n);
        require(sd > 0.0, "zscore_fit: constant training feature '" + feature_names()[k] + "'");
        stats.means[k] = mu;
        stats.sds[k] = sd;
    }
    return stats;
}

inline SupervisedDataset zscore_apply(const NormalizationStats& stats,
                                      const SupervisedDataset& dataset) {
    SupervisedDataset out = dataset;
    for (auto& rec : out.records) {
        for (std::size_t k = 0; k < kNumFeatures; ++k) {
            rec.features[k] = (rec.features[k] - stats.means[k]) / stats.sds[k];
        }
    }
    return out;
}

inline std::vector<double> zscore_apply(const NormalizationStats& stats,
                                        std::span<const double> features) {
    require(features.size() == kNumFeatures, "zscore_apply: feature dimension mismatch");
    std::vector<double> out(kNumFeatures);
    for (std::size_t k = 0; k < kNumFeatures; ++k) {
        out[k] = (features[k] - stats.means[k]) / stats.sds[k];
    }
    return out;
}

/// Persists a dataset as CSV: the twelve canonical feature columns, then
/// time, event, bearing_id.
inline void save_dataset(const SupervisedDataset& dataset, const std::filesystem::path& path) {
    std::string out;
    for (const auto& name : feature_names()) {
        out += name;
        out += ',';
    }
    out += "time,event,bearing_id\n";
    for (const auto& rec : dataset.records) {
        for (double f : rec.features) {
            out += format_double(f);
            out += ',';
        }
        out += format_double(rec.time);
        out += ',';
        out += rec.event ? '1' : '0';
        out += ',';
        out += rec.bearing_id;
        out += '\n';
    }
    write_file_atomic(path, out);
}

inline SupervisedDataset load_dataset(const std::filesystem::path& path) {
    const auto [header, rows] = read_csv(path);
    require(header.size() == kNumFeatures + 3,
            "load_dataset: unexpected column count in " + path.string());
    for (std::size_t k = 0; k < kNumFeatures; ++k) {
        require(header[k] == feature_names()[k],
                "load_dataset: column " + std::to_string(k) + " is '" + header[k] +
                    "', expected '" + feature_names()[k] + "'");
    }
    require(header[kNumFeatures] == "time" && header[kNumFeatures + 1] == "event" &&
                header[kNumFeatures + 2] == "bearing_id",
            "load_dataset: trailing columns must be time,event,bearing_id");

    SupervisedDataset ds;
    for (const auto& row : rows) {
        require(row.size() == header.size(), "load_dataset: ragged row in " + path.string());
        SurvivalRecord rec;
        for (std::size_t k = 0; k < kNumFeatures; ++k) {
            rec.features[k] = parse_double(row[k], path.string());
        }
        rec.time = parse_double(row[kNumFeatures], path.string());
        rec.event = row[kNumFeatures + 1] == "1";
        rec.bearing_id = row[kNumFeatures + 2];
        ds.records.push_back(std::move(rec));
    }
    require(!ds.records.empty(), "load_dataset: no records in " + path.string());
    return ds;
}

}  // namespace rulsurv
