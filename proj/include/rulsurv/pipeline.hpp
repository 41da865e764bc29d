#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "rulsurv/common.hpp"
#include "rulsurv/csv.hpp"
#include "rulsurv/dataset.hpp"
#include "rulsurv/detector.hpp"
#include "rulsurv/eval.hpp"
#include "rulsurv/model_io.hpp"
#include "rulsurv/synthetic.hpp"

namespace rulsurv {

/// Everything a pipeline run needs. Field defaults follow the operating
/// condition where they differ (C1/C2/C3 = high/medium/low load).
struct RunConfig {
    std::filesystem::path dataset_root;
    std::string condition = "C1";
    std::filesystem::path out_dir = "out";
    std::uint64_t seed = 42;

    // acquisition
    double sample_rate_hz = 25600.0;
    BearingGeometry geometry{8, 7.92, 34.55, 0.0};
    double shaft_rpm = 0.0;  // 0 = per-condition default

    // detector
    double window_seconds = 600.0;
    double eta = 5.0;
    double lambda_kl = 0.0;  // 0 = per-condition default
    std::size_t n_bins = 50;
    double half_width_hz = 5.0;

    // supervision
    std::size_t rolling_window = 0;  // 0 = per-condition default
    int rolling_lag = 1;             // sentinel; defaults pair with the window
    double censor_pct = 0.0;

    // modeling; zero-valued knobs fall back to the per-condition defaults
    std::string model = "rsf";
    std::size_t folds = 5;
    double cox_tolerance = 1e-9;
    std::size_t cox_max_iterations = 100;
    std::size_t rsf_trees = 0;
    std::size_t rsf_min_split = 0;
    std::size_t rsf_min_leaf = 0;
    std::size_t rsf_max_depth = 0;
    std::size_t mtlr_epochs = 5000;
    std::size_t mtlr_hidden = 0;
    std::size_t mtlr_batch_size = 0;
    double mtlr_learning_rate = 8e-5;
    double mtlr_penalty = 0.01;
    double mtlr_dropout = 0.25;
    bool mtlr_early_stopping = false;

    // report stage
    std::vector<std::string> report_covariates = {"absolute_mean", "rms", "peak_to_peak"};

    double shaft_speed_hz() const {
        if (shaft_rpm > 0.0) return shaft_rpm / 60.0;
        if (condition == "C2") return 2250.0 / 60.0;
        if (condition == "C3") return 2400.0 / 60.0;
        return 2100.0 / 60.0;
    }
    double lambda_kl_effective() const {
        if (lambda_kl > 0.0) return lambda_kl;
        if (condition == "C2") return 1.75;
        if (condition == "C3") return 2.0;
        return 1.5;
    }
    std::size_t rolling_window_effective() const {
        if (rolling_window > 0) return rolling_window;
        if (condition == "C2") return 4;
        if (condition == "C3") return 6;
        return 2;
    }
    int rolling_lag_effective() const {
        if (rolling_lag <= 0) return rolling_lag;
        return -(static_cast<int>(rolling_window_effective()) - 1);
    }
    CoxConfig cox_config() const { return {cox_tolerance, cox_max_iterations}; }
    RsfConfig rsf_config() const {
        RsfConfig c;
        if (condition == "C2") {
            c = {200, 10, 5, 5, 32, 0, 0};
        } else if (condition == "C3") {
            c = {400, 20, 10, 10, 32, 0, 0};
        } else {
            c = {100, 5, 3, 3, 32, 0, 0};
        }
        if (rsf_trees > 0) c.n_trees = rsf_trees;
        if (rsf_min_split > 0) c.min_split = rsf_min_split;
        if (rsf_min_leaf > 0) c.min_leaf = rsf_min_leaf;
        if (rsf_max_depth > 0) c.max_depth = rsf_max_depth;
        c.seed = seed;
        return c;
    }
    MtlrConfig mtlr_config() const {
        MtlrConfig c;
        c.batch_size = mtlr_batch_size > 0
                           ? mtlr_batch_size
                           : (condition == "C2" ? 64 : (condition == "C3" ? 128 : 32));
        c.epochs = mtlr_epochs;
        c.hidden_size = mtlr_hidden;
        c.learning_rate = mtlr_learning_rate;
        c.penalty = mtlr_penalty;
        c.dropout = mtlr_dropout;
        c.early_stopping = mtlr_early_stopping;
        c.seed = seed;
        return c;
    }
    DetectorConfig detector_config(double end_of_life_minutes,
                                   std::size_t samples_per_minute) const {
        DetectorConfig c;
        c.window_seconds = window_seconds;
        c.eta = eta;
        c.lambda_kl = lambda_kl_effective();
        c.end_of_life_minutes = end_of_life_minutes;
        c.n_bins = n_bins;
        c.half_width_hz = half_width_hz;
        c.samples_per_minute = samples_per_minute;
        return c;
    }
};

namespace detail {

using nlohmann::json;

inline void assign_config_field(RunConfig& cfg, const std::string& key, const json& value) {
    if (key == "dataset_root") {
        cfg.dataset_root = value.get<std::string>();
    } else if (key == "condition") {
        cfg.condition = value.get<std::string>();
    } else if (key == "out_dir") {
        cfg.out_dir = value.get<std::string>();
    } else if (key == "seed") {
        cfg.seed = value.get<std::uint64_t>();
    } else if (key == "sample_rate_hz") {
        cfg.sample_rate_hz = value.get<double>();
    } else if (key == "geometry") {
        cfg.geometry.n_rollers = value.at("n_rollers").get<int>();
        cfg.geometry.roller_diameter_mm = value.at("roller_diameter_mm").get<double>();
        cfg.geometry.pitch_diameter_mm = value.at("pitch_diameter_mm").get<double>();
        cfg.geometry.contact_angle_deg = value.value("contact_angle_deg", 0.0);
    } else if (key == "shaft_rpm") {
        cfg.shaft_rpm = value.get<double>();
    } else if (key == "window_seconds") {
        cfg.window_seconds = value.get<double>();
    } else if (key == "eta") {
        cfg.eta = value.get<double>();
    } else if (key == "lambda_kl") {
        cfg.lambda_kl = value.get<double>();
    } else if (key == "n_bins") {
        cfg.n_bins = value.get<std::size_t>();
    } else if (key == "half_width_hz") {
        cfg.half_width_hz = value.get<double>();
    } else if (key == "rolling_window") {
        cfg.rolling_window = value.get<std::size_t>();
    } else if (key == "rolling_lag") {
        cfg.rolling_lag = value.get<int>();
    } else if (key == "censor_pct") {
        cfg.censor_pct = value.get<double>();
    } else if (key == "model") {
        cfg.model = value.get<std::string>();
    } else if (key == "folds") {
        cfg.folds = value.get<std::size_t>();
    } else if (key == "cox_tolerance") {
        cfg.cox_tolerance = value.get<double>();
    } else if (key == "cox_max_iterations") {
        cfg.cox_max_iterations = value.get<std::size_t>();
    } else if (key == "rsf_trees") {
        cfg.rsf_trees = value.get<std::size_t>();
    } else if (key == "rsf_min_split") {
        cfg.rsf_min_split = value.get<std::size_t>();
    } else if (key == "rsf_min_leaf") {
        cfg.rsf_min_leaf = value.get<std::size_t>();
    } else if (key == "rsf_max_depth") {
        cfg.rsf_max_depth = value.get<std::size_t>();
    } else if (key == "mtlr_epochs") {
        cfg.mtlr_epochs = value.get<std::size_t>();
    } else if (key == "mtlr_hidden") {
        cfg.mtlr_hidden = value.get<std::size_t>();
    } else if (key == "mtlr_batch_size") {
        cfg.mtlr_batch_size = value.get<std::size_t>();
    } else if (key == "mtlr_learning_rate") {
        cfg.mtlr_learning_rate = value.get<double>();
    } else if (key == "mtlr_penalty") {
        cfg.mtlr_penalty = value.get<double>();
    } else if (key == "mtlr_dropout") {
        cfg.mtlr_dropout = value.get<double>();
    } else if (key == "mtlr_early_stopping") {
        cfg.mtlr_early_stopping = value.get<bool>();
    } else if (key == "report_covariates") {
        cfg.report_covariates = value.get<std::vector<std::string>>();
    } else {
        throw error("config: unknown key '" + key + "'");
    }
}

}  // namespace detail

/// Loads a JSON config file; unknown keys are rejected so typos surface.
inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), "config: cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw error("config: malformed JSON in " + path.string() + ": " + e.what());
    }
    require(j.is_object(), "config: top level must be an object");
    RunConfig cfg;
    for (const auto& [key, value] : j.items()) {
        try {
            detail::assign_config_field(cfg, key, value);
        } catch (const nlohmann::json::exception& e) {
            throw error("config: bad value for '" + key + "': " + e.what());
        }
    }
    return cfg;
}

inline void validate_model_selector(const std::string& model) {
    const auto& names = model_selectors();
    if (std::find(names.begin(), names.end(), model) == names.end()) {
        std::string valid;
        for (const auto& n : names) valid += (valid.empty() ? "" : ", ") + n;
        throw error("unknown model selector '" + model + "'; valid selectors: " + valid);
    }
}

struct StageResult {
    std::vector<std::string> outputs;
    std::vector<std::string> failures;  // per-bearing problems that did not stop the run
};

namespace detail {

inline std::vector<std::filesystem::path> bearing_directories(const RunConfig& cfg) {
    const auto cond_dir = cfg.dataset_root / cfg.condition;
    require(std::filesystem::is_directory(cond_dir),
            "dataset root has no directory for condition " + cfg.condition + ": " +
                cond_dir.string());
    std::vector<std::filesystem::path> dirs;
    for (const auto& entry : std::filesystem::directory_iterator(cond_dir)) {
        if (entry.is_directory()) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    require(!dirs.empty(), "no bearing directories under " + cond_dir.string());
    return dirs;
}

inline std::string trace_csv(const BandTrace& trace) {
    std::string csv = "window,kl,delta_kl,threshold\n";
    for (std::size_t w = 0; w < trace.kl_values.size(); ++w) {
        csv += std::to_string(w);
        csv += ',';
        csv += format_double(trace.kl_values[w]);
        csv += ',';
        if (w >= 1) csv += format_double(trace.deltas[w - 1]);
        csv += ',';
        if (const auto th = trace.threshold_at(w)) csv += format_double(*th);
        csv += '\n';
    }
    return csv;
}

inline nlohmann::json annotation_to_json(const EventAnnotation& a) {
    nlohmann::json bands = nlohmann::json::array();
    for (const auto& trace : a.per_band) {
        nlohmann::json b{{"band", trace.band_label}};
        if (trace.detected_window) {
            b["detected_window"] = *trace.detected_window;
        } else {
            b["detected_window"] = nullptr;
        }
        bands.push_back(std::move(b));
    }
    return nlohmann::json{{"bearing_id", a.bearing_id},
                          {"event_time_minutes", a.event_time_minutes},
                          {"end_of_life_minutes", a.end_of_life_minutes},
                          {"bands", std::move(bands)}};
}

}  // namespace detail

/// detect: annotate degradation onset per bearing; emits one annotation JSON
/// per bearing and one trace CSV per critical band. A bearing that cannot be
/// read is reported and skipped; the run continues.
inline StageResult cmd_detect(const RunConfig& cfg) {
    StageResult result;
    const auto annotations_dir = cfg.out_dir / "annotations";
    const auto traces_dir = cfg.out_dir / "traces";

    for (const auto& dir : detail::bearing_directories(cfg)) {
        try {
            const BearingRecording rec = load_bearing(dir, cfg.sample_rate_hz);
            const auto minutes = static_cast<double>(rec.minutes.size());
            const DetectorConfig dc = cfg.detector_config(minutes, rec.samples_per_minute);
            EventAnnotation annotation =
                detect_event(rec.concatenated(), cfg.geometry, cfg.shaft_speed_hz(), dc);
            annotation.bearing_id = rec.bearing_id;

            const auto ann_path = annotations_dir / (rec.bearing_id + ".json");
            write_file_atomic(ann_path, detail::annotation_to_json(annotation).dump(2) + "\n");
            result.outputs.push_back(ann_path.string());
            for (const auto& trace : annotation.per_band) {
                const auto trace_path =
                    traces_dir / (rec.bearing_id + "_" + trace.band_label + ".csv");
                write_file_atomic(trace_path, detail::trace_csv(trace));
                result.outputs.push_back(trace_path.string());
            }
        } catch (const error& e) {
            result.failures.push_back(dir.filename().string() + ": " + e.what());
        }
    }
    return result;
}

/// featurize: per-bearing CSV of the twelve per-minute features.
inline StageResult cmd_featurize(const RunConfig& cfg) {
    StageResult result;
    const auto features_dir = cfg.out_dir / "features";
    for (const auto& dir : detail::bearing_directories(cfg)) {
        try {
            const BearingRecording rec = load_bearing(dir, cfg.sample_rate_hz);
            const auto feats = minute_features(rec, cfg.n_bins);
            std::string csv = "minute";
            for (const auto& name : feature_names()) csv += "," + name;
            csv += '\n';
            for (std::size_t m = 0; m < feats.size(); ++m) {
                csv += std::to_string(m + 1);
                for (double v : feats[m].to_array()) {
                    csv += ',';
                    csv += format_double(v);
                }
                csv += '\n';
            }
            const auto path = features_dir / (rec.bearing_id + ".csv");
            write_file_atomic(path, csv);
            result.outputs.push_back(path.string());
        } catch (const error& e) {
            result.failures.push_back(dir.filename().string() + ": " + e.what());
        }
    }
    return result;
}

/// label: joins annotations and per-minute features into a supervised
/// dataset, optionally censors it, and persists CSV + sidecar metadata.
/// Pre-censoring event times are kept in a truth file for error analysis.
inline StageResult cmd_label(const RunConfig& cfg) {
    StageResult result;
    const auto annotations_dir = cfg.out_dir / "annotations";
    const auto features_dir = cfg.out_dir / "features";
    require(std::filesystem::is_directory(annotations_dir),
            "label: no annotations found; run the detect stage first");
    require(std::filesystem::is_directory(features_dir),
            "label: no features found; run the featurize stage first");

    SupervisedDataset dataset;
    dataset.condition = cfg.condition;
    dataset.provenance.window_w = cfg.rolling_window_effective();
    dataset.provenance.lag_l = cfg.rolling_lag_effective();
    dataset.provenance.seed = cfg.seed;

    std::vector<std::filesystem::path> annotation_files;
    for (const auto& entry : std::filesystem::directory_iterator(annotations_dir)) {
        if (entry.path().extension() == ".json") annotation_files.push_back(entry.path());
    }
    std::sort(annotation_files.begin(), annotation_files.end());
    require(!annotation_files.empty(), "label: annotations directory is empty");

    for (const auto& ann_path : annotation_files) {
        std::ifstream in(ann_path);
        nlohmann::json aj;
        in >> aj;
        EventAnnotation annotation;
        annotation.bearing_id = aj.at("bearing_id").get<std::string>();
        annotation.event_time_minutes = aj.at("event_time_minutes").get<double>();
        annotation.end_of_life_minutes = aj.at("end_of_life_minutes").get<double>();

        const auto feat_path = features_dir / (annotation.bearing_id + ".csv");
        require(std::filesystem::exists(feat_path),
                "label: missing features for " + annotation.bearing_id +
                    "; run the featurize stage first");
        const auto [header, rows] = read_csv(feat_path);
        require(header.size() == kNumFeatures + 1, "label: bad feature file " + feat_path.string());
        std::vector<FeatureVector> per_minute;
        per_minute.reserve(rows.size());
        for (const auto& row : rows) {
            std::array<double, kNumFeatures> a{};
            for (std::size_t k = 0; k < kNumFeatures; ++k) {
                a[k] = parse_double(row[k + 1], feat_path.string());
            }
            per_minute.push_back(FeatureVector::from_array(a));
        }

        auto records = to_supervised(per_minute, annotation, dataset.provenance.window_w,
                                     dataset.provenance.lag_l);
        dataset.records.insert(dataset.records.end(), records.begin(), records.end());
    }

    const auto dataset_path = cfg.out_dir / "dataset.csv";
    if (cfg.censor_pct > 0.0) {
        // hold the pre-censoring times aside, then censor
        std::string truth = "true_time\n";
        for (const auto& rec : dataset.records) truth += format_double(rec.time) + "\n";
        write_file_atomic(cfg.out_dir / "dataset.truth.csv", truth);
        result.outputs.push_back((cfg.out_dir / "dataset.truth.csv").string());
        dataset = apply_censoring(dataset, cfg.censor_pct, cfg.seed);
    } else {
        std::filesystem::remove(cfg.out_dir / "dataset.truth.csv");  // no stale truth
    }
    save_dataset(dataset, dataset_path);
    result.outputs.push_back(dataset_path.string());

    const nlohmann::json meta{{"condition", dataset.condition},
                              {"rolling_window", dataset.provenance.window_w},
                              {"rolling_lag", dataset.provenance.lag_l},
                              {"censor_pct", cfg.censor_pct},
                              {"seed", cfg.seed}};
    write_file_atomic(cfg.out_dir / "dataset.meta.json", meta.dump(2) + "\n");
    result.outputs.push_back((cfg.out_dir / "dataset.meta.json").string());
    return result;
}

namespace detail {

inline SupervisedDataset load_labeled_dataset(const RunConfig& cfg) {
    const auto path = cfg.out_dir / "dataset.csv";
    require(std::filesystem::exists(path),
            "no labeled dataset at " + path.string() + "; run the label stage first");
    return load_dataset(path);
}

inline FittedModel fit_model(const RunConfig& cfg, const std::string& kind,
                             const SupervisedDataset& train_raw) {
    FittedModel model;
    model.kind = kind;
    model.normalization = zscore_fit(train_raw);
    const SupervisedDataset train = zscore_apply(model.normalization, train_raw);
    const auto times = train.times();
    const auto events = train.events();
    const auto x = train.feature_matrix();
    if (kind == "km") {
        model.km = km_fit(times, events);
    } else if (kind == "cox") {
        model.cox = cox_fit(x, times, events, cfg.cox_config());
    } else if (kind == "rsf") {
        model.rsf = rsf_fit(x, times, events, cfg.rsf_config());
    } else if (kind == "mtlr") {
        model.mtlr = mtlr_fit(x, times, events, cfg.mtlr_config());
    } else {
        validate_model_selector(kind);
    }
    return model;
}

}  // namespace detail

/// train: fits the selected model on the full labeled dataset and writes the
/// serialized model for later evaluation.
inline StageResult cmd_train(const RunConfig& cfg) {
    validate_model_selector(cfg.model);
    const SupervisedDataset dataset = detail::load_labeled_dataset(cfg);
    const FittedModel model = detail::fit_model(cfg, cfg.model, dataset);
    const auto path = cfg.out_dir / (cfg.model + "_model.json");
    save_model(model, path);
    return {{path.string()}, {}};
}

/// One fold's (or one split's) metric set; field names are fixed so reports
/// can be regenerated into tables.
struct FoldReport {
    double mae_hinge = 0.0;
    double mae_margin = 0.0;
    double mae_pseudo = 0.0;
    std::optional<double> true_mae_value;
    std::optional<double> emae_hinge;
    std::optional<double> emae_margin;
    std::optional<double> emae_pseudo;
    std::optional<double> d_cal_p;
    std::array<std::size_t, 10> d_cal_counts{};
    std::map<std::string, double> cra_per_bearing;
    // curves that never reach S = 0.5, whose median fell back to the grid end
    std::size_t n_median_clamped = 0;
};

struct EvaluationReport {
    std::vector<FoldReport> folds;
    std::map<std::string, std::pair<double, double>> aggregate;  // metric -> (mean, sd)
};

namespace detail {

inline void aggregate_metric(EvaluationReport& report, const std::string& name,
                             const std::vector<double>& values) {
    if (values.empty()) return;
    const double m = mean(values);
    double sd = 0.0;
    if (values.size() >= 2) sd = stddev_sample(values);
    report.aggregate[name] = {m, sd};
}

inline nlohmann::json report_to_json(const EvaluationReport& report) {
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& f : report.folds) {
        nlohmann::json j{{"mae_hinge", f.mae_hinge},
                         {"mae_margin", f.mae_margin},
                         {"mae_pseudo", f.mae_pseudo}};
        j["true_mae"] = f.true_mae_value ? nlohmann::json(*f.true_mae_value) : nullptr;
        j["emae_hinge"] = f.emae_hinge ? nlohmann::json(*f.emae_hinge) : nullptr;
        j["emae_margin"] = f.emae_margin ? nlohmann::json(*f.emae_margin) : nullptr;
        j["emae_pseudo"] = f.emae_pseudo ? nlohmann::json(*f.emae_pseudo) : nullptr;
        j["d_cal_p"] = f.d_cal_p ? nlohmann::json(*f.d_cal_p) : nullptr;
        j["d_cal_counts"] = f.d_cal_counts;
        j["cra"] = f.cra_per_bearing;
        j["n_median_clamped"] = f.n_median_clamped;
        folds.push_back(std::move(j));
    }
    nlohmann::json agg;
    for (const auto& [name, ms] : report.aggregate) {
        agg[name] = {{"mean", ms.first}, {"sd", ms.second}};
    }
    return nlohmann::json{{"folds", std::move(folds)}, {"aggregate", std::move(agg)}};
}

inline std::string report_table_csv(const EvaluationReport& report) {
    std::string csv = "metric,mean,sd,formatted\n";
    for (const auto& [name, ms] : report.aggregate) {
        char formatted[64];
        std::snprintf(formatted, sizeof(formatted), "%.1f+-%.1f", ms.first, ms.second);
        csv += name + "," + format_double(ms.first) + "," + format_double(ms.second) + "," +
               formatted + "\n";
    }
    return csv;
}

}  // namespace detail

/// evaluate: stratified k-fold protocol over the labeled dataset. Each fold
/// normalizes on its training split, fits the selected model, predicts
/// median survival times for the test split and scores the censoring-aware
/// MAE family, D-calibration and per-bearing CRA. True-MAE columns appear
/// when the label stage kept a truth file.
inline EvaluationReport cmd_evaluate(const RunConfig& cfg) {
    validate_model_selector(cfg.model);
    const SupervisedDataset dataset = detail::load_labeled_dataset(cfg);

    std::vector<double> truth;  // pre-censoring event times, aligned with records
    const auto truth_path = cfg.out_dir / "dataset.truth.csv";
    if (std::filesystem::exists(truth_path)) {
        const auto [header, rows] = read_csv(truth_path);
        require(header.size() == 1 && header[0] == "true_time",
                "evaluate: malformed truth file " + truth_path.string());
        require(rows.size() == dataset.records.size(),
                "evaluate: truth file does not match the dataset");
        for (const auto& row : rows) truth.push_back(parse_double(row[0], truth_path.string()));
    } else if (std::all_of(dataset.records.begin(), dataset.records.end(),
                           [](const SurvivalRecord& r) { return r.event; })) {
        truth = dataset.times();
    }

    const auto splits = stratified_kfold(dataset, cfg.folds, cfg.seed);
    EvaluationReport report;

    for (const auto& split : splits) {
        SupervisedDataset train_raw;
        train_raw.condition = dataset.condition;
        for (std::size_t i : split.train) train_raw.records.push_back(dataset.records[i]);

        const FittedModel model = detail::fit_model(cfg, cfg.model, train_raw);

        std::vector<double> predictions;
        std::vector<double> test_times;
        std::vector<bool> test_events;
        std::vector<double> test_truth;
        std::vector<SurvivalCurve> curves;
        std::size_t n_clamped = 0;
        for (std::size_t i : split.test) {
            const auto& rec = dataset.records[i];
            SurvivalCurve curve = model.predict(rec.features);
            require(curve.valid(), "evaluate: model emitted an invalid survival curve");
            predictions.push_back(median_survival_time(curve));
            if (curve.probabilities.back() > 0.5) ++n_clamped;
            curves.push_back(std::move(curve));
            test_times.push_back(rec.time);
            test_events.push_back(rec.event);
            if (!truth.empty()) test_truth.push_back(truth[i]);
        }

        FoldReport fold;
        fold.n_median_clamped = n_clamped;
        const SurvivalCurve train_km = km_fit(train_raw.times(), train_raw.events());
        fold.mae_hinge = mae_hinge(predictions, test_times, test_events);
        fold.mae_margin = mae_margin(predictions, test_times, test_events, train_km);
        fold.mae_pseudo = mae_pseudo(predictions, test_times, test_events, train_raw.times(),
                                     train_raw.events());
        if (!test_truth.empty()) {
            fold.true_mae_value = true_mae(predictions, test_truth);
            fold.emae_hinge = emae(*fold.true_mae_value, fold.mae_hinge);
            fold.emae_margin = emae(*fold.true_mae_value, fold.mae_margin);
            fold.emae_pseudo = emae(*fold.true_mae_value, fold.mae_pseudo);
        }
        try {
            const DCalibration dcal = d_calibration(curves, test_times, test_events);
            fold.d_cal_p = dcal.p_value;
            fold.d_cal_counts = dcal.decile_counts;
        } catch (const error&) {
            // too few uncensored test records for the chi-square test
        }

        // single-inspection CRA per bearing: the record earliest in life
        std::map<std::string, std::size_t> first_record;
        for (std::size_t k = 0; k < split.test.size(); ++k) {
            const auto& rec = dataset.records[split.test[k]];
            if (!rec.event && truth.empty()) continue;  // need a positive actual RUL
            const auto it = first_record.find(rec.bearing_id);
            if (it == first_record.end() ||
                rec.time > dataset.records[split.test[it->second]].time) {
                first_record[rec.bearing_id] = k;
            }
        }
        for (const auto& [bearing, k] : first_record) {
            const double actual =
                truth.empty() ? test_times[k] : test_truth[k];
            if (actual <= 0.0) continue;
            const double prediction = predictions[k];
            fold.cra_per_bearing[bearing] =
                cra(std::vector<double>{prediction}, std::vector<double>{actual});
        }
        report.folds.push_back(std::move(fold));
    }

    std::vector<double> hinge_v;
    std::vector<double> margin_v;
    std::vector<double> pseudo_v;
    std::vector<double> true_v;
    std::vector<double> eh_v;
    std::vector<double> em_v;
    std::vector<double> ep_v;
    std::vector<double> dcal_v;
    std::vector<double> cra_v;
    for (const auto& f : report.folds) {
        hinge_v.push_back(f.mae_hinge);
        margin_v.push_back(f.mae_margin);
        pseudo_v.push_back(f.mae_pseudo);
        if (f.true_mae_value) true_v.push_back(*f.true_mae_value);
        if (f.emae_hinge) eh_v.push_back(*f.emae_hinge);
        if (f.emae_margin) em_v.push_back(*f.emae_margin);
        if (f.emae_pseudo) ep_v.push_back(*f.emae_pseudo);
        if (f.d_cal_p) dcal_v.push_back(*f.d_cal_p);
        for (const auto& [bearing, value] : f.cra_per_bearing) cra_v.push_back(value);
    }
    detail::aggregate_metric(report, "mae_hinge", hinge_v);
    detail::aggregate_metric(report, "mae_margin", margin_v);
    detail::aggregate_metric(report, "mae_pseudo", pseudo_v);
    detail::aggregate_metric(report, "true_mae", true_v);
    detail::aggregate_metric(report, "emae_hinge", eh_v);
    detail::aggregate_metric(report, "emae_margin", em_v);
    detail::aggregate_metric(report, "emae_pseudo", ep_v);
    detail::aggregate_metric(report, "d_cal_p", dcal_v);
    detail::aggregate_metric(report, "cra", cra_v);

    const auto reports_dir = cfg.out_dir / "reports";
    write_file_atomic(reports_dir / (cfg.model + "_report.json"),
                      detail::report_to_json(report).dump(2) + "\n");
    write_file_atomic(reports_dir / (cfg.model + "_report.csv"),
                      detail::report_table_csv(report));
    return report;
}

/// report: regenerates the plot data bundles: KM with best/worst bounds per
/// censoring level, mean predicted curves next to KM, and covariate-stratified
/// curves at the quartile cuts.
inline StageResult cmd_report(const RunConfig& cfg) {
    StageResult result;
    const SupervisedDataset dataset = detail::load_labeled_dataset(cfg);
    const auto report_dir = cfg.out_dir / "report_data";

    // KM bounds per censoring level
    {
        std::size_t n_censored = 0;
        for (const auto& r : dataset.records) n_censored += r.event ? 0 : 1;
        std::vector<std::pair<double, SupervisedDataset>> levels;
        if (n_censored > 0) {
            const double observed_pct =
                static_cast<double>(n_censored) / static_cast<double>(dataset.records.size());
            levels.emplace_back(observed_pct, dataset);
        } else {
            for (double pct : {0.25, 0.5, 0.75}) {
                levels.emplace_back(pct, apply_censoring(dataset, pct, cfg.seed));
            }
        }
        std::string csv = "censor_pct,time,km,upper,lower\n";
        for (const auto& [pct, ds] : levels) {
            const auto times = ds.times();
            const auto events = ds.events();
            const SurvivalCurve km = km_fit(times, events);
            const auto [upper, lower] = km_bounds(times, events);
            std::vector<double> grid = times;
            std::sort(grid.begin(), grid.end());
            grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
            for (double t : grid) {
                csv += format_double(pct) + "," + format_double(t) + "," +
                       format_double(km.eval(t)) + "," + format_double(upper.eval(t)) + "," +
                       format_double(lower.eval(t)) + "\n";
            }
        }
        write_file_atomic(report_dir / "km_bounds.csv", csv);
        result.outputs.push_back((report_dir / "km_bounds.csv").string());
    }

    // mean predicted curves vs the KM estimate on a 70/30 split
    {
        Rng rng(cfg.seed);
        std::vector<std::size_t> order(dataset.records.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order);
        const std::size_t n_train = order.size() * 7 / 10;
        require(n_train >= 2 && n_train < order.size(), "report: dataset too small to split");

        SupervisedDataset train_raw;
        train_raw.condition = dataset.condition;
        std::vector<std::size_t> test_idx(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                                          order.end());
        for (std::size_t i = 0; i < n_train; ++i) {
            train_raw.records.push_back(dataset.records[order[i]]);
        }

        std::vector<double> grid;
        for (std::size_t i : test_idx) grid.push_back(dataset.records[i].time);
        std::sort(grid.begin(), grid.end());
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

        std::vector<double> test_times;
        std::vector<bool> test_events;
        for (std::size_t i : test_idx) {
            test_times.push_back(dataset.records[i].time);
            test_events.push_back(dataset.records[i].event);
        }
        const SurvivalCurve km = km_fit(test_times, test_events);

        std::string csv = "time,km";
        std::vector<std::pair<std::string, SurvivalCurve>> model_means;
        for (const std::string kind : {"cox", "rsf", "mtlr"}) {
            const FittedModel model = detail::fit_model(cfg, kind, train_raw);
            std::vector<SurvivalCurve> curves;
            for (std::size_t i : test_idx) {
                curves.push_back(model.predict(dataset.records[i].features));
            }
            model_means.emplace_back(kind, mean_curve(curves));
            csv += "," + kind;
        }
        csv += '\n';
        for (double t : grid) {
            csv += format_double(t) + "," + format_double(km.eval(t));
            for (const auto& [kind, curve] : model_means) {
                csv += "," + format_double(curve.eval(t));
            }
            csv += '\n';
        }
        write_file_atomic(report_dir / "mean_curves.csv", csv);
        result.outputs.push_back((report_dir / "mean_curves.csv").string());
    }

    // stratified curves for the requested covariates at the quartile cuts
    {
        Rng rng(Rng::fork(cfg.seed, 1).next_u64());
        std::vector<std::size_t> order(dataset.records.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order);
        const std::size_t n_train = order.size() * 8 / 10;
        require(n_train >= 2 && n_train < order.size(), "report: dataset too small to split");

        SupervisedDataset train_raw;
        train_raw.condition = dataset.condition;
        for (std::size_t i = 0; i < n_train; ++i) {
            train_raw.records.push_back(dataset.records[order[i]]);
        }
        const FittedModel model = detail::fit_model(cfg, cfg.model, train_raw);

        std::vector<std::vector<double>> test_features;
        for (std::size_t i = n_train; i < order.size(); ++i) {
            const auto& f = dataset.records[order[i]].features;
            test_features.emplace_back(f.begin(), f.end());
        }

        std::string csv = "covariate,quantile,curve,time,probability\n";
        for (const auto& name : cfg.report_covariates) {
            const auto& names = feature_names();
            const auto it = std::find(names.begin(), names.end(), name);
            require(it != names.end(), "report: unknown covariate '" + name + "'");
            const auto idx = static_cast<std::size_t>(std::distance(names.begin(), it));
            for (double q : {0.25, 0.5, 0.75}) {
                const StratifiedCurves strat = stratified_curves(
                    [&](std::span<const double> x) { return model.predict(x); }, test_features,
                    idx, q);
                auto emit = [&](const char* label, const SurvivalCurve& curve) {
                    for (std::size_t i = 0; i < curve.times.size(); ++i) {
                        csv += name + "," + format_double(q) + "," + label + "," +
                               format_double(curve.times[i]) + "," +
                               format_double(curve.probabilities[i]) + "\n";
                    }
                };
                emit("mean", strat.mean);
                emit("below", strat.below);
                emit("above", strat.above);
            }
        }
        write_file_atomic(report_dir / "stratified.csv", csv);
        result.outputs.push_back((report_dir / "stratified.csv").string());
    }
    return result;
}

/// synth: writes the bundled synthetic corpus plus a matching config file so
/// the whole pipeline can run without any external download.
inline StageResult cmd_synth(const RunConfig& cfg) {
    StageResult result;
    std::vector<SyntheticBearingConfig> bearings;
    const int faults[] = {44, 56, 68, -1};  // one bearing stays healthy
    for (std::size_t b = 0; b < 4; ++b) {
        SyntheticBearingConfig bc;
        bc.minutes = 80;
        bc.fault_minute = faults[b];
        bc.seed = cfg.seed + b;
        bearings.push_back(bc);
    }
    const auto manifest = write_synthetic_corpus(cfg.dataset_root, cfg.condition, bearings);

    nlohmann::json mj = nlohmann::json::array();
    for (const auto& entry : manifest) {
        mj.push_back({{"bearing_id", entry.bearing_id},
                      {"fault_minute", entry.fault_minute},
                      {"minutes", entry.minutes}});
    }
    write_file_atomic(cfg.dataset_root / "manifest.json", mj.dump(2) + "\n");

    const nlohmann::json config{
        {"dataset_root", cfg.dataset_root.string()},
        {"condition", cfg.condition},
        {"out_dir", cfg.out_dir.string()},
        {"seed", cfg.seed},
        {"sample_rate_hz", 256.0},
        {"shaft_rpm", 600.0},
        {"window_seconds", 60.0},
        {"eta", 8.0},
        {"lambda_kl", 4.0},
        {"half_width_hz", 3.0},
        {"n_bins", 5},
        {"rolling_window", 2},
        {"rolling_lag", -1},
        {"model", cfg.model},
        {"folds", cfg.folds},
        {"censor_pct", cfg.censor_pct},
        {"mtlr_epochs", 500}};
    write_file_atomic(cfg.dataset_root / "config.json", config.dump(2) + "\n");
    result.outputs.push_back((cfg.dataset_root / "manifest.json").string());
    result.outputs.push_back((cfg.dataset_root / "config.json").string());
    return result;
}

}  // namespace rulsurv
