#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "rulsurv/common.hpp"
#include "rulsurv/cox.hpp"
#include "rulsurv/csv.hpp"
#include "rulsurv/dataset.hpp"
#include "rulsurv/mtlr.hpp"
#include "rulsurv/rsf.hpp"
#include "rulsurv/survival.hpp"

namespace rulsurv {

inline const std::vector<std::string>& model_selectors() {
    static const std::vector<std::string> names = {"km", "cox", "rsf", "mtlr"};
    return names;
}

/// A fitted model of any kind plus the normalization fitted with it.
/// Serializes to a self-describing JSON document for the train/evaluate
/// handoff.
struct FittedModel {
    std::string kind;  // km | cox | rsf | mtlr
    SurvivalCurve km;
    CoxModel cox;
    RsfModel rsf;
    MtlrModel mtlr;
    NormalizationStats normalization;

    /// Predicts from raw (unnormalized) features.
    SurvivalCurve predict(std::span<const double> raw_features) const {
        if (kind == "km") return km;
        const auto x = zscore_apply(normalization, raw_features);
        if (kind == "cox") return cox_predict(cox, x);
        if (kind == "rsf") return rsf_predict(rsf, x);
        if (kind == "mtlr") return mtlr_predict(mtlr, x);
        throw error("FittedModel: unknown kind '" + kind + "'");
    }
};

namespace detail {

using nlohmann::json;

inline json curve_to_json(const SurvivalCurve& c) {
    return json{{"times", c.times},
                {"probabilities", c.probabilities},
                {"interp", c.interp == CurveInterp::Step ? "step" : "linear"}};
}

inline SurvivalCurve curve_from_json(const json& j) {
    SurvivalCurve c;
    c.times = j.at("times").get<std::vector<double>>();
    c.probabilities = j.at("probabilities").get<std::vector<double>>();
    c.interp = j.at("interp").get<std::string>() == "step" ? CurveInterp::Step
                                                           : CurveInterp::Linear;
    return c;
}

inline json normalization_to_json(const NormalizationStats& s) {
    return json{{"means", s.means}, {"sds", s.sds}};
}

inline NormalizationStats normalization_from_json(const json& j) {
    NormalizationStats s;
    const auto means = j.at("means").get<std::vector<double>>();
    const auto sds = j.at("sds").get<std::vector<double>>();
    require(means.size() == kNumFeatures && sds.size() == kNumFeatures,
            "model file: normalization dimension mismatch");
    std::copy(means.begin(), means.end(), s.means.begin());
    std::copy(sds.begin(), sds.end(), s.sds.begin());
    return s;
}

}  // namespace detail

inline void save_model(const FittedModel& model, const std::filesystem::path& path) {
    using nlohmann::json;
    json j;
    j["format"] = "rulsurv-model";
    j["version"] = 1;
    j["kind"] = model.kind;
    j["normalization"] = detail::normalization_to_json(model.normalization);

    if (model.kind == "km") {
        j["km"] = detail::curve_to_json(model.km);
    } else if (model.kind == "cox") {
        j["cox"] = json{{"coefficients", model.cox.coefficients},
                        {"baseline_times", model.cox.baseline_times},
                        {"baseline_cumhaz", model.cox.baseline_cumhaz}};
    } else if (model.kind == "rsf") {
        json trees = json::array();
        for (const auto& tree : model.rsf.trees) {
            json nodes = json::array();
            for (const auto& node : tree.nodes) {
                json n{{"feature", node.feature},
                       {"threshold", node.threshold},
                       {"left", node.left},
                       {"right", node.right}};
                if (node.feature < 0) n["leaf_cumhaz"] = node.leaf_cumhaz;
                nodes.push_back(std::move(n));
            }
            trees.push_back(json{{"nodes", std::move(nodes)}});
        }
        j["rsf"] = json{{"grid", model.rsf.grid},
                        {"dimension", model.rsf.dimension},
                        {"trees", std::move(trees)}};
    } else if (model.kind == "mtlr") {
        j["mtlr"] = json{{"boundaries", model.mtlr.boundaries},
                         {"w", model.mtlr.w},
                         {"b", model.mtlr.b},
                         {"hidden_w", model.mtlr.hidden_w},
                         {"hidden_b", model.mtlr.hidden_b},
                         {"dimension", model.mtlr.dimension}};
    } else {
        throw error("save_model: unknown kind '" + model.kind + "'");
    }
    write_file_atomic(path, j.dump(2) + "\n");
}

inline FittedModel load_model(const std::filesystem::path& path) {
    using nlohmann::json;
    std::ifstream in(path);
    require(in.good(), "load_model: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw error("load_model: malformed JSON in " + path.string() + ": " + e.what());
    }
    require(j.value("format", "") == "rulsurv-model",
            "load_model: " + path.string() + " is not a model file");

    FittedModel model;
    model.kind = j.at("kind").get<std::string>();
    model.normalization = detail::normalization_from_json(j.at("normalization"));

    if (model.kind == "km") {
        model.km = detail::curve_from_json(j.at("km"));
    } else if (model.kind == "cox") {
        const auto& c = j.at("cox");
        model.cox.coefficients = c.at("coefficients").get<std::vector<double>>();
        model.cox.baseline_times = c.at("baseline_times").get<std::vector<double>>();
        model.cox.baseline_cumhaz = c.at("baseline_cumhaz").get<std::vector<double>>();
    } else if (model.kind == "rsf") {
        const auto& r = j.at("rsf");
        model.rsf.grid = r.at("grid").get<std::vector<double>>();
        model.rsf.dimension = r.at("dimension").get<std::size_t>();
        for (const auto& tj : r.at("trees")) {
            RsfTree tree;
            for (const auto& nj : tj.at("nodes")) {
                RsfNode node;
                node.feature = nj.at("feature").get<int>();
                node.threshold = nj.at("threshold").get<double>();
                node.left = nj.at("left").get<std::size_t>();
                node.right = nj.at("right").get<std::size_t>();
                if (node.feature < 0) {
                    node.leaf_cumhaz = nj.at("leaf_cumhaz").get<std::vector<double>>();
                }
                tree.nodes.push_back(std::move(node));
            }
            model.rsf.trees.push_back(std::move(tree));
        }
    } else if (model.kind == "mtlr") {
        const auto& m = j.at("mtlr");
        model.mtlr.boundaries = m.at("boundaries").get<std::vector<double>>();
        model.mtlr.w = m.at("w").get<std::vector<std::vector<double>>>();
        model.mtlr.b = m.at("b").get<std::vector<double>>();
        model.mtlr.hidden_w = m.at("hidden_w").get<std::vector<std::vector<double>>>();
        model.mtlr.hidden_b = m.at("hidden_b").get<std::vector<double>>();
        model.mtlr.dimension = m.at("dimension").get<std::size_t>();
    } else {
        throw error("load_model: unknown kind '" + model.kind + "' in " + path.string());
    }
    return model;
}

}  // namespace rulsurv
