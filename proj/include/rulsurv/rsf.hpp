#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "rulsurv/common.hpp"
#include "rulsurv/rng.hpp"
#include "rulsurv/survival.hpp"

namespace rulsurv {

struct RsfConfig {
    std::size_t n_trees = 100;
    std::size_t min_split = 5;   // smallest node that may still split
    std::size_t min_leaf = 3;    // smallest allowed child
    std::size_t max_depth = 3;
    std::size_t max_thresholds = 32;  // candidate split points per feature
    std::size_t mtry = 0;             // features tried per node; 0 = floor(sqrt(d))
    std::uint64_t seed = 0;
};

/// Survival tree node; leaves carry a Nelson-Aalen cumulative hazard
/// evaluated on the forest's shared time grid.
struct RsfNode {
    int feature = -1;          // -1 marks a leaf
    double threshold = 0.0;    // goes left when x[feature] <= threshold
    std::size_t left = 0;
    std::size_t right = 0;
    std::vector<double> leaf_cumhaz;  // per grid time, non-decreasing
};

struct RsfTree {
    std::vector<RsfNode> nodes;  // nodes[0] is the root
    std::vector<std::size_t> in_bag_count;  // bootstrap multiplicity per training record
};

struct RsfModel {
    std::vector<RsfTree> trees;
    std::vector<double> grid;  // ascending unique training times
    RsfConfig config;
    std::size_t dimension = 0;

    const RsfNode& leaf_for(const RsfTree& tree, std::span<const double> x) const {
        std::size_t idx = 0;
        while (tree.nodes[idx].feature >= 0) {
            const auto& node = tree.nodes[idx];
            idx = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                              : node.right;
        }
        return tree.nodes[idx];
    }
};

namespace detail {

// Standardized two-sample log-rank statistic |O - E| / sqrt(V) for the
// records going left vs right. Returns 0 when the variance vanishes.
inline double log_rank_score(const std::vector<std::size_t>& members,
                             const std::vector<bool>& goes_left,
                             std::span<const double> times, const std::vector<bool>& events) {
    std::map<double, std::array<std::size_t, 2>> deaths;  // time -> (left, total)
    for (std::size_t k = 0; k < members.size(); ++k) {
        const std::size_t i = members[k];
        if (!events[i]) continue;
        auto& d = deaths[times[i]];
        if (goes_left[k]) ++d[0];
        ++d[1];
    }
    if (deaths.empty()) return 0.0;

    // sweep event times ascending, shrinking the risk sets as records exit
    std::vector<std::pair<double, bool>> exits;  // (time, is_left)
    exits.reserve(members.size());
    for (std::size_t k = 0; k < members.size(); ++k) {
        exits.emplace_back(times[members[k]], goes_left[k]);
    }
    std::sort(exits.begin(), exits.end());

    double n_left = 0.0;
    for (const auto& e : exits) n_left += e.second ? 1.0 : 0.0;
    double n_total = static_cast<double>(exits.size());

    double observed_minus_expected = 0.0;
    double variance = 0.0;
    std::size_t pos = 0;
    for (const auto& [t, d] : deaths) {
        while (pos < exits.size() && exits[pos].first < t) {
            n_total -= 1.0;
            if (exits[pos].second) n_left -= 1.0;
            ++pos;
        }
        const auto d_left = static_cast<double>(d[0]);
        const auto d_all = static_cast<double>(d[1]);
        if (n_total <= 1.0) break;
        const double frac = n_left / n_total;
        observed_minus_expected += d_left - d_all * frac;
        variance += d_all * frac * (1.0 - frac) * (n_total - d_all) / (n_total - 1.0);
    }
    if (variance <= 0.0) return 0.0;
    return std::abs(observed_minus_expected) / std::sqrt(variance);
}

// Nelson-Aalen cumulative hazard of a (multi)set of records, evaluated on
// the shared grid.
inline std::vector<double> nelson_aalen_on_grid(const std::vector<std::size_t>& members,
                                                std::span<const double> times,
                                                const std::vector<bool>& events,
                                                const std::vector<double>& grid) {
    std::map<double, std::array<std::size_t, 2>> counts;  // time -> (deaths, exits)
    for (std::size_t i : members) {
        auto& c = counts[times[i]];
        if (events[i]) ++c[0];
        ++c[1];
    }
    double at_risk = static_cast<double>(members.size());
    std::vector<std::pair<double, double>> steps;  // (time, cumulative hazard)
    double cum = 0.0;
    for (const auto& [t, c] : counts) {
        if (c[0] > 0) {
            cum += static_cast<double>(c[0]) / at_risk;
            steps.emplace_back(t, cum);
        }
        at_risk -= static_cast<double>(c[1]);
    }

    std::vector<double> out(grid.size(), 0.0);
    std::size_t si = 0;
    double current = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        while (si < steps.size() && steps[si].first <= grid[g]) current = steps[si++].second;
        out[g] = current;
    }
    return out;
}

struct TreeBuilder {
    const std::vector<std::vector<double>>& x;
    std::span<const double> times;
    const std::vector<bool>& events;
    const std::vector<double>& grid;
    const RsfConfig& config;
    Rng& rng;
    RsfTree& tree;

    std::size_t build(std::vector<std::size_t> members, std::size_t depth) {
        const std::size_t node_index = tree.nodes.size();
        tree.nodes.emplace_back();

        if (depth < config.max_depth && members.size() >= config.min_split) {
            if (try_split(members, node_index, depth)) return node_index;
        }
        tree.nodes[node_index].leaf_cumhaz = nelson_aalen_on_grid(members, times, events, grid);
        return node_index;
    }

    bool try_split(const std::vector<std::size_t>& members, std::size_t node_index,
                   std::size_t depth) {
        const std::size_t dim = x[0].size();
        std::size_t mtry = config.mtry > 0
                               ? config.mtry
                               : static_cast<std::size_t>(std::floor(std::sqrt(
                                     static_cast<double>(dim))));
        mtry = std::min(std::max<std::size_t>(mtry, 1), dim);

        std::vector<std::size_t> feature_pool(dim);
        std::iota(feature_pool.begin(), feature_pool.end(), std::size_t{0});
        rng.shuffle(feature_pool);
        feature_pool.resize(mtry);

        double best_score = 0.0;
        int best_feature = -1;
        double best_threshold = 0.0;
        std::vector<bool> goes_left(members.size());
        std::vector<bool> best_goes_left;

        for (std::size_t f : feature_pool) {
            std::vector<double> values;
            values.reserve(members.size());
            for (std::size_t i : members) values.push_back(x[i][f]);
            std::sort(values.begin(), values.end());
            values.erase(std::unique(values.begin(), values.end()), values.end());
            if (values.size() < 2) continue;

            std::vector<double> thresholds;
            thresholds.reserve(values.size() - 1);
            for (std::size_t v = 0; v + 1 < values.size(); ++v) {
                thresholds.push_back(0.5 * (values[v] + values[v + 1]));
            }
            if (thresholds.size() > config.max_thresholds) {
                rng.shuffle(thresholds);
                thresholds.resize(config.max_thresholds);
                std::sort(thresholds.begin(), thresholds.end());
            }

            for (double thr : thresholds) {
                std::size_t n_left = 0;
                for (std::size_t k = 0; k < members.size(); ++k) {
                    goes_left[k] = x[members[k]][f] <= thr;
                    n_left += goes_left[k] ? 1 : 0;
                }
                if (n_left < config.min_leaf || members.size() - n_left < config.min_leaf) {
                    continue;
                }
                const double score = log_rank_score(members, goes_left, times, events);
                if (score > best_score) {
                    best_score = score;
                    best_feature = static_cast<int>(f);
                    best_threshold = thr;
                    best_goes_left = goes_left;
                }
            }
        }
        if (best_feature < 0) return false;

        std::vector<std::size_t> left_members;
        std::vector<std::size_t> right_members;
        for (std::size_t k = 0; k < members.size(); ++k) {
            (best_goes_left[k] ? left_members : right_members).push_back(members[k]);
        }

        // children are built after the node exists, so indices stay stable
        const std::size_t left = build(std::move(left_members), depth + 1);
        const std::size_t right = build(std::move(right_members), depth + 1);
        tree.nodes[node_index].feature = best_feature;
        tree.nodes[node_index].threshold = best_threshold;
        tree.nodes[node_index].left = left;
        tree.nodes[node_index].right = right;
        return true;
    }
};

}  // namespace detail

/// Fits a random survival forest: one seeded bootstrap per tree, log-rank
/// splits over a random feature subset, Nelson-Aalen leaves.
inline RsfModel rsf_fit(const std::vector<std::vector<double>>& x, std::span<const double> times,
                        const std::vector<bool>& events, const RsfConfig& config = {}) {
    const std::size_t n = x.size();
    require(n > 0 && times.size() == n && events.size() == n, "rsf_fit: shape mismatch");
    require(config.n_trees >= 1, "rsf_fit: need at least one tree");
    require(config.min_leaf >= 1, "rsf_fit: min_leaf must be >= 1");
    require(std::any_of(events.begin(), events.end(), [](bool e) { return e; }),
            "rsf_fit: need at least one uncensored record");

    RsfModel model;
    model.config = config;
    model.dimension = x[0].size();
    model.grid.assign(times.begin(), times.end());
    std::sort(model.grid.begin(), model.grid.end());
    model.grid.erase(std::unique(model.grid.begin(), model.grid.end()), model.grid.end());

    model.trees.reserve(config.n_trees);
    for (std::size_t t = 0; t < config.n_trees; ++t) {
        Rng rng = Rng::fork(config.seed, t);
        RsfTree tree;
        tree.in_bag_count.assign(n, 0);
        std::vector<std::size_t> members(n);
        for (std::size_t i = 0; i < n; ++i) {
            members[i] = rng.uniform_below(n);
            ++tree.in_bag_count[members[i]];
        }
        detail::TreeBuilder builder{x, times, events, model.grid, config, rng, tree};
        builder.build(std::move(members), 0);
        model.trees.push_back(std::move(tree));
    }
    return model;
}

namespace detail {

inline SurvivalCurve rsf_curve_from_hazard(const std::vector<double>& mean_hazard,
                                           const std::vector<double>& grid) {
    SurvivalCurve curve;
    curve.interp = CurveInterp::Linear;
    curve.times = grid;
    curve.probabilities.resize(mean_hazard.size());
    for (std::size_t g = 0; g < mean_hazard.size(); ++g) {
        curve.probabilities[g] = std::exp(-mean_hazard[g]);
    }
    return curve;
}

}  // namespace detail

/// Ensemble prediction: survival = exp(-mean cumulative hazard across trees).
inline SurvivalCurve rsf_predict(const RsfModel& model, std::span<const double> x) {
    require(x.size() == model.dimension, "rsf_predict: feature dimension mismatch (expected " +
                                             std::to_string(model.dimension) + ", got " +
                                             std::to_string(x.size()) + ")");
    std::vector<double> mean_hazard(model.grid.size(), 0.0);
    for (const auto& tree : model.trees) {
        const auto& leaf = model.leaf_for(tree, x);
        for (std::size_t g = 0; g < mean_hazard.size(); ++g) {
            mean_hazard[g] += leaf.leaf_cumhaz[g];
        }
    }
    for (double& h : mean_hazard) h /= static_cast<double>(model.trees.size());
    return detail::rsf_curve_from_hazard(mean_hazard, model.grid);
}

/// Out-of-bag prediction for a training record: aggregates only the trees
/// whose bootstrap missed that record. Returns nullopt when every tree saw it.
inline std::optional<SurvivalCurve> rsf_oob_predict(const RsfModel& model,
                                                    std::span<const double> x,
                                                    std::size_t record_index) {
    std::vector<double> mean_hazard(model.grid.size(), 0.0);
    std::size_t used = 0;
    for (const auto& tree : model.trees) {
        if (record_index < tree.in_bag_count.size() && tree.in_bag_count[record_index] > 0) {
            continue;
        }
        const auto& leaf = model.leaf_for(tree, x);
        for (std::size_t g = 0; g < mean_hazard.size(); ++g) {
            mean_hazard[g] += leaf.leaf_cumhaz[g];
        }
        ++used;
    }
    if (used == 0) return std::nullopt;
    for (double& h : mean_hazard) h /= static_cast<double>(used);
    return detail::rsf_curve_from_hazard(mean_hazard, model.grid);
}

}  // namespace rulsurv
