#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "rulsurv/cox.hpp"
#include "rulsurv/eval.hpp"
#include "rulsurv/rng.hpp"

using namespace rulsurv;

namespace {

SurvivalCurve linear_curve(std::vector<double> times, std::vector<double> probs) {
    SurvivalCurve c;
    c.interp = CurveInterp::Linear;
    c.times = std::move(times);
    c.probabilities = std::move(probs);
    return c;
}

// brute-force restricted mean of a KM curve, reimplemented for the oracle
double oracle_km_mean(std::vector<double> times, std::vector<bool> events) {
    const SurvivalCurve km = km_fit(times, events);
    const double horizon = *std::max_element(times.begin(), times.end());
    // ultra-fine Riemann sum over the step curve
    const int steps = 200000;
    double area = 0.0;
    for (int i = 0; i < steps; ++i) {
        const double t = horizon * (static_cast<double>(i) + 0.5) / steps;
        area += km.eval(t) * (horizon / steps);
    }
    return area;
}

}  // namespace

TEST_CASE("median time: linear interpolation between grid points") {
    const auto c = linear_curve({10.0, 20.0}, {0.6, 0.4});
    CHECK_THAT(median_survival_time(c), Catch::Matchers::WithinAbs(15.0, 1e-12));
}

TEST_CASE("median time: a curve that never reaches one half returns the grid end") {
    const auto c = linear_curve({10.0, 50.0, 100.0}, {0.9, 0.8, 0.7});
    CHECK(median_survival_time(c) == 100.0);
}

TEST_CASE("median time: step curve crosses at the step") {
    std::vector<double> t{7.0};
    std::vector<bool> e{true};
    const SurvivalCurve km = km_fit(t, e);  // 1 before 7, 0 from 7 on
    CHECK(median_survival_time(km) == 7.0);
}

TEST_CASE("median time: exact half at a grid point") {
    const auto c = linear_curve({4.0, 9.0}, {0.5, 0.1});
    CHECK(median_survival_time(c) == 4.0);
}

TEST_CASE("mae_hinge censored contributions") {
    SECTION("over-shooting a censored record costs nothing") {
        const std::vector<double> pred{12.0};
        const std::vector<double> t{10.0};
        const std::vector<bool> e{false};
        CHECK(mae_hinge(pred, t, e) == 0.0);
    }
    SECTION("under-shooting a censored record costs the gap") {
        const std::vector<double> pred{7.0};
        const std::vector<double> t{10.0};
        const std::vector<bool> e{false};
        CHECK(mae_hinge(pred, t, e) == 3.0);
    }
    SECTION("no censoring reduces to the plain MAE") {
        const std::vector<double> pred{7.0, 12.0};
        const std::vector<double> t{10.0, 10.0};
        const std::vector<bool> e{true, true};
        CHECK(mae_hinge(pred, t, e) == true_mae(pred, t));
    }
    SECTION("empty input is an error") {
        CHECK_THROWS_AS(mae_hinge({}, {}, {}), error);
    }
}

TEST_CASE("mae_margin on the two-step KM fixture") {
    // training KM with events at 10 and 20: S = 1 -> 0.5 -> 0
    const std::vector<double> train_t{10.0, 20.0};
    const std::vector<bool> train_e{true, true};
    const SurvivalCurve km = km_fit(train_t, train_e);

    SECTION("record censored at 12 gets margin target 20") {
        const std::vector<double> pred{18.0};
        const std::vector<double> t{12.0};
        const std::vector<bool> e{false};
        // weight = 1 - S(12) = 0.5, target 20 -> error 2, weighted mean = 2
        CHECK_THAT(mae_margin(pred, t, e, km), Catch::Matchers::WithinAbs(2.0, 1e-12));
    }
    SECTION("record censored before the first event is excluded") {
        const std::vector<double> pred{5.0, 11.0};
        const std::vector<double> t{5.0, 10.0};
        const std::vector<bool> e{false, true};
        // first record: S(5) = 1, weight 0 -> excluded; second: |10-11| = 1
        CHECK_THAT(mae_margin(pred, t, e, km), Catch::Matchers::WithinAbs(1.0, 1e-12));
    }
    SECTION("no censoring equals the true MAE") {
        const std::vector<double> pred{8.0, 19.0};
        const std::vector<double> t{10.0, 20.0};
        const std::vector<bool> e{true, true};
        CHECK_THAT(mae_margin(pred, t, e, km),
                   Catch::Matchers::WithinAbs(true_mae(pred, t), 1e-12));
    }
}

TEST_CASE("pseudo-observations on the all-event three-record set") {
    const std::vector<double> t{1.0, 2.0, 3.0};
    const std::vector<bool> e{true, true, true};
    const auto pseudo = pseudo_observations(t, e);
    REQUIRE(pseudo.size() == 3);
    // restricted-mean jackknife on all-event data returns each observation
    CHECK_THAT(pseudo[0], Catch::Matchers::WithinAbs(1.0, 1e-9));
    CHECK_THAT(pseudo[1], Catch::Matchers::WithinAbs(2.0, 1e-9));
    CHECK_THAT(pseudo[2], Catch::Matchers::WithinAbs(3.0, 1e-9));

    const double theta = km_restricted_mean(t, e);
    CHECK_THAT((pseudo[0] + pseudo[1] + pseudo[2]) / 3.0,
               Catch::Matchers::WithinAbs(theta, 1e-9));
}

TEST_CASE("restricted mean agrees with a brute-force integration") {
    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> t;
        std::vector<bool> e;
        for (int i = 0; i < 12; ++i) {
            t.push_back(0.5 + 10.0 * rng.uniform());
            e.push_back(rng.uniform() < 0.7);
        }
        e[0] = true;
        CHECK_THAT(km_restricted_mean(t, e),
                   Catch::Matchers::WithinAbs(oracle_km_mean(t, e), 1e-3));
    }
}

TEST_CASE("km restricted mean is invariant under duplication") {
    const std::vector<double> t{1.0, 4.0, 6.0};
    const std::vector<bool> e{true, false, true};
    std::vector<double> t2 = t;
    std::vector<bool> e2 = e;
    t2.insert(t2.end(), t.begin(), t.end());
    e2.insert(e2.end(), e.begin(), e.end());
    CHECK_THAT(km_restricted_mean(t, e),
               Catch::Matchers::WithinAbs(km_restricted_mean(t2, e2), 1e-12));
}

TEST_CASE("metric identities under zero censoring") {
    Rng rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 5 + rng.uniform_below(40);
        std::vector<double> pred(n);
        std::vector<double> t(n);
        std::vector<bool> e(n, true);
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = 1.0 + 30.0 * rng.uniform();
            t[i] = 1.0 + 30.0 * rng.uniform();
        }
        const SurvivalCurve km = km_fit(t, e);
        const double truth = true_mae(pred, t);
        CHECK_THAT(mae_hinge(pred, t, e), Catch::Matchers::WithinAbs(truth, 1e-9));
        CHECK_THAT(mae_margin(pred, t, e, km), Catch::Matchers::WithinAbs(truth, 1e-9));
        CHECK_THAT(mae_pseudo(pred, t, e, t, e), Catch::Matchers::WithinAbs(truth, 1e-9));
        CHECK(emae(truth, mae_hinge(pred, t, e)) == 0.0);
    }
}

TEST_CASE("per-record hinge never exceeds the oracle error when under-predicting") {
    Rng rng(15);
    for (int trial = 0; trial < 50; ++trial) {
        const double event_time = 5.0 + 20.0 * rng.uniform();
        const double censor_time = event_time * rng.uniform_open();
        const double prediction = event_time * rng.uniform();  // t-hat <= e
        const double hinge = std::max(censor_time - prediction, 0.0);
        CHECK(hinge <= std::abs(event_time - prediction) + 1e-12);
    }
}

TEST_CASE("emae sign convention") {
    CHECK(emae(10.0, 8.0) == 2.0);
    CHECK(emae(8.0, 10.0) == -2.0);
    CHECK(emae(5.0, 5.0) == 0.0);
}

TEST_CASE("d-calibration") {
    SECTION("perfectly uniform probabilities give chi-square zero") {
        std::vector<SurvivalCurve> curves;
        std::vector<double> t;
        std::vector<bool> e;
        for (int rep = 0; rep < 2; ++rep) {
            for (int d = 0; d < 10; ++d) {
                const double p = 0.05 + 0.1 * d;
                curves.push_back(linear_curve({1.0, 3.0}, {p, p}));
                t.push_back(2.0);  // evaluates to p
                e.push_back(true);
            }
        }
        const DCalibration dc = d_calibration(curves, t, e);
        CHECK(dc.chi_square == 0.0);
        CHECK(dc.p_value == 1.0);
        CHECK(dc.calibrated());
        std::size_t total = 0;
        for (auto c : dc.decile_counts) total += c;
        CHECK(total == 20);
    }
    SECTION("all mass in one decile fails hard") {
        std::vector<SurvivalCurve> curves;
        std::vector<double> t;
        std::vector<bool> e;
        for (int i = 0; i < 100; ++i) {
            curves.push_back(linear_curve({1.0, 3.0}, {0.55, 0.55}));
            t.push_back(2.0);
            e.push_back(true);
        }
        const DCalibration dc = d_calibration(curves, t, e);
        CHECK_THAT(dc.chi_square, Catch::Matchers::WithinAbs(900.0, 1e-9));
        CHECK(dc.p_value < 1e-100);
        CHECK_FALSE(dc.calibrated());
    }
    SECTION("censored records never enter the decile counts") {
        std::vector<SurvivalCurve> curves;
        std::vector<double> t;
        std::vector<bool> e;
        for (int i = 0; i < 30; ++i) {
            curves.push_back(linear_curve({1.0, 3.0}, {0.05 + 0.09 * (i % 10), 0.01}));
            t.push_back(1.0);
            e.push_back(i < 20);
        }
        const DCalibration dc = d_calibration(curves, t, e);
        std::size_t total = 0;
        for (auto c : dc.decile_counts) total += c;
        CHECK(total == 20);
    }
    SECTION("too few uncensored records is an error") {
        std::vector<SurvivalCurve> curves(5, linear_curve({1.0}, {0.5}));
        std::vector<double> t(5, 0.5);
        std::vector<bool> e(5, true);
        CHECK_THROWS_AS(d_calibration(curves, t, e), error);
    }
}

TEST_CASE("cra") {
    SECTION("perfect predictions score exactly one") {
        const std::vector<double> act{10.0, 8.0, 6.0, 4.0};
        CHECK(cra(act, act) == 1.0);
    }
    SECTION("single-window hand example") {
        CHECK_THAT(cra(std::vector<double>{90.0}, std::vector<double>{100.0}),
                   Catch::Matchers::WithinAbs(0.9, 1e-12));
    }
    SECTION("doubling every prediction zeroes the score") {
        const std::vector<double> act{10.0, 20.0, 5.0};
        const std::vector<double> pred{20.0, 40.0, 10.0};
        CHECK_THAT(cra(pred, act), Catch::Matchers::WithinAbs(0.0, 1e-12));
    }
    SECTION("invariant to rescaling the time unit") {
        Rng rng(21);
        std::vector<double> act;
        std::vector<double> pred;
        for (int i = 0; i < 12; ++i) {
            act.push_back(1.0 + 50.0 * rng.uniform());
            pred.push_back(1.0 + 50.0 * rng.uniform());
        }
        std::vector<double> act_h = act;
        std::vector<double> pred_h = pred;
        for (auto& v : act_h) v /= 60.0;
        for (auto& v : pred_h) v /= 60.0;
        CHECK_THAT(cra(pred, act), Catch::Matchers::WithinAbs(cra(pred_h, act_h), 1e-12));
    }
    SECTION("uniformly worsening predictions never raise the score") {
        Rng rng(23);
        for (int trial = 0; trial < 100; ++trial) {
            const std::size_t k = 1 + rng.uniform_below(10);
            std::vector<double> act(k);
            std::vector<double> pred(k);
            std::vector<double> worse(k);
            for (std::size_t i = 0; i < k; ++i) {
                act[i] = 1.0 + 20.0 * rng.uniform();
                const double err = 10.0 * (rng.uniform() - 0.5);
                pred[i] = act[i] + err;
                worse[i] = act[i] + err * (1.0 + rng.uniform());  // same sign, larger
            }
            CHECK(cra(worse, act) <= cra(pred, act) + 1e-12);
        }
    }
    SECTION("the literal variant scales by the window count") {
        const std::vector<double> act{10.0, 8.0};
        CHECK_THAT(cra(act, act, true), Catch::Matchers::WithinAbs(2.0, 1e-12));
    }
    SECTION("zero actual RUL is an error") {
        CHECK_THROWS_AS(cra(std::vector<double>{1.0}, std::vector<double>{0.0}), error);
    }
}

TEST_CASE("stratified curves") {
    // a cox model over two covariates where the second is pure noise
    std::vector<std::vector<double>> x;
    std::vector<double> t;
    std::vector<bool> e;
    Rng rng(31);
    for (int i = 0; i < 60; ++i) {
        const bool late = i % 2 == 0;
        x.push_back({late ? 1.0 : 0.0, rng.normal()});
        t.push_back((late ? 40.0 : 8.0) + rng.uniform());
        e.push_back(true);
    }
    const CoxModel model = cox_fit(x, t, e);
    auto predict = [&](std::span<const double> row) { return cox_predict(model, row); };

    SECTION("stratifying on the separating feature orders the medians") {
        const StratifiedCurves sc = stratified_curves(predict, x, 0, 0.5);
        const double med_below = median_survival_time(sc.below);
        const double med_above = median_survival_time(sc.above);
        CHECK(med_below < med_above);
    }
    SECTION("the mean curve is the record-weighted average of the strata") {
        const StratifiedCurves sc = stratified_curves(predict, x, 1, 0.25);
        std::size_t n_below = 0;
        const double cut = [&] {
            std::vector<double> v;
            for (const auto& row : x) v.push_back(row[1]);
            return quantile(v, 0.25);
        }();
        for (const auto& row : x) n_below += row[1] <= cut ? 1 : 0;
        const double w_below = static_cast<double>(n_below) / static_cast<double>(x.size());
        for (std::size_t i = 0; i < sc.mean.times.size(); ++i) {
            const double blended = w_below * sc.below.probabilities[i] +
                                   (1.0 - w_below) * sc.above.probabilities[i];
            CHECK_THAT(sc.mean.probabilities[i], Catch::Matchers::WithinAbs(blended, 1e-9));
        }
    }
    SECTION("a constant covariate leaves one stratum empty") {
        std::vector<std::vector<double>> constant = x;
        for (auto& row : constant) row[1] = 3.0;
        CHECK_THROWS_AS(stratified_curves(predict, constant, 1, 0.5), error);
    }
    SECTION("a model that ignores every covariate yields identical strata") {
        CoxModel flat = model;
        flat.coefficients[0] = 0.0;
        flat.coefficients[1] = 0.0;
        auto flat_predict = [&](std::span<const double> row) {
            return cox_predict(flat, row);
        };
        const StratifiedCurves sc = stratified_curves(flat_predict, x, 1, 0.5);
        for (std::size_t i = 0; i < sc.mean.times.size(); ++i) {
            CHECK_THAT(sc.below.probabilities[i],
                       Catch::Matchers::WithinAbs(sc.above.probabilities[i], 1e-9));
        }
    }
}
