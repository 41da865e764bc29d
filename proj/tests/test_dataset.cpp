#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "rulsurv/dataset.hpp"
#include "rulsurv/rng.hpp"

using namespace rulsurv;
namespace fs = std::filesystem;

namespace {

fs::path make_temp_dir(const std::string& tag) {
    const auto dir = fs::temp_directory_path() / ("rulsurv_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_minute_file(const fs::path& dir, std::size_t minute, std::size_t rows,
                       double offset = 0.0) {
    std::ofstream out(dir / (std::to_string(minute) + ".csv"));
    out << "horizontal,vertical\n";
    for (std::size_t i = 0; i < rows; ++i) {
        out << (offset + 0.1 * static_cast<double>(i % 7) - 0.3) << ",0.0\n";
    }
}

EventAnnotation annotation_at(double t_event, const std::string& id = "b1") {
    EventAnnotation a;
    a.bearing_id = id;
    a.event_time_minutes = t_event;
    a.end_of_life_minutes = t_event + 10.0;
    return a;
}

std::vector<FeatureVector> constant_minutes(std::size_t n) {
    std::vector<FeatureVector> out(n);
    Rng rng(1234);
    for (std::size_t m = 0; m < n; ++m) {
        std::array<double, kNumFeatures> a{};
        for (auto& v : a) v = rng.normal();
        out[m] = FeatureVector::from_array(a);
    }
    return out;
}

SupervisedDataset toy_dataset(std::size_t n, std::uint64_t seed = 5) {
    SupervisedDataset ds;
    ds.condition = "C1";
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        SurvivalRecord rec;
        for (auto& f : rec.features) f = rng.normal();
        rec.time = 1.0 + 99.0 * rng.uniform();
        rec.event = true;
        rec.bearing_id = "b" + std::to_string(i % 5 + 1);
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

}  // namespace

TEST_CASE("load_bearing reads numbered minute files in order") {
    const auto dir = make_temp_dir("load_ok");
    for (std::size_t m = 1; m <= 3; ++m) write_minute_file(dir, m, 64, static_cast<double>(m));
    const BearingRecording rec = load_bearing(dir, 25600.0);
    CHECK(rec.minutes.size() == 3);
    CHECK(rec.samples_per_minute == 64);
    CHECK(rec.minutes[0].sample_rate == 25600.0);
    CHECK(rec.minutes[1].samples[0] == 2.0 - 0.3);
    fs::remove_all(dir);
}

TEST_CASE("load_bearing errors name the offending file") {
    SECTION("empty directory") {
        const auto dir = make_temp_dir("load_empty");
        CHECK_THROWS_AS(load_bearing(dir), error);
        fs::remove_all(dir);
    }
    SECTION("missing minute in the sequence") {
        const auto dir = make_temp_dir("load_gap");
        write_minute_file(dir, 1, 32);
        write_minute_file(dir, 3, 32);
        CHECK_THROWS_WITH(load_bearing(dir), Catch::Matchers::ContainsSubstring("2.csv"));
        fs::remove_all(dir);
    }
    SECTION("short file") {
        const auto dir = make_temp_dir("load_short");
        write_minute_file(dir, 1, 32);
        write_minute_file(dir, 2, 30);
        CHECK_THROWS_WITH(load_bearing(dir), Catch::Matchers::ContainsSubstring("2.csv"));
        fs::remove_all(dir);
    }
}

TEST_CASE("to_supervised matches the hand trace on a three-minute bearing") {
    const auto minutes = constant_minutes(5);
    const auto records = to_supervised(minutes, annotation_at(3.0), 2, -1);
    REQUIRE(records.size() == 2);
    CHECK_THAT(records[0].time, Catch::Matchers::WithinAbs(2.5, 1e-12));
    CHECK_THAT(records[1].time, Catch::Matchers::WithinAbs(1.5, 1e-12));
    CHECK(records[0].event);
    CHECK(records[0].bearing_id == "b1");
    // covariates of the first record average minutes 1 and 2
    for (std::size_t k = 0; k < kNumFeatures; ++k) {
        const double expected =
            0.5 * (minutes[0].to_array()[k] + minutes[1].to_array()[k]);
        CHECK_THAT(records[0].features[k], Catch::Matchers::WithinAbs(expected, 1e-12));
    }
}

TEST_CASE("to_supervised with window one is the identity windowing") {
    const auto minutes = constant_minutes(6);
    const auto records = to_supervised(minutes, annotation_at(4.0), 1, 0);
    REQUIRE(records.size() == 4);
    for (std::size_t j = 0; j < records.size(); ++j) {
        CHECK_THAT(records[j].time, Catch::Matchers::WithinAbs(4.0 - static_cast<double>(j), 1e-12));
        CHECK(records[j].features == minutes[j].to_array());
    }
}

TEST_CASE("to_supervised record count follows t_event - w + 1 per bearing") {
    const auto minutes = constant_minutes(30);
    for (std::size_t w : {std::size_t{1}, std::size_t{2}, std::size_t{4}, std::size_t{6}}) {
        for (double t_event : {7.0, 12.0, 25.0}) {
            const auto records = to_supervised(minutes, annotation_at(t_event), w,
                                               -(static_cast<int>(w) - 1));
            CHECK(records.size() == static_cast<std::size_t>(t_event) - w + 1);
        }
    }
}

TEST_CASE("to_supervised rejects events shorter than the window") {
    const auto minutes = constant_minutes(10);
    CHECK_THROWS_AS(to_supervised(minutes, annotation_at(3.0), 4, -3), error);
    CHECK_THROWS_AS(to_supervised(minutes, annotation_at(11.0), 2, -1), error);
}

TEST_CASE("apply_censoring") {
    const auto ds = toy_dataset(100);
    SECTION("zero percent is the identity") {
        const auto out = apply_censoring(ds, 0.0, 9);
        for (std::size_t i = 0; i < ds.records.size(); ++i) {
            CHECK(out.records[i].time == ds.records[i].time);
            CHECK(out.records[i].event);
        }
    }
    SECTION("exact count, shrunk times, untouched features") {
        const auto out = apply_censoring(ds, 0.25, 9);
        std::size_t censored = 0;
        for (std::size_t i = 0; i < ds.records.size(); ++i) {
            if (!out.records[i].event) {
                ++censored;
                CHECK(out.records[i].time > 0.0);
                CHECK(out.records[i].time < ds.records[i].time);
            } else {
                CHECK(out.records[i].time == ds.records[i].time);
            }
            CHECK(out.records[i].features == ds.records[i].features);
        }
        CHECK(censored == 25);
    }
    SECTION("round-half-up of the censor count") {
        const auto small = toy_dataset(10);
        const auto out = apply_censoring(small, 0.25, 3);  // 2.5 -> 3
        std::size_t censored = 0;
        for (const auto& r : out.records) censored += r.event ? 0 : 1;
        CHECK(censored == 3);
    }
    SECTION("deterministic per seed") {
        const auto a = apply_censoring(ds, 0.5, 123);
        const auto b = apply_censoring(ds, 0.5, 123);
        const auto c = apply_censoring(ds, 0.5, 124);
        bool identical = true;
        bool differs = false;
        for (std::size_t i = 0; i < ds.records.size(); ++i) {
            identical = identical && a.records[i].time == b.records[i].time &&
                        a.records[i].event == b.records[i].event;
            differs = differs || a.records[i].time != c.records[i].time;
        }
        CHECK(identical);
        CHECK(differs);
    }
    SECTION("already-censored input is rejected") {
        const auto once = apply_censoring(ds, 0.25, 1);
        CHECK_THROWS_AS(apply_censoring(once, 0.25, 2), error);
    }
}

TEST_CASE("stratified_kfold partitions the dataset") {
    const auto ds = apply_censoring(toy_dataset(103), 0.5, 7);
    const auto splits = stratified_kfold(ds, 5, 11);
    REQUIRE(splits.size() == 5);

    std::set<std::size_t> seen;
    for (const auto& split : splits) {
        for (std::size_t i : split.test) {
            CHECK(seen.insert(i).second);  // pairwise disjoint
        }
        // train is the complement
        std::set<std::size_t> train(split.train.begin(), split.train.end());
        for (std::size_t i : split.test) CHECK(train.count(i) == 0);
        CHECK(split.train.size() + split.test.size() == ds.records.size());
    }
    CHECK(seen.size() == ds.records.size());
}

TEST_CASE("stratified_kfold keeps censoring fractions balanced") {
    const auto ds = apply_censoring(toy_dataset(100), 0.5, 13);
    const auto splits = stratified_kfold(ds, 5, 17);
    for (const auto& split : splits) {
        std::size_t censored = 0;
        for (std::size_t i : split.test) censored += ds.records[i].event ? 0 : 1;
        // 50% of 20 = 10, within one record
        CHECK(censored >= 9);
        CHECK(censored <= 11);
    }
}

TEST_CASE("ten records over five folds give two per fold") {
    const auto ds = toy_dataset(10);
    const auto splits = stratified_kfold(ds, 5, 19);
    for (const auto& split : splits) CHECK(split.test.size() == 2);
}

TEST_CASE("zscore fit and apply") {
    SECTION("hand example: column {1, 3} maps to {-1, +1}") {
        SupervisedDataset ds;
        SurvivalRecord a;
        SurvivalRecord b;
        a.features.fill(1.0);
        b.features.fill(3.0);
        a.time = b.time = 1.0;
        ds.records = {a, b};
        const auto stats = zscore_fit(ds);
        CHECK(stats.means[0] == 2.0);
        CHECK(stats.sds[0] == 1.0);  // population SD
        const auto out = zscore_apply(stats, ds);
        CHECK(out.records[0].features[0] == -1.0);
        CHECK(out.records[1].features[0] == 1.0);
    }
    SECTION("transformed training columns have zero mean and unit SD") {
        const auto ds = toy_dataset(64);
        const auto stats = zscore_fit(ds);
        const auto out = zscore_apply(stats, ds);
        for (std::size_t k = 0; k < kNumFeatures; ++k) {
            double mean = 0.0;
            for (const auto& r : out.records) mean += r.features[k];
            mean /= static_cast<double>(out.records.size());
            CHECK_THAT(mean, Catch::Matchers::WithinAbs(0.0, 1e-9));
            double ss = 0.0;
            for (const auto& r : out.records) ss += r.features[k] * r.features[k];
            CHECK_THAT(std::sqrt(ss / static_cast<double>(out.records.size())),
                       Catch::Matchers::WithinAbs(1.0, 1e-9));
        }
    }
    SECTION("constant training column is rejected") {
        auto ds = toy_dataset(10);
        for (auto& r : ds.records) r.features[3] = 42.0;
        CHECK_THROWS_WITH(zscore_fit(ds), Catch::Matchers::ContainsSubstring("kurtosis"));
    }
}

TEST_CASE("dataset CSV round trip preserves records") {
    const auto ds = apply_censoring(toy_dataset(30), 0.25, 3);
    const auto dir = make_temp_dir("csv_roundtrip");
    const auto path = dir / "dataset.csv";
    save_dataset(ds, path);
    const auto loaded = load_dataset(path);
    REQUIRE(loaded.records.size() == ds.records.size());
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        CHECK(loaded.records[i].features == ds.records[i].features);
        CHECK(loaded.records[i].time == ds.records[i].time);
        CHECK(loaded.records[i].event == ds.records[i].event);
        CHECK(loaded.records[i].bearing_id == ds.records[i].bearing_id);
    }
    fs::remove_all(dir);
}
