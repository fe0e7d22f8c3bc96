#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "landmark_kit/error.hpp"
#include "landmark_kit/metrics.hpp"
#include "landmark_kit/random.hpp"
#include "test_util.hpp"

using namespace lmk;
using lmk::test::single;

namespace {

const Spacing kUnit = Spacing::unit(2);

// Three classes placed so the errors are exactly 0.5, 1.0 and 2.5 mm.
std::pair<LandmarkSet, LandmarkSet> three_landmarks() {
    return {single({{0.5, 0.0}, {10.0, 11.0}, {20.0, 22.5}}), single({{0.0, 0.0}, {10.0, 10.0}, {20.0, 20.0}})};
}

}  // namespace

TEST(PointError, PythagoreanTriple) {
    const auto e = point_error(single({{1.0, 1.0}}), single({{4.0, 5.0}}), kUnit);
    EXPECT_EQ(e.at(0, 0), 5.0);
}

TEST(PointError, IdenticalIsZero) {
    const auto lms = single({{3.7, 9.1}, {0.0, 2.0}});
    for (double v : point_error(lms, lms, kUnit).mm) EXPECT_EQ(v, 0.0);
}

TEST(PointError, AnisotropicSpacing) {
    const auto e = point_error(single({{0.0, 0.0}}), single({{0.0, 2.0}}), Spacing({1.0, 0.5}));
    EXPECT_EQ(e.at(0, 0), 1.0);
}

TEST(PointError, MissingEntriesAreSkipped) {
    LandmarkSet pred = single({{1.0, 1.0}, {2.0, 2.0}});
    LandmarkSet truth = single({{1.0, 1.0}, {2.0, 2.0}});
    truth.set_missing(0, 1);
    const auto e = point_error(pred, truth, kUnit);
    EXPECT_FALSE(e.skipped(0));
    EXPECT_TRUE(e.skipped(1));
    EXPECT_EQ(e.evaluated().size(), 1u);
}

TEST(PointError, RejectsShapeMismatch) {
    EXPECT_THROW(point_error(single({{1.0, 1.0}}), single({{1.0, 1.0}, {2.0, 2.0}}), kUnit), InvalidArgument);
    EXPECT_THROW(point_error(single({{1.0, 1.0}}), single({{1.0, 1.0}}), Spacing::unit(3)), InvalidArgument);
}

TEST(Sdr, InclusiveBoundary) {
    const std::vector<double> e{0.5, 1.0, 2.5};
    EXPECT_DOUBLE_EQ(sdr(e, 1.0), 100.0 * 2.0 / 3.0);
    EXPECT_EQ(sdr(e, 10.0), 100.0);
    const std::vector<double> same{2.0, 2.0, 2.0};
    EXPECT_EQ(sdr(same, 2.0), 100.0);
    EXPECT_EQ(sdr(same, std::nextafter(2.0, 0.0)), 0.0);
}

TEST(Sdr, EmptyIsUndefined) {
    EXPECT_THROW(sdr(std::vector<double>{}, 1.0), DegenerateInputError);
}

TEST(Sdr, MatchesBruteForceCount) {
    Rng rng(9);
    std::vector<double> e(997);
    for (double& v : e) v = std::floor(rng.uniform(0, 8) * 4.0) / 4.0;  // many exact ties with radii
    for (double r : {0.25, 1.0, 2.0, 2.5, 3.0, 4.0, 7.75}) {
        std::size_t hits = 0;
        for (double v : e) hits += v <= r ? 1 : 0;
        EXPECT_EQ(sdr(e, r), 100.0 * double(hits) / double(e.size()));
    }
}

TEST(DetectionReport, HandBuiltThreeLandmarks) {
    const auto [pred, truth] = three_landmarks();
    const auto rep = detection_report(pred, truth, kUnit, ReportConfig{{1.0, 2.0, 3.0}});
    ASSERT_TRUE(rep.overall.pe_mean_mm);
    EXPECT_DOUBLE_EQ(*rep.overall.pe_mean_mm, 4.0 / 3.0);
    EXPECT_DOUBLE_EQ(*rep.overall.pe_median_mm, 1.0);
    // population std of {0.5, 1, 2.5}
    const double m = 4.0 / 3.0;
    const double var = ((0.5 - m) * (0.5 - m) + (1 - m) * (1 - m) + (2.5 - m) * (2.5 - m)) / 3.0;
    EXPECT_NEAR(*rep.overall.pe_std_mm, std::sqrt(var), 1e-15);
    ASSERT_EQ(rep.overall.sdr.size(), 3u);
    EXPECT_DOUBLE_EQ(rep.overall.sdr[0].second, 200.0 / 3.0);
    EXPECT_DOUBLE_EQ(rep.overall.sdr[1].second, 200.0 / 3.0);
    EXPECT_EQ(rep.overall.sdr[2].second, 100.0);
    EXPECT_EQ(rep.overall.n, 3u);
    EXPECT_EQ(rep.classes.size(), 3u);
    EXPECT_EQ(*rep.classes[2].pe_mean_mm, 2.5);
}

TEST(DetectionReport, EvenCountMedianAveragesMiddlePair) {
    const auto rep = detection_report(single({{0.0, 1.0}, {0.0, 3.0}, {0.0, 4.0}, {0.0, 10.0}}),
                                      single({{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}}), kUnit);
    EXPECT_EQ(*rep.overall.pe_median_mm, 3.5);
}

TEST(DetectionReport, AllMissingTruth) {
    LandmarkSet truth(1, 2, 1, 2);
    const auto rep = detection_report(single({{1.0, 1.0}, {2.0, 2.0}}), truth, kUnit);
    EXPECT_EQ(rep.overall.n, 0u);
    EXPECT_EQ(rep.skipped, 2u);
    EXPECT_FALSE(rep.overall.pe_mean_mm);
    EXPECT_TRUE(rep.overall.sdr.empty());
    const auto j = to_json(rep);
    EXPECT_FALSE(j["overall"].contains("pe_mean_mm"));
    EXPECT_FALSE(j["overall"].contains("sdr"));
    EXPECT_EQ(j["skipped"], 2);
}

TEST(DetectionReport, RadiusKeysAreShortest) {
    EXPECT_EQ(radius_key(1.0), "1");
    EXPECT_EQ(radius_key(2.5), "2.5");
    EXPECT_EQ(radius_key(0.1), "0.1");
    const auto [pred, truth] = three_landmarks();
    const auto j = to_json(detection_report(pred, truth, kUnit, ReportConfig{{1, 2, 3, 4}}));
    std::vector<std::string> keys;
    for (const auto& [k, v] : j["overall"]["sdr"].items()) keys.push_back(k);
    EXPECT_EQ(keys, (std::vector<std::string>{"1", "2", "3", "4"}));
}

TEST(DetectionReport, RadiiMustAscend) {
    const auto [pred, truth] = three_landmarks();
    EXPECT_THROW(detection_report(pred, truth, kUnit, ReportConfig{{2.0, 1.0}}), InvalidArgument);
    EXPECT_THROW(detection_report(pred, truth, kUnit, ReportConfig{{0.0}}), InvalidArgument);
}

TEST(DetectionReport, JsonRoundTripAndDeterminism) {
    const auto [pred, truth] = three_landmarks();
    const auto rep = detection_report(pred, truth, Spacing({0.1, 0.1}));
    const std::string text = report_to_string(rep);
    EXPECT_EQ(text, report_to_string(detection_report(pred, truth, Spacing({0.1, 0.1}))));
    EXPECT_EQ(text.back(), '\n');
    const auto back = report_from_json(nlohmann::json::parse(text));
    EXPECT_EQ(report_to_string(back), text);
    EXPECT_THROW(report_from_json(nlohmann::json::parse("{\"classes\": 3}")), FormatError);
}

TEST(DetectionReport, TextTableHasOneRowPerClass) {
    const auto [pred, truth] = three_landmarks();
    const auto text = format_text(detection_report(pred, truth, kUnit));
    EXPECT_NE(text.find("SDR 2.5mm"), std::string::npos);
    EXPECT_NE(text.find("Overall"), std::string::npos);
    EXPECT_NE(text.find("L2"), std::string::npos);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 7);
}

TEST(DetectionReport, PooledStatisticsMatchBruteForce) {
    Rng rng(31);
    LandmarkSet pred(40, 5, 1, 2), truth(40, 5, 1, 2);
    for (std::size_t n = 0; n < 40; ++n) {
        for (std::size_t c = 0; c < 5; ++c) {
            const std::vector<double> t{rng.uniform(0, 100), rng.uniform(0, 100)};
            const std::vector<double> p{t[0] + rng.uniform(-4, 4), t[1] + rng.uniform(-4, 4)};
            truth.set(n, c, t);
            if (rng.below(10) != 0) pred.set(n, c, p);
        }
    }
    const Spacing sp({0.3, 0.2});
    const auto rep = detection_report(pred, truth, sp);
    std::vector<double> ref;
    for (std::size_t n = 0; n < 40; ++n) {
        for (std::size_t c = 0; c < 5; ++c) {
            if (pred.missing(n, c)) continue;
            const double dy = (pred.at(n, c)[0] - truth.at(n, c)[0]) * 0.3;
            const double dx = (pred.at(n, c)[1] - truth.at(n, c)[1]) * 0.2;
            ref.push_back(std::sqrt(dy * dy + dx * dx));
        }
    }
    ASSERT_EQ(rep.overall.n, ref.size());
    EXPECT_EQ(rep.overall.skipped + ref.size(), 200u);
    double sum = 0.0;
    for (double v : ref) sum += v;
    EXPECT_NEAR(*rep.overall.pe_mean_mm, sum / double(ref.size()), 1e-12);
    for (const auto& [r, pct] : rep.overall.sdr) {
        const auto hits = std::count_if(ref.begin(), ref.end(), [r = r](double v) { return v <= r; });
        EXPECT_EQ(pct, 100.0 * double(hits) / double(ref.size()));
    }
}
