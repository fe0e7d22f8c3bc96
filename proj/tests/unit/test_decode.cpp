#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "landmark_kit/decode.hpp"
#include "landmark_kit/encode.hpp"
#include "landmark_kit/error.hpp"
#include "landmark_kit/random.hpp"
#include "test_util.hpp"

using namespace lmk;
using lmk::test::single;

namespace {

// Direct-summation oracle for the softmax weighted mean of an isotropic
// Gaussian evaluated analytically at every pixel (no library code involved).
std::vector<double> oracle_softmax_mean(double mr, double mc, double sigma, std::size_t n, double temperature) {
    double top = 0.0;
    std::vector<double> v(n * n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            const double d2 = (r - mr) * (r - mr) + (c - mc) * (c - mc);
            v[r * n + c] = std::exp(-d2 / (2 * sigma * sigma)) / temperature;
            top = std::max(top, v[r * n + c]);
        }
    }
    double z = 0.0, sr = 0.0, sc = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        const double w = std::exp(v[k] - top);
        z += w;
        sr += w * double(k / n);
        sc += w * double(k % n);
    }
    return {sr / z, sc / z};
}

Heatmap blobs(std::initializer_list<std::pair<std::vector<double>, double>> parts, double sigma, Extents size) {
    Heatmap h(1, size);
    for (const auto& [mu, amp] : parts) {
        const auto one = encode(single({mu}), CovarianceSpec(1, 2, sigma), size);
        for (std::size_t k = 0; k < h.pixels(); ++k) h.values()[k] += amp * one.values()[k];
    }
    return h;
}

double dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
    return std::sqrt(s);
}

}  // namespace

TEST(Activation, OutputsAreProbabilityVectors) {
    Rng rng(1);
    std::vector<double> v(200);
    for (int trial = 0; trial < 100; ++trial) {
        for (double& x : v) x = rng.uniform(-2.0, 5.0);
        for (const auto& act : {Activation::softmax(rng.uniform(0.05, 3.0)), Activation::relu()}) {
            const auto p = activate(v, act);
            ASSERT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
            for (double x : p) ASSERT_GE(x, 0.0);
        }
        for (double& x : v) x = std::abs(x) + 0.01;
        const auto p = activate(v, Activation::identity());
        ASSERT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
    }
}

TEST(Activation, DegenerateInputs) {
    const std::vector<double> neg{-1.0, 0.0, -3.0};
    EXPECT_THROW(activate(neg, Activation::relu()), DegenerateInputError);
    EXPECT_THROW(activate(neg, Activation::identity()), DegenerateInputError);
    const std::vector<double> zero{0.0, 0.0};
    EXPECT_THROW(activate(zero, Activation::identity()), DegenerateInputError);
    EXPECT_NO_THROW(activate(neg, Activation::softmax()));
    EXPECT_THROW(Activation::softmax(0.0).validate(), InvalidArgument);
    EXPECT_THROW(Activation::softmax(-1.0).validate(), InvalidArgument);
}

TEST(Activation, SoftmaxSurvivesLargeInputs) {
    const std::vector<double> big{1000.0, 1001.0, 999.0};
    const auto p = activate(big, Activation::softmax(0.01));
    EXPECT_NEAR(p[1], 1.0, 1e-12);
}

TEST(DecodeArgmax, SinglePeakAndTies) {
    Heatmap h(1, {8, 8});
    h.channel(0)[3 * 8 + 5] = 1.0;
    auto lms = decode_argmax(h);
    EXPECT_EQ(lms.at(0, 0)[0], 3.0);
    EXPECT_EQ(lms.at(0, 0)[1], 5.0);

    Heatmap t(1, {4, 4});
    t.channel(0)[1 * 4 + 1] = 2.0;
    t.channel(0)[2 * 4 + 0] = 2.0;
    std::vector<bool> ties;
    lms = decode_argmax(t, &ties);
    EXPECT_EQ(lms.at(0, 0)[0], 1.0);
    EXPECT_EQ(lms.at(0, 0)[1], 1.0);
    EXPECT_TRUE(ties[0]);
}

TEST(DecodeArgmax, FlatHeatmapGivesOriginWithTieFlag) {
    Heatmap h(2, {5, 5});
    h.channel(1)[7] = 1.0;
    std::vector<bool> ties;
    const auto lms = decode_argmax(h, &ties);
    EXPECT_EQ(lms.at(0, 0)[0], 0.0);
    EXPECT_EQ(lms.at(0, 0)[1], 0.0);
    EXPECT_TRUE(ties[0]);
    EXPECT_FALSE(ties[1]);
}

TEST(DecodeArgmax, GaussianPeak) {
    const auto h = encode(single({{20.0, 30.0}}), CovarianceSpec(1, 2, 3.0), {64, 64});
    const auto lms = decode_argmax(h);
    EXPECT_EQ(lms.at(0, 0)[0], 20.0);
    EXPECT_EQ(lms.at(0, 0)[1], 30.0);
}

TEST(DecodeArgmax, DiscretizationBound) {
    Rng rng(12);
    for (int trial = 0; trial < 500; ++trial) {
        const std::vector<double> mu{rng.uniform(12, 52), rng.uniform(12, 52)};
        const auto lms = decode_argmax(encode(single({mu}), CovarianceSpec(1, 2, 3.0), {64, 64}));
        ASSERT_LE(dist(lms.at(0, 0), mu), 0.5 * std::sqrt(2.0));
    }
}

// The 1-D example (0, 1, 1, 0) laid out as a single row of a 1x4 grid.
TEST(DecodeWeightedMean, HandComputedRow) {
    const Heatmap h(1, {1, 4}, {0.0, 1.0, 1.0, 0.0});
    auto px = decode_weighted_mean(h, Activation::identity(), Units::pixels);
    EXPECT_DOUBLE_EQ(px.at(0, 0)[1], 1.5);
    EXPECT_DOUBLE_EQ(px.at(0, 0)[0], 0.0);
    auto norm = decode_weighted_mean(h, Activation::identity(), Units::normalized);
    EXPECT_DOUBLE_EQ(norm.at(0, 0)[1], 0.375);
}

TEST(DecodeWeightedMean, SoftmaxMatchesDirectSummation) {
    const auto h = encode(single({{20.0, 30.0}}), CovarianceSpec(1, 2, 3.0), {64, 64});
    for (double t : {1.0, 0.5, 0.05}) {
        const auto lms = decode_weighted_mean(h, Activation::softmax(t));
        const auto ref = oracle_softmax_mean(20.0, 30.0, 3.0, 64, t);
        EXPECT_NEAR(lms.at(0, 0)[0], ref[0], 1e-9);
        EXPECT_NEAR(lms.at(0, 0)[1], ref[1], 1e-9);
    }
}

// At T = 1 the flat background of a unit-peak heatmap carries most of the
// softmax mass, which pulls the estimate toward the grid centre; a sharp
// temperature recovers the peak.
TEST(DecodeWeightedMean, SharpSoftmaxRecoversOnGridPeak) {
    const auto h = encode(single({{20.0, 30.0}}), CovarianceSpec(1, 2, 3.0), {64, 64});
    const auto sharp = decode_weighted_mean(h, Activation::softmax(0.05));
    EXPECT_LT(std::abs(sharp.at(0, 0)[0] - 20.0), 0.05);
    EXPECT_LT(std::abs(sharp.at(0, 0)[1] - 30.0), 0.05);
    const auto soft = decode_weighted_mean(h, Activation::softmax(1.0));
    EXPECT_GT(dist(soft.at(0, 0), std::vector<double>{20.0, 30.0}), 1.0);
}

TEST(DecodeWeightedMean, SubPixelRoundTrip) {
    Rng rng(77);
    for (int trial = 0; trial < 300; ++trial) {
        const std::vector<double> mu{rng.uniform(12, 51), rng.uniform(12, 51)};
        const auto h = encode(single({mu}), CovarianceSpec(1, 2, 3.0), {64, 64});
        ASSERT_LT(dist(decode_weighted_mean(h, Activation::softmax(0.05)).at(0, 0), mu), 0.1);
        ASSERT_LT(dist(decode_weighted_mean(h, Activation::identity()).at(0, 0), mu), 0.1);
    }
}

TEST(DecodeWeightedMean, LowTemperatureApproachesArgmax) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        Heatmap h(1, {16, 16});
        for (double& v : h.values()) v = rng.uniform(0.0, 0.5);
        h.values()[rng.below(h.pixels())] = 1.0;
        const auto soft = decode_weighted_mean(h, Activation::softmax(0.01));
        const auto hard = decode_argmax(h);
        ASSERT_LT(dist(soft.at(0, 0), hard.at(0, 0)), 1e-9);
    }
}

TEST(DecodeWeightedMean, UnitsAreConsistent) {
    Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const Extents size{std::size_t(8 + rng.below(40)), std::size_t(8 + rng.below(40))};
        Heatmap h(1, size);
        for (double& v : h.values()) v = rng.uniform();
        const auto px = decode_weighted_mean(h, Activation::softmax(0.3));
        const auto nm = decode_weighted_mean(h, Activation::softmax(0.3), Units::normalized);
        for (std::size_t d = 0; d < 2; ++d) ASSERT_NEAR(nm.at(0, 0)[d] * double(size[d]), px.at(0, 0)[d], 1e-12);
    }
    // Power-of-two extents make the scaling exact.
    Heatmap h(1, {64, 32});
    for (std::size_t k = 0; k < h.pixels(); ++k) h.values()[k] = std::sin(double(k)) + 1.5;
    const auto px = decode_weighted_mean(h, Activation::identity());
    const auto nm = decode_weighted_mean(h, Activation::identity(), Units::normalized);
    EXPECT_EQ(nm.at(0, 0)[0] * 64.0, px.at(0, 0)[0]);
    EXPECT_EQ(nm.at(0, 0)[1] * 32.0, px.at(0, 0)[1]);
}

TEST(DecodeWeightedMean, ShiftAndScaleInvariance) {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        Heatmap h(1, {12, 12});
        for (double& v : h.values()) v = rng.uniform(0.01, 1.0);
        Heatmap shifted = h, scaled = h;
        const double k = rng.uniform(-5, 5), c = rng.uniform(0.1, 10);
        for (double& v : shifted.values()) v += k;
        for (double& v : scaled.values()) v *= c;
        const auto base_soft = decode_weighted_mean(h, Activation::softmax(0.5));
        const auto shift_soft = decode_weighted_mean(shifted, Activation::softmax(0.5));
        for (const auto& act : {Activation::identity(), Activation::relu()}) {
            const auto a = decode_weighted_mean(h, act);
            const auto b = decode_weighted_mean(scaled, act);
            for (std::size_t d = 0; d < 2; ++d) ASSERT_NEAR(a.at(0, 0)[d], b.at(0, 0)[d], 1e-9);
        }
        for (std::size_t d = 0; d < 2; ++d) ASSERT_NEAR(base_soft.at(0, 0)[d], shift_soft.at(0, 0)[d], 1e-9);
    }
}

TEST(DecodeWeightedMean, ReluDegenerateCarriesChannel) {
    Heatmap h(3, {4, 4});
    for (double& v : h.values()) v = 1.0;
    for (double& v : h.channel(2)) v = -1.0;
    try {
        decode_weighted_mean(h, Activation::relu());
        FAIL() << "expected DegenerateInputError";
    } catch (const DegenerateInputError& e) {
        EXPECT_EQ(e.channel(), 2);
    }
}

TEST(DecodeWeightedMean, ThreeDimensional) {
    const CovarianceSpec cov(1, 3, 2.0);
    LandmarkSet lms(1, 1, 1, 3);
    const std::vector<double> mu{10.3, 11.6, 9.2};
    lms.set(0, 0, mu);
    const auto h = encode(lms, cov, {24, 24, 24});
    EXPECT_LT(dist(decode_weighted_mean(h, Activation::identity()).at(0, 0), mu), 0.05);
}

TEST(DecodeLocal, FullWindowEqualsGlobal) {
    Rng rng(3);
    for (const Extents& size : {Extents{15, 21}, Extents{64, 64}}) {
        for (int trial = 0; trial < 10; ++trial) {
            Heatmap h(1, size);
            for (double& v : h.values()) v = rng.uniform();
            const auto global = decode_weighted_mean(h, Activation::softmax(0.7));
            const auto local = decode_local_weighted_mean(h, Activation::softmax(0.7), size);
            for (std::size_t d = 0; d < 2; ++d) ASSERT_NEAR(local.at(0, 0)[d], global.at(0, 0)[d], 1e-12);
        }
    }
}

TEST(DecodeLocal, UnitWindowEqualsArgmax) {
    Rng rng(4);
    Heatmap h(2, {9, 13});
    for (double& v : h.values()) v = rng.uniform();
    const auto local = decode_local_weighted_mean(h, Activation::identity(), {1, 1});
    EXPECT_EQ(local, decode_argmax(h));
}

TEST(DecodeLocal, DistractorDoesNotPullLocalEstimate) {
    const auto h = blobs({{{20.0, 30.0}, 1.0}, {{50.0, 10.0}, 0.4}}, 3.0, {64, 64});
    const std::vector<double> truth{20.0, 30.0};
    const auto local = decode_local_weighted_mean(h, Activation::identity(), {7, 7});
    const auto global = decode_weighted_mean(h, Activation::identity());
    EXPECT_LT(dist(local.at(0, 0), truth), 0.5);
    EXPECT_GT(dist(global.at(0, 0), truth), 2.0);

    // Oracle: direct summation over the analytic blob pair inside the 7x7 window.
    double z = 0, sr = 0, sc = 0;
    for (int r = 17; r <= 23; ++r) {
        for (int c = 27; c <= 33; ++c) {
            const double w = std::exp(-((r - 20.0) * (r - 20.0) + (c - 30.0) * (c - 30.0)) / 18.0) +
                             0.4 * std::exp(-((r - 50.0) * (r - 50.0) + (c - 10.0) * (c - 10.0)) / 18.0);
            z += w;
            sr += w * r;
            sc += w * c;
        }
    }
    EXPECT_NEAR(local.at(0, 0)[0], sr / z, 1e-12);
    EXPECT_NEAR(local.at(0, 0)[1], sc / z, 1e-12);
}

TEST(DecodeLocal, BorderWindowShiftsInside) {
    Heatmap h(1, {8, 8});
    h.channel(0)[0] = 1.0;
    h.channel(0)[1] = 1.0;
    auto lms = decode_local_weighted_mean(h, Activation::identity(), {5, 5});
    EXPECT_DOUBLE_EQ(lms.at(0, 0)[0], 0.0);
    EXPECT_DOUBLE_EQ(lms.at(0, 0)[1], 0.5);

    // Flat grid: argmax is (0, 0) and the 5x5 window covers rows and cols 0..4.
    Heatmap flat(1, {8, 8});
    for (double& v : flat.values()) v = 1.0;
    lms = decode_local_weighted_mean(flat, Activation::identity(), {5, 5});
    EXPECT_DOUBLE_EQ(lms.at(0, 0)[0], 2.0);
    EXPECT_DOUBLE_EQ(lms.at(0, 0)[1], 2.0);
}

TEST(DecodeLocal, WindowValidation) {
    Heatmap h(1, {8, 8});
    h.channel(0)[9] = 1.0;
    EXPECT_THROW(decode_local_weighted_mean(h, Activation::identity(), {4, 4}), InvalidArgument);
    EXPECT_THROW(decode_local_weighted_mean(h, Activation::identity(), {0, 3}), InvalidArgument);
    EXPECT_THROW(decode_local_weighted_mean(h, Activation::identity(), {3, 3, 3}), InvalidArgument);
    EXPECT_EQ(decode_local_weighted_mean(h, Activation::identity(), {9, 9}), decode_weighted_mean(h, Activation::identity()));
    EXPECT_NO_THROW(decode_local_weighted_mean(h, Activation::identity(), {3}));
}

TEST(DecodeMultiInstance, TwoEqualBlobs) {
    const auto h = blobs({{{15.3, 20.7}, 1.0}, {{45.6, 40.2}, 1.0}}, 2.5, {64, 64});
    DecodeConfig cfg;
    cfg.activation = Activation::identity();
    cfg.window = {7, 7};
    const auto lms = decode_multi_instance(h, 2, 5.0, cfg);
    ASSERT_EQ(lms.instances(), 2u);
    std::vector<std::vector<double>> want{{15.3, 20.7}, {45.6, 40.2}};
    for (const auto& w : want) {
        const double best = std::min(dist(lms.at(0, 0, 0), w), dist(lms.at(0, 0, 1), w));
        EXPECT_LT(best, 0.5);
    }
}

TEST(DecodeMultiInstance, SingleInstanceEqualsLocal) {
    Rng rng(10);
    Heatmap h(2, {20, 20});
    for (double& v : h.values()) v = rng.uniform();
    DecodeConfig cfg;
    cfg.activation = Activation::softmax(0.2);
    cfg.window = {5, 5};
    EXPECT_EQ(decode_multi_instance(h, 1, 2.0, cfg), decode_local_weighted_mean(h, cfg.activation, cfg.window));
}

TEST(DecodeMultiInstance, BlankHeatmapGivesSentinels) {
    const Heatmap h(1, {10, 10});
    const auto lms = decode_multi_instance(h, 2, 1.0, DecodeConfig{});
    EXPECT_TRUE(lms.missing(0, 0, 0));
    EXPECT_TRUE(lms.missing(0, 0, 1));
}

TEST(DecodeMultiInstance, SuppressionAndValidation) {
    // Two adjacent local maxima within min_separation collapse to one.
    Heatmap h(1, {10, 10});
    h.channel(0)[2 * 10 + 2] = 1.0;
    h.channel(0)[2 * 10 + 4] = 0.9;
    h.channel(0)[8 * 10 + 8] = 0.5;
    DecodeConfig cfg;
    cfg.method = DecodeMethod::argmax;
    const auto lms = decode_multi_instance(h, 3, 2.0, cfg);
    EXPECT_EQ(lms.at(0, 0, 0)[1], 2.0);
    EXPECT_EQ(lms.at(0, 0, 1)[0], 8.0);
    EXPECT_TRUE(lms.missing(0, 0, 2));
    EXPECT_THROW(decode_multi_instance(h, 1, -1.0, cfg), InvalidArgument);
    EXPECT_THROW(decode_multi_instance(h, 0, 1.0, cfg), InvalidArgument);
}

TEST(Decode, DispatchesOnMethod) {
    Rng rng(2);
    Heatmap h(1, {12, 12});
    for (double& v : h.values()) v = rng.uniform();
    DecodeConfig cfg;
    cfg.method = DecodeMethod::argmax;
    EXPECT_EQ(decode(h, cfg), decode_argmax(h));
    cfg.method = DecodeMethod::weighted_mean;
    EXPECT_EQ(decode(h, cfg), decode_weighted_mean(h, cfg.activation));
    cfg.method = DecodeMethod::local_weighted_mean;
    EXPECT_EQ(decode(h, cfg), decode_local_weighted_mean(h, cfg.activation, {3, 3}));
}

TEST(WeightedMeanJacobian, MatchesFiniteDifferences) {
    Rng rng(99);
    for (int trial = 0; trial < 30; ++trial) {
        const Extents size{7, 9};
        Heatmap h(1, size);
        for (double& v : h.values()) v = rng.uniform(0.05, 1.0);
        const Activation act = trial % 3 == 0   ? Activation::softmax(rng.uniform(0.2, 2.0))
                               : trial % 3 == 1 ? Activation::identity()
                                                : Activation::relu();
        const auto jac = weighted_mean_jacobian(h.channel(0), size, act);
        const double step = 1e-6;
        double diff = 0.0, scale = 1e-12;
        for (std::size_t j = 0; j < h.pixels(); ++j) {
            const double orig = h.values()[j];
            h.values()[j] = orig + step;
            const auto p = decode_weighted_mean(h, act);
            h.values()[j] = orig - step;
            const auto m = decode_weighted_mean(h, act);
            h.values()[j] = orig;
            for (std::size_t d = 0; d < 2; ++d) {
                const double fd = (p.at(0, 0)[d] - m.at(0, 0)[d]) / (2 * step);
                diff = std::max(diff, std::abs(fd - jac[d * h.pixels() + j]));
                scale = std::max({scale, std::abs(fd), std::abs(jac[d * h.pixels() + j])});
            }
        }
        ASSERT_LT(diff / scale, 1e-4);
    }
}
