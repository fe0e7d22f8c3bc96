#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "landmark_kit/encode.hpp"
#include "landmark_kit/error.hpp"
#include "landmark_kit/random.hpp"
#include "test_util.hpp"

using namespace lmk;
using lmk::test::single;

namespace {

double at(const Heatmap& h, std::size_t c, std::size_t r, std::size_t col) { return h.channel(c)[r * h.extents()[1] + col]; }

// Reference Gaussian with an explicitly built inverse covariance (2-D only).
double gaussian_2d(double r, double c, double mr, double mc, double s0, double s1, double theta) {
    const double co = std::cos(theta);
    const double si = std::sin(theta);
    // Sigma = R diag(s^2) R^T with R = [[c, -s], [s, c]]
    const double a = co * co * s0 * s0 + si * si * s1 * s1;
    const double b = co * si * (s0 * s0 - s1 * s1);
    const double d = si * si * s0 * s0 + co * co * s1 * s1;
    const double det = a * d - b * b;
    const double dr = r - mr;
    const double dc = c - mc;
    const double q = (d * dr * dr - 2.0 * b * dr * dc + a * dc * dc) / det;
    return std::exp(-0.5 * q);
}

}  // namespace

TEST(Encode, GaussianClosedForm) {
    const auto h = encode(single({{20.0, 30.0}}), CovarianceSpec(1, 2, 3.0), {64, 64});
    EXPECT_DOUBLE_EQ(at(h, 0, 20, 30), 1.0);
    EXPECT_NEAR(at(h, 0, 23, 30), 0.606531, 1e-6);
    EXPECT_DOUBLE_EQ(at(h, 0, 23, 30), std::exp(-0.5));
}

TEST(Encode, AnisotropicRotatedMatchesReference) {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const double mr = rng.uniform(10, 30);
        const double mc = rng.uniform(10, 30);
        const double s0 = rng.uniform(1, 5);
        const double s1 = rng.uniform(1, 5);
        const double th = rng.uniform(-3, 3);
        const CovarianceSpec cov(1, 2, {s0, s1}, {th});
        const auto h = encode(single({{mr, mc}}), cov, {40, 40});
        for (std::size_t r = 0; r < 40; r += 3) {
            for (std::size_t c = 0; c < 40; c += 3) {
                ASSERT_NEAR(at(h, 0, r, c), gaussian_2d(double(r), double(c), mr, mc, s0, s1, th), 1e-12);
            }
        }
    }
}

TEST(Encode, CovarianceIsSymmetricPositiveDefinite) {
    const CovarianceSpec cov(1, 3, {1.0, 2.0, 3.0}, {0.3, -0.7, 1.1});
    const Eigen::MatrixXd s = cov.covariance(0);
    EXPECT_TRUE(s.isApprox(s.transpose(), 1e-14));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
    EXPECT_NEAR(eig.eigenvalues()(0), 1.0, 1e-12);
    EXPECT_NEAR(eig.eigenvalues()(2), 9.0, 1e-12);
}

TEST(Encode, OneHotNearestPixel) {
    const auto h = encode(single({{20.6, 30.2}}), CovarianceSpec(1, 2), {64, 64}, {EncodingKind::one_hot});
    double sum = 0.0;
    for (double v : h.values()) sum += v;
    EXPECT_EQ(sum, 1.0);
    EXPECT_EQ(at(h, 0, 21, 30), 1.0);
}

TEST(Encode, OneHotTiesGoToLowerIndex) {
    const auto h = encode(single({{4.5, 7.5}}), CovarianceSpec(1, 2), {16, 16}, {EncodingKind::one_hot});
    EXPECT_EQ(at(h, 0, 4, 7), 1.0);
}

TEST(Encode, OneHotOutsideGridIsClamped) {
    const auto h = encode(single({{-3.0, 40.0}}), CovarianceSpec(1, 2), {16, 16}, {EncodingKind::one_hot});
    EXPECT_EQ(at(h, 0, 0, 15), 1.0);
}

TEST(Encode, MissingLandmarkGivesZeroChannel) {
    LandmarkSet lms(1, 2, 1, 2);
    const std::vector<double> p{5, 5};
    lms.set(0, 1, p);
    for (auto kind : {EncodingKind::gaussian, EncodingKind::laplace, EncodingKind::one_hot}) {
        const auto h = encode(lms, CovarianceSpec(2, 2), {12, 12}, {kind});
        for (double v : h.channel(0)) ASSERT_EQ(v, 0.0);
        double sum = 0.0;
        for (double v : h.channel(1)) sum += v;
        EXPECT_GT(sum, 0.0);
    }
}

TEST(Encode, LaplaceAndGaussianOnAxisClosedForms) {
    const double sigma = 2.5;
    const auto lms = single({{16.0, 16.0}});
    const auto g = encode(lms, CovarianceSpec(1, 2, sigma), {33, 33});
    const auto l = encode(lms, CovarianceSpec(1, 2, sigma), {33, 33}, {EncodingKind::laplace});
    EXPECT_EQ(at(g, 0, 16, 16), 1.0);
    EXPECT_EQ(at(l, 0, 16, 16), 1.0);
    for (int d = 1; d <= 16; ++d) {
        EXPECT_NEAR(at(l, 0, 16, 16 + d), std::exp(-d / sigma), 1e-14);
        EXPECT_NEAR(at(l, 0, 16 - d, 16), std::exp(-d / sigma), 1e-14);
        EXPECT_NEAR(at(g, 0, 16, 16 + d), std::exp(-double(d * d) / (2 * sigma * sigma)), 1e-14);
    }
}

TEST(Encode, LaplaceRotatedL1Form) {
    const double s0 = 2.0, s1 = 4.0, th = 0.4;
    const CovarianceSpec cov(1, 2, {s0, s1}, {th});
    const auto h = encode(single({{10.0, 12.0}}), cov, {24, 24}, {EncodingKind::laplace});
    const double co = std::cos(th), si = std::sin(th);
    for (std::size_t r = 0; r < 24; r += 5) {
        for (std::size_t c = 0; c < 24; c += 5) {
            const double dr = double(r) - 10.0, dc = double(c) - 12.0;
            // u = R^T x, v = R (u / sigma)
            const double u0 = co * dr + si * dc, u1 = -si * dr + co * dc;
            const double v0 = co * u0 / s0 - si * u1 / s1, v1 = si * u0 / s0 + co * u1 / s1;
            EXPECT_NEAR(at(h, 0, r, c), std::exp(-(std::abs(v0) + std::abs(v1))), 1e-13);
        }
    }
}

TEST(Encode, IsotropicCentredIsQuarterTurnSymmetric) {
    const std::size_t n = 21;
    const auto h = encode(single({{10.0, 10.0}}), CovarianceSpec(1, 2, 3.0), {n, n});
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) ASSERT_EQ(at(h, 0, r, c), at(h, 0, c, n - 1 - r));
    }
}

TEST(Encode, MaximumAtNearestPixel) {
    Rng rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        const double r = rng.uniform(8, 24), c = rng.uniform(8, 24);
        const auto h = encode(single({{r, c}}), CovarianceSpec(1, 2, rng.uniform(1, 4)), {32, 32});
        const auto vals = h.channel(0);
        const auto best = std::max_element(vals.begin(), vals.end()) - vals.begin();
        ASSERT_EQ(std::size_t(best) / 32, std::size_t(std::lround(r)));
        ASSERT_EQ(std::size_t(best) % 32, std::size_t(std::lround(c)));
    }
}

TEST(Encode, MonotoneInIsotropicSigma) {
    const auto lms = single({{12.3, 15.8}});
    Heatmap prev = encode(lms, CovarianceSpec(1, 2, 0.5), {32, 32});
    for (double s = 0.75; s <= 8.0; s += 0.25) {
        const Heatmap cur = encode(lms, CovarianceSpec(1, 2, s), {32, 32});
        for (std::size_t k = 0; k < cur.pixels(); ++k) ASSERT_GE(cur.values()[k], prev.values()[k]);
        prev = cur;
    }
}

TEST(Encode, TruncationChangesValuesBelowTolerance) {
    const CovarianceSpec cov(1, 2, {1.5, 2.5}, {0.6});
    const auto lms = single({{30.2, 31.7}});
    const auto full = encode(lms, cov, {64, 64});
    const auto cut = encode(lms, cov, {64, 64}, {EncodingKind::gaussian, false, true});
    std::size_t zeroed = 0;
    for (std::size_t k = 0; k < full.pixels(); ++k) {
        ASSERT_LT(std::abs(full.values()[k] - cut.values()[k]), 1e-7);
        zeroed += cut.values()[k] == 0.0 && full.values()[k] != 0.0;
    }
    EXPECT_GT(zeroed, 0u);
}

TEST(Encode, NormalizeSumsToOne) {
    const auto h = encode(single({{8.0, 9.0}, {3.0, 3.0}}), CovarianceSpec(2, 2, 2.0), {20, 20},
                          {EncodingKind::gaussian, true, false});
    for (std::size_t c = 0; c < 2; ++c) {
        double sum = 0.0;
        for (double v : h.channel(c)) sum += v;
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(Encode, MultiInstanceTakesPixelwiseMax) {
    LandmarkSet lms(1, 1, 2, 2);
    const std::vector<double> a{5, 5}, b{6, 8};
    lms.set(0, 0, 0, a);
    lms.set(0, 0, 1, b);
    const CovarianceSpec cov(1, 2, 2.0);
    const auto both = encode(lms, cov, {16, 16});
    const auto ha = encode(single({a}), cov, {16, 16});
    const auto hb = encode(single({b}), cov, {16, 16});
    for (std::size_t k = 0; k < both.pixels(); ++k) ASSERT_EQ(both.values()[k], std::max(ha.values()[k], hb.values()[k]));
}

TEST(Encode, InvalidInputsAreRejected) {
    EXPECT_THROW(CovarianceSpec(1, 2, {1.0, 0.0}, {0.0}), InvalidArgument);
    EXPECT_THROW(CovarianceSpec(1, 2, {1.0, -1.0}, {0.0}), InvalidArgument);
    EXPECT_THROW(encode(single({{1.0, 1.0}}), CovarianceSpec(1, 2), {0, 4}), InvalidArgument);
    EXPECT_THROW(encode(single({{1.0, 1.0}}), CovarianceSpec(1, 3), {4, 4}), InvalidArgument);
}

TEST(EncodeGrad, HeatmapMatchesEncode) {
    const CovarianceSpec cov(2, 2, {2.0, 3.0, 1.5, 2.5}, {0.3, -1.0});
    const auto lms = single({{10.2, 11.9}, {5.0, 17.5}});
    const auto g = encode_grad(lms, cov, {24, 24});
    const auto h = encode(lms, cov, {24, 24});
    for (std::size_t k = 0; k < h.values().size(); ++k) ASSERT_DOUBLE_EQ(g.heatmap.values()[k], h.values()[k]);
}

TEST(EncodeGrad, SigmaPartialVanishesAtPeak) {
    const CovarianceSpec cov(1, 2, {2.0, 3.5}, {0.7});
    const auto g = encode_grad(single({{9.0, 12.0}}), cov, {20, 24});
    for (std::size_t d = 0; d < 2; ++d) EXPECT_EQ(g.sigma_partial(0, d)[9 * 24 + 12], 0.0);
}

TEST(EncodeGrad, IsotropicRotationPartialIsZero) {
    const CovarianceSpec cov(1, 2, {2.5, 2.5}, {0.9});
    const auto g = encode_grad(single({{10.0, 10.0}}), cov, {21, 21});
    for (double v : g.rotation_partial(0, 0)) ASSERT_NEAR(v, 0.0, 1e-15);
}

TEST(EncodeGrad, MatchesCentralDifferences) {
    Rng rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t dims = trial % 5 == 4 ? 3 : 2;
        const Extents size(dims, dims == 3 ? 12 : 24);
        std::vector<double> mu(dims), sig(dims), ang(rotation_angle_count(dims));
        for (double& v : mu) v = rng.uniform(3, double(size[0]) - 4);
        for (double& v : sig) v = rng.uniform(1.0, 3.0);
        for (double& v : ang) v = rng.uniform(-3.1, 3.1);
        LandmarkSet lms(1, 1, 1, dims);
        lms.set(0, 0, mu);
        const CovarianceSpec cov(1, dims, sig, ang);
        const auto g = encode_grad(lms, cov, size);

        auto check = [&](std::span<const double> analytic, const CovarianceSpec& plus, const CovarianceSpec& minus,
                         double h) {
            const auto hp = encode(lms, plus, size);
            const auto hm = encode(lms, minus, size);
            double diff = 0.0, scale = 1e-10;
            for (std::size_t k = 0; k < hp.pixels(); ++k) {
                const double fd = (hp.values()[k] - hm.values()[k]) / (2 * h);
                diff = std::max(diff, std::abs(fd - analytic[k]));
                scale = std::max({scale, std::abs(fd), std::abs(analytic[k])});
            }
            worst = std::max(worst, diff / scale);
        };
        for (std::size_t d = 0; d < dims; ++d) {
            const double h = 1e-4 * sig[d];
            auto sp = sig, sm = sig;
            sp[d] += h;
            sm[d] -= h;
            check(g.sigma_partial(0, d), CovarianceSpec(1, dims, sp, ang), CovarianceSpec(1, dims, sm, ang), h);
        }
        for (std::size_t a = 0; a < ang.size(); ++a) {
            const double h = 1e-4;
            auto ap = ang, am = ang;
            ap[a] += h;
            am[a] -= h;
            check(g.rotation_partial(0, a), CovarianceSpec(1, dims, sig, ap), CovarianceSpec(1, dims, sig, am), h);
        }
    }
    EXPECT_LT(worst, 1e-5);
}

TEST(EncodeGrad, RequiresSingleInstance) {
    LandmarkSet lms(1, 1, 2, 2);
    EXPECT_THROW(encode_grad(lms, CovarianceSpec(1, 2), {8, 8}), InvalidArgument);
}

TEST(MaskToLandmarks, CentroidsAndOrdering) {
    Heatmap mask(2, {16, 16});
    auto set = [&](std::size_t c, std::size_t r, std::size_t col) { mask.channel(c)[r * 16 + col] = 1.0; };
    set(0, 7, 9);
    // channel 1: a 3-pixel L early in raster order, then a 5-pixel plus later
    set(1, 1, 1);
    set(1, 1, 2);
    set(1, 2, 1);
    for (auto [r, c] : {std::pair{10, 10}, {9, 10}, {11, 10}, {10, 9}, {10, 11}}) set(1, r, c);
    const auto lms = mask_to_landmarks(mask);
    ASSERT_EQ(lms.instances(), 2u);
    EXPECT_EQ(lms.at(0, 0, 0)[0], 7.0);
    EXPECT_EQ(lms.at(0, 0, 0)[1], 9.0);
    EXPECT_TRUE(lms.missing(0, 0, 1));
    EXPECT_EQ(lms.at(0, 1, 0)[0], 10.0);
    EXPECT_EQ(lms.at(0, 1, 0)[1], 10.0);
    EXPECT_DOUBLE_EQ(lms.at(0, 1, 1)[0], 4.0 / 3.0);
    EXPECT_DOUBLE_EQ(lms.at(0, 1, 1)[1], 4.0 / 3.0);
}

TEST(MaskToLandmarks, BlockCentroid) {
    Heatmap mask(1, {8, 16});
    for (std::size_t r : {4, 5}) {
        for (std::size_t c : {10, 11}) mask.channel(0)[r * 16 + c] = 1.0;
    }
    const auto lms = mask_to_landmarks(mask);
    EXPECT_EQ(lms.at(0, 0)[0], 4.5);
    EXPECT_EQ(lms.at(0, 0)[1], 10.5);
}

TEST(MaskToLandmarks, DiagonalPixelsAreSeparateComponents) {
    Heatmap mask(1, {4, 4});
    mask.channel(0)[0] = 1.0;
    mask.channel(0)[5] = 1.0;
    EXPECT_EQ(mask_to_landmarks(mask).instances(), 2u);
}

TEST(MaskToLandmarks, EmptyChannelIsMissingAndNonBinaryRejected) {
    Heatmap mask(1, {4, 4});
    EXPECT_TRUE(mask_to_landmarks(mask).missing(0, 0));
    mask.channel(0)[3] = 0.5;
    EXPECT_THROW(mask_to_landmarks(mask), InvalidArgument);
}

// Reference flood fill with an explicit stack, compared on random masks.
TEST(MaskToLandmarks, MatchesReferenceFloodFill) {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t H = 12, W = 14;
        Heatmap mask(1, {H, W});
        for (double& v : mask.values()) v = rng.uniform() < 0.3 ? 1.0 : 0.0;
        const auto vals = mask.channel(0);

        struct Comp {
            std::size_t size, seed;
            double r, c;
        };
        std::vector<Comp> comps;
        std::vector<int> seen(H * W, 0);
        for (std::size_t s = 0; s < H * W; ++s) {
            if (vals[s] == 0.0 || seen[s]) continue;
            std::vector<std::size_t> stack{s};
            seen[s] = 1;
            Comp comp{0, s, 0, 0};
            while (!stack.empty()) {
                const std::size_t p = stack.back();
                stack.pop_back();
                ++comp.size;
                comp.r += double(p / W);
                comp.c += double(p % W);
                const std::size_t r = p / W, c = p % W;
                const std::pair<long, long> nb[4] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
                for (auto [dr, dc] : nb) {
                    const long nr = long(r) + dr, nc = long(c) + dc;
                    if (nr < 0 || nc < 0 || nr >= long(H) || nc >= long(W)) continue;
                    const std::size_t q = std::size_t(nr) * W + std::size_t(nc);
                    if (vals[q] != 0.0 && !seen[q]) {
                        seen[q] = 1;
                        stack.push_back(q);
                    }
                }
            }
            comp.r /= double(comp.size);
            comp.c /= double(comp.size);
            comps.push_back(comp);
        }
        std::stable_sort(comps.begin(), comps.end(), [](const Comp& a, const Comp& b) { return a.size > b.size; });

        const auto lms = mask_to_landmarks(mask);
        ASSERT_EQ(lms.instances(), std::max<std::size_t>(1, comps.size()));
        for (std::size_t i = 0; i < comps.size(); ++i) {
            ASSERT_NEAR(lms.at(0, 0, i)[0], comps[i].r, 1e-12);
            ASSERT_NEAR(lms.at(0, 0, i)[1], comps[i].c, 1e-12);
        }
    }
}
