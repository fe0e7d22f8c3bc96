#include "landmark_kit/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "landmark_kit/adaptive.hpp"
#include "landmark_kit/decode.hpp"
#include "landmark_kit/encode.hpp"
#include "landmark_kit/error.hpp"
#include "landmark_kit/random.hpp"

namespace lmk {
namespace {

struct Config {
    LandmarkSet lms;
    CovarianceSpec cov;
    Extents size;
};

// Anisotropic, rotated, well inside the grid.
Config random_config(Rng& rng, std::size_t trial, const GradcheckConfig& cfg) {
    const bool three_d = trial % 4 == 3;
    const std::size_t dims = three_d ? 3 : 2;
    const std::size_t side = three_d ? std::max<std::size_t>(cfg.grid / 2, 8) : cfg.grid;
    const std::size_t classes = three_d ? 1 : 1 + rng.below(2);
    Extents size(dims, side);

    LandmarkSet lms(1, classes, 1, dims);
    std::vector<double> sigmas;
    std::vector<double> angles;
    std::vector<double> p(dims);
    for (std::size_t c = 0; c < classes; ++c) {
        for (double& v : p) v = rng.uniform(2.0, static_cast<double>(side) - 3.0);
        lms.set(0, c, p);
        const double base = three_d ? rng.uniform(1.0, 2.0) : rng.uniform(1.2, 3.0);
        for (std::size_t d = 0; d < dims; ++d) sigmas.push_back(base * (1.0 + 0.35 * static_cast<double>(d) + 0.1 * rng.uniform()));
        for (std::size_t a = 0; a < rotation_angle_count(dims); ++a) {
            angles.push_back(rng.uniform(-std::numbers::pi, std::numbers::pi));
        }
    }
    return {std::move(lms), CovarianceSpec(classes, dims, std::move(sigmas), std::move(angles)), std::move(size)};
}

double inf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

void record(GradcheckResult& r, double err, std::size_t trial) {
    if (err > r.max_rel_error || !std::isfinite(err)) {
        r.max_rel_error = std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
        r.worst_trial = trial;
    }
}

}  // namespace

void GradcheckConfig::validate() const {
    if (trials == 0) throw InvalidArgument("gradcheck needs at least one trial");
    if (!(step > 0.0 && step < 0.1)) throw InvalidArgument("gradcheck step must lie in (0, 0.1)");
    if (grid < 8) throw InvalidArgument("gradcheck grid must be >= 8");
}

double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
    if (analytic.size() != numeric.size()) throw InvalidArgument("relative_error: size mismatch");
    double diff = 0.0;
    for (std::size_t k = 0; k < analytic.size(); ++k) diff = std::max(diff, std::abs(analytic[k] - numeric[k]));
    return diff / std::max({inf_norm(analytic), inf_norm(numeric), 1e-10});
}

GradcheckResult check_encode_grad(const GradcheckConfig& cfg) {
    cfg.validate();
    GradcheckResult result{"encode_grad", cfg.trials, 0.0, 0};
    Rng rng(cfg.seed);
    for (std::size_t t = 0; t < cfg.trials; ++t) {
        const Config c = random_config(rng, t, cfg);
        const auto enc = encode_grad(c.lms, c.cov, c.size);
        const std::size_t pixels = enc.heatmap.pixels();
        std::vector<double> fd(pixels);

        for (std::size_t cls = 0; cls < c.cov.classes(); ++cls) {
            for (std::size_t d = 0; d < c.cov.dims(); ++d) {
                const std::size_t k = cls * c.cov.dims() + d;
                const double h = cfg.step * c.cov.sigmas()[k];
                CovarianceSpec plus = c.cov;
                CovarianceSpec minus = c.cov;
                plus.sigmas()[k] += h;
                minus.sigmas()[k] -= h;
                const Heatmap hp = encode(c.lms, plus, c.size);
                const Heatmap hm = encode(c.lms, minus, c.size);
                for (std::size_t j = 0; j < pixels; ++j) fd[j] = (hp.channel(cls)[j] - hm.channel(cls)[j]) / (2.0 * h);
                record(result, relative_error(enc.sigma_partial(cls, d), fd), t);
            }
            for (std::size_t a = 0; a < c.cov.angles(); ++a) {
                const std::size_t k = cls * c.cov.angles() + a;
                const double h = cfg.step;
                CovarianceSpec plus = c.cov;
                CovarianceSpec minus = c.cov;
                plus.rotation()[k] += h;
                minus.rotation()[k] -= h;
                const Heatmap hp = encode(c.lms, plus, c.size);
                const Heatmap hm = encode(c.lms, minus, c.size);
                for (std::size_t j = 0; j < pixels; ++j) fd[j] = (hp.channel(cls)[j] - hm.channel(cls)[j]) / (2.0 * h);
                record(result, relative_error(enc.rotation_partial(cls, a), fd), t);
            }
        }
    }
    return result;
}

GradcheckResult check_loss_grad(const GradcheckConfig& cfg) {
    cfg.validate();
    GradcheckResult result{"loss_grad_sigma", cfg.trials, 0.0, 0};
    Rng rng(cfg.seed + 1);
    for (std::size_t t = 0; t < cfg.trials; ++t) {
        const Config c = random_config(rng, t, cfg);
        const LossConfig loss{rng.uniform(0.0, 2.0)};

        // Prediction: the same landmarks under a different spread, plus noise.
        CovarianceSpec other = c.cov;
        for (double& s : other.sigmas()) s *= rng.uniform(0.7, 1.4);
        Heatmap pred = encode(c.lms, other, c.size);
        for (double& v : pred.values()) v += 0.05 * rng.uniform();

        const auto g = loss_grad_sigma(pred, c.lms, c.cov, loss);
        auto value = [&](const CovarianceSpec& cov) {
            return heatmap_l2_loss(pred, encode(c.lms, cov, c.size), cov, loss);
        };

        std::vector<double> analytic(g.sigma);
        analytic.insert(analytic.end(), g.rotation.begin(), g.rotation.end());
        std::vector<double> numeric;
        for (std::size_t k = 0; k < c.cov.sigmas().size(); ++k) {
            const double h = cfg.step * c.cov.sigmas()[k];
            CovarianceSpec plus = c.cov;
            CovarianceSpec minus = c.cov;
            plus.sigmas()[k] += h;
            minus.sigmas()[k] -= h;
            numeric.push_back((value(plus) - value(minus)) / (2.0 * h));
        }
        for (std::size_t k = 0; k < c.cov.rotation().size(); ++k) {
            const double h = cfg.step;
            CovarianceSpec plus = c.cov;
            CovarianceSpec minus = c.cov;
            plus.rotation()[k] += h;
            minus.rotation()[k] -= h;
            numeric.push_back((value(plus) - value(minus)) / (2.0 * h));
        }
        record(result, relative_error(analytic, numeric), t);
    }
    return result;
}

GradcheckResult check_decode_jacobian(const GradcheckConfig& cfg) {
    cfg.validate();
    GradcheckResult result{"weighted_mean_jacobian", cfg.trials, 0.0, 0};
    Rng rng(cfg.seed + 2);
    for (std::size_t t = 0; t < cfg.trials; ++t) {
        const bool three_d = t % 4 == 3;
        const Extents size = three_d ? Extents{5, 5, 5} : Extents{cfg.grid / 2, cfg.grid / 2};
        const Activation act = t % 2 == 0 ? Activation::softmax(rng.uniform(0.2, 2.0)) : Activation::identity();
        Heatmap h(1, size);
        for (double& v : h.values()) v = rng.uniform(0.1, 1.0);

        const auto jac = weighted_mean_jacobian(h.channel(0), size, act);
        const std::size_t n = h.pixels();
        const std::size_t dims = size.size();
        std::vector<double> numeric(dims * n);
        for (std::size_t j = 0; j < n; ++j) {
            const double orig = h.values()[j];
            h.values()[j] = orig + cfg.step;
            const auto plus = decode_weighted_mean(h, act);
            h.values()[j] = orig - cfg.step;
            const auto minus = decode_weighted_mean(h, act);
            h.values()[j] = orig;
            for (std::size_t d = 0; d < dims; ++d) {
                numeric[d * n + j] = (plus.at(0, 0)[d] - minus.at(0, 0)[d]) / (2.0 * cfg.step);
            }
        }
        record(result, relative_error(jac, numeric), t);
    }
    return result;
}

std::vector<GradcheckResult> run_gradcheck(const GradcheckConfig& cfg) {
    return {check_encode_grad(cfg), check_loss_grad(cfg), check_decode_jacobian(cfg)};
}

}  // namespace lmk
