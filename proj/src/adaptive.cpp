#include "landmark_kit/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "landmark_kit/error.hpp"

namespace lmk {
namespace {

void check_pair(const Heatmap& pred, const Heatmap& target) {
    if (pred.channels() != target.channels() || pred.extents() != target.extents()) {
        throw InvalidArgument("prediction and target heatmaps differ in shape");
    }
}

bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double variance(std::deque<double>::const_iterator first, std::deque<double>::const_iterator last) {
    const auto n = static_cast<double>(std::distance(first, last));
    double mean = 0.0;
    for (auto it = first; it != last; ++it) mean += *it;
    mean /= n;
    double var = 0.0;
    for (auto it = first; it != last; ++it) var += (*it - mean) * (*it - mean);
    return var / n;
}

}  // namespace

void LossConfig::validate() const {
    if (!std::isfinite(alpha) || alpha < 0.0) throw InvalidArgument("loss alpha must be finite and >= 0");
}

std::vector<double> per_landmark_l2(const Heatmap& pred, const Heatmap& target) {
    check_pair(pred, target);
    std::vector<double> out(pred.channels(), 0.0);
    for (std::size_t c = 0; c < pred.channels(); ++c) {
        const auto p = pred.channel(c);
        const auto t = target.channel(c);
        double sum = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) sum += (p[k] - t[k]) * (p[k] - t[k]);
        out[c] = sum / static_cast<double>(p.size());
    }
    return out;
}

double heatmap_l2_loss(const Heatmap& pred, const Heatmap& target, const CovarianceSpec& cov, const LossConfig& cfg) {
    cfg.validate();
    cov.validate();
    if (cov.classes() != pred.channels()) throw InvalidArgument("covariance spec does not match heatmap channels");
    const auto per = per_landmark_l2(pred, target);
    const double classes = static_cast<double>(pred.channels());
    double data = 0.0;
    for (double v : per) data += v;
    double reg = 0.0;
    for (double s : cov.sigmas()) reg += s * s;
    return data / classes + cfg.alpha * reg / classes;
}

CovarianceGradient loss_grad_sigma(const Heatmap& pred, const EncodedWithGradient& target, const CovarianceSpec& cov,
                                   const LossConfig& cfg) {
    cfg.validate();
    cov.validate();
    check_pair(pred, target.heatmap);
    if (cov.classes() != pred.channels() || cov.dims() != target.dims) {
        throw InvalidArgument("covariance spec does not match heatmaps");
    }
    const std::size_t classes = pred.channels();
    const std::size_t pixels = pred.pixels();
    const double scale = 2.0 / (static_cast<double>(classes) * static_cast<double>(pixels));

    CovarianceGradient g{std::vector<double>(cov.sigmas().size(), 0.0),
                         std::vector<double>(cov.rotation().size(), 0.0)};
    std::vector<double> dl(pixels);
    for (std::size_t c = 0; c < classes; ++c) {
        const auto p = pred.channel(c);
        const auto t = target.heatmap.channel(c);
        for (std::size_t k = 0; k < pixels; ++k) dl[k] = scale * (t[k] - p[k]);
        for (std::size_t d = 0; d < cov.dims(); ++d) {
            const auto part = target.sigma_partial(c, d);
            double sum = 0.0;
            for (std::size_t k = 0; k < pixels; ++k) sum += dl[k] * part[k];
            g.sigma[c * cov.dims() + d] = sum + 2.0 * cfg.alpha * cov.sigmas(c)[d] / static_cast<double>(classes);
        }
        for (std::size_t a = 0; a < cov.angles(); ++a) {
            const auto part = target.rotation_partial(c, a);
            double sum = 0.0;
            for (std::size_t k = 0; k < pixels; ++k) sum += dl[k] * part[k];
            g.rotation[c * cov.angles() + a] = sum;
        }
    }
    return g;
}

CovarianceGradient loss_grad_sigma(const Heatmap& pred, const LandmarkSet& lms, const CovarianceSpec& cov,
                                   const LossConfig& cfg) {
    return loss_grad_sigma(pred, encode_grad(lms, cov, pred.extents()), cov, cfg);
}

void SgdConfig::validate() const {
    if (!std::isfinite(lr) || lr <= 0.0) throw InvalidArgument("learning rate must be finite and > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("momentum must lie in [0, 1)");
    if (!std::isfinite(sigma_min) || sigma_min <= 0.0) throw InvalidArgument("sigma_min must be finite and > 0");
}

CovarianceSpec gradient_step(const CovarianceSpec& cov, const CovarianceGradient& grads, SgdState& state,
                             const SgdConfig& cfg) {
    cfg.validate();
    if (grads.sigma.size() != cov.sigmas().size() || grads.rotation.size() != cov.rotation().size()) {
        throw InvalidArgument("gradient shape does not match covariance spec");
    }
    if (!all_finite(grads.sigma) || !all_finite(grads.rotation)) {
        throw InvalidArgument("non-finite gradient rejected");
    }
    if (state.sigma_velocity.empty()) state.sigma_velocity.assign(grads.sigma.size(), 0.0);
    if (state.rotation_velocity.empty()) state.rotation_velocity.assign(grads.rotation.size(), 0.0);
    if (state.sigma_velocity.size() != grads.sigma.size() || state.rotation_velocity.size() != grads.rotation.size()) {
        throw InvalidArgument("optimizer state does not match covariance spec");
    }

    SgdState next = state;
    CovarianceSpec out = cov;
    auto update = [&](std::span<double> params, const std::vector<double>& g, std::vector<double>& v) {
        for (std::size_t k = 0; k < params.size(); ++k) {
            v[k] = cfg.momentum * v[k] + g[k];
            const double step = cfg.nesterov ? g[k] + cfg.momentum * v[k] : v[k];
            params[k] -= cfg.lr * step;
        }
    };
    update(out.sigmas(), grads.sigma, next.sigma_velocity);
    update(out.rotation(), grads.rotation, next.rotation_velocity);
    for (double& s : out.sigmas()) s = std::max(s, cfg.sigma_min);
    out.validate();
    state = std::move(next);
    return out;
}

void SchedulerConfig::validate() const {
    if (window < 2) throw InvalidArgument("scheduler window must be >= 2");
    if (!(decay > 0.0 && decay < 1.0)) throw InvalidArgument("scheduler decay must lie in (0, 1)");
    if (!std::isfinite(sigma_min) || sigma_min <= 0.0) throw InvalidArgument("scheduler sigma_min must be > 0");
    if (!std::isfinite(threshold) || threshold < 0.0) throw InvalidArgument("scheduler threshold must be >= 0");
}

SchedulerState::SchedulerState(SchedulerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

const std::deque<double>& SchedulerState::history(std::size_t c) const {
    if (c >= history_.size()) throw InvalidArgument("scheduler landmark index out of range");
    return history_[c];
}

CovarianceSpec adaloss_update(SchedulerState& state, std::span<const double> losses, const CovarianceSpec& cov) {
    cov.validate();
    if (losses.size() != cov.classes()) throw InvalidArgument("expected one loss per landmark");
    for (double l : losses) {
        if (!std::isfinite(l)) throw InvalidArgument("non-finite loss rejected");
    }
    if (state.history_.empty()) state.history_.resize(cov.classes());
    if (state.history_.size() != cov.classes()) throw InvalidArgument("scheduler state does not match landmarks");

    const SchedulerConfig& cfg = state.cfg_;
    CovarianceSpec out = cov;
    for (std::size_t c = 0; c < cov.classes(); ++c) {
        auto& h = state.history_[c];
        h.push_back(losses[c]);
        if (h.size() > cfg.window) h.pop_front();
        if (h.size() < cfg.window) continue;

        const auto mid = h.begin() + static_cast<std::ptrdiff_t>(h.size() / 2);
        const double older = variance(h.begin(), mid);
        const double recent = variance(mid, h.end());
        // A window with no variation at all counts as a plateau.
        const bool plateau = older > 0.0 ? recent < cfg.threshold * older : recent == 0.0;
        if (!plateau) continue;

        auto sig = out.sigmas().subspan(c * cov.dims(), cov.dims());
        for (double& s : sig) {
            if (s > cfg.sigma_min) s = std::max(cfg.decay * s, cfg.sigma_min);
        }
        h.clear();
    }
    return out;
}

FitResult fit_covariance(const Heatmap& pred, const LandmarkSet& lms, CovarianceSpec init, const FitConfig& cfg,
                         const std::function<bool(const CovarianceSpec&)>& stop) {
    FitResult result;
    result.cov = std::move(init);
    SgdState sgd;
    std::optional<SchedulerState> scheduler;
    if (cfg.use_scheduler) scheduler.emplace(cfg.scheduler);

    for (std::size_t step = 0; step < cfg.max_steps; ++step) {
        const auto target = encode_grad(lms, result.cov, pred.extents());
        result.final_loss = heatmap_l2_loss(pred, target.heatmap, result.cov, cfg.loss);
        result.loss_history.push_back(result.final_loss);
        auto grads = loss_grad_sigma(pred, target, result.cov, cfg.loss);
        if (!cfg.learn_rotation) std::fill(grads.rotation.begin(), grads.rotation.end(), 0.0);
        result.cov = gradient_step(result.cov, grads, sgd, cfg.sgd);
        if (scheduler) {
            const auto per = per_landmark_l2(pred, target.heatmap);
            result.cov = adaloss_update(*scheduler, per, result.cov);
        }
        result.steps = step + 1;
        if (stop && stop(result.cov)) {
            result.stopped_early = true;
            break;
        }
    }
    const auto target = encode(lms, result.cov, pred.extents());
    result.final_loss = heatmap_l2_loss(pred, target, result.cov, cfg.loss);
    return result;
}

}  // namespace lmk
