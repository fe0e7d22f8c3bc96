#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "landmark_kit/encode.hpp"
#include "landmark_kit/heatmap.hpp"

namespace lmk {

struct LossConfig {
    /// Weight of the sigma regularizer.
    double alpha = 5.0;

    void validate() const;
};

/// L = mean_c |pred_c - target_c|^2 / pixels + alpha * mean_c |sigma_c|^2.
double heatmap_l2_loss(const Heatmap& pred, const Heatmap& target, const CovarianceSpec& cov, const LossConfig& cfg);

/// Per-channel mean squared error |pred_c - target_c|^2 / pixels.
std::vector<double> per_landmark_l2(const Heatmap& pred, const Heatmap& target);

/// Gradient of the loss with respect to the covariance parameters, laid out
/// like CovarianceSpec::sigmas() and CovarianceSpec::rotation().
struct CovarianceGradient {
    std::vector<double> sigma;
    std::vector<double> rotation;
};

/// dL/dsigma and dL/drotation, chaining dL/dtarget through the analytic target
/// partials of `target` (which must come from encode_grad with `cov`). The
/// regularizer contributes 2 * alpha * sigma / classes; rotation is not
/// regularized.
CovarianceGradient loss_grad_sigma(const Heatmap& pred, const EncodedWithGradient& target, const CovarianceSpec& cov,
                                   const LossConfig& cfg);

/// Convenience overload that encodes the target from `lms` first.
CovarianceGradient loss_grad_sigma(const Heatmap& pred, const LandmarkSet& lms, const CovarianceSpec& cov,
                                   const LossConfig& cfg);

struct SgdConfig {
    double lr = 1e-6;
    double momentum = 0.99;
    bool nesterov = true;
    /// Sigmas are clamped to at least this value after every step.
    double sigma_min = 0.5;

    void validate() const;
};

/// Momentum buffers; sized on first use.
struct SgdState {
    std::vector<double> sigma_velocity;
    std::vector<double> rotation_velocity;
};

/// One SGD step with (Nesterov) momentum, in the form v = m v + g,
/// p -= lr (g + m v) (or p -= lr v without Nesterov). Rejects non-finite
/// gradients without touching `state`.
CovarianceSpec gradient_step(const CovarianceSpec& cov, const CovarianceGradient& grads, SgdState& state,
                             const SgdConfig& cfg);

struct SchedulerConfig {
    /// Number of recent losses kept per landmark.
    std::size_t window = 10;
    /// Multiplicative sigma decay applied on a plateau.
    double decay = 0.9;
    double sigma_min = 0.5;
    /// Plateau when var(recent half) < threshold * var(older half).
    double threshold = 0.5;

    void validate() const;
};

/// Loss history for the plateau-triggered sigma decay.
class SchedulerState {
public:
    explicit SchedulerState(SchedulerConfig cfg = {});

    const SchedulerConfig& config() const noexcept { return cfg_; }
    /// History of landmark `c`, oldest first.
    const std::deque<double>& history(std::size_t c) const;
    std::size_t landmarks() const noexcept { return history_.size(); }

private:
    friend CovarianceSpec adaloss_update(SchedulerState&, std::span<const double>, const CovarianceSpec&);

    SchedulerConfig cfg_;
    std::vector<std::deque<double>> history_;
};

/// Append one loss per landmark. When a landmark's window is full and its
/// losses have plateaued, its sigmas become max(decay * sigma, sigma_min) and
/// its window is cleared. Sigmas already at or below sigma_min are left alone,
/// so sigma never increases.
CovarianceSpec adaloss_update(SchedulerState& state, std::span<const double> losses, const CovarianceSpec& cov);

struct FitConfig {
    LossConfig loss{0.0};
    SgdConfig sgd{50.0, 0.99, true, 0.5};
    std::size_t max_steps = 5000;
    bool learn_rotation = true;
    /// Optional plateau scheduler applied after every step.
    bool use_scheduler = false;
    SchedulerConfig scheduler;
};

struct FitResult {
    CovarianceSpec cov;
    std::size_t steps = 0;
    double final_loss = 0.0;
    std::vector<double> loss_history;
    bool stopped_early = false;
};

/// Fit the covariance of the target generated from `lms` to a fixed prediction
/// `pred` by repeated loss_grad_sigma + gradient_step. `stop` is checked after
/// every step and ends the loop when it returns true.
FitResult fit_covariance(const Heatmap& pred, const LandmarkSet& lms, CovarianceSpec init, const FitConfig& cfg,
                         const std::function<bool(const CovarianceSpec&)>& stop = {});

}  // namespace lmk
