#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lmk {

struct GradcheckConfig {
    std::size_t trials = 100;
    std::uint64_t seed = 0;
    /// Central-difference step for sigma, relative to sigma; angles and
    /// heatmap values use it as an absolute step.
    double step = 1e-4;
    /// Side of the random 2-D grids; 3-D trials use half of it.
    std::size_t grid = 24;

    void validate() const;
};

struct GradcheckResult {
    std::string suite;
    std::size_t trials = 0;
    double max_rel_error = 0.0;
    std::size_t worst_trial = 0;
};

/// ||a - f||_inf / max(||a||_inf, ||f||_inf, 1e-10).
double relative_error(std::span<const double> analytic, std::span<const double> numeric);

/// encode_grad partials against central differences of encode, per parameter,
/// on random 2-D and 3-D anisotropic rotated configurations.
GradcheckResult check_encode_grad(const GradcheckConfig& cfg);

/// loss_grad_sigma against central differences of heatmap_l2_loss, over all
/// sigma and rotation parameters of a random configuration.
GradcheckResult check_loss_grad(const GradcheckConfig& cfg);

/// weighted_mean_jacobian against central differences of decode_weighted_mean
/// for the softmax and identity activations.
GradcheckResult check_decode_jacobian(const GradcheckConfig& cfg);

std::vector<GradcheckResult> run_gradcheck(const GradcheckConfig& cfg);

}  // namespace lmk
