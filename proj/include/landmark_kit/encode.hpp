#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "landmark_kit/heatmap.hpp"
#include "landmark_kit/landmarks.hpp"

namespace lmk {

enum class EncodingKind { gaussian, laplace, one_hot };

/// Number of rotation parameters for a dimension: 1 angle in 2-D, 3 Euler angles in 3-D.
std::size_t rotation_angle_count(std::size_t dims);

/// Rotation matrix for the given angles. In 2-D, R = [[cos, -sin], [sin, cos]]
/// acting on (dim0, dim1). In 3-D, angles (a, b, c) give R = Rz(c) Ry(b) Rx(a),
/// where Rx turns the (dim1, dim2) plane, Ry the (dim0, dim2) plane and Rz the
/// (dim0, dim1) plane.
Eigen::MatrixXd rotation_matrix(std::size_t dims, std::span<const double> angles);

/// dR/d(angle_j) for each angle.
std::vector<Eigen::MatrixXd> rotation_matrix_derivatives(std::size_t dims, std::span<const double> angles);

/// Per-landmark scale and orientation of the encoding distribution,
/// Sigma_c = R_c diag(sigma_c^2) R_c^T. This is the learnable state of adaptive
/// heatmap regression.
class CovarianceSpec {
public:
    CovarianceSpec() = default;
    /// Isotropic `sigma` for every landmark, zero rotation.
    CovarianceSpec(std::size_t classes, std::size_t dims, double sigma = 3.0);
    CovarianceSpec(std::size_t classes, std::size_t dims, std::vector<double> sigmas, std::vector<double> rotation);

    std::size_t classes() const noexcept { return classes_; }
    std::size_t dims() const noexcept { return dims_; }
    std::size_t angles() const noexcept { return rotation_angle_count(dims_); }

    /// Shape (classes, dims).
    std::span<const double> sigmas() const noexcept { return sigmas_; }
    std::span<double> sigmas() noexcept { return sigmas_; }
    std::span<const double> sigmas(std::size_t c) const { return std::span<const double>(sigmas_).subspan(c * dims_, dims_); }
    /// Shape (classes, angles).
    std::span<const double> rotation() const noexcept { return rotation_; }
    std::span<double> rotation() noexcept { return rotation_; }
    std::span<const double> rotation(std::size_t c) const {
        return std::span<const double>(rotation_).subspan(c * angles(), angles());
    }

    Eigen::MatrixXd rotation_matrix(std::size_t c) const { return lmk::rotation_matrix(dims_, rotation(c)); }
    Eigen::MatrixXd covariance(std::size_t c) const;

    /// Throws InvalidArgument unless every sigma is finite and > 0 and every
    /// angle is finite.
    void validate() const;

private:
    std::size_t classes_ = 0;
    std::size_t dims_ = 0;
    std::vector<double> sigmas_;
    std::vector<double> rotation_;
};

struct EncodeOptions {
    EncodingKind kind = EncodingKind::gaussian;
    /// Scale each channel to sum to 1 instead of peak value 1.
    bool normalize = false;
    /// Skip pixels whose exponent exceeds 18 (Gaussian: beyond 6 sigma in
    /// Mahalanobis distance). Changes values by less than 1e-7.
    bool truncate = false;
};

/// Target heatmaps for one sample, one channel per landmark class.
///
/// gaussian: exp(-1/2 (x-mu)^T Sigma^-1 (x-mu)); laplace: exp(-|R diag(1/sigma) R^T (x-mu)|_1);
/// one_hot: a single 1 at the pixel nearest mu (ties toward the lower index,
/// clamped into the grid). With several instances the channel holds the
/// pixelwise maximum. Channels of missing landmarks are all zero.
Heatmap encode(const LandmarkSet& lms, const CovarianceSpec& cov, const Extents& size,
               const EncodeOptions& options = {});

/// Gaussian heatmap together with its analytic partial derivatives.
struct EncodedWithGradient {
    Heatmap heatmap;
    /// Shape (classes, dims, pixels).
    std::vector<double> d_sigma;
    /// Shape (classes, angles, pixels).
    std::vector<double> d_rotation;

    std::span<const double> sigma_partial(std::size_t c, std::size_t d) const;
    std::span<const double> rotation_partial(std::size_t c, std::size_t a) const;

    std::size_t dims = 0;
    std::size_t angles = 0;
};

/// Peak-normalized Gaussian encode plus dH/dsigma and dH/drotation for every
/// pixel. Requires one instance per class.
EncodedWithGradient encode_grad(const LandmarkSet& lms, const CovarianceSpec& cov, const Extents& size);

/// Connected components (orthogonal adjacency) of a binary mask, one instance
/// per component at its centroid. Instances are ordered by descending size,
/// then by the raster position of their first pixel. Empty channels are missing.
LandmarkSet mask_to_landmarks(const Heatmap& mask);

}  // namespace lmk
