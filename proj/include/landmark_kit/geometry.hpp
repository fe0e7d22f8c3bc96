#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "landmark_kit/landmarks.hpp"

namespace lmk {

/// Homogeneous (D+1)x(D+1) affine map on landmark coordinates, D in {2, 3}.
/// The last row is always (0, ..., 0, 1).
class AffineTransform {
public:
    /// Identity in `dims` dimensions.
    explicit AffineTransform(std::size_t dims = 2);
    /// Validates shape and last row; does not require invertibility.
    explicit AffineTransform(Eigen::MatrixXd matrix);

    /// Row-major (D+1)x(D+1) values, as stored in manifests.
    static AffineTransform from_rows(const std::vector<std::vector<double>>& rows);
    static AffineTransform identity(std::size_t dims) { return AffineTransform(dims); }
    static AffineTransform translation(std::span<const double> offset);
    static AffineTransform scaling(std::span<const double> factors);
    /// Mirror along axis `axis` of a grid with `extent` pixels: x' = (extent - 1) - x.
    static AffineTransform flip(std::size_t dims, std::size_t axis, std::size_t extent);
    /// 2-D rotation by `angle` radians about `center` (row, col). Positive angles
    /// turn the col axis toward the row axis, i.e. clockwise on a row-down display.
    static AffineTransform rotation2d(double angle, std::span<const double> center);

    std::size_t dims() const noexcept { return static_cast<std::size_t>(matrix_.rows()) - 1; }
    const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }
    Eigen::MatrixXd linear() const { return matrix_.topLeftCorner(dims(), dims()); }
    Eigen::VectorXd offset() const { return matrix_.topRightCorner(dims(), 1); }

    std::vector<std::vector<double>> rows() const;

    /// Apply to a single point in place.
    void apply(std::span<double> point) const;

private:
    Eigen::MatrixXd matrix_;
};

/// Map every present landmark through `t`; missing entries stay missing.
LandmarkSet apply_affine(const LandmarkSet& lms, const AffineTransform& t);

/// Transform equivalent to applying `b` first, then `a`.
AffineTransform compose(const AffineTransform& a, const AffineTransform& b);

/// Throws SingularMatrixError when the linear block is not invertible.
AffineTransform invert(const AffineTransform& t);

/// Axis-aligned patch inside a parent grid.
struct PatchSpec {
    std::vector<std::size_t> origin;
    Extents size;
    Extents parent_size;

    std::size_t dims() const noexcept { return origin.size(); }
    /// Throws InvalidArgument when the invariants do not hold.
    void validate() const;
};

/// Patch of exactly `size` centred as close to `center` as the parent borders
/// allow. Origin is round(center - size/2) (ties toward the lower index), clamped
/// to [0, parent - size].
PatchSpec crop_roi(const Extents& parent_size, std::span<const double> center, const Extents& size);

/// Patch-local to parent coordinates: global = local + origin.
LandmarkSet patch_to_global(const LandmarkSet& lms, const PatchSpec& patch);

/// Parent to patch-local coordinates: local = global - origin.
LandmarkSet global_to_patch(const LandmarkSet& lms, const PatchSpec& patch);

/// Nearest integer with exact halves going to the lower value.
inline double round_half_down(double x) { return std::ceil(x - 0.5); }

}  // namespace lmk
