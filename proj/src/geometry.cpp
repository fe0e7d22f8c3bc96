#include "landmark_kit/geometry.hpp"

#include <algorithm>
#include <string>

#include "landmark_kit/error.hpp"

namespace lmk {
namespace {

void check_dims(std::size_t dims) {
    if (dims != 2 && dims != 3) throw InvalidArgument("affine transform dimension must be 2 or 3");
}

void check_same_dims(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw InvalidArgument(std::string(what) + ": dimension mismatch (" + std::to_string(a) + " vs " +
                              std::to_string(b) + ")");
    }
}

LandmarkSet shift(const LandmarkSet& lms, const PatchSpec& patch, double sign) {
    patch.validate();
    check_same_dims(lms.dims(), patch.dims(), "patch remap");
    LandmarkSet out = lms;
    std::vector<double> p(lms.dims());
    for (std::size_t n = 0; n < lms.samples(); ++n) {
        for (std::size_t c = 0; c < lms.classes(); ++c) {
            for (std::size_t i = 0; i < lms.instances(); ++i) {
                if (lms.missing(n, c, i)) continue;
                const auto src = lms.at(n, c, i);
                for (std::size_t d = 0; d < p.size(); ++d) {
                    p[d] = src[d] + sign * static_cast<double>(patch.origin[d]);
                }
                out.set(n, c, i, p);
            }
        }
    }
    return out;
}

}  // namespace

AffineTransform::AffineTransform(std::size_t dims) {
    check_dims(dims);
    matrix_ = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dims + 1), static_cast<Eigen::Index>(dims + 1));
}

AffineTransform::AffineTransform(Eigen::MatrixXd matrix) : matrix_(std::move(matrix)) {
    if (matrix_.rows() != matrix_.cols()) throw InvalidArgument("affine matrix must be square");
    check_dims(static_cast<std::size_t>(matrix_.rows()) - 1);
    if (!matrix_.allFinite()) throw InvalidArgument("affine matrix must be finite");
    const Eigen::Index last = matrix_.rows() - 1;
    for (Eigen::Index j = 0; j < matrix_.cols(); ++j) {
        if (matrix_(last, j) != (j == last ? 1.0 : 0.0)) {
            throw InvalidArgument("affine matrix last row must be (0, ..., 0, 1)");
        }
    }
}

AffineTransform AffineTransform::from_rows(const std::vector<std::vector<double>>& rows) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)].size()) != n) {
            throw InvalidArgument("affine matrix must be square");
        }
        for (Eigen::Index c = 0; c < n; ++c) m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }
    return AffineTransform(std::move(m));
}

AffineTransform AffineTransform::translation(std::span<const double> offset) {
    AffineTransform t(offset.size());
    for (std::size_t d = 0; d < offset.size(); ++d) t.matrix_(static_cast<Eigen::Index>(d), t.matrix_.cols() - 1) = offset[d];
    return t;
}

AffineTransform AffineTransform::scaling(std::span<const double> factors) {
    AffineTransform t(factors.size());
    for (std::size_t d = 0; d < factors.size(); ++d) {
        t.matrix_(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)) = factors[d];
    }
    return t;
}

AffineTransform AffineTransform::flip(std::size_t dims, std::size_t axis, std::size_t extent) {
    if (axis >= dims) throw InvalidArgument("flip axis out of range");
    AffineTransform t(dims);
    const auto a = static_cast<Eigen::Index>(axis);
    t.matrix_(a, a) = -1.0;
    t.matrix_(a, t.matrix_.cols() - 1) = static_cast<double>(extent) - 1.0;
    return t;
}

AffineTransform AffineTransform::rotation2d(double angle, std::span<const double> center) {
    if (center.size() != 2) throw InvalidArgument("rotation2d needs a 2-D centre");
    const double cs = std::cos(angle);
    const double sn = std::sin(angle);
    Eigen::Matrix2d r;
    r << cs, sn, -sn, cs;
    const Eigen::Vector2d c(center[0], center[1]);
    AffineTransform t(2);
    t.matrix_.topLeftCorner(2, 2) = r;
    t.matrix_.topRightCorner(2, 1) = c - r * c;
    return t;
}

std::vector<std::vector<double>> AffineTransform::rows() const {
    std::vector<std::vector<double>> out(static_cast<std::size_t>(matrix_.rows()));
    for (Eigen::Index r = 0; r < matrix_.rows(); ++r) {
        for (Eigen::Index c = 0; c < matrix_.cols(); ++c) out[static_cast<std::size_t>(r)].push_back(matrix_(r, c));
    }
    return out;
}

void AffineTransform::apply(std::span<double> point) const {
    check_same_dims(point.size(), dims(), "apply_affine");
    const auto n = static_cast<Eigen::Index>(dims());
    Eigen::Map<Eigen::VectorXd> p(point.data(), n);
    const Eigen::VectorXd y = matrix_.topLeftCorner(n, n) * p + matrix_.topRightCorner(n, 1);
    p = y;
}

LandmarkSet apply_affine(const LandmarkSet& lms, const AffineTransform& t) {
    check_same_dims(lms.dims(), t.dims(), "apply_affine");
    LandmarkSet out = lms;
    std::vector<double> p(lms.dims());
    for (std::size_t n = 0; n < lms.samples(); ++n) {
        for (std::size_t c = 0; c < lms.classes(); ++c) {
            for (std::size_t i = 0; i < lms.instances(); ++i) {
                if (lms.missing(n, c, i)) continue;
                const auto src = lms.at(n, c, i);
                std::copy(src.begin(), src.end(), p.begin());
                t.apply(p);
                out.set(n, c, i, p);
            }
        }
    }
    return out;
}

AffineTransform compose(const AffineTransform& a, const AffineTransform& b) {
    check_same_dims(a.dims(), b.dims(), "compose");
    Eigen::MatrixXd m = a.matrix() * b.matrix();
    // The product of two valid homogeneous matrices has an exact last row, but
    // pin it so round-off in the top block can never leak into it.
    const Eigen::Index last = m.rows() - 1;
    m.row(last).setZero();
    m(last, last) = 1.0;
    return AffineTransform(std::move(m));
}

AffineTransform invert(const AffineTransform& t) {
    const auto n = static_cast<Eigen::Index>(t.dims());
    const Eigen::MatrixXd lin = t.linear();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(lin);
    if (!lu.isInvertible()) throw SingularMatrixError("affine transform is singular (linear block not invertible)");
    const Eigen::MatrixXd inv = lu.inverse();
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n + 1, n + 1);
    m.topLeftCorner(n, n) = inv;
    m.topRightCorner(n, 1) = -inv * t.offset();
    return AffineTransform(std::move(m));
}

void PatchSpec::validate() const {
    const std::size_t d = origin.size();
    if (size.size() != d || parent_size.size() != d) throw InvalidArgument("patch spec dimension mismatch");
    for (std::size_t k = 0; k < d; ++k) {
        if (size[k] < 1) throw InvalidArgument("patch size must be >= 1");
        if (origin[k] + size[k] > parent_size[k]) throw InvalidArgument("patch exceeds parent image");
    }
}

PatchSpec crop_roi(const Extents& parent_size, std::span<const double> center, const Extents& size) {
    const std::size_t dims = parent_size.size();
    if (size.size() != dims || center.size() != dims) throw InvalidArgument("crop_roi: dimension mismatch");
    PatchSpec patch{std::vector<std::size_t>(dims), size, parent_size};
    for (std::size_t d = 0; d < dims; ++d) {
        if (size[d] < 1) throw InvalidArgument("crop_roi: patch size must be >= 1");
        if (size[d] > parent_size[d]) throw InvalidArgument("crop_roi: requested patch exceeds parent image");
        if (!std::isfinite(center[d])) throw InvalidArgument("crop_roi: centre must be finite");
        const double max_origin = static_cast<double>(parent_size[d] - size[d]);
        const double o = round_half_down(center[d] - static_cast<double>(size[d]) / 2.0);
        patch.origin[d] = static_cast<std::size_t>(std::clamp(o, 0.0, max_origin));
    }
    return patch;
}

LandmarkSet patch_to_global(const LandmarkSet& lms, const PatchSpec& patch) { return shift(lms, patch, 1.0); }

LandmarkSet global_to_patch(const LandmarkSet& lms, const PatchSpec& patch) { return shift(lms, patch, -1.0); }

}  // namespace lmk
