#include "landmark_kit/encode.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numeric>
#include <string>

#include "landmark_kit/error.hpp"
#include "landmark_kit/geometry.hpp"

namespace lmk {
namespace {

// Exponent beyond which truncated encoding writes zero: exp(-18) < 1.6e-8.
constexpr double kTruncateExponent = 18.0;

Eigen::Matrix3d rot_x(double a) {
    Eigen::Matrix3d m;
    m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
    return m;
}
Eigen::Matrix3d rot_y(double a) {
    Eigen::Matrix3d m;
    m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
    return m;
}
Eigen::Matrix3d rot_z(double a) {
    Eigen::Matrix3d m;
    m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
    return m;
}
Eigen::Matrix3d drot_x(double a) {
    Eigen::Matrix3d m;
    m << 0, 0, 0, 0, -std::sin(a), -std::cos(a), 0, std::cos(a), -std::sin(a);
    return m;
}
Eigen::Matrix3d drot_y(double a) {
    Eigen::Matrix3d m;
    m << -std::sin(a), 0, std::cos(a), 0, 0, 0, -std::cos(a), 0, -std::sin(a);
    return m;
}
Eigen::Matrix3d drot_z(double a) {
    Eigen::Matrix3d m;
    m << -std::sin(a), -std::cos(a), 0, std::cos(a), -std::sin(a), 0, 0, 0, 0;
    return m;
}

void check_inputs(const LandmarkSet& lms, const CovarianceSpec& cov, const Extents& size) {
    cov.validate();
    grid::checked_size(size);
    if (lms.samples() != 1) throw InvalidArgument("encode expects a single-sample landmark set");
    if (lms.dims() != cov.dims() || size.size() != lms.dims()) {
        throw InvalidArgument("encode: landmark, covariance and grid dimensions differ");
    }
    if (lms.classes() != cov.classes()) {
        throw InvalidArgument("encode: covariance spec has " + std::to_string(cov.classes()) +
                              " landmarks, landmark set has " + std::to_string(lms.classes()));
    }
}

// Per-landmark quantities shared by every pixel.
struct Kernel {
    Eigen::MatrixXd rot;        // columns are the principal axes
    Eigen::VectorXd inv_sigma;  // 1 / sigma_k
    Eigen::VectorXd mu;
};

Kernel make_kernel(const CovarianceSpec& cov, std::size_t c, std::span<const double> mu) {
    Kernel k;
    k.rot = cov.rotation_matrix(c);
    const auto dims = static_cast<Eigen::Index>(cov.dims());
    k.inv_sigma.resize(dims);
    k.mu.resize(dims);
    for (Eigen::Index d = 0; d < dims; ++d) {
        k.inv_sigma(d) = 1.0 / cov.sigmas(c)[static_cast<std::size_t>(d)];
        k.mu(d) = mu[static_cast<std::size_t>(d)];
    }
    return k;
}

// Box [lo, hi) that contains every pixel whose exponent is <= kTruncateExponent.
void truncation_box(const Kernel& k, const CovarianceSpec& cov, std::size_t c, EncodingKind kind,
                    const Extents& size, std::vector<std::size_t>& lo, std::vector<std::size_t>& hi) {
    const std::size_t dims = size.size();
    Eigen::VectorXd half(static_cast<Eigen::Index>(dims));
    if (kind == EncodingKind::gaussian) {
        const Eigen::MatrixXd sigma = cov.covariance(c);
        for (std::size_t d = 0; d < dims; ++d) {
            const auto i = static_cast<Eigen::Index>(d);
            half(i) = std::sqrt(2.0 * kTruncateExponent * sigma(i, i));
        }
    } else {
        const auto s = cov.sigmas(c);
        half.setConstant(kTruncateExponent * *std::max_element(s.begin(), s.end()));
    }
    for (std::size_t d = 0; d < dims; ++d) {
        const auto i = static_cast<Eigen::Index>(d);
        const double a = std::ceil(k.mu(i) - half(i));
        const double b = std::floor(k.mu(i) + half(i)) + 1.0;
        const double ext = static_cast<double>(size[d]);
        lo[d] = static_cast<std::size_t>(std::clamp(a, 0.0, ext));
        hi[d] = static_cast<std::size_t>(std::clamp(b, 0.0, ext));
    }
}

void render_instance(const Kernel& k, const CovarianceSpec& cov, std::size_t c, const EncodeOptions& opt,
                     const Extents& size, std::span<double> out) {
    const std::size_t dims = size.size();
    if (opt.kind == EncodingKind::one_hot) {
        std::size_t flat = 0;
        const auto stride = grid::strides(size);
        for (std::size_t d = 0; d < dims; ++d) {
            const double r = round_half_down(k.mu(static_cast<Eigen::Index>(d)));
            const double idx = std::clamp(r, 0.0, static_cast<double>(size[d] - 1));
            flat += static_cast<std::size_t>(idx) * stride[d];
        }
        out[flat] = std::max(out[flat], 1.0);
        return;
    }

    std::vector<std::size_t> lo(dims, 0);
    std::vector<std::size_t> hi(size.begin(), size.end());
    if (opt.truncate) truncation_box(k, cov, c, opt.kind, size, lo, hi);

    const Eigen::MatrixXd rt = k.rot.transpose();
    Eigen::VectorXd diff(static_cast<Eigen::Index>(dims));
    grid::for_each_in_box(size, lo, hi, [&](std::size_t flat, std::span<const std::size_t> idx) {
        for (std::size_t d = 0; d < dims; ++d) {
            const auto i = static_cast<Eigen::Index>(d);
            diff(i) = static_cast<double>(idx[d]) - k.mu(i);
        }
        const Eigen::VectorXd u = (rt * diff).cwiseProduct(k.inv_sigma);
        double exponent;
        if (opt.kind == EncodingKind::gaussian) {
            exponent = 0.5 * u.squaredNorm();
        } else {
            exponent = (k.rot * u).lpNorm<1>();
        }
        if (opt.truncate && exponent > kTruncateExponent) return;
        out[flat] = std::max(out[flat], std::exp(-exponent));
    });
}

}  // namespace

std::size_t rotation_angle_count(std::size_t dims) {
    if (dims == 2) return 1;
    if (dims == 3) return 3;
    throw InvalidArgument("rotation is defined for 2-D and 3-D only");
}

Eigen::MatrixXd rotation_matrix(std::size_t dims, std::span<const double> angles) {
    if (angles.size() != rotation_angle_count(dims)) throw InvalidArgument("wrong number of rotation angles");
    if (dims == 2) {
        Eigen::MatrixXd m(2, 2);
        m << std::cos(angles[0]), -std::sin(angles[0]), std::sin(angles[0]), std::cos(angles[0]);
        return m;
    }
    return rot_z(angles[2]) * rot_y(angles[1]) * rot_x(angles[0]);
}

std::vector<Eigen::MatrixXd> rotation_matrix_derivatives(std::size_t dims, std::span<const double> angles) {
    if (angles.size() != rotation_angle_count(dims)) throw InvalidArgument("wrong number of rotation angles");
    if (dims == 2) {
        Eigen::MatrixXd m(2, 2);
        m << -std::sin(angles[0]), -std::cos(angles[0]), std::cos(angles[0]), -std::sin(angles[0]);
        return {m};
    }
    const double a = angles[0], b = angles[1], c = angles[2];
    return {rot_z(c) * rot_y(b) * drot_x(a), rot_z(c) * drot_y(b) * rot_x(a), drot_z(c) * rot_y(b) * rot_x(a)};
}

CovarianceSpec::CovarianceSpec(std::size_t classes, std::size_t dims, double sigma)
    : CovarianceSpec(classes, dims, std::vector<double>(classes * dims, sigma),
                     std::vector<double>(classes * rotation_angle_count(dims), 0.0)) {}

CovarianceSpec::CovarianceSpec(std::size_t classes, std::size_t dims, std::vector<double> sigmas,
                               std::vector<double> rotation)
    : classes_(classes), dims_(dims), sigmas_(std::move(sigmas)), rotation_(std::move(rotation)) {
    if (sigmas_.size() != classes_ * dims_) throw InvalidArgument("sigmas must have shape (classes, dims)");
    if (rotation_.size() != classes_ * rotation_angle_count(dims_)) {
        throw InvalidArgument("rotation must have shape (classes, angles)");
    }
    validate();
}

Eigen::MatrixXd CovarianceSpec::covariance(std::size_t c) const {
    const Eigen::MatrixXd r = rotation_matrix(c);
    Eigen::VectorXd var(static_cast<Eigen::Index>(dims_));
    for (std::size_t d = 0; d < dims_; ++d) var(static_cast<Eigen::Index>(d)) = sigmas(c)[d] * sigmas(c)[d];
    return r * var.asDiagonal() * r.transpose();
}

void CovarianceSpec::validate() const {
    rotation_angle_count(dims_);
    for (double s : sigmas_) {
        if (!std::isfinite(s) || s <= 0.0) throw InvalidArgument("sigma must be finite and > 0");
    }
    for (double a : rotation_) {
        if (!std::isfinite(a)) throw InvalidArgument("rotation angles must be finite");
    }
}

Heatmap encode(const LandmarkSet& lms, const CovarianceSpec& cov, const Extents& size, const EncodeOptions& options) {
    check_inputs(lms, cov, size);
    Heatmap out(lms.classes(), size);
    for (std::size_t c = 0; c < lms.classes(); ++c) {
        auto channel = out.channel(c);
        for (std::size_t i = 0; i < lms.instances(); ++i) {
            if (lms.missing(0, c, i)) continue;
            render_instance(make_kernel(cov, c, lms.at(0, c, i)), cov, c, options, size, channel);
        }
        if (options.normalize) {
            const double total = std::accumulate(channel.begin(), channel.end(), 0.0);
            if (total > 0.0) {
                for (double& v : channel) v /= total;
            }
        }
    }
    return out;
}

std::span<const double> EncodedWithGradient::sigma_partial(std::size_t c, std::size_t d) const {
    const std::size_t n = heatmap.pixels();
    return std::span<const double>(d_sigma).subspan((c * dims + d) * n, n);
}

std::span<const double> EncodedWithGradient::rotation_partial(std::size_t c, std::size_t a) const {
    const std::size_t n = heatmap.pixels();
    return std::span<const double>(d_rotation).subspan((c * angles + a) * n, n);
}

EncodedWithGradient encode_grad(const LandmarkSet& lms, const CovarianceSpec& cov, const Extents& size) {
    check_inputs(lms, cov, size);
    if (lms.instances() != 1) throw InvalidArgument("encode_grad supports one instance per class");
    const std::size_t dims = size.size();
    const std::size_t n_angles = cov.angles();

    EncodedWithGradient g;
    g.heatmap = Heatmap(lms.classes(), size);
    g.dims = dims;
    g.angles = n_angles;
    const std::size_t pixels = g.heatmap.pixels();
    g.d_sigma.assign(lms.classes() * dims * pixels, 0.0);
    g.d_rotation.assign(lms.classes() * n_angles * pixels, 0.0);

    Eigen::VectorXd diff(static_cast<Eigen::Index>(dims));
    for (std::size_t c = 0; c < lms.classes(); ++c) {
        if (lms.missing(0, c)) continue;
        const Kernel k = make_kernel(cov, c, lms.at(0, c));
        const Eigen::MatrixXd rt = k.rot.transpose();
        std::vector<Eigen::MatrixXd> drt;
        for (const auto& m : rotation_matrix_derivatives(dims, cov.rotation(c))) drt.push_back(m.transpose());
        auto heat = g.heatmap.channel(c);
        double* ds = g.d_sigma.data() + c * dims * pixels;
        double* dr = g.d_rotation.data() + c * n_angles * pixels;

        grid::for_each(size, [&](std::size_t flat, std::span<const std::size_t> idx) {
            for (std::size_t d = 0; d < dims; ++d) {
                const auto i = static_cast<Eigen::Index>(d);
                diff(i) = static_cast<double>(idx[d]) - k.mu(i);
            }
            // u_k is the offset along principal axis k; w_k = u_k / sigma_k^2.
            // Same exponent expression as encode() so the values agree bit for bit.
            const Eigen::VectorXd u = rt * diff;
            const Eigen::VectorXd scaled = u.cwiseProduct(k.inv_sigma);
            const Eigen::VectorXd w = scaled.cwiseProduct(k.inv_sigma);
            const double h = std::exp(-(0.5 * scaled.squaredNorm()));
            heat[flat] = h;
            for (std::size_t d = 0; d < dims; ++d) {
                const auto i = static_cast<Eigen::Index>(d);
                ds[d * pixels + flat] = h * u(i) * w(i) * k.inv_sigma(i);
            }
            for (std::size_t a = 0; a < n_angles; ++a) {
                dr[a * pixels + flat] = -h * w.dot(drt[a] * diff);
            }
        });
    }
    return g;
}

LandmarkSet mask_to_landmarks(const Heatmap& mask) {
    const std::size_t dims = mask.dims();
    if (dims != 2 && dims != 3) throw InvalidArgument("mask must be 2-D or 3-D");
    for (double v : mask.values()) {
        if (v != 0.0 && v != 1.0) throw InvalidArgument("mask values must be 0 or 1");
    }
    const Extents& ext = mask.extents();
    const auto stride = grid::strides(ext);
    const std::size_t pixels = mask.pixels();

    struct Component {
        std::size_t size = 0;
        std::size_t seed = 0;
        std::vector<double> sum;
    };
    std::vector<std::vector<Component>> per_channel(mask.channels());
    std::size_t max_instances = 1;

    std::vector<std::uint8_t> seen(pixels);
    std::vector<std::size_t> idx(dims);
    std::vector<std::size_t> nidx(dims);
    for (std::size_t c = 0; c < mask.channels(); ++c) {
        const auto values = mask.channel(c);
        std::fill(seen.begin(), seen.end(), 0);
        auto& comps = per_channel[c];
        for (std::size_t start = 0; start < pixels; ++start) {
            if (values[start] == 0.0 || seen[start]) continue;
            Component comp{0, start, std::vector<double>(dims, 0.0)};
            std::deque<std::size_t> queue{start};
            seen[start] = 1;
            while (!queue.empty()) {
                const std::size_t p = queue.front();
                queue.pop_front();
                grid::unravel(p, ext, idx);
                ++comp.size;
                for (std::size_t d = 0; d < dims; ++d) comp.sum[d] += static_cast<double>(idx[d]);
                for (std::size_t d = 0; d < dims; ++d) {
                    if (idx[d] > 0) {
                        const std::size_t q = p - stride[d];
                        if (values[q] != 0.0 && !seen[q]) {
                            seen[q] = 1;
                            queue.push_back(q);
                        }
                    }
                    if (idx[d] + 1 < ext[d]) {
                        const std::size_t q = p + stride[d];
                        if (values[q] != 0.0 && !seen[q]) {
                            seen[q] = 1;
                            queue.push_back(q);
                        }
                    }
                }
            }
            comps.push_back(std::move(comp));
        }
        // Components are discovered in raster order of their seed, so a stable
        // sort on size keeps the seed order for ties.
        std::stable_sort(comps.begin(), comps.end(),
                         [](const Component& a, const Component& b) { return a.size > b.size; });
        max_instances = std::max(max_instances, comps.size());
    }

    LandmarkSet out(1, mask.channels(), max_instances, dims);
    std::vector<double> centroid(dims);
    for (std::size_t c = 0; c < mask.channels(); ++c) {
        for (std::size_t i = 0; i < per_channel[c].size(); ++i) {
            const auto& comp = per_channel[c][i];
            for (std::size_t d = 0; d < dims; ++d) centroid[d] = comp.sum[d] / static_cast<double>(comp.size);
            out.set(0, c, i, centroid);
        }
    }
    return out;
}

}  // namespace lmk
