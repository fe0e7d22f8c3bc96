#include "landmark_kit/landmarks.hpp"

#include <algorithm>
#include <cmath>

#include "landmark_kit/error.hpp"

namespace lmk {

bool is_missing(std::span<const double> point) noexcept {
    return std::none_of(point.begin(), point.end(), [](double v) { return std::isfinite(v); });
}

std::string default_class_name(std::size_t index) { return "L" + std::to_string(index); }

Spacing::Spacing(std::vector<double> mm_per_pixel) : values_(std::move(mm_per_pixel)) {
    if (values_.empty()) throw InvalidArgument("spacing must have at least one dimension");
    for (double v : values_) {
        if (!std::isfinite(v) || v <= 0.0) throw InvalidArgument("spacing must be finite and strictly positive");
    }
}

LandmarkSet::LandmarkSet(std::size_t samples, std::size_t classes, std::size_t instances, std::size_t dims,
                         std::vector<std::string> class_names)
    : samples_(samples), classes_(classes), instances_(instances), dims_(dims),
      coords_(samples * classes * instances * dims, kMissing) {
    if (dims != 2 && dims != 3) throw InvalidArgument("landmark dimension must be 2 or 3, got " + std::to_string(dims));
    if (instances == 0) throw InvalidArgument("landmark set needs at least one instance per class");
    set_class_names(std::move(class_names));
}

void LandmarkSet::set_class_names(std::vector<std::string> names) {
    if (names.empty()) {
        names.reserve(classes_);
        for (std::size_t c = 0; c < classes_; ++c) names.push_back(default_class_name(c));
    }
    if (names.size() != classes_) {
        throw InvalidArgument("expected " + std::to_string(classes_) + " class names, got " +
                              std::to_string(names.size()));
    }
    class_names_ = std::move(names);
}

std::size_t LandmarkSet::offset(std::size_t n, std::size_t c, std::size_t i) const {
    if (n >= samples_ || c >= classes_ || i >= instances_) throw InvalidArgument("landmark index out of range");
    return ((n * classes_ + c) * instances_ + i) * dims_;
}

std::span<const double> LandmarkSet::at(std::size_t n, std::size_t c, std::size_t i) const {
    return std::span<const double>(coords_).subspan(offset(n, c, i), dims_);
}

std::span<const double> LandmarkSet::entry(std::size_t flat) const {
    if (flat >= entries()) throw InvalidArgument("landmark index out of range");
    return std::span<const double>(coords_).subspan(flat * dims_, dims_);
}

void LandmarkSet::set(std::size_t n, std::size_t c, std::size_t i, std::span<const double> point) {
    if (point.size() != dims_) throw InvalidArgument("point dimension does not match landmark set");
    const auto finite = std::count_if(point.begin(), point.end(), [](double v) { return std::isfinite(v); });
    if (finite != 0 && static_cast<std::size_t>(finite) != dims_) {
        throw InvalidArgument("landmark coordinates must be all finite or all missing");
    }
    const std::size_t o = offset(n, c, i);
    for (std::size_t d = 0; d < dims_; ++d) coords_[o + d] = finite == 0 ? kMissing : point[d];
}

void LandmarkSet::set_missing(std::size_t n, std::size_t c, std::size_t i) {
    const std::size_t o = offset(n, c, i);
    std::fill_n(coords_.begin() + static_cast<std::ptrdiff_t>(o), dims_, kMissing);
}

LandmarkSet LandmarkSet::sample(std::size_t n) const {
    if (n >= samples_) throw InvalidArgument("sample index out of range");
    LandmarkSet out(1, classes_, instances_, dims_, class_names_);
    const std::size_t stride = classes_ * instances_ * dims_;
    std::copy_n(coords_.begin() + static_cast<std::ptrdiff_t>(n * stride), stride, out.coords_.begin());
    return out;
}

bool LandmarkSet::same_shape(const LandmarkSet& other) const noexcept {
    return samples_ == other.samples_ && classes_ == other.classes_ && instances_ == other.instances_ &&
           dims_ == other.dims_;
}

bool operator==(const LandmarkSet& a, const LandmarkSet& b) {
    if (!a.same_shape(b) || a.class_names_ != b.class_names_) return false;
    for (std::size_t k = 0; k < a.coords_.size(); ++k) {
        const double x = a.coords_[k];
        const double y = b.coords_[k];
        if (std::isnan(x) != std::isnan(y)) return false;
        if (!std::isnan(x) && x != y) return false;
    }
    return true;
}

}  // namespace lmk
