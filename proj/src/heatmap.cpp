#include "landmark_kit/heatmap.hpp"

#include <cmath>
#include <string>

#include "landmark_kit/error.hpp"

namespace lmk {

Heatmap::Heatmap(std::size_t channels, Extents extents, std::optional<Spacing> spacing)
    : channels_(channels), extents_(std::move(extents)), pixels_(grid::checked_size(extents_)),
      values_(channels_ * pixels_, 0.0), spacing_(std::move(spacing)) {
    if (spacing_ && spacing_->dims() != extents_.size()) {
        throw InvalidArgument("heatmap spacing dimension does not match grid");
    }
}

Heatmap::Heatmap(std::size_t channels, Extents extents, std::vector<double> values, std::optional<Spacing> spacing)
    : Heatmap(channels, std::move(extents), std::move(spacing)) {
    if (values.size() != values_.size()) {
        throw InvalidArgument("heatmap value count " + std::to_string(values.size()) + " does not match shape (" +
                              std::to_string(values_.size()) + ")");
    }
    for (double v : values) {
        if (!std::isfinite(v)) throw InvalidArgument("heatmap values must be finite");
    }
    values_ = std::move(values);
}

std::span<double> Heatmap::channel(std::size_t c) {
    if (c >= channels_) throw InvalidArgument("heatmap channel out of range");
    return std::span<double>(values_).subspan(c * pixels_, pixels_);
}

std::span<const double> Heatmap::channel(std::size_t c) const {
    if (c >= channels_) throw InvalidArgument("heatmap channel out of range");
    return std::span<const double>(values_).subspan(c * pixels_, pixels_);
}

namespace grid {

std::size_t checked_size(const Extents& extents) {
    if (extents.empty()) throw InvalidArgument("grid must have at least one dimension");
    std::size_t n = 1;
    for (std::size_t e : extents) {
        if (e == 0) throw InvalidArgument("grid extents must be >= 1");
        n *= e;
    }
    return n;
}

std::vector<std::size_t> strides(const Extents& extents) {
    std::vector<std::size_t> s(extents.size(), 1);
    for (std::size_t d = extents.size(); d-- > 1;) s[d - 1] = s[d] * extents[d];
    return s;
}

void unravel(std::size_t flat, const Extents& extents, std::span<std::size_t> index) {
    for (std::size_t d = extents.size(); d-- > 0;) {
        index[d] = flat % extents[d];
        flat /= extents[d];
    }
}

}  // namespace grid
}  // namespace lmk
