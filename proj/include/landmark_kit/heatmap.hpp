#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "landmark_kit/landmarks.hpp"

namespace lmk {

/// Dense per-landmark grid of shape (channels, S1, ..., SD), C order.
class Heatmap {
public:
    Heatmap() = default;
    /// Zero-filled.
    Heatmap(std::size_t channels, Extents extents, std::optional<Spacing> spacing = std::nullopt);
    Heatmap(std::size_t channels, Extents extents, std::vector<double> values,
            std::optional<Spacing> spacing = std::nullopt);

    std::size_t channels() const noexcept { return channels_; }
    std::size_t dims() const noexcept { return extents_.size(); }
    const Extents& extents() const noexcept { return extents_; }
    /// Pixels per channel.
    std::size_t pixels() const noexcept { return pixels_; }

    std::span<double> channel(std::size_t c);
    std::span<const double> channel(std::size_t c) const;

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    const std::optional<Spacing>& spacing() const noexcept { return spacing_; }
    void set_spacing(std::optional<Spacing> spacing) { spacing_ = std::move(spacing); }

private:
    std::size_t channels_ = 0;
    Extents extents_;
    std::size_t pixels_ = 0;
    std::vector<double> values_;
    std::optional<Spacing> spacing_;
};

namespace grid {

/// Product of extents; throws on an empty or zero extent.
std::size_t checked_size(const Extents& extents);

/// Row-major strides for `extents`.
std::vector<std::size_t> strides(const Extents& extents);

/// Multi-index of `flat` within `extents`.
void unravel(std::size_t flat, const Extents& extents, std::span<std::size_t> index);

/// Visit every pixel of the half-open box [lo, hi) in row-major order, calling
/// `fn(flat_index, std::span<const std::size_t> multi_index)`. The box must lie
/// inside `extents`.
template <class Fn>
void for_each_in_box(const Extents& extents, std::span<const std::size_t> lo, std::span<const std::size_t> hi,
                     Fn&& fn) {
    const std::size_t dims = extents.size();
    for (std::size_t d = 0; d < dims; ++d) {
        if (lo[d] >= hi[d]) return;
    }
    const auto stride = strides(extents);
    std::vector<std::size_t> idx(lo.begin(), lo.end());
    std::size_t flat = 0;
    for (std::size_t d = 0; d < dims; ++d) flat += idx[d] * stride[d];
    for (;;) {
        fn(flat, std::span<const std::size_t>(idx));
        std::size_t d = dims;
        while (d > 0) {
            --d;
            if (++idx[d] < hi[d]) {
                flat += stride[d];
                break;
            }
            flat -= (idx[d] - 1 - lo[d]) * stride[d];
            idx[d] = lo[d];
            if (d == 0) return;
        }
    }
}

/// Visit every pixel of the grid.
template <class Fn>
void for_each(const Extents& extents, Fn&& fn) {
    const std::vector<std::size_t> lo(extents.size(), 0);
    for_each_in_box(extents, lo, extents, std::forward<Fn>(fn));
}

}  // namespace grid
}  // namespace lmk
