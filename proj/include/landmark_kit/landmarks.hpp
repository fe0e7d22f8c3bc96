#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace lmk {

/// Grid extents, one entry per spatial dimension in array index order.
using Extents = std::vector<std::size_t>;

/// Coordinate value marking an absent landmark.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

/// True when every component of `point` is non-finite (the missing sentinel).
bool is_missing(std::span<const double> point) noexcept;

/// Name used for class `index` when no names are supplied: "L<index>".
std::string default_class_name(std::size_t index);

/// Physical size of one pixel per dimension, in millimetres.
class Spacing {
public:
    Spacing() = default;
    explicit Spacing(std::vector<double> mm_per_pixel);

    static Spacing unit(std::size_t dims) { return Spacing(std::vector<double>(dims, 1.0)); }

    std::size_t dims() const noexcept { return values_.size(); }
    double operator[](std::size_t d) const { return values_[d]; }
    const std::vector<double>& values() const noexcept { return values_; }

private:
    std::vector<double> values_;
};

/// Continuous landmark coordinates of shape (samples, classes, instances, dims).
///
/// Axis order follows array index order (row, col[, depth]) and integer value k
/// is the centre of pixel k. An entry whose coordinates are all non-finite is
/// missing; partially finite entries are rejected.
class LandmarkSet {
public:
    LandmarkSet() = default;

    /// All entries start missing.
    LandmarkSet(std::size_t samples, std::size_t classes, std::size_t instances, std::size_t dims,
                std::vector<std::string> class_names = {});

    std::size_t samples() const noexcept { return samples_; }
    std::size_t classes() const noexcept { return classes_; }
    std::size_t instances() const noexcept { return instances_; }
    std::size_t dims() const noexcept { return dims_; }
    /// Number of (sample, class, instance) entries.
    std::size_t entries() const noexcept { return samples_ * classes_ * instances_; }

    std::span<const double> at(std::size_t n, std::size_t c, std::size_t i = 0) const;
    std::span<const double> entry(std::size_t flat) const;

    bool missing(std::size_t n, std::size_t c, std::size_t i = 0) const { return is_missing(at(n, c, i)); }

    void set(std::size_t n, std::size_t c, std::size_t i, std::span<const double> point);
    void set(std::size_t n, std::size_t c, std::span<const double> point) { set(n, c, 0, point); }
    void set_missing(std::size_t n, std::size_t c, std::size_t i = 0);

    std::span<const double> coords() const noexcept { return coords_; }

    const std::vector<std::string>& class_names() const noexcept { return class_names_; }
    void set_class_names(std::vector<std::string> names);

    /// Copy of sample `n` as a one-sample set.
    LandmarkSet sample(std::size_t n) const;

    /// Same shape (samples, classes, instances, dims).
    bool same_shape(const LandmarkSet& other) const noexcept;

    friend bool operator==(const LandmarkSet& a, const LandmarkSet& b);

private:
    std::size_t offset(std::size_t n, std::size_t c, std::size_t i) const;

    std::size_t samples_ = 0;
    std::size_t classes_ = 0;
    std::size_t instances_ = 0;
    std::size_t dims_ = 0;
    std::vector<double> coords_;
    std::vector<std::string> class_names_;
};

}  // namespace lmk
