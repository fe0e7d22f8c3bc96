#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "landmark_kit/landmarks.hpp"

namespace lmk {

struct ReportConfig {
    /// SDR radii in millimetres, strictly positive and ascending.
    std::vector<double> radii{1.0, 2.0, 2.5, 3.0, 4.0};

    void validate() const;
};

/// Point errors in millimetres, one per (sample, class, instance) entry of the
/// inputs. Entries where either side is missing hold NaN and count as skipped.
struct PointErrors {
    std::size_t samples = 0;
    std::size_t classes = 0;
    std::size_t instances = 0;
    std::vector<double> mm;

    bool skipped(std::size_t flat) const;
    double at(std::size_t n, std::size_t c, std::size_t i = 0) const {
        return mm[(n * classes + c) * instances + i];
    }
    /// Errors of the evaluated entries in entry order.
    std::vector<double> evaluated() const;
};

/// Euclidean norm of (pred - truth) * spacing per entry.
PointErrors point_error(const LandmarkSet& pred, const LandmarkSet& truth, const Spacing& spacing);

/// Percentage of `errors` that are <= `radius`. Throws DegenerateInputError on
/// an empty set, since the rate is undefined there.
double sdr(std::span<const double> errors, double radius);

struct ErrorSummary {
    std::size_t n = 0;
    std::size_t skipped = 0;
    /// Absent when n == 0.
    std::optional<double> pe_mean_mm;
    std::optional<double> pe_median_mm;
    /// Population standard deviation.
    std::optional<double> pe_std_mm;
    /// (radius, percentage); empty when n == 0.
    std::vector<std::pair<double, double>> sdr;
};

struct DetectionReport {
    std::vector<double> radii;
    std::vector<std::string> class_names;
    std::vector<ErrorSummary> classes;
    /// Pooled over every evaluated landmark.
    ErrorSummary overall;
    std::size_t skipped = 0;
};

/// Summary of an arbitrary set of evaluated errors.
ErrorSummary summarize(std::span<const double> errors, std::size_t skipped, const std::vector<double>& radii);

DetectionReport detection_report(const LandmarkSet& pred, const LandmarkSet& truth, const Spacing& spacing,
                                 const ReportConfig& cfg = {});

/// Shortest decimal text that round-trips `radius`, e.g. "2" or "2.5".
std::string radius_key(double radius);

nlohmann::ordered_json to_json(const DetectionReport& report);
DetectionReport report_from_json(const nlohmann::json& j);

/// Deterministic serialization (two-space indent, trailing newline).
std::string report_to_string(const DetectionReport& report);

/// Fixed-width table: one row per class plus the pooled row, PE then one SDR
/// column per radius.
std::string format_text(const DetectionReport& report);

}  // namespace lmk
