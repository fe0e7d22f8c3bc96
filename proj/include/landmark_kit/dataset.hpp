#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "landmark_kit/geometry.hpp"
#include "landmark_kit/heatmap.hpp"
#include "landmark_kit/landmarks.hpp"

namespace lmk {

/// Rescale coordinates from a grid of `from` pixels to one of `to` pixels per
/// dimension with the pixel-centre mapping y' = (y + 0.5) * to / from - 0.5.
LandmarkSet resize_landmarks(const LandmarkSet& lms, const Extents& from, const Extents& to);

enum class ResizeMode { nearest, linear };

/// Resample every channel to `to` with the same pixel-centre mapping as
/// resize_landmarks. Linear sampling clamps to the border pixels. Spacing, when
/// present, is scaled by from / to.
Heatmap resize_image(const Heatmap& image, const Extents& to, ResizeMode mode = ResizeMode::linear);

enum class DatasetKind { landmark, heatmap, mask, patch };

std::string to_string(DatasetKind kind);
DatasetKind dataset_kind_from_string(const std::string& s);

/// Patch selection of a patch-kind entry: either an explicit origin or a
/// centre (parent coordinates) resolved with crop_roi.
struct PatchRequest {
    std::optional<std::vector<std::size_t>> origin;
    std::optional<std::vector<double>> center;
    Extents size;
};

struct ManifestEntry {
    std::string id;
    std::string image_path;
    std::string heatmap_path;
    std::string mask_path;
    /// One-sample set (C classes, I instances); absent when the entry takes its
    /// landmarks from the manifest's CSV or from a mask. Patch entries store
    /// patch-local coordinates.
    std::optional<LandmarkSet> landmarks;
    std::optional<Spacing> spacing;
    std::optional<PatchRequest> patch;
    /// Maps the stored annotation coordinates into image coordinates.
    std::optional<AffineTransform> affine;
};

/// Dataset description stored as JSON; relative paths resolve against
/// `base_dir` (the manifest's directory when loaded from disk).
struct DatasetManifest {
    DatasetKind kind = DatasetKind::landmark;
    std::size_t spatial_dims = 2;
    std::vector<std::string> class_names;
    std::optional<Extents> resize_to;
    ResizeMode resize_mode = ResizeMode::linear;
    /// Default for entries without their own spacing.
    std::optional<Spacing> spacing;
    /// Landmark CSV keyed by entry id, used by entries without inline landmarks.
    std::string landmarks_csv;
    std::vector<ManifestEntry> entries;
    std::filesystem::path base_dir;

    /// Throws InvalidArgument naming the first entry that breaks a rule.
    void validate() const;
    std::filesystem::path resolve(const std::string& path) const;
};

DatasetManifest manifest_from_json(const nlohmann::json& j, std::filesystem::path base_dir = {});
nlohmann::ordered_json manifest_to_json(const DatasetManifest& m);
/// Throws FormatError for malformed JSON or schema violations.
DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);

/// One loaded manifest entry, after any resize.
struct DatasetItem {
    std::size_t index = 0;
    std::string id;
    /// Input image (for patch kind, the cropped patch).
    std::optional<Heatmap> image;
    /// Target heatmap of heatmap-kind entries.
    std::optional<Heatmap> heatmap;
    /// One-sample set in the coordinates of `image` (patch-local for patches).
    LandmarkSet landmarks;
    /// Patch kind only: the landmarks in parent-image coordinates (not resized).
    std::optional<LandmarkSet> global_landmarks;
    std::optional<PatchSpec> patch;
    Spacing spacing;
};

struct EntryError {
    std::size_t index;
    std::string id;
    std::string message;
};

/// Lazy reader over a manifest. Entries load on demand, in file order.
class DatasetReader {
public:
    explicit DatasetReader(DatasetManifest manifest);

    const DatasetManifest& manifest() const noexcept { return manifest_; }
    std::size_t size() const noexcept { return manifest_.entries.size(); }

    /// Throws on missing or malformed files.
    DatasetItem load(std::size_t index) const;

    /// Visit every entry that loads; failures are collected, not thrown.
    std::vector<EntryError> for_each(const std::function<void(const DatasetItem&)>& fn) const;

private:
    DatasetManifest manifest_;
    std::optional<LandmarkSet> csv_landmarks_;
    std::vector<std::string> csv_ids_;
    std::string csv_error_;
};

}  // namespace lmk
