#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "landmark_kit/landmarks.hpp"

namespace lmk {

/// Landmarks of a set of images; sample n of `landmarks` belongs to image_ids[n].
struct LandmarkTable {
    std::vector<std::string> image_ids;
    LandmarkSet landmarks;
};

/// Parse CSV text with header `image_id,class,instance,dim0,dim1[,dim2]`.
///
/// Rows are grouped by image_id in order of first appearance and every
/// (class, instance) cell without a row is missing. The class column holds a
/// name from `class_names` when that list is given. Otherwise labels of the
/// form "L<k>" or plain integers select class k, and any other labels define
/// classes in order of first appearance. Throws FormatError with the 1-based
/// line number of the offending row.
LandmarkTable parse_landmarks_csv(std::string_view text, const std::vector<std::string>& class_names = {});
LandmarkTable read_landmarks_csv(const std::filesystem::path& path, const std::vector<std::string>& class_names = {});

/// CSV text for `table`; missing entries produce no row. Coordinates use the
/// shortest representation that round-trips.
std::string format_landmarks_csv(const LandmarkTable& table);
void write_landmarks_csv(const std::filesystem::path& path, const LandmarkTable& table);

/// Reorder `table` to the images `image_ids` and the classes `class_names`,
/// with `instances` slots per class. Images, classes or instances absent from
/// `table` become missing entries.
LandmarkSet align_to(const LandmarkTable& table, const std::vector<std::string>& image_ids,
                     const std::vector<std::string>& class_names, std::size_t instances);

}  // namespace lmk
