#include "landmark_kit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "landmark_kit/encode.hpp"
#include "landmark_kit/error.hpp"
#include "landmark_kit/landmark_csv.hpp"
#include "landmark_kit/tensor_io.hpp"

namespace lmk {
namespace {

void check_sizes(const Extents& from, const Extents& to, std::size_t dims) {
    if (from.size() != dims || to.size() != dims) throw InvalidArgument("resize: dimension mismatch");
    for (std::size_t d = 0; d < dims; ++d) {
        if (from[d] == 0 || to[d] == 0) throw InvalidArgument("resize: extents must be positive");
    }
}

// Source position of target pixel centre `y` along one axis.
double source_coord(double y, std::size_t from, std::size_t to) {
    return (y + 0.5) * static_cast<double>(from) / static_cast<double>(to) - 0.5;
}

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

[[noreturn]] void schema_error(const std::string& what) { throw FormatError("manifest: " + what, 0); }

std::vector<double> point_from_json(const json& j, std::size_t dims, const std::string& where) {
    if (!j.is_array() || j.size() != dims) schema_error(where + ": expected a point of " + std::to_string(dims) + " numbers");
    std::vector<double> p;
    for (const auto& v : j) {
        if (!v.is_number()) schema_error(where + ": coordinates must be numbers");
        p.push_back(v.get<double>());
    }
    return p;
}

// Inline landmarks: one item per class, each null, a point, or a list of
// points/nulls (one per instance).
LandmarkSet landmarks_from_json(const json& j, std::size_t dims, const std::vector<std::string>& names,
                                const std::string& where) {
    if (!j.is_array()) schema_error(where + ": landmarks must be an array");
    if (!names.empty() && j.size() != names.size()) {
        schema_error(where + ": expected " + std::to_string(names.size()) + " landmark classes, found " +
                     std::to_string(j.size()));
    }
    auto is_point = [](const json& v) { return v.is_array() && !v.empty() && v.front().is_number(); };
    std::size_t instances = 1;
    for (const auto& cls : j) {
        if (cls.is_array() && !is_point(cls)) instances = std::max<std::size_t>(instances, cls.size());
    }
    LandmarkSet lms(1, j.size(), instances, dims, names);
    for (std::size_t c = 0; c < j.size(); ++c) {
        const auto& cls = j[c];
        if (cls.is_null()) continue;
        if (is_point(cls)) {
            lms.set(0, c, 0, point_from_json(cls, dims, where));
            continue;
        }
        if (!cls.is_array()) schema_error(where + ": class " + std::to_string(c) + " must be null, a point or a list");
        for (std::size_t i = 0; i < cls.size(); ++i) {
            if (!cls[i].is_null()) lms.set(0, c, i, point_from_json(cls[i], dims, where));
        }
    }
    return lms;
}

ojson landmarks_to_json(const LandmarkSet& lms) {
    ojson out = ojson::array();
    for (std::size_t c = 0; c < lms.classes(); ++c) {
        auto point = [&](std::size_t i) -> ojson {
            if (lms.missing(0, c, i)) return nullptr;
            const auto p = lms.at(0, c, i);
            return ojson(std::vector<double>(p.begin(), p.end()));
        };
        if (lms.instances() == 1) {
            out.push_back(point(0));
        } else {
            ojson list = ojson::array();
            for (std::size_t i = 0; i < lms.instances(); ++i) list.push_back(point(i));
            out.push_back(std::move(list));
        }
    }
    return out;
}

Heatmap crop(const Heatmap& image, const PatchSpec& patch) {
    Heatmap out(image.channels(), patch.size, image.spacing());
    std::vector<std::size_t> hi(patch.dims());
    for (std::size_t d = 0; d < patch.dims(); ++d) hi[d] = patch.origin[d] + patch.size[d];
    for (std::size_t c = 0; c < image.channels(); ++c) {
        const auto src = image.channel(c);
        auto dst = out.channel(c);
        std::size_t k = 0;
        grid::for_each_in_box(image.extents(), patch.origin, hi, [&](std::size_t flat, auto) { dst[k++] = src[flat]; });
    }
    return out;
}

Spacing scaled_spacing(const Spacing& s, const Extents& from, const Extents& to) {
    std::vector<double> v(s.values());
    for (std::size_t d = 0; d < v.size(); ++d) v[d] *= static_cast<double>(from[d]) / static_cast<double>(to[d]);
    return Spacing(std::move(v));
}

}  // namespace

LandmarkSet resize_landmarks(const LandmarkSet& lms, const Extents& from, const Extents& to) {
    check_sizes(from, to, lms.dims());
    LandmarkSet out = lms;
    std::vector<double> p(lms.dims());
    for (std::size_t n = 0; n < lms.samples(); ++n) {
        for (std::size_t c = 0; c < lms.classes(); ++c) {
            for (std::size_t i = 0; i < lms.instances(); ++i) {
                if (lms.missing(n, c, i)) continue;
                const auto src = lms.at(n, c, i);
                for (std::size_t d = 0; d < p.size(); ++d) {
                    p[d] = (src[d] + 0.5) * static_cast<double>(to[d]) / static_cast<double>(from[d]) - 0.5;
                }
                out.set(n, c, i, p);
            }
        }
    }
    return out;
}

Heatmap resize_image(const Heatmap& image, const Extents& to, ResizeMode mode) {
    const Extents& from = image.extents();
    const std::size_t dims = image.dims();
    check_sizes(from, to, dims);

    // Per axis and target index: two source indices and the weight of the upper one.
    struct Tap {
        std::size_t lo, hi;
        double w;
    };
    std::vector<std::vector<Tap>> taps(dims);
    for (std::size_t d = 0; d < dims; ++d) {
        const double last = static_cast<double>(from[d] - 1);
        for (std::size_t y = 0; y < to[d]; ++y) {
            const double s = std::clamp(source_coord(static_cast<double>(y), from[d], to[d]), 0.0, last);
            if (mode == ResizeMode::nearest) {
                const auto k = static_cast<std::size_t>(std::clamp(round_half_down(s), 0.0, last));
                taps[d].push_back({k, k, 0.0});
            } else {
                const double f = std::floor(s);
                const auto lo = static_cast<std::size_t>(f);
                const std::size_t hi = std::min(lo + 1, from[d] - 1);
                taps[d].push_back({lo, hi, s - f});
            }
        }
    }

    std::optional<Spacing> spacing;
    if (image.spacing()) spacing = scaled_spacing(*image.spacing(), from, to);
    Heatmap out(image.channels(), to, spacing);
    const auto stride = grid::strides(from);
    const std::size_t corners = std::size_t{1} << dims;
    for (std::size_t c = 0; c < image.channels(); ++c) {
        const auto src = image.channel(c);
        auto dst = out.channel(c);
        grid::for_each(to, [&](std::size_t flat, std::span<const std::size_t> idx) {
            double acc = 0.0;
            for (std::size_t corner = 0; corner < corners; ++corner) {
                double w = 1.0;
                std::size_t offset = 0;
                for (std::size_t d = 0; d < dims; ++d) {
                    const Tap& t = taps[d][idx[d]];
                    const bool upper = (corner >> d) & 1u;
                    w *= upper ? t.w : 1.0 - t.w;
                    offset += (upper ? t.hi : t.lo) * stride[d];
                }
                if (w != 0.0) acc += w * src[offset];
            }
            dst[flat] = acc;
        });
    }
    return out;
}

std::string to_string(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::landmark: return "landmark";
        case DatasetKind::heatmap: return "heatmap";
        case DatasetKind::mask: return "mask";
        case DatasetKind::patch: return "patch";
    }
    return "";
}

DatasetKind dataset_kind_from_string(const std::string& s) {
    if (s == "landmark") return DatasetKind::landmark;
    if (s == "heatmap") return DatasetKind::heatmap;
    if (s == "mask") return DatasetKind::mask;
    if (s == "patch") return DatasetKind::patch;
    throw InvalidArgument("unknown dataset kind '" + s + "' (landmark, heatmap, mask, patch)");
}

void DatasetManifest::validate() const {
    if (spatial_dims != 2 && spatial_dims != 3) throw InvalidArgument("spatial_dims must be 2 or 3");
    if (resize_to) {
        if (resize_to->size() != spatial_dims) throw InvalidArgument("resize_to must have spatial_dims entries");
        for (std::size_t s : *resize_to) {
            if (s == 0) throw InvalidArgument("resize_to extents must be positive");
        }
    }
    if (spacing && spacing->dims() != spatial_dims) throw InvalidArgument("default spacing has wrong dimension");
    for (const auto& e : entries) {
        const std::string where = "entry '" + e.id + "'";
        if (e.id.empty()) throw InvalidArgument("every manifest entry needs an id");
        const auto& sp = e.spacing ? e.spacing : spacing;
        if (!sp) throw InvalidArgument(where + " has no spacing");
        if (sp->dims() != spatial_dims) throw InvalidArgument(where + ": spacing has wrong dimension");
        if (e.landmarks) {
            if (e.landmarks->dims() != spatial_dims) throw InvalidArgument(where + ": landmark dimension mismatch");
            if (!class_names.empty() && e.landmarks->classes() != class_names.size()) {
                throw InvalidArgument(where + ": landmark class count does not match class_names");
            }
        }
        if (e.affine && e.affine->dims() != spatial_dims) throw InvalidArgument(where + ": affine has wrong dimension");
        const bool has_landmarks = e.landmarks.has_value() || !landmarks_csv.empty();
        switch (kind) {
            case DatasetKind::landmark:
                if (e.image_path.empty()) throw InvalidArgument(where + " needs image_path");
                if (!has_landmarks) throw InvalidArgument(where + " needs landmarks");
                break;
            case DatasetKind::heatmap:
                if (e.heatmap_path.empty()) throw InvalidArgument(where + " needs heatmap_path");
                break;
            case DatasetKind::mask:
                if (e.mask_path.empty()) throw InvalidArgument(where + " needs mask_path");
                break;
            case DatasetKind::patch:
                if (e.image_path.empty()) throw InvalidArgument(where + " needs image_path");
                if (!has_landmarks) throw InvalidArgument(where + " needs landmarks");
                if (!e.patch) throw InvalidArgument(where + " needs a patch");
                if (e.patch->size.size() != spatial_dims) throw InvalidArgument(where + ": patch size has wrong dimension");
                if (e.patch->origin.has_value() == e.patch->center.has_value()) {
                    throw InvalidArgument(where + ": patch needs exactly one of origin or center");
                }
                if (e.patch->origin && e.patch->origin->size() != spatial_dims) {
                    throw InvalidArgument(where + ": patch origin has wrong dimension");
                }
                if (e.patch->center && e.patch->center->size() != spatial_dims) {
                    throw InvalidArgument(where + ": patch center has wrong dimension");
                }
                break;
        }
    }
}

std::filesystem::path DatasetManifest::resolve(const std::string& path) const {
    const std::filesystem::path p(path);
    return p.is_absolute() ? p : base_dir / p;
}

DatasetManifest manifest_from_json(const json& j, std::filesystem::path base_dir) {
    DatasetManifest m;
    m.base_dir = std::move(base_dir);
    try {
        if (!j.is_object()) schema_error("top level must be an object");
        m.kind = dataset_kind_from_string(j.value("kind", std::string("landmark")));
        m.spatial_dims = j.value("spatial_dims", std::size_t{2});
        if (m.spatial_dims != 2 && m.spatial_dims != 3) schema_error("spatial_dims must be 2 or 3");
        if (j.contains("class_names")) m.class_names = j.at("class_names").get<std::vector<std::string>>();
        if (j.contains("resize_to") && !j.at("resize_to").is_null()) {
            m.resize_to = j.at("resize_to").get<Extents>();
        }
        if (j.contains("resize_mode")) {
            const auto mode = j.at("resize_mode").get<std::string>();
            if (mode == "nearest") {
                m.resize_mode = ResizeMode::nearest;
            } else if (mode != "linear") {
                schema_error("resize_mode must be 'nearest' or 'linear'");
            }
        }
        if (j.contains("spacing")) m.spacing = Spacing(j.at("spacing").get<std::vector<double>>());
        m.landmarks_csv = j.value("landmarks_csv", std::string());
        if (!j.contains("entries") || !j.at("entries").is_array()) schema_error("'entries' array is required");

        std::size_t index = 0;
        for (const auto& je : j.at("entries")) {
            ManifestEntry e;
            e.id = je.value("id", "entry" + std::to_string(index));
            const std::string where = "entry '" + e.id + "'";
            e.image_path = je.value("image_path", std::string());
            e.heatmap_path = je.value("heatmap_path", std::string());
            e.mask_path = je.value("mask_path", std::string());
            if (je.contains("spacing")) e.spacing = Spacing(je.at("spacing").get<std::vector<double>>());
            if (je.contains("landmarks")) {
                e.landmarks = landmarks_from_json(je.at("landmarks"), m.spatial_dims, m.class_names, where);
            }
            if (je.contains("patch")) {
                const auto& jp = je.at("patch");
                PatchRequest p;
                p.size = jp.at("size").get<Extents>();
                if (jp.contains("origin")) p.origin = jp.at("origin").get<std::vector<std::size_t>>();
                if (jp.contains("center")) p.center = jp.at("center").get<std::vector<double>>();
                e.patch = std::move(p);
            }
            if (je.contains("affine")) {
                e.affine = AffineTransform::from_rows(je.at("affine").get<std::vector<std::vector<double>>>());
            }
            m.entries.push_back(std::move(e));
            ++index;
        }
        m.validate();
    } catch (const json::exception& e) {
        schema_error(e.what());
    } catch (const InvalidArgument& e) {
        schema_error(e.what());
    }
    return m;
}

nlohmann::ordered_json manifest_to_json(const DatasetManifest& m) {
    ojson j;
    j["kind"] = to_string(m.kind);
    j["spatial_dims"] = m.spatial_dims;
    j["class_names"] = m.class_names;
    if (m.resize_to) {
        j["resize_to"] = *m.resize_to;
        j["resize_mode"] = m.resize_mode == ResizeMode::nearest ? "nearest" : "linear";
    }
    if (m.spacing) j["spacing"] = m.spacing->values();
    if (!m.landmarks_csv.empty()) j["landmarks_csv"] = m.landmarks_csv;
    ojson entries = ojson::array();
    for (const auto& e : m.entries) {
        ojson je;
        je["id"] = e.id;
        if (!e.image_path.empty()) je["image_path"] = e.image_path;
        if (!e.heatmap_path.empty()) je["heatmap_path"] = e.heatmap_path;
        if (!e.mask_path.empty()) je["mask_path"] = e.mask_path;
        if (e.spacing) je["spacing"] = e.spacing->values();
        if (e.landmarks) je["landmarks"] = landmarks_to_json(*e.landmarks);
        if (e.patch) {
            ojson jp;
            if (e.patch->origin) jp["origin"] = *e.patch->origin;
            if (e.patch->center) jp["center"] = *e.patch->center;
            jp["size"] = e.patch->size;
            je["patch"] = std::move(jp);
        }
        if (e.affine) je["affine"] = e.affine->rows();
        entries.push_back(std::move(je));
    }
    j["entries"] = std::move(entries);
    return j;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    const std::string text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what(), e.byte);
    }
    try {
        return manifest_from_json(j, path.parent_path());
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what(), e.offset());
    }
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
    m.validate();
    const std::string text = manifest_to_json(m).dump(2) + "\n";
    write_file(path, std::as_bytes(std::span<const char>(text.data(), text.size())));
}

DatasetReader::DatasetReader(DatasetManifest manifest) : manifest_(std::move(manifest)) {
    manifest_.validate();
    if (!manifest_.landmarks_csv.empty()) {
        try {
            auto table = read_landmarks_csv(manifest_.resolve(manifest_.landmarks_csv), manifest_.class_names);
            if (manifest_.class_names.empty()) manifest_.class_names = table.landmarks.class_names();
            csv_ids_ = table.image_ids;
            csv_landmarks_ = std::move(table.landmarks);
        } catch (const Error& e) {
            csv_error_ = e.what();
        }
    }
}

DatasetItem DatasetReader::load(std::size_t index) const {
    const DatasetManifest& m = manifest_;
    const ManifestEntry& e = m.entries.at(index);
    DatasetItem item;
    item.index = index;
    item.id = e.id;
    item.spacing = e.spacing ? *e.spacing : *m.spacing;
    const std::size_t dims = m.spatial_dims;

    auto load_grid = [&](const std::string& rel) {
        Heatmap h = tensor_to_heatmap(read_tensor(m.resolve(rel)), dims);
        h.set_spacing(item.spacing);
        return h;
    };

    if (!e.image_path.empty()) item.image = load_grid(e.image_path);
    if (!e.heatmap_path.empty()) item.heatmap = load_grid(e.heatmap_path);

    // Annotations in stored coordinates.
    std::optional<LandmarkSet> lms;
    if (m.kind == DatasetKind::mask) {
        lms = mask_to_landmarks(load_grid(e.mask_path));
        if (!m.class_names.empty()) {
            if (lms->classes() != m.class_names.size()) throw InvalidArgument("mask channel count does not match class_names");
            lms->set_class_names(m.class_names);
        }
    } else if (e.landmarks) {
        lms = *e.landmarks;
        if (!m.class_names.empty()) lms->set_class_names(m.class_names);
    } else if (!m.landmarks_csv.empty()) {
        if (!csv_landmarks_) throw IoError(csv_error_);
        lms = align_to(LandmarkTable{csv_ids_, *csv_landmarks_}, {e.id}, m.class_names, csv_landmarks_->instances());
    } else {
        lms = LandmarkSet(1, m.class_names.size(), 1, dims, m.class_names);
    }
    if (e.affine) lms = apply_affine(*lms, *e.affine);

    // Grid the landmarks live on, before any resize.
    const Heatmap* frame = item.image ? &*item.image : item.heatmap ? &*item.heatmap : nullptr;

    if (m.kind == DatasetKind::patch) {
        const Extents parent = item.image->extents();
        const PatchRequest& req = *e.patch;
        PatchSpec patch = req.origin ? PatchSpec{*req.origin, req.size, parent} : crop_roi(parent, *req.center, req.size);
        patch.validate();
        item.image = crop(*item.image, patch);
        item.global_landmarks = patch_to_global(*lms, patch);
        item.patch = std::move(patch);
        frame = &*item.image;
    }

    if (m.resize_to && frame) {
        const Extents from = frame->extents();
        const Extents& to = *m.resize_to;
        lms = resize_landmarks(*lms, from, to);
        if (item.image) item.image = resize_image(*item.image, to, m.resize_mode);
        if (item.heatmap) item.heatmap = resize_image(*item.heatmap, to, ResizeMode::linear);
        item.spacing = scaled_spacing(item.spacing, from, to);
    }
    item.landmarks = std::move(*lms);
    return item;
}

std::vector<EntryError> DatasetReader::for_each(const std::function<void(const DatasetItem&)>& fn) const {
    std::vector<EntryError> errors;
    for (std::size_t k = 0; k < size(); ++k) {
        DatasetItem item;
        try {
            item = load(k);
        } catch (const Error& e) {
            errors.push_back({k, manifest_.entries[k].id, e.what()});
            continue;
        }
        fn(item);
    }
    return errors;
}

}  // namespace lmk
