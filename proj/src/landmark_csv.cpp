#include "landmark_kit/landmark_csv.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "landmark_kit/error.hpp"
#include "landmark_kit/tensor_io.hpp"

namespace lmk {
namespace {

struct Row {
    std::size_t line;
    std::string image;
    std::string label;
    std::size_t instance;
    std::vector<double> coords;
};

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

// Comma split with optional double-quoted fields ("" escapes a quote).
std::vector<std::string> split(std::string_view line, std::size_t lineno) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char ch = line[k];
        if (quoted) {
            if (ch == '"' && k + 1 < line.size() && line[k + 1] == '"') {
                cur.push_back('"');
                ++k;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
            was_quoted = true;
        } else if (ch == ',') {
            out.push_back(was_quoted ? cur : trim(cur));
            cur.clear();
            was_quoted = false;
        } else {
            cur.push_back(ch);
        }
    }
    if (quoted) throw FormatError("unterminated quoted field", lineno, true);
    out.push_back(was_quoted ? cur : trim(cur));
    return out;
}

double parse_double(const std::string& s, std::size_t lineno) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (s.empty() || res.ec != std::errc() || res.ptr != end) {
        throw FormatError("malformed coordinate '" + s + "'", lineno, true);
    }
    return v;
}

std::optional<std::size_t> parse_index(std::string_view s) {
    std::size_t v = 0;
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (s.empty() || res.ec != std::errc() || res.ptr != end) return std::nullopt;
    return v;
}

std::optional<std::size_t> default_index(const std::string& label) {
    if (label.size() > 1 && label[0] == 'L') return parse_index(std::string_view(label).substr(1));
    return parse_index(label);
}

std::string shortest(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos && trim(s) == s) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out.push_back('"');
        out.push_back(ch);
    }
    return out + "\"";
}

}  // namespace

LandmarkTable parse_landmarks_csv(std::string_view text, const std::vector<std::string>& class_names) {
    std::vector<Row> rows;
    std::size_t dims = 0;
    std::size_t lineno = 0;
    bool header_seen = false;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        if (trim(line).empty()) continue;
        auto fields = split(line, lineno);
        if (!header_seen) {
            header_seen = true;
            const std::vector<std::string> base{"image_id", "class", "instance", "dim0", "dim1"};
            const bool ok2 = fields.size() == 5 && std::equal(base.begin(), base.end(), fields.begin());
            const bool ok3 = fields.size() == 6 && std::equal(base.begin(), base.end(), fields.begin()) &&
                             fields[5] == "dim2";
            if (!ok2 && !ok3) {
                throw FormatError("expected header image_id,class,instance,dim0,dim1[,dim2]", lineno, true);
            }
            dims = fields.size() - 3;
            continue;
        }
        if (fields.size() != dims + 3) {
            throw FormatError("expected " + std::to_string(dims + 3) + " fields, found " +
                                  std::to_string(fields.size()),
                              lineno, true);
        }
        if (fields[0].empty()) throw FormatError("empty image_id", lineno, true);
        if (fields[1].empty()) throw FormatError("empty class label", lineno, true);
        const auto inst = parse_index(fields[2]);
        if (!inst) throw FormatError("malformed instance index '" + fields[2] + "'", lineno, true);
        Row r{lineno, fields[0], fields[1], *inst, {}};
        for (std::size_t d = 0; d < dims; ++d) r.coords.push_back(parse_double(fields[3 + d], lineno));
        rows.push_back(std::move(r));
    }
    if (!header_seen) throw FormatError("missing header row", 1, true);

    // Class resolution.
    std::vector<std::string> names = class_names;
    std::vector<std::size_t> class_of(rows.size());
    if (!names.empty()) {
        for (std::size_t k = 0; k < rows.size(); ++k) {
            const auto it = std::find(names.begin(), names.end(), rows[k].label);
            if (it == names.end()) throw FormatError("unknown class '" + rows[k].label + "'", rows[k].line, true);
            class_of[k] = static_cast<std::size_t>(it - names.begin());
        }
    } else {
        const bool indexed = std::all_of(rows.begin(), rows.end(), [](const Row& r) { return default_index(r.label); });
        if (indexed) {
            std::size_t count = 0;
            for (std::size_t k = 0; k < rows.size(); ++k) {
                class_of[k] = *default_index(rows[k].label);
                count = std::max(count, class_of[k] + 1);
            }
            for (std::size_t c = 0; c < count; ++c) names.push_back(default_class_name(c));
        } else {
            for (std::size_t k = 0; k < rows.size(); ++k) {
                auto it = std::find(names.begin(), names.end(), rows[k].label);
                if (it == names.end()) {
                    names.push_back(rows[k].label);
                    it = names.end() - 1;
                }
                class_of[k] = static_cast<std::size_t>(it - names.begin());
            }
        }
    }

    LandmarkTable table;
    std::map<std::string, std::size_t> image_index;
    std::size_t instances = 1;
    for (const auto& r : rows) {
        if (image_index.emplace(r.image, table.image_ids.size()).second) table.image_ids.push_back(r.image);
        instances = std::max(instances, r.instance + 1);
    }
    if (dims == 0) dims = 2;
    table.landmarks = LandmarkSet(table.image_ids.size(), names.size(), instances, dims, names);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        const std::size_t n = image_index.at(r.image);
        if (!table.landmarks.missing(n, class_of[k], r.instance)) {
            throw FormatError("duplicate entry for image '" + r.image + "', class '" + r.label + "', instance " +
                                  std::to_string(r.instance),
                              r.line, true);
        }
        try {
            table.landmarks.set(n, class_of[k], r.instance, r.coords);
        } catch (const InvalidArgument& e) {
            throw FormatError(e.what(), r.line, true);
        }
    }
    return table;
}

LandmarkTable read_landmarks_csv(const std::filesystem::path& path, const std::vector<std::string>& class_names) {
    const auto bytes = read_file(path);
    const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    try {
        return parse_landmarks_csv(text, class_names);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what(), e.offset(), e.is_line());
    }
}

std::string format_landmarks_csv(const LandmarkTable& table) {
    const auto& lms = table.landmarks;
    if (table.image_ids.size() != lms.samples()) throw InvalidArgument("image id count does not match landmarks");
    std::ostringstream os;
    os << "image_id,class,instance,dim0,dim1" << (lms.dims() == 3 ? ",dim2" : "") << '\n';
    for (std::size_t n = 0; n < lms.samples(); ++n) {
        for (std::size_t c = 0; c < lms.classes(); ++c) {
            for (std::size_t i = 0; i < lms.instances(); ++i) {
                if (lms.missing(n, c, i)) continue;
                os << quote_if_needed(table.image_ids[n]) << ',' << quote_if_needed(lms.class_names()[c]) << ','
                   << i;
                for (double v : lms.at(n, c, i)) os << ',' << shortest(v);
                os << '\n';
            }
        }
    }
    return os.str();
}

void write_landmarks_csv(const std::filesystem::path& path, const LandmarkTable& table) {
    const std::string text = format_landmarks_csv(table);
    write_file(path, std::as_bytes(std::span<const char>(text.data(), text.size())));
}

LandmarkSet align_to(const LandmarkTable& table, const std::vector<std::string>& image_ids,
                     const std::vector<std::string>& class_names, std::size_t instances) {
    const auto& src = table.landmarks;
    LandmarkSet out(image_ids.size(), class_names.size(), instances, src.dims() == 0 ? 2 : src.dims(), class_names);
    for (std::size_t n = 0; n < image_ids.size(); ++n) {
        const auto img = std::find(table.image_ids.begin(), table.image_ids.end(), image_ids[n]);
        if (img == table.image_ids.end()) continue;
        const auto sn = static_cast<std::size_t>(img - table.image_ids.begin());
        for (std::size_t c = 0; c < class_names.size(); ++c) {
            const auto cls = std::find(src.class_names().begin(), src.class_names().end(), class_names[c]);
            if (cls == src.class_names().end()) continue;
            const auto sc = static_cast<std::size_t>(cls - src.class_names().begin());
            for (std::size_t i = 0; i < std::min(instances, src.instances()); ++i) {
                if (!src.missing(sn, sc, i)) out.set(n, c, i, src.at(sn, sc, i));
            }
        }
    }
    return out;
}

}  // namespace lmk
