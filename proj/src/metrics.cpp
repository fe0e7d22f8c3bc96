#include "landmark_kit/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "landmark_kit/error.hpp"

namespace lmk {

void ReportConfig::validate() const {
    if (radii.empty()) throw InvalidArgument("at least one SDR radius is required");
    for (std::size_t k = 0; k < radii.size(); ++k) {
        if (!std::isfinite(radii[k]) || radii[k] <= 0.0) throw InvalidArgument("SDR radii must be finite and > 0");
        if (k > 0 && radii[k] <= radii[k - 1]) throw InvalidArgument("SDR radii must be strictly ascending");
    }
}

bool PointErrors::skipped(std::size_t flat) const { return std::isnan(mm.at(flat)); }

std::vector<double> PointErrors::evaluated() const {
    std::vector<double> out;
    for (double e : mm) {
        if (!std::isnan(e)) out.push_back(e);
    }
    return out;
}

PointErrors point_error(const LandmarkSet& pred, const LandmarkSet& truth, const Spacing& spacing) {
    if (!pred.same_shape(truth)) throw InvalidArgument("prediction and truth landmark sets differ in shape");
    if (spacing.dims() != truth.dims()) throw InvalidArgument("spacing dimension does not match landmarks");
    PointErrors out{truth.samples(), truth.classes(), truth.instances(), {}};
    out.mm.resize(truth.entries());
    for (std::size_t k = 0; k < truth.entries(); ++k) {
        const auto p = pred.entry(k);
        const auto t = truth.entry(k);
        if (is_missing(p) || is_missing(t)) {
            out.mm[k] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        double sum = 0.0;
        for (std::size_t d = 0; d < t.size(); ++d) {
            const double diff = (p[d] - t[d]) * spacing[d];
            sum += diff * diff;
        }
        out.mm[k] = std::sqrt(sum);
    }
    return out;
}

double sdr(std::span<const double> errors, double radius) {
    if (!std::isfinite(radius) || radius <= 0.0) throw InvalidArgument("SDR radius must be finite and > 0");
    if (errors.empty()) throw DegenerateInputError("SDR is undefined for an empty error set");
    const auto hits = std::count_if(errors.begin(), errors.end(), [radius](double e) { return e <= radius; });
    return 100.0 * static_cast<double>(hits) / static_cast<double>(errors.size());
}

ErrorSummary summarize(std::span<const double> errors, std::size_t skipped, const std::vector<double>& radii) {
    ErrorSummary s;
    s.n = errors.size();
    s.skipped = skipped;
    if (errors.empty()) return s;

    double sum = 0.0;
    for (double e : errors) sum += e;
    const double mean = sum / static_cast<double>(s.n);
    double sq = 0.0;
    for (double e : errors) sq += (e - mean) * (e - mean);

    std::vector<double> sorted(errors.begin(), errors.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = s.n / 2;
    const double median = s.n % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);

    s.pe_mean_mm = mean;
    s.pe_median_mm = median;
    s.pe_std_mm = std::sqrt(sq / static_cast<double>(s.n));
    for (double r : radii) s.sdr.emplace_back(r, sdr(errors, r));
    return s;
}

DetectionReport detection_report(const LandmarkSet& pred, const LandmarkSet& truth, const Spacing& spacing,
                                 const ReportConfig& cfg) {
    cfg.validate();
    const PointErrors pe = point_error(pred, truth, spacing);
    DetectionReport report;
    report.radii = cfg.radii;
    report.class_names = truth.class_names();

    std::vector<double> pooled;
    for (std::size_t c = 0; c < truth.classes(); ++c) {
        std::vector<double> errs;
        std::size_t skipped = 0;
        for (std::size_t n = 0; n < truth.samples(); ++n) {
            for (std::size_t i = 0; i < truth.instances(); ++i) {
                const double e = pe.at(n, c, i);
                if (std::isnan(e)) {
                    ++skipped;
                } else {
                    errs.push_back(e);
                }
            }
        }
        report.classes.push_back(summarize(errs, skipped, cfg.radii));
        report.skipped += skipped;
    }
    // Pool in entry order so the overall statistics do not depend on class grouping.
    pooled = pe.evaluated();
    report.overall = summarize(pooled, report.skipped, cfg.radii);
    return report;
}

std::string radius_key(double radius) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), radius);
    return std::string(buf, res.ptr);
}

namespace {

nlohmann::ordered_json summary_json(const ErrorSummary& s) {
    nlohmann::ordered_json j;
    j["n"] = s.n;
    j["skipped"] = s.skipped;
    if (s.pe_mean_mm) j["pe_mean_mm"] = *s.pe_mean_mm;
    if (s.pe_median_mm) j["pe_median_mm"] = *s.pe_median_mm;
    if (s.pe_std_mm) j["pe_std_mm"] = *s.pe_std_mm;
    if (!s.sdr.empty()) {
        nlohmann::ordered_json rates = nlohmann::ordered_json::object();
        for (const auto& [r, pct] : s.sdr) rates[radius_key(r)] = pct;
        j["sdr"] = std::move(rates);
    }
    return j;
}

ErrorSummary summary_from_json(const nlohmann::json& j, const std::vector<double>& radii) {
    ErrorSummary s;
    s.n = j.at("n").get<std::size_t>();
    s.skipped = j.value("skipped", std::size_t{0});
    if (j.contains("pe_mean_mm")) s.pe_mean_mm = j.at("pe_mean_mm").get<double>();
    if (j.contains("pe_median_mm")) s.pe_median_mm = j.at("pe_median_mm").get<double>();
    if (j.contains("pe_std_mm")) s.pe_std_mm = j.at("pe_std_mm").get<double>();
    if (j.contains("sdr")) {
        for (double r : radii) s.sdr.emplace_back(r, j.at("sdr").at(radius_key(r)).get<double>());
    }
    return s;
}

std::string fixed(double v, int precision) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << v;
    return os.str();
}

}  // namespace

nlohmann::ordered_json to_json(const DetectionReport& report) {
    nlohmann::ordered_json j;
    j["radii_mm"] = report.radii;
    nlohmann::ordered_json classes = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < report.classes.size(); ++c) {
        nlohmann::ordered_json entry;
        entry["name"] = report.class_names.at(c);
        const auto summary = summary_json(report.classes[c]);
        for (const auto& [k, v] : summary.items()) entry[k] = v;
        classes.push_back(std::move(entry));
    }
    j["classes"] = std::move(classes);
    j["overall"] = summary_json(report.overall);
    j["skipped"] = report.skipped;
    return j;
}

DetectionReport report_from_json(const nlohmann::json& j) {
    try {
        DetectionReport r;
        if (j.contains("radii_mm")) {
            r.radii = j.at("radii_mm").get<std::vector<double>>();
        } else if (j.at("overall").contains("sdr")) {
            for (const auto& [k, v] : j.at("overall").at("sdr").items()) r.radii.push_back(std::stod(k));
            std::sort(r.radii.begin(), r.radii.end());
        }
        for (const auto& entry : j.at("classes")) {
            r.class_names.push_back(entry.at("name").get<std::string>());
            r.classes.push_back(summary_from_json(entry, r.radii));
        }
        r.overall = summary_from_json(j.at("overall"), r.radii);
        r.skipped = j.at("skipped").get<std::size_t>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed detection report: ") + e.what(), 0);
    }
}

std::string report_to_string(const DetectionReport& report) { return to_json(report).dump(2) + "\n"; }

std::string format_text(const DetectionReport& report) {
    std::size_t name_width = std::string("Landmark").size();
    for (const auto& n : report.class_names) name_width = std::max(name_width, n.size());
    name_width = std::max(name_width, std::string("Overall").size());
    constexpr int col = 11;

    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(name_width)) << "Landmark" << std::right << std::setw(col)
       << "PE (mm)";
    for (double r : report.radii) os << std::setw(col) << ("SDR " + radius_key(r) + "mm");
    os << std::setw(col) << "n" << '\n';

    auto row = [&](const std::string& name, const ErrorSummary& s) {
        os << std::left << std::setw(static_cast<int>(name_width)) << name << std::right;
        os << std::setw(col) << (s.pe_mean_mm ? fixed(*s.pe_mean_mm, 3) : "-");
        for (std::size_t k = 0; k < report.radii.size(); ++k) {
            os << std::setw(col) << (k < s.sdr.size() ? fixed(s.sdr[k].second, 2) + "%" : "-");
        }
        os << std::setw(col) << s.n << '\n';
    };
    for (std::size_t c = 0; c < report.classes.size(); ++c) row(report.class_names[c], report.classes[c]);
    os << std::string(name_width + static_cast<std::size_t>(col) * (report.radii.size() + 2), '-') << '\n';
    row("Overall", report.overall);
    os << "Skipped landmarks: " << report.skipped << '\n';
    return os.str();
}

}  // namespace lmk
