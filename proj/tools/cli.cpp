#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "landmark_kit/adaptive.hpp"
#include "landmark_kit/dataset.hpp"
#include "landmark_kit/decode.hpp"
#include "landmark_kit/encode.hpp"
#include "landmark_kit/error.hpp"
#include "landmark_kit/gradcheck.hpp"
#include "landmark_kit/landmark_csv.hpp"
#include "landmark_kit/metrics.hpp"
#include "landmark_kit/random.hpp"
#include "landmark_kit/synth.hpp"
#include "landmark_kit/tensor_io.hpp"

namespace lmk::cli {
namespace {

namespace fs = std::filesystem;

/// Bad flag value detected after parsing; reported like a parse error.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        double v = 0.0;
        const auto* end = item.data() + item.size();
        const auto res = std::from_chars(item.data(), end, v);
        if (item.empty() || res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) {
            throw UsageError(flag + ": '" + text + "' is not a comma-separated list of numbers");
        }
        out.push_back(v);
    }
    if (out.empty()) throw UsageError(flag + " needs at least one value");
    return out;
}

std::vector<std::size_t> parse_extents(const std::string& text, const std::string& flag) {
    std::vector<std::size_t> out;
    for (double v : parse_list(text, flag)) {
        if (v < 1.0 || v != std::floor(v)) throw UsageError(flag + " needs positive integers");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

std::vector<std::string> split_names(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    write_file(path, std::as_bytes(std::span<const char>(text.data(), text.size())));
}

std::string read_text(const fs::path& path) {
    const auto bytes = read_file(path);
    return std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

nlohmann::json read_json(const fs::path& path) {
    try {
        return nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what(), e.byte);
    }
}

std::string lower_ext(const fs::path& p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return e;
}

struct NamedHeatmaps {
    std::vector<std::string> ids;
    std::vector<Heatmap> maps;
    std::vector<std::string> class_names;
};

// Heatmaps from an NPZ (one member per image), a single NPY/PNG, or a manifest
// (image of each entry, or its heatmap for heatmap-kind manifests).
NamedHeatmaps load_heatmaps(const fs::path& path, std::optional<std::size_t> spatial_dims, std::ostream& err,
                            bool& had_errors) {
    NamedHeatmaps out;
    auto dims_for = [&](const Tensor& t) -> std::size_t {
        if (spatial_dims) return *spatial_dims;
        return t.shape.size() >= 4 ? 3 : 2;
    };
    const std::string ext = lower_ext(path);
    if (ext == ".json") {
        const DatasetReader reader(load_manifest(path));
        const auto errors = reader.for_each([&](const DatasetItem& item) {
            const auto& grid = reader.manifest().kind == DatasetKind::heatmap ? item.heatmap : item.image;
            if (!grid) return;
            out.ids.push_back(item.id);
            out.maps.push_back(*grid);
        });
        for (const auto& e : errors) err << "warning: skipping entry '" << e.id << "': " << e.message << '\n';
        had_errors = had_errors || !errors.empty();
        out.class_names = reader.manifest().class_names;
    } else if (ext == ".npz") {
        for (auto& [name, tensor] : read_npz(path)) {
            out.ids.push_back(name);
            out.maps.push_back(tensor_to_heatmap(tensor, dims_for(tensor)));
        }
    } else {
        const Tensor t = read_tensor(path);
        out.ids.push_back(path.stem().string());
        out.maps.push_back(tensor_to_heatmap(t, dims_for(t)));
    }
    return out;
}

std::vector<std::string> class_names_for(const NamedHeatmaps& h, const std::string& override_names) {
    if (!override_names.empty()) return split_names(override_names);
    if (!h.class_names.empty()) return h.class_names;
    std::vector<std::string> names;
    const std::size_t classes = h.maps.empty() ? 0 : h.maps.front().channels();
    for (std::size_t c = 0; c < classes; ++c) names.push_back(default_class_name(c));
    return names;
}

// --- synth ---------------------------------------------------------------------

struct SynthArgs {
    std::string config;
    std::string out;
    std::optional<std::size_t> n_samples;
    std::string size;
    std::optional<std::size_t> classes;
    std::string sigma_range;
    std::optional<double> noise;
    std::optional<std::size_t> distractors;
    std::optional<double> amplitude;
    std::optional<std::uint64_t> seed;
    std::string spacing;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    SynthConfig cfg = a.config.empty() ? SynthConfig{} : synth_config_from_json(read_json(a.config));
    if (a.n_samples) cfg.n_samples = *a.n_samples;
    if (!a.size.empty()) cfg.size = parse_extents(a.size, "--size");
    if (a.classes) cfg.n_classes = *a.classes;
    if (!a.sigma_range.empty()) {
        const auto r = parse_list(a.sigma_range, "--sigma-range");
        if (r.size() != 2) throw UsageError("--sigma-range needs two values");
        cfg.sigma_min = r[0];
        cfg.sigma_max = r[1];
    }
    if (a.noise) cfg.noise_std = *a.noise;
    if (a.distractors) cfg.n_distractors = *a.distractors;
    if (a.amplitude) cfg.distractor_amplitude = *a.amplitude;
    if (a.seed) cfg.seed = *a.seed;
    if (!a.spacing.empty()) cfg.spacing = parse_list(a.spacing, "--spacing");
    try {
        cfg.validate();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    const auto result = generate(cfg, a.out);
    out << "wrote " << result.manifest.entries.size() << " samples with " << cfg.n_classes << " landmarks to "
        << (fs::path(a.out) / "manifest.json").string() << '\n';
    return kOk;
}

// --- encode --------------------------------------------------------------------

struct EncodeArgs {
    std::string manifest;
    std::string sigma = "3";
    std::string kind = "gaussian";
    bool normalize = false;
    bool truncate = false;
    std::string out;
};

int cmd_encode(const EncodeArgs& a, std::ostream& out, std::ostream& err) {
    EncodeOptions opts;
    if (a.kind == "gaussian") {
        opts.kind = EncodingKind::gaussian;
    } else if (a.kind == "laplace") {
        opts.kind = EncodingKind::laplace;
    } else if (a.kind == "one-hot") {
        opts.kind = EncodingKind::one_hot;
    } else {
        throw UsageError("--kind must be gaussian, laplace or one-hot");
    }
    opts.normalize = a.normalize;
    opts.truncate = a.truncate;
    const auto sigma = parse_list(a.sigma, "--sigma");
    for (double s : sigma) {
        if (s <= 0.0) throw UsageError("--sigma must be > 0");
    }

    const DatasetReader reader(load_manifest(a.manifest));
    const std::size_t dims = reader.manifest().spatial_dims;
    if (sigma.size() != 1 && sigma.size() != dims) throw UsageError("--sigma needs 1 or spatial_dims values");
    NamedTensors arrays;
    const auto errors = reader.for_each([&](const DatasetItem& item) {
        const std::size_t classes = item.landmarks.classes();
        std::vector<double> sigmas;
        for (std::size_t c = 0; c < classes; ++c) {
            for (std::size_t d = 0; d < dims; ++d) sigmas.push_back(sigma.size() == 1 ? sigma[0] : sigma[d]);
        }
        const CovarianceSpec cov(classes, dims, std::move(sigmas), std::vector<double>(classes * rotation_angle_count(dims), 0.0));
        const Heatmap& frame = item.image ? *item.image : *item.heatmap;
        arrays.emplace_back(item.id, heatmap_to_tensor(encode(item.landmarks, cov, frame.extents(), opts)));
    });
    for (const auto& e : errors) err << "error: entry '" << e.id << "': " << e.message << '\n';
    write_npz(a.out, arrays);
    out << "encoded " << arrays.size() << " of " << reader.size() << " entries to " << a.out << '\n';
    return errors.empty() ? kOk : kDataError;
}

// --- decode --------------------------------------------------------------------

struct DecodeArgs {
    std::string heatmaps;
    std::string method = "local-weighted-mean";
    std::string window = "3";
    std::string activation = "softmax";
    double temperature = 1.0;
    std::string units = "pixels";
    std::size_t instances = 1;
    double min_separation = 1.0;
    std::optional<std::size_t> spatial_dims;
    std::string class_names;
    std::string out;
};

DecodeConfig decode_config(const DecodeArgs& a) {
    DecodeConfig cfg;
    if (a.method == "argmax") {
        cfg.method = DecodeMethod::argmax;
    } else if (a.method == "weighted-mean") {
        cfg.method = DecodeMethod::weighted_mean;
    } else if (a.method == "local-weighted-mean") {
        cfg.method = DecodeMethod::local_weighted_mean;
    } else {
        throw UsageError("--method must be argmax, weighted-mean or local-weighted-mean");
    }
    if (a.activation == "softmax") {
        cfg.activation = Activation::softmax(a.temperature);
    } else if (a.activation == "identity") {
        cfg.activation = Activation::identity();
    } else if (a.activation == "relu") {
        cfg.activation = Activation::relu();
    } else {
        throw UsageError("--activation must be softmax, identity or relu");
    }
    try {
        cfg.activation.validate();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    if (a.units == "pixels") {
        cfg.units = Units::pixels;
    } else if (a.units == "normalized") {
        cfg.units = Units::normalized;
    } else {
        throw UsageError("--units must be pixels or normalized");
    }
    cfg.window = parse_extents(a.window, "--window");
    for (std::size_t w : cfg.window) {
        if (w % 2 == 0) throw UsageError("--window extents must be odd");
    }
    if (a.instances == 0) throw UsageError("--instances must be >= 1");
    if (!(a.min_separation >= 0.0)) throw UsageError("--min-separation must be >= 0");
    return cfg;
}

int cmd_decode(const DecodeArgs& a, std::ostream& out, std::ostream& err) {
    const DecodeConfig cfg = decode_config(a);
    bool had_errors = false;
    const NamedHeatmaps input = load_heatmaps(a.heatmaps, a.spatial_dims, err, had_errors);
    const auto names = class_names_for(input, a.class_names);

    LandmarkTable table;
    const std::size_t dims = input.maps.empty() ? 2 : input.maps.front().dims();
    table.landmarks = LandmarkSet(input.maps.size(), names.size(), a.instances, dims, names);
    for (std::size_t n = 0; n < input.maps.size(); ++n) {
        const Heatmap& h = input.maps[n];
        if (h.channels() != names.size() || h.dims() != dims) {
            throw InvalidArgument("heatmap '" + input.ids[n] + "' has " + std::to_string(h.channels()) +
                                  " channels in " + std::to_string(h.dims()) + "-D; expected " +
                                  std::to_string(names.size()) + " in " + std::to_string(dims) + "-D");
        }
        LandmarkSet pred;
        try {
            pred = a.instances == 1 ? decode(h, cfg) : decode_multi_instance(h, a.instances, a.min_separation, cfg);
        } catch (const DegenerateInputError& e) {
            const std::string who = e.channel() >= 0 ? "landmark '" + names.at(static_cast<std::size_t>(e.channel())) + "'"
                                                     : "a landmark";
            throw DegenerateInputError("image '" + input.ids[n] + "', " + who + ": " + e.what(), e.channel());
        }
        for (std::size_t c = 0; c < names.size(); ++c) {
            for (std::size_t i = 0; i < pred.instances(); ++i) table.landmarks.set(n, c, i, pred.at(0, c, i));
        }
        table.image_ids.push_back(input.ids[n]);
    }
    const std::string csv = format_landmarks_csv(table);
    if (a.out.empty()) {
        out << csv;
    } else {
        write_text(a.out, csv);
        out << "decoded " << table.image_ids.size() << " images to " << a.out << '\n';
    }
    return had_errors ? kDataError : kOk;
}

// --- evaluate / report -----------------------------------------------------------

struct EvaluateArgs {
    std::string pred;
    std::string truth;
    std::string spacing;
    std::string radii = "1,2,2.5,3,4";
    std::string format = "json";
    std::string out;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
    if (a.format != "json" && a.format != "text") throw UsageError("--format must be json or text");
    ReportConfig rc;
    rc.radii = parse_list(a.radii, "--radii");
    try {
        rc.validate();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    const LandmarkTable truth = read_landmarks_csv(a.truth);
    const LandmarkTable pred = read_landmarks_csv(a.pred, truth.landmarks.class_names());
    const std::size_t dims = truth.landmarks.dims();
    const Spacing spacing = a.spacing.empty() ? Spacing::unit(dims) : Spacing(parse_list(a.spacing, "--spacing"));
    if (spacing.dims() != dims) throw UsageError("--spacing needs one value per landmark dimension");
    if (!pred.landmarks.class_names().empty() && pred.landmarks.dims() != dims) {
        throw InvalidArgument("prediction and truth differ in landmark dimension");
    }
    const LandmarkSet aligned =
        align_to(pred, truth.image_ids, truth.landmarks.class_names(), truth.landmarks.instances());
    const DetectionReport report = detection_report(aligned, truth.landmarks, spacing, rc);
    const std::string text = a.format == "json" ? report_to_string(report) : format_text(report);
    if (a.out.empty()) {
        out << text;
    } else {
        write_text(a.out, text);
    }
    return kOk;
}

struct ReportArgs {
    std::string in;
    std::string format = "text";
};

int cmd_report(const ReportArgs& a, std::ostream& out) {
    if (a.format != "json" && a.format != "text") throw UsageError("--format must be json or text");
    const DetectionReport report = report_from_json(read_json(a.in));
    out << (a.format == "text" ? format_text(report) : report_to_string(report));
    return kOk;
}

// --- fit-sigma -----------------------------------------------------------------

struct FitArgs {
    std::string heatmaps;
    std::string truth;
    std::optional<std::size_t> spatial_dims;
    double target_sigma = 2.0;
    double init_sigma = 6.0;
    std::size_t size = 64;
    std::uint64_t seed = 0;
    double alpha = 0.0;
    double lr = 50.0;
    double momentum = 0.99;
    double sigma_min = 0.5;
    std::size_t steps = 5000;
    bool no_rotation = false;
    bool scheduler = false;
    std::string out;
};

nlohmann::ordered_json fit_json(const std::string& id, const FitResult& r) {
    nlohmann::ordered_json j;
    j["id"] = id;
    j["steps"] = r.steps;
    j["final_loss"] = r.final_loss;
    nlohmann::ordered_json sig = nlohmann::ordered_json::array();
    nlohmann::ordered_json rot = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < r.cov.classes(); ++c) {
        const auto s = r.cov.sigmas(c);
        const auto a = r.cov.rotation(c);
        sig.push_back(std::vector<double>(s.begin(), s.end()));
        rot.push_back(std::vector<double>(a.begin(), a.end()));
    }
    j["sigma"] = std::move(sig);
    j["rotation"] = std::move(rot);
    return j;
}

int cmd_fit(const FitArgs& a, std::ostream& out) {
    FitConfig cfg;
    cfg.loss.alpha = a.alpha;
    cfg.sgd.lr = a.lr;
    cfg.sgd.momentum = a.momentum;
    cfg.sgd.sigma_min = a.sigma_min;
    cfg.max_steps = a.steps;
    cfg.learn_rotation = !a.no_rotation;
    cfg.use_scheduler = a.scheduler;
    cfg.scheduler.sigma_min = a.sigma_min;
    try {
        cfg.loss.validate();
        cfg.sgd.validate();
        if (!(a.init_sigma > 0.0) || !(a.target_sigma > 0.0)) throw InvalidArgument("sigmas must be > 0");
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    if (a.heatmaps.empty() != a.truth.empty()) throw UsageError("--heatmaps and --truth go together");

    nlohmann::ordered_json results = nlohmann::ordered_json::array();
    auto check_finite = [](const FitResult& r, const std::string& id) {
        if (!std::isfinite(r.final_loss)) throw DegenerateInputError("fit for '" + id + "' diverged");
    };

    if (a.heatmaps.empty()) {
        // Desk-scale loop: recover the spread of a rendered target of known sigma.
        if (a.size < 16) throw UsageError("--size must be >= 16");
        Rng rng(a.seed);
        const double side = static_cast<double>(a.size);
        LandmarkSet lms(1, 1, 1, 2);
        const std::vector<double> p{rng.uniform(0.4 * side, 0.6 * side), rng.uniform(0.4 * side, 0.6 * side)};
        lms.set(0, 0, p);
        const Extents size{a.size, a.size};
        const Heatmap pred = encode(lms, CovarianceSpec(1, 2, a.target_sigma), size);
        const FitResult r = fit_covariance(pred, lms, CovarianceSpec(1, 2, a.init_sigma), cfg);
        check_finite(r, "synthetic");
        double dist = 0.0;
        for (double s : r.cov.sigmas()) dist += (s - a.target_sigma) * (s - a.target_sigma);
        auto j = fit_json("synthetic", r);
        j["target_sigma"] = a.target_sigma;
        j["sigma_error"] = std::sqrt(dist);
        results.push_back(std::move(j));
    } else {
        std::ostringstream ignored;
        bool had_errors = false;
        const NamedHeatmaps input = load_heatmaps(a.heatmaps, a.spatial_dims, ignored, had_errors);
        const auto names = class_names_for(input, "");
        const LandmarkTable truth = read_landmarks_csv(a.truth, names);
        for (std::size_t n = 0; n < input.maps.size(); ++n) {
            const Heatmap& h = input.maps[n];
            const LandmarkSet lms = align_to(truth, {input.ids[n]}, names, 1);
            const FitResult r = fit_covariance(h, lms, CovarianceSpec(h.channels(), h.dims(), a.init_sigma), cfg);
            check_finite(r, input.ids[n]);
            results.push_back(fit_json(input.ids[n], r));
        }
    }
    const std::string text = results.dump(2) + "\n";
    if (a.out.empty()) {
        out << text;
    } else {
        write_text(a.out, text);
    }
    return kOk;
}

// --- gradcheck -----------------------------------------------------------------

struct GradArgs {
    std::size_t trials = 100;
    std::uint64_t seed = 0;
    double step = 1e-4;
    double tolerance = 1e-5;
    std::string suite = "all";
};

int cmd_gradcheck(const GradArgs& a, std::ostream& out) {
    GradcheckConfig cfg;
    cfg.trials = a.trials;
    cfg.seed = a.seed;
    cfg.step = a.step;
    try {
        cfg.validate();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    std::vector<GradcheckResult> results;
    if (a.suite == "all") {
        results = run_gradcheck(cfg);
    } else if (a.suite == "encode") {
        results.push_back(check_encode_grad(cfg));
    } else if (a.suite == "loss") {
        results.push_back(check_loss_grad(cfg));
    } else if (a.suite == "decode") {
        results.push_back(check_decode_jacobian(cfg));
    } else {
        throw UsageError("--suite must be all, encode, loss or decode");
    }
    double worst = 0.0;
    out << std::scientific << std::setprecision(3);
    for (const auto& r : results) {
        out << r.suite << ": " << r.trials << " trials, max relative error " << r.max_rel_error << '\n';
        worst = std::max(worst, r.max_rel_error);
    }
    out << "max relative error: " << worst << '\n';
    return worst < a.tolerance ? kOk : kNumericError;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Heatmap-based landmark localization toolkit", "landmark-kit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "landmark-kit 0.1.0");

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic dataset with known landmarks");
    s->add_option("--config", synth.config, "JSON config; flags override its values")->check(CLI::ExistingFile);
    s->add_option("--out", synth.out, "Output directory")->required();
    s->add_option("--n-samples", synth.n_samples, "Number of images");
    s->add_option("--size", synth.size, "Image extents, e.g. 64,64");
    s->add_option("--classes", synth.classes, "Landmark classes per image");
    s->add_option("--sigma-range", synth.sigma_range, "Blob sigma range lo,hi in pixels");
    s->add_option("--noise", synth.noise, "Additive Gaussian noise std");
    s->add_option("--distractors", synth.distractors, "Distractor blobs per channel");
    s->add_option("--distractor-amplitude", synth.amplitude, "Peak value of distractor blobs");
    s->add_option("--seed", synth.seed, "Random seed");
    s->add_option("--spacing", synth.spacing, "Pixel spacing in mm per dimension, e.g. 0.1,0.1");

    EncodeArgs enc;
    auto* e = app.add_subcommand("encode", "Render target heatmaps for every manifest entry");
    e->add_option("--manifest", enc.manifest, "Dataset manifest (JSON)")->required()->check(CLI::ExistingFile);
    e->add_option("--sigma", enc.sigma, "Spread in pixels, one value or one per dimension")->capture_default_str();
    e->add_option("--kind", enc.kind, "gaussian, laplace or one-hot")->capture_default_str();
    e->add_flag("--normalize", enc.normalize, "Scale each channel to sum to 1");
    e->add_flag("--truncate", enc.truncate, "Skip pixels beyond 6 sigma");
    e->add_option("--out", enc.out, "Output NPZ, one member per entry id")->required();

    DecodeArgs dec;
    auto* d = app.add_subcommand("decode", "Decode heatmaps into landmark coordinates");
    d->add_option("--heatmaps", dec.heatmaps, "NPZ, NPY, PNG or manifest JSON")->required()->check(CLI::ExistingFile);
    d->add_option("--method", dec.method, "argmax, weighted-mean or local-weighted-mean")->capture_default_str();
    d->add_option("--window", dec.window, "Odd local window extent(s)")->capture_default_str();
    d->add_option("--activation", dec.activation, "softmax, identity or relu")->capture_default_str();
    d->add_option("--temperature", dec.temperature, "Softmax temperature")->capture_default_str();
    d->add_option("--units", dec.units, "pixels or normalized")->capture_default_str();
    d->add_option("--instances", dec.instances, "Peaks per channel")->capture_default_str();
    d->add_option("--min-separation", dec.min_separation, "Minimum peak distance in pixels for --instances > 1")
        ->capture_default_str();
    d->add_option("--spatial-dims", dec.spatial_dims, "Spatial rank of tensor inputs (default: 3 for rank-4 tensors, else 2)");
    d->add_option("--class-names", dec.class_names, "Comma-separated class names (default L0, L1, ...)");
    d->add_option("--out", dec.out, "Output landmark CSV (default: stdout)");

    EvaluateArgs ev;
    auto* v = app.add_subcommand("evaluate", "Score predicted landmarks against ground truth");
    v->add_option("--pred", ev.pred, "Predicted landmark CSV")->required()->check(CLI::ExistingFile);
    v->add_option("--truth", ev.truth, "Ground-truth landmark CSV")->required()->check(CLI::ExistingFile);
    v->add_option("--spacing", ev.spacing, "Pixel spacing in mm per dimension (default 1)");
    v->add_option("--radii", ev.radii, "SDR radii in mm")->capture_default_str();
    v->add_option("--format", ev.format, "json or text")->capture_default_str();
    v->add_option("--out", ev.out, "Output report file (default: stdout)");

    ReportArgs rep;
    auto* r = app.add_subcommand("report", "Render a saved detection report");
    r->add_option("--in", rep.in, "Report JSON from evaluate")->required()->check(CLI::ExistingFile);
    r->add_option("--format", rep.format, "text or json")->capture_default_str();

    FitArgs fit;
    auto* f = app.add_subcommand("fit-sigma", "Fit heatmap spread by gradient descent on the heatmap loss");
    f->add_option("--heatmaps", fit.heatmaps, "Predicted heatmaps (NPZ, NPY or manifest); omit for the synthetic loop")
        ->check(CLI::ExistingFile);
    f->add_option("--truth", fit.truth, "Landmark CSV for --heatmaps")->check(CLI::ExistingFile);
    f->add_option("--spatial-dims", fit.spatial_dims, "Spatial rank of tensor inputs");
    f->add_option("--target-sigma", fit.target_sigma, "Spread of the synthetic prediction")->capture_default_str();
    f->add_option("--init-sigma", fit.init_sigma, "Initial spread")->capture_default_str();
    f->add_option("--size", fit.size, "Side of the synthetic grid")->capture_default_str();
    f->add_option("--seed", fit.seed, "Seed for the synthetic landmark")->capture_default_str();
    f->add_option("--alpha", fit.alpha, "Sigma regularization weight")->capture_default_str();
    f->add_option("--lr", fit.lr, "Learning rate")->capture_default_str();
    f->add_option("--momentum", fit.momentum, "Nesterov momentum")->capture_default_str();
    f->add_option("--sigma-min", fit.sigma_min, "Lower bound on sigma")->capture_default_str();
    f->add_option("--steps", fit.steps, "Optimization steps")->capture_default_str();
    f->add_flag("--no-rotation", fit.no_rotation, "Keep rotation angles fixed");
    f->add_flag("--scheduler", fit.scheduler, "Shrink sigma on loss plateaus");
    f->add_option("--out", fit.out, "Output JSON (default: stdout)");

    GradArgs gc;
    auto* g = app.add_subcommand("gradcheck", "Compare analytic gradients with central finite differences");
    g->add_option("--trials", gc.trials, "Random configurations per suite")->capture_default_str();
    g->add_option("--seed", gc.seed, "Random seed")->capture_default_str();
    g->add_option("--step", gc.step, "Finite-difference step")->capture_default_str();
    g->add_option("--tolerance", gc.tolerance, "Pass threshold on the max relative error")->capture_default_str();
    g->add_option("--suite", gc.suite, "all, encode, loss or decode")->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& pe) {
        return app.exit(pe, out, err) == 0 ? kOk : kUsage;
    }

    try {
        if (s->parsed()) return cmd_synth(synth, out);
        if (e->parsed()) return cmd_encode(enc, out, err);
        if (d->parsed()) return cmd_decode(dec, out, err);
        if (v->parsed()) return cmd_evaluate(ev, out);
        if (r->parsed()) return cmd_report(rep, out);
        if (f->parsed()) return cmd_fit(fit, out);
        if (g->parsed()) return cmd_gradcheck(gc, out);
    } catch (const UsageError& ex) {
        err << "usage error: " << ex.what() << '\n';
        return kUsage;
    } catch (const DegenerateInputError& ex) {
        err << "numeric error: " << ex.what() << '\n';
        return kNumericError;
    } catch (const SingularMatrixError& ex) {
        err << "numeric error: " << ex.what() << '\n';
        return kNumericError;
    } catch (const Error& ex) {
        err << "error: " << ex.what() << '\n';
        return kDataError;
    } catch (const fs::filesystem_error& ex) {
        err << "error: " << ex.what() << '\n';
        return kDataError;
    } catch (const nlohmann::json::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return kDataError;
    }
    return kUsage;
}

}  // namespace lmk::cli
