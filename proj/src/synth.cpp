#include "landmark_kit/synth.hpp"

#include <algorithm>
#include <cmath>

#include "landmark_kit/error.hpp"
#include "landmark_kit/parallel.hpp"
#include "landmark_kit/random.hpp"
#include "landmark_kit/tensor_io.hpp"

namespace lmk {
namespace {

constexpr double kMarginSigmas = 6.0;
constexpr double kDistractorSigmas = 10.0;
constexpr std::size_t kMaxPlacementTries = 10000;

void add_blob(std::span<double> channel, const Extents& size, std::span<const double> center, double sigma,
              double amplitude) {
    const double inv = 1.0 / (2.0 * sigma * sigma);
    grid::for_each(size, [&](std::size_t flat, std::span<const std::size_t> idx) {
        double r2 = 0.0;
        for (std::size_t d = 0; d < idx.size(); ++d) {
            const double diff = static_cast<double>(idx[d]) - center[d];
            r2 += diff * diff;
        }
        channel[flat] += amplitude * std::exp(-r2 * inv);
    });
}

}  // namespace

void SynthConfig::validate() const {
    if (n_samples == 0) throw InvalidArgument("synth: n_samples must be >= 1");
    if (size.size() != 2 && size.size() != 3) throw InvalidArgument("synth: size needs 2 or 3 extents");
    for (std::size_t s : size) {
        if (s < 16) throw InvalidArgument("synth: every extent must be >= 16");
    }
    if (n_classes == 0) throw InvalidArgument("synth: n_classes must be >= 1");
    if (!(std::isfinite(sigma_min) && sigma_min > 0.0 && std::isfinite(sigma_max) && sigma_max >= sigma_min)) {
        throw InvalidArgument("synth: sigma range must satisfy 0 < sigma_min <= sigma_max");
    }
    if (!std::isfinite(noise_std) || noise_std < 0.0) throw InvalidArgument("synth: noise_std must be >= 0");
    if (!std::isfinite(distractor_amplitude) || distractor_amplitude < 0.0) {
        throw InvalidArgument("synth: distractor_amplitude must be >= 0");
    }
    if (!spacing.empty()) {
        if (spacing.size() != size.size()) throw InvalidArgument("synth: spacing needs one value per extent");
        (void)Spacing(spacing);
    }
    for (std::size_t s : size) {
        if (static_cast<double>(s - 1) < 2.0 * kMarginSigmas * sigma_max) {
            throw InvalidArgument("synth: extent " + std::to_string(s) + " leaves no room for the " +
                                  std::to_string(kMarginSigmas) + "-sigma border margin at sigma " +
                                  std::to_string(sigma_max));
        }
    }
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
    SynthConfig cfg;
    try {
        if (!j.is_object()) throw InvalidArgument("synth config must be a JSON object");
        for (const auto& [key, value] : j.items()) {
            if (key == "n_samples") {
                cfg.n_samples = value.get<std::size_t>();
            } else if (key == "size") {
                cfg.size = value.get<Extents>();
            } else if (key == "n_classes") {
                cfg.n_classes = value.get<std::size_t>();
            } else if (key == "sigma_range") {
                const auto r = value.get<std::vector<double>>();
                if (r.size() != 2) throw InvalidArgument("sigma_range needs two values");
                cfg.sigma_min = r[0];
                cfg.sigma_max = r[1];
            } else if (key == "noise_std") {
                cfg.noise_std = value.get<double>();
            } else if (key == "n_distractors") {
                cfg.n_distractors = value.get<std::size_t>();
            } else if (key == "distractor_amplitude") {
                cfg.distractor_amplitude = value.get<double>();
            } else if (key == "seed") {
                cfg.seed = value.get<std::uint64_t>();
            } else if (key == "spacing") {
                cfg.spacing = value.get<std::vector<double>>();
            } else {
                throw InvalidArgument("unknown synth config key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("synth config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

nlohmann::ordered_json to_json(const SynthConfig& cfg) {
    nlohmann::ordered_json j;
    j["n_samples"] = cfg.n_samples;
    j["size"] = cfg.size;
    j["n_classes"] = cfg.n_classes;
    j["sigma_range"] = {cfg.sigma_min, cfg.sigma_max};
    j["noise_std"] = cfg.noise_std;
    j["n_distractors"] = cfg.n_distractors;
    j["distractor_amplitude"] = cfg.distractor_amplitude;
    j["seed"] = cfg.seed;
    j["spacing"] = cfg.spacing.empty() ? std::vector<double>(cfg.size.size(), 1.0) : cfg.spacing;
    return j;
}

std::string synth_id(const SynthConfig& cfg, std::size_t index) {
    const std::size_t width = std::max<std::size_t>(4, std::to_string(cfg.n_samples - 1).size());
    std::string digits = std::to_string(index);
    return "img" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

SynthSample synth_sample(const SynthConfig& cfg, std::size_t index) {
    cfg.validate();
    const std::size_t dims = cfg.size.size();
    Rng rng(cfg.seed + index);
    std::vector<std::string> names;
    for (std::size_t c = 0; c < cfg.n_classes; ++c) names.push_back(default_class_name(c));

    SynthSample s{synth_id(cfg, index), Heatmap(cfg.n_classes, cfg.size), LandmarkSet(1, cfg.n_classes, 1, dims, names),
                  {}};
    std::vector<double> center(dims);
    std::vector<double> other(dims);
    for (std::size_t c = 0; c < cfg.n_classes; ++c) {
        const double sigma = rng.uniform(cfg.sigma_min, cfg.sigma_max);
        s.sigmas.push_back(sigma);
        const double margin = kMarginSigmas * sigma;
        for (std::size_t d = 0; d < dims; ++d) {
            center[d] = rng.uniform(margin, static_cast<double>(cfg.size[d] - 1) - margin);
        }
        s.landmarks.set(0, c, center);
        auto channel = s.image.channel(c);
        add_blob(channel, cfg.size, center, sigma, 1.0);

        for (std::size_t k = 0; k < cfg.n_distractors; ++k) {
            bool placed = false;
            for (std::size_t attempt = 0; attempt < kMaxPlacementTries && !placed; ++attempt) {
                double r2 = 0.0;
                for (std::size_t d = 0; d < dims; ++d) {
                    other[d] = rng.uniform(0.0, static_cast<double>(cfg.size[d] - 1));
                    r2 += (other[d] - center[d]) * (other[d] - center[d]);
                }
                placed = std::sqrt(r2) >= kDistractorSigmas * sigma;
            }
            if (!placed) throw InvalidArgument("synth: no room for a distractor 10 sigma away from the landmark");
            add_blob(channel, cfg.size, other, sigma, cfg.distractor_amplitude);
        }
    }
    for (double& v : s.image.values()) {
        if (cfg.noise_std > 0.0) v += cfg.noise_std * rng.normal();
        v = std::clamp(v, 0.0, 1.0);
    }
    const Spacing spacing = cfg.spacing.empty() ? Spacing::unit(dims) : Spacing(cfg.spacing);
    s.image.set_spacing(spacing);
    return s;
}

SynthResult generate(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.validate();
    const std::size_t dims = cfg.size.size();
    std::vector<std::string> names;
    for (std::size_t c = 0; c < cfg.n_classes; ++c) names.push_back(default_class_name(c));

    std::filesystem::create_directories(out_dir / "images");
    std::vector<SynthSample> samples(cfg.n_samples);
    parallel_for(cfg.n_samples, [&](std::size_t n) {
        samples[n] = synth_sample(cfg, n);
        write_npy(out_dir / "images" / (samples[n].id + ".npy"), heatmap_to_tensor(samples[n].image));
    });

    SynthResult result;
    result.truth.landmarks = LandmarkSet(cfg.n_samples, cfg.n_classes, 1, dims, names);
    for (std::size_t n = 0; n < cfg.n_samples; ++n) {
        result.truth.image_ids.push_back(samples[n].id);
        for (std::size_t c = 0; c < cfg.n_classes; ++c) result.truth.landmarks.set(n, c, samples[n].landmarks.at(0, c));
    }
    write_landmarks_csv(out_dir / "truth.csv", result.truth);

    DatasetManifest& m = result.manifest;
    m.kind = DatasetKind::landmark;
    m.spatial_dims = dims;
    m.class_names = names;
    m.spacing = cfg.spacing.empty() ? Spacing::unit(dims) : Spacing(cfg.spacing);
    m.landmarks_csv = "truth.csv";
    m.base_dir = out_dir;
    for (const auto& s : samples) {
        ManifestEntry e;
        e.id = s.id;
        e.image_path = "images/" + s.id + ".npy";
        m.entries.push_back(std::move(e));
    }
    write_manifest(out_dir / "manifest.json", m);
    return result;
}

}  // namespace lmk
