#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "landmark_kit/dataset.hpp"
#include "landmark_kit/heatmap.hpp"
#include "landmark_kit/landmark_csv.hpp"

namespace lmk {

struct SynthConfig {
    std::size_t n_samples = 10;
    /// 2 or 3 spatial extents, each >= 16.
    Extents size{64, 64};
    std::size_t n_classes = 3;
    /// Blob sigma drawn uniformly from [sigma_min, sigma_max] per landmark.
    double sigma_min = 2.0;
    double sigma_max = 3.0;
    double noise_std = 0.0;
    std::size_t n_distractors = 0;
    double distractor_amplitude = 0.4;
    std::uint64_t seed = 0;
    /// Millimetres per pixel; empty means 1 for every dimension.
    std::vector<double> spacing;

    /// Throws InvalidArgument, including when the 6-sigma border margin
    /// leaves no room for a landmark.
    void validate() const;
};

SynthConfig synth_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const SynthConfig& cfg);

struct SynthSample {
    std::string id;
    /// One channel per class, values in [0, 1].
    Heatmap image;
    /// One-sample set with the true blob centres.
    LandmarkSet landmarks;
    /// Blob sigma per class.
    std::vector<double> sigmas;
};

/// Sample `index`, drawn from a generator seeded with seed + index. Each class
/// channel holds a unit-peak isotropic Gaussian at a uniform sub-pixel location
/// at least 6 sigma from every border, plus `n_distractors` blobs of amplitude
/// `distractor_amplitude` centred at least 10 sigma from the landmark, plus
/// Gaussian noise, clipped to [0, 1].
SynthSample synth_sample(const SynthConfig& cfg, std::size_t index);

/// Identifier of sample `index`, e.g. "img0007".
std::string synth_id(const SynthConfig& cfg, std::size_t index);

struct SynthResult {
    DatasetManifest manifest;
    LandmarkTable truth;
};

/// Write images/<id>.npy (float64, channels first), truth.csv and
/// manifest.json under `out_dir`. Output is byte-identical for a fixed config.
SynthResult generate(const SynthConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace lmk
