#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "landmark_kit/heatmap.hpp"
#include "landmark_kit/landmarks.hpp"

namespace lmk {

enum class ActivationKind { identity_normalize, relu_normalize, softmax };

/// Maps raw heatmap values to a probability vector over the grid.
struct Activation {
    ActivationKind kind = ActivationKind::softmax;
    /// Softmax only: weights are exp((h - max h) / temperature).
    double temperature = 1.0;

    static Activation identity() { return {ActivationKind::identity_normalize, 1.0}; }
    static Activation relu() { return {ActivationKind::relu_normalize, 1.0}; }
    static Activation softmax(double temperature = 1.0) { return {ActivationKind::softmax, temperature}; }

    void validate() const;
};

enum class DecodeMethod { argmax, weighted_mean, local_weighted_mean };

/// `pixels` gives coordinates in pixel units; `normalized` divides each
/// coordinate by the grid extent of its dimension.
enum class Units { pixels, normalized };

struct DecodeConfig {
    DecodeMethod method = DecodeMethod::local_weighted_mean;
    Activation activation;
    /// Odd window extent per dimension for local decoding (or >= the grid
    /// extent for the whole dimension); empty means 3.
    Extents window;
    Units units = Units::pixels;
};

/// Probability vector for `values`. Throws DegenerateInputError when
/// identity_normalize sees a negative value or a zero sum, or when
/// relu_normalize sees no positive value.
std::vector<double> activate(std::span<const double> values, const Activation& act);

/// Integer position of each channel's maximum; ties go to the lexicographically
/// smallest index. `ties`, when given, receives one flag per channel that is set
/// when the maximum is not unique.
LandmarkSet decode_argmax(const Heatmap& h, std::vector<bool>* ties = nullptr);

/// Weighted spatial mean of act(h) over the whole grid.
LandmarkSet decode_weighted_mean(const Heatmap& h, const Activation& act, Units units = Units::pixels);

/// Weighted spatial mean of act(h) over a window centred at the argmax. Near
/// a border the window is shifted to stay inside the grid, so it always holds
/// the requested number of pixels; a window extent at least as large as the
/// grid covers that whole dimension. Result is in global coordinates.
LandmarkSet decode_local_weighted_mean(const Heatmap& h, const Activation& act, const Extents& window,
                                       Units units = Units::pixels);

/// Up to `k` instances per channel: local maxima above the channel minimum,
/// taken greedily by value with every accepted peak suppressing candidates
/// within `min_separation` pixels, then refined (argmax keeps the pixel, the
/// mean methods use the local window of `cfg`). Missing peaks are sentinels.
LandmarkSet decode_multi_instance(const Heatmap& h, std::size_t k, double min_separation, const DecodeConfig& cfg);

/// Dispatch on `cfg.method`, one instance per channel.
LandmarkSet decode(const Heatmap& h, const DecodeConfig& cfg);

/// d(weighted mean in pixels)/d(heatmap value) for one channel, shape
/// (dims, pixels). For relu_normalize the derivative at exactly zero is taken
/// as zero.
std::vector<double> weighted_mean_jacobian(std::span<const double> channel, const Extents& extents,
                                           const Activation& act);

}  // namespace lmk
