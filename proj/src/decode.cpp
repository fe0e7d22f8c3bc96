#include "landmark_kit/decode.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "landmark_kit/error.hpp"

namespace lmk {
namespace {

void check_dims(const Heatmap& h) {
    if (h.dims() != 2 && h.dims() != 3) throw InvalidArgument("decode expects a 2-D or 3-D heatmap");
    if (h.channels() == 0) throw InvalidArgument("decode expects at least one channel");
}

// Lexicographically smallest index of the maximum. Row-major order makes that
// the first occurrence.
std::size_t argmax_index(std::span<const double> values, bool* tie) {
    std::size_t best = 0;
    bool tied = false;
    for (std::size_t k = 1; k < values.size(); ++k) {
        if (values[k] > values[best]) {
            best = k;
            tied = false;
        } else if (values[k] == values[best]) {
            tied = true;
        }
    }
    if (tie) *tie = tied;
    return best;
}

Extents resolve_window(const Extents& window, const Extents& extents) {
    Extents w = window.empty() ? Extents(extents.size(), 3) : window;
    if (w.size() == 1 && extents.size() > 1) w.assign(extents.size(), w[0]);
    if (w.size() != extents.size()) throw InvalidArgument("window dimension does not match heatmap");
    for (std::size_t d = 0; d < w.size(); ++d) {
        // A window at least as large as the grid covers the whole dimension.
        if (w[d] >= extents[d]) {
            w[d] = extents[d];
            continue;
        }
        if (w[d] < 1 || w[d] % 2 == 0) throw InvalidArgument("window extents must be odd and >= 1");
    }
    return w;
}

void to_units(std::span<double> point, const Extents& extents, Units units) {
    if (units == Units::pixels) return;
    for (std::size_t d = 0; d < point.size(); ++d) point[d] /= static_cast<double>(extents[d]);
}

// Weighted mean in pixel coordinates over the box [lo, hi).
std::vector<double> box_mean(std::span<const double> channel, const Extents& extents, std::span<const std::size_t> lo,
                             std::span<const std::size_t> hi, const Activation& act, long channel_index) {
    const std::size_t dims = extents.size();
    std::vector<double> values;
    std::vector<std::size_t> coords;
    grid::for_each_in_box(extents, lo, hi, [&](std::size_t flat, std::span<const std::size_t> idx) {
        values.push_back(channel[flat]);
        coords.insert(coords.end(), idx.begin(), idx.end());
    });
    std::vector<double> p;
    try {
        p = activate(values, act);
    } catch (const DegenerateInputError& e) {
        throw DegenerateInputError(std::string(e.what()) + " in channel " + std::to_string(channel_index),
                                   channel_index);
    }
    std::vector<double> mean(dims, 0.0);
    for (std::size_t k = 0; k < p.size(); ++k) {
        for (std::size_t d = 0; d < dims; ++d) mean[d] += static_cast<double>(coords[k * dims + d]) * p[k];
    }
    return mean;
}

std::vector<double> window_mean(std::span<const double> channel, const Extents& extents,
                                std::span<const std::size_t> center, const Extents& window, const Activation& act,
                                long channel_index) {
    const std::size_t dims = extents.size();
    std::vector<std::size_t> lo(dims), hi(dims);
    for (std::size_t d = 0; d < dims; ++d) {
        // Shift rather than clip, so the window keeps its size near borders.
        const std::size_t half = window[d] / 2;
        lo[d] = std::min(center[d] >= half ? center[d] - half : 0, extents[d] - window[d]);
        hi[d] = lo[d] + window[d];
    }
    return box_mean(channel, extents, lo, hi, act, channel_index);
}

LandmarkSet make_output(const Heatmap& h, std::size_t instances) {
    return LandmarkSet(1, h.channels(), instances, h.dims());
}

}  // namespace

void Activation::validate() const {
    if (kind == ActivationKind::softmax && !(std::isfinite(temperature) && temperature > 0.0)) {
        throw InvalidArgument("softmax temperature must be finite and > 0");
    }
}

std::vector<double> activate(std::span<const double> values, const Activation& act) {
    act.validate();
    if (values.empty()) throw InvalidArgument("activation of an empty grid");
    std::vector<double> out(values.size());
    double total = 0.0;
    switch (act.kind) {
        case ActivationKind::identity_normalize:
            for (std::size_t k = 0; k < values.size(); ++k) {
                if (values[k] < 0.0) throw DegenerateInputError("identity_normalize: negative heatmap value");
                out[k] = values[k];
                total += out[k];
            }
            if (!(total > 0.0)) throw DegenerateInputError("identity_normalize: heatmap sums to zero");
            break;
        case ActivationKind::relu_normalize:
            for (std::size_t k = 0; k < values.size(); ++k) {
                out[k] = std::max(values[k], 0.0);
                total += out[k];
            }
            if (!(total > 0.0)) throw DegenerateInputError("relu_normalize: no positive heatmap value");
            break;
        case ActivationKind::softmax: {
            const double peak = *std::max_element(values.begin(), values.end());
            for (std::size_t k = 0; k < values.size(); ++k) {
                out[k] = std::exp((values[k] - peak) / act.temperature);
                total += out[k];
            }
            break;
        }
    }
    for (double& v : out) v /= total;
    return out;
}

LandmarkSet decode_argmax(const Heatmap& h, std::vector<bool>* ties) {
    check_dims(h);
    LandmarkSet out = make_output(h, 1);
    if (ties) ties->assign(h.channels(), false);
    std::vector<std::size_t> idx(h.dims());
    std::vector<double> p(h.dims());
    for (std::size_t c = 0; c < h.channels(); ++c) {
        bool tie = false;
        grid::unravel(argmax_index(h.channel(c), &tie), h.extents(), idx);
        for (std::size_t d = 0; d < p.size(); ++d) p[d] = static_cast<double>(idx[d]);
        out.set(0, c, p);
        if (ties) (*ties)[c] = tie;
    }
    return out;
}

LandmarkSet decode_weighted_mean(const Heatmap& h, const Activation& act, Units units) {
    check_dims(h);
    LandmarkSet out = make_output(h, 1);
    const std::vector<std::size_t> lo(h.dims(), 0);
    for (std::size_t c = 0; c < h.channels(); ++c) {
        auto mean = box_mean(h.channel(c), h.extents(), lo, h.extents(), act, static_cast<long>(c));
        to_units(mean, h.extents(), units);
        out.set(0, c, mean);
    }
    return out;
}

LandmarkSet decode_local_weighted_mean(const Heatmap& h, const Activation& act, const Extents& window, Units units) {
    check_dims(h);
    const Extents w = resolve_window(window, h.extents());
    LandmarkSet out = make_output(h, 1);
    std::vector<std::size_t> center(h.dims());
    for (std::size_t c = 0; c < h.channels(); ++c) {
        const auto channel = h.channel(c);
        grid::unravel(argmax_index(channel, nullptr), h.extents(), center);
        auto mean = window_mean(channel, h.extents(), center, w, act, static_cast<long>(c));
        to_units(mean, h.extents(), units);
        out.set(0, c, mean);
    }
    return out;
}

LandmarkSet decode_multi_instance(const Heatmap& h, std::size_t k, double min_separation, const DecodeConfig& cfg) {
    check_dims(h);
    if (k < 1) throw InvalidArgument("decode_multi_instance needs k >= 1");
    if (!(min_separation >= 0.0)) throw InvalidArgument("min_separation must be >= 0");
    const Extents& ext = h.extents();
    const std::size_t dims = h.dims();
    const Extents w = cfg.method == DecodeMethod::argmax ? Extents(dims, 1) : resolve_window(cfg.window, ext);
    LandmarkSet out = make_output(h, k);
    std::vector<std::size_t> idx(dims), nb_lo(dims), nb_hi(dims);
    std::vector<std::size_t> accepted_idx;

    for (std::size_t c = 0; c < h.channels(); ++c) {
        const auto values = h.channel(c);
        const double floor_value = *std::min_element(values.begin(), values.end());

        std::vector<std::size_t> candidates;
        for (std::size_t p = 0; p < values.size(); ++p) {
            if (!(values[p] > floor_value)) continue;
            grid::unravel(p, ext, idx);
            for (std::size_t d = 0; d < dims; ++d) {
                nb_lo[d] = idx[d] > 0 ? idx[d] - 1 : 0;
                nb_hi[d] = std::min(ext[d], idx[d] + 2);
            }
            bool is_peak = true;
            grid::for_each_in_box(ext, nb_lo, nb_hi, [&](std::size_t q, std::span<const std::size_t>) {
                if (values[q] > values[p]) is_peak = false;
            });
            if (is_peak) candidates.push_back(p);
        }
        std::stable_sort(candidates.begin(), candidates.end(),
                         [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });

        accepted_idx.clear();
        std::size_t found = 0;
        for (std::size_t p : candidates) {
            if (found == k) break;
            grid::unravel(p, ext, idx);
            bool suppressed = false;
            for (std::size_t a = 0; a < found && !suppressed; ++a) {
                double dist2 = 0.0;
                for (std::size_t d = 0; d < dims; ++d) {
                    const double diff = static_cast<double>(idx[d]) - static_cast<double>(accepted_idx[a * dims + d]);
                    dist2 += diff * diff;
                }
                suppressed = dist2 <= min_separation * min_separation;
            }
            if (suppressed) continue;
            accepted_idx.insert(accepted_idx.end(), idx.begin(), idx.end());

            std::vector<double> point(dims);
            if (cfg.method == DecodeMethod::argmax) {
                for (std::size_t d = 0; d < dims; ++d) point[d] = static_cast<double>(idx[d]);
            } else {
                point = window_mean(values, ext, idx, w, cfg.activation, static_cast<long>(c));
            }
            to_units(point, ext, cfg.units);
            out.set(0, c, found, point);
            ++found;
        }
    }
    return out;
}

LandmarkSet decode(const Heatmap& h, const DecodeConfig& cfg) {
    switch (cfg.method) {
        case DecodeMethod::argmax: {
            LandmarkSet lms = decode_argmax(h);
            if (cfg.units == Units::normalized) {
                LandmarkSet out = lms;
                std::vector<double> p(lms.dims());
                for (std::size_t c = 0; c < lms.classes(); ++c) {
                    const auto src = lms.at(0, c);
                    std::copy(src.begin(), src.end(), p.begin());
                    to_units(p, h.extents(), cfg.units);
                    out.set(0, c, p);
                }
                return out;
            }
            return lms;
        }
        case DecodeMethod::weighted_mean:
            return decode_weighted_mean(h, cfg.activation, cfg.units);
        case DecodeMethod::local_weighted_mean:
            return decode_local_weighted_mean(h, cfg.activation, cfg.window, cfg.units);
    }
    throw InvalidArgument("unknown decode method");
}

std::vector<double> weighted_mean_jacobian(std::span<const double> channel, const Extents& extents,
                                           const Activation& act) {
    const std::size_t dims = extents.size();
    const std::size_t n = grid::checked_size(extents);
    if (channel.size() != n) throw InvalidArgument("channel size does not match extents");
    const auto p = activate(channel, act);

    std::vector<double> coords(n * dims);
    grid::for_each(extents, [&](std::size_t flat, std::span<const std::size_t> idx) {
        for (std::size_t d = 0; d < dims; ++d) coords[flat * dims + d] = static_cast<double>(idx[d]);
    });
    std::vector<double> mean(dims, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t d = 0; d < dims; ++d) mean[d] += coords[k * dims + d] * p[k];
    }

    // With weights p = g(h) / sum g(h): dy_d/dh_j = g'(h_j) / sum g * (x_dj - y_d).
    // softmax: g'/sum g = p_j / T; identity: 1 / sum h; relu: 1 / sum h+ where h_j > 0.
    double total = 0.0;
    if (act.kind != ActivationKind::softmax) {
        for (double v : channel) total += act.kind == ActivationKind::relu_normalize ? std::max(v, 0.0) : v;
    }
    std::vector<double> jac(dims * n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        double scale = 0.0;
        switch (act.kind) {
            case ActivationKind::softmax:
                scale = p[k] / act.temperature;
                break;
            case ActivationKind::identity_normalize:
                scale = 1.0 / total;
                break;
            case ActivationKind::relu_normalize:
                scale = channel[k] > 0.0 ? 1.0 / total : 0.0;
                break;
        }
        for (std::size_t d = 0; d < dims; ++d) jac[d * n + k] = scale * (coords[k * dims + d] - mean[d]);
    }
    return jac;
}

}  // namespace lmk
