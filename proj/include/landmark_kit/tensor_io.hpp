#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "landmark_kit/heatmap.hpp"

namespace lmk {

enum class DType { float32, float64, uint8, uint16 };

std::size_t dtype_size(DType t) noexcept;
/// NumPy descr string, e.g. "<f8".
std::string dtype_descr(DType t);

/// Dense little-endian C-order array as stored on disk.
struct Tensor {
    DType dtype = DType::float64;
    std::vector<std::size_t> shape;
    std::vector<std::byte> data;

    std::size_t elements() const noexcept;
    std::vector<double> to_double() const;
    /// float64 tensor; float32 rounds, integer types round and clamp to range.
    static Tensor from_double(std::vector<std::size_t> shape, std::span<const double> values,
                              DType dtype = DType::float64);

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// NPY format 1.0 / 2.0 / 3.0, C order, dtypes <f4 <f8 |u1 <u2.
Tensor parse_npy(std::span<const std::byte> bytes, std::size_t base_offset = 0);
std::vector<std::byte> serialize_npy(const Tensor& t);
Tensor read_npy(const std::filesystem::path& path);
void write_npy(const std::filesystem::path& path, const Tensor& t);

/// Zip archive of NPY members (stored or deflated). Names drop the ".npy"
/// suffix; order follows the central directory.
NamedTensors read_npz(const std::filesystem::path& path);
NamedTensors parse_npz(std::span<const std::byte> bytes);
/// Writes stored (uncompressed) members named "<name>.npy".
void write_npz(const std::filesystem::path& path, const NamedTensors& arrays);

/// 8- or 16-bit grayscale, non-interlaced PNG as a (rows, cols) uint8/uint16 tensor.
Tensor read_png(const std::filesystem::path& path);
Tensor parse_png(std::span<const std::byte> bytes);
void write_png(const std::filesystem::path& path, const Tensor& t);

/// Dispatch on extension: .npy, .png, or .npz (first member).
Tensor read_tensor(const std::filesystem::path& path);

/// Interpret a tensor as a heatmap/image with `spatial_dims` trailing spatial
/// axes: rank == spatial_dims gives one channel, rank == spatial_dims + 1 is
/// channels-first.
Heatmap tensor_to_heatmap(const Tensor& t, std::size_t spatial_dims, std::optional<Spacing> spacing = std::nullopt);
Tensor heatmap_to_tensor(const Heatmap& h, DType dtype = DType::float64);

std::vector<std::byte> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes);

}  // namespace lmk
