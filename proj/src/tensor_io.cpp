#include "landmark_kit/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include <zlib.h>

#include "landmark_kit/error.hpp"

namespace lmk {

static_assert(std::endian::native == std::endian::little, "tensor I/O assumes a little-endian host");

namespace {

constexpr std::size_t kNpyAlign = 64;

std::uint16_t le16(std::span<const std::byte> b, std::size_t at) {
    return static_cast<std::uint16_t>(std::to_integer<unsigned>(b[at]) | (std::to_integer<unsigned>(b[at + 1]) << 8));
}

std::uint32_t le32(std::span<const std::byte> b, std::size_t at) {
    return static_cast<std::uint32_t>(le16(b, at)) | (static_cast<std::uint32_t>(le16(b, at + 2)) << 16);
}

std::uint64_t le64(std::span<const std::byte> b, std::size_t at) {
    return static_cast<std::uint64_t>(le32(b, at)) | (static_cast<std::uint64_t>(le32(b, at + 4)) << 32);
}

std::uint32_t be32(std::span<const std::byte> b, std::size_t at) {
    return (std::to_integer<std::uint32_t>(b[at]) << 24) | (std::to_integer<std::uint32_t>(b[at + 1]) << 16) |
           (std::to_integer<std::uint32_t>(b[at + 2]) << 8) | std::to_integer<std::uint32_t>(b[at + 3]);
}

void put_le16(std::vector<std::byte>& out, std::uint32_t v) {
    out.push_back(static_cast<std::byte>(v & 0xff));
    out.push_back(static_cast<std::byte>((v >> 8) & 0xff));
}

void put_le32(std::vector<std::byte>& out, std::uint32_t v) {
    put_le16(out, v & 0xffff);
    put_le16(out, v >> 16);
}

void put_be32(std::vector<std::byte>& out, std::uint32_t v) {
    out.push_back(static_cast<std::byte>((v >> 24) & 0xff));
    out.push_back(static_cast<std::byte>((v >> 16) & 0xff));
    out.push_back(static_cast<std::byte>((v >> 8) & 0xff));
    out.push_back(static_cast<std::byte>(v & 0xff));
}

void need(std::span<const std::byte> b, std::size_t at, std::size_t len, std::size_t base, const char* what) {
    if (at > b.size() || b.size() - at < len) {
        throw FormatError(std::string("truncated ") + what, base + std::min(at, b.size()));
    }
}

std::uint32_t crc(std::span<const std::byte> b) {
    uLong c = crc32(0L, Z_NULL, 0);
    std::size_t pos = 0;
    while (pos < b.size()) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(b.size() - pos, 1u << 30));
        c = crc32(c, reinterpret_cast<const Bytef*>(b.data() + pos), chunk);
        pos += chunk;
    }
    return static_cast<std::uint32_t>(c);
}

// Inflate with the given zlib window bits (-15 raw deflate, 15 zlib stream).
std::vector<std::byte> inflate_bytes(std::span<const std::byte> in, std::size_t expected, int window_bits,
                                     std::size_t base) {
    z_stream zs{};
    if (inflateInit2(&zs, window_bits) != Z_OK) throw FormatError("zlib initialisation failed", base);
    std::vector<std::byte> out(expected > 0 ? expected : in.size() * 4 + 64);
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<std::byte*>(in.data()));
    zs.avail_in = static_cast<uInt>(in.size());
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        if (zs.total_out == out.size()) out.resize(out.size() * 2);
        zs.next_out = reinterpret_cast<Bytef*>(out.data() + zs.total_out);
        zs.avail_out = static_cast<uInt>(out.size() - zs.total_out);
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc == Z_STREAM_END) break;
        if (rc != Z_OK && rc != Z_BUF_ERROR) {
            const auto at = zs.total_in;
            inflateEnd(&zs);
            throw FormatError("corrupt deflate stream", base + at);
        }
        if (rc == Z_BUF_ERROR && zs.avail_in == 0) {
            const auto at = zs.total_in;
            inflateEnd(&zs);
            throw FormatError("truncated deflate stream", base + at);
        }
    }
    out.resize(zs.total_out);
    inflateEnd(&zs);
    return out;
}

// --- NPY header -------------------------------------------------------------

std::string header_value(const std::string& header, const std::string& key, std::size_t base) {
    for (const char q : {'\'', '"'}) {
        const std::string needle = std::string(1, q) + key + std::string(1, q);
        auto pos = header.find(needle);
        if (pos == std::string::npos) continue;
        pos = header.find(':', pos + needle.size());
        if (pos == std::string::npos) break;
        ++pos;
        while (pos < header.size() && header[pos] == ' ') ++pos;
        if (pos >= header.size()) break;
        if (header[pos] == '(') {
            const auto end = header.find(')', pos);
            if (end == std::string::npos) break;
            return header.substr(pos, end - pos + 1);
        }
        if (header[pos] == '\'' || header[pos] == '"') {
            const auto end = header.find(header[pos], pos + 1);
            if (end == std::string::npos) break;
            return header.substr(pos + 1, end - pos - 1);
        }
        auto end = header.find_first_of(",}", pos);
        if (end == std::string::npos) break;
        while (end > pos && header[end - 1] == ' ') --end;
        return header.substr(pos, end - pos);
    }
    throw FormatError("NPY header lacks a valid '" + key + "' entry", base);
}

DType parse_descr(const std::string& descr, std::size_t base) {
    if (descr == "<f4") return DType::float32;
    if (descr == "<f8") return DType::float64;
    if (descr == "|u1" || descr == "<u1") return DType::uint8;
    if (descr == "<u2") return DType::uint16;
    throw FormatError("unsupported NPY dtype '" + descr + "' (supported: <f4 <f8 |u1 <u2)", base);
}

std::vector<std::size_t> parse_shape(const std::string& text, std::size_t base) {
    std::vector<std::size_t> shape;
    std::size_t pos = 1;
    while (pos < text.size()) {
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == ',')) ++pos;
        if (pos >= text.size() || text[pos] == ')') break;
        std::size_t used = 0;
        try {
            shape.push_back(static_cast<std::size_t>(std::stoull(text.substr(pos), &used)));
        } catch (const std::exception&) {
            throw FormatError("malformed NPY shape " + text, base);
        }
        pos += used;
        while (pos < text.size() && text[pos] == 'L') ++pos;
    }
    return shape;
}

std::string shape_text(const std::vector<std::size_t>& shape) {
    std::string s = "(";
    for (std::size_t k = 0; k < shape.size(); ++k) {
        if (k > 0) s += ", ";
        s += std::to_string(shape[k]);
    }
    if (shape.size() == 1) s += ",";
    return s + ")";
}

// --- PNG --------------------------------------------------------------------

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a);
    const int pb = std::abs(p - b);
    const int pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

void append_chunk(std::vector<std::byte>& out, const char* type, std::span<const std::byte> payload) {
    put_be32(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t start = out.size();
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::byte>(type[k]));
    out.insert(out.end(), payload.begin(), payload.end());
    put_be32(out, crc(std::span<const std::byte>(out).subspan(start)));
}

std::string lower_ext(const std::filesystem::path& p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return e;
}

}  // namespace

std::size_t dtype_size(DType t) noexcept {
    switch (t) {
        case DType::float32: return 4;
        case DType::float64: return 8;
        case DType::uint8: return 1;
        case DType::uint16: return 2;
    }
    return 0;
}

std::string dtype_descr(DType t) {
    switch (t) {
        case DType::float32: return "<f4";
        case DType::float64: return "<f8";
        case DType::uint8: return "|u1";
        case DType::uint16: return "<u2";
    }
    return "";
}

std::size_t Tensor::elements() const noexcept {
    std::size_t n = 1;
    for (std::size_t s : shape) n *= s;
    return n;
}

std::vector<double> Tensor::to_double() const {
    const std::size_t n = elements();
    std::vector<double> out(n);
    const std::byte* p = data.data();
    for (std::size_t k = 0; k < n; ++k) {
        switch (dtype) {
            case DType::float32: {
                float v;
                std::memcpy(&v, p + k * 4, 4);
                out[k] = v;
                break;
            }
            case DType::float64:
                std::memcpy(&out[k], p + k * 8, 8);
                break;
            case DType::uint8:
                out[k] = std::to_integer<unsigned>(p[k]);
                break;
            case DType::uint16: {
                std::uint16_t v;
                std::memcpy(&v, p + k * 2, 2);
                out[k] = v;
                break;
            }
        }
    }
    return out;
}

Tensor Tensor::from_double(std::vector<std::size_t> shape, std::span<const double> values, DType dtype) {
    Tensor t{dtype, std::move(shape), {}};
    if (t.elements() != values.size()) throw InvalidArgument("tensor shape does not match value count");
    t.data.resize(values.size() * dtype_size(dtype));
    std::byte* p = t.data.data();
    for (std::size_t k = 0; k < values.size(); ++k) {
        switch (dtype) {
            case DType::float32: {
                const auto v = static_cast<float>(values[k]);
                std::memcpy(p + k * 4, &v, 4);
                break;
            }
            case DType::float64:
                std::memcpy(p + k * 8, &values[k], 8);
                break;
            case DType::uint8:
                p[k] = static_cast<std::byte>(std::clamp(std::lround(values[k]), 0L, 255L));
                break;
            case DType::uint16: {
                const auto v = static_cast<std::uint16_t>(std::clamp(std::lround(values[k]), 0L, 65535L));
                std::memcpy(p + k * 2, &v, 2);
                break;
            }
        }
    }
    return t;
}

// --- NPY ---------------------------------------------------------------------

Tensor parse_npy(std::span<const std::byte> bytes, std::size_t base) {
    static constexpr char kMagic[] = "\x93NUMPY";
    need(bytes, 0, 10, base, "NPY preamble");
    for (std::size_t k = 0; k < 6; ++k) {
        if (bytes[k] != static_cast<std::byte>(kMagic[k])) throw FormatError("bad NPY magic", base + k);
    }
    const auto major = std::to_integer<unsigned>(bytes[6]);
    std::size_t header_len = 0;
    std::size_t header_start = 0;
    if (major == 1) {
        header_len = le16(bytes, 8);
        header_start = 10;
    } else if (major == 2 || major == 3) {
        need(bytes, 0, 12, base, "NPY preamble");
        header_len = le32(bytes, 8);
        header_start = 12;
    } else {
        throw FormatError("unsupported NPY format version " + std::to_string(major), base + 6);
    }
    need(bytes, header_start, header_len, base, "NPY header");
    const std::string header(reinterpret_cast<const char*>(bytes.data() + header_start), header_len);
    const std::size_t hbase = base + header_start;

    Tensor t;
    t.dtype = parse_descr(header_value(header, "descr", hbase), hbase);
    const std::string fortran = header_value(header, "fortran_order", hbase);
    if (fortran == "True") throw FormatError("Fortran-order NPY arrays are not supported", hbase);
    if (fortran != "False") throw FormatError("malformed fortran_order value '" + fortran + "'", hbase);
    t.shape = parse_shape(header_value(header, "shape", hbase), hbase);

    const std::size_t data_start = header_start + header_len;
    const std::size_t len = t.elements() * dtype_size(t.dtype);
    need(bytes, data_start, len, base, "NPY data");
    const auto first = bytes.begin() + static_cast<std::ptrdiff_t>(data_start);
    t.data.assign(first, first + static_cast<std::ptrdiff_t>(len));
    return t;
}

std::vector<std::byte> serialize_npy(const Tensor& t) {
    if (t.data.size() != t.elements() * dtype_size(t.dtype)) throw InvalidArgument("tensor data size mismatch");
    std::string header =
        "{'descr': '" + dtype_descr(t.dtype) + "', 'fortran_order': False, 'shape': " + shape_text(t.shape) + ", }";
    std::size_t preamble = 10;
    std::size_t total = preamble + header.size() + 1;
    if (total - preamble > 0xffff) preamble = 12;
    total = preamble + header.size() + 1;
    header.append((kNpyAlign - total % kNpyAlign) % kNpyAlign, ' ');
    header.push_back('\n');

    std::vector<std::byte> out;
    out.reserve(preamble + header.size() + t.data.size());
    for (char ch : std::string("\x93NUMPY")) out.push_back(static_cast<std::byte>(ch));
    out.push_back(static_cast<std::byte>(preamble == 10 ? 1 : 2));
    out.push_back(std::byte{0});
    if (preamble == 10) {
        put_le16(out, static_cast<std::uint32_t>(header.size()));
    } else {
        put_le32(out, static_cast<std::uint32_t>(header.size()));
    }
    for (char ch : header) out.push_back(static_cast<std::byte>(ch));
    out.insert(out.end(), t.data.begin(), t.data.end());
    return out;
}

Tensor read_npy(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return parse_npy(bytes);
}

void write_npy(const std::filesystem::path& path, const Tensor& t) { write_file(path, serialize_npy(t)); }

// --- NPZ ---------------------------------------------------------------------

NamedTensors parse_npz(std::span<const std::byte> bytes) {
    constexpr std::uint32_t kEocd = 0x06054b50;
    constexpr std::uint32_t kCentral = 0x02014b50;
    constexpr std::uint32_t kLocal = 0x04034b50;
    if (bytes.size() < 22) throw FormatError("truncated zip archive", bytes.size());

    std::size_t eocd = std::string::npos;
    const std::size_t lowest = bytes.size() > 22 + 0xffff ? bytes.size() - 22 - 0xffff : 0;
    for (std::size_t at = bytes.size() - 22 + 1; at-- > lowest;) {
        if (le32(bytes, at) == kEocd) {
            eocd = at;
            break;
        }
    }
    if (eocd == std::string::npos) throw FormatError("zip end-of-central-directory record not found", bytes.size());
    const std::size_t count = le16(bytes, eocd + 10);
    std::size_t pos = le32(bytes, eocd + 16);

    NamedTensors out;
    for (std::size_t e = 0; e < count; ++e) {
        need(bytes, pos, 46, 0, "zip central directory");
        if (le32(bytes, pos) != kCentral) throw FormatError("bad zip central directory signature", pos);
        const unsigned method = le16(bytes, pos + 10);
        const std::uint32_t expect_crc = le32(bytes, pos + 16);
        std::uint64_t csize = le32(bytes, pos + 20);
        std::uint64_t usize = le32(bytes, pos + 24);
        const std::size_t name_len = le16(bytes, pos + 28);
        const std::size_t extra_len = le16(bytes, pos + 30);
        const std::size_t comment_len = le16(bytes, pos + 32);
        std::uint64_t local = le32(bytes, pos + 42);
        need(bytes, pos + 46, name_len + extra_len + comment_len, 0, "zip central directory");
        std::string name(reinterpret_cast<const char*>(bytes.data() + pos + 46), name_len);

        // Zip64 extended information replaces saturated 32-bit fields in order.
        std::size_t x = pos + 46 + name_len;
        const std::size_t x_end = x + extra_len;
        while (x + 4 <= x_end) {
            const unsigned id = le16(bytes, x);
            const std::size_t len = le16(bytes, x + 2);
            std::size_t f = x + 4;
            if (id == 0x0001) {
                if (usize == 0xffffffffu && f + 8 <= x + 4 + len) { usize = le64(bytes, f); f += 8; }
                if (csize == 0xffffffffu && f + 8 <= x + 4 + len) { csize = le64(bytes, f); f += 8; }
                if (local == 0xffffffffu && f + 8 <= x + 4 + len) { local = le64(bytes, f); }
            }
            x += 4 + len;
        }
        pos = x_end + comment_len;

        need(bytes, local, 30, 0, "zip local header");
        if (le32(bytes, local) != kLocal) throw FormatError("bad zip local header signature", local);
        const std::size_t data_at = local + 30 + le16(bytes, local + 26) + le16(bytes, local + 28);
        need(bytes, data_at, csize, 0, "zip member data");
        const auto raw = bytes.subspan(data_at, csize);

        std::vector<std::byte> member;
        if (method == 0) {
            member.assign(raw.begin(), raw.end());
        } else if (method == 8) {
            member = inflate_bytes(raw, usize, -15, data_at);
        } else {
            throw FormatError("unsupported zip compression method " + std::to_string(method), pos);
        }
        if (member.size() != usize) throw FormatError("zip member size mismatch for " + name, data_at);
        if (crc(member) != expect_crc) throw FormatError("zip member CRC mismatch for " + name, data_at);

        if (name.size() > 4 && name.compare(name.size() - 4, 4, ".npy") == 0) name.resize(name.size() - 4);
        out.emplace_back(std::move(name), parse_npy(member, data_at));
    }
    return out;
}

NamedTensors read_npz(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return parse_npz(bytes);
}

void write_npz(const std::filesystem::path& path, const NamedTensors& arrays) {
    std::vector<std::byte> out;
    std::vector<std::byte> central;
    for (const auto& [name, tensor] : arrays) {
        const std::string fname = name + ".npy";
        const auto member = serialize_npy(tensor);
        if (member.size() >= 0xffffffffu || out.size() >= 0xffffffffu) {
            throw InvalidArgument("NPZ member too large for a non-zip64 archive");
        }
        const std::uint32_t c = crc(member);
        const auto offset = static_cast<std::uint32_t>(out.size());
        const auto size = static_cast<std::uint32_t>(member.size());

        put_le32(out, 0x04034b50);
        put_le16(out, 20);  // version needed
        put_le16(out, 0);   // flags
        put_le16(out, 0);   // stored
        put_le16(out, 0);   // mod time
        put_le16(out, 0x21);  // mod date: 1980-01-01
        put_le32(out, c);
        put_le32(out, size);
        put_le32(out, size);
        put_le16(out, static_cast<std::uint32_t>(fname.size()));
        put_le16(out, 0);
        for (char ch : fname) out.push_back(static_cast<std::byte>(ch));
        out.insert(out.end(), member.begin(), member.end());

        put_le32(central, 0x02014b50);
        put_le16(central, 20);  // version made by
        put_le16(central, 20);
        put_le16(central, 0);
        put_le16(central, 0);
        put_le16(central, 0);
        put_le16(central, 0x21);
        put_le32(central, c);
        put_le32(central, size);
        put_le32(central, size);
        put_le16(central, static_cast<std::uint32_t>(fname.size()));
        put_le16(central, 0);  // extra
        put_le16(central, 0);  // comment
        put_le16(central, 0);  // disk
        put_le16(central, 0);  // internal attrs
        put_le32(central, 0);  // external attrs
        put_le32(central, offset);
        for (char ch : fname) central.push_back(static_cast<std::byte>(ch));
    }
    const auto cd_offset = static_cast<std::uint32_t>(out.size());
    out.insert(out.end(), central.begin(), central.end());
    put_le32(out, 0x06054b50);
    put_le16(out, 0);
    put_le16(out, 0);
    put_le16(out, static_cast<std::uint32_t>(arrays.size()));
    put_le16(out, static_cast<std::uint32_t>(arrays.size()));
    put_le32(out, static_cast<std::uint32_t>(central.size()));
    put_le32(out, cd_offset);
    put_le16(out, 0);
    write_file(path, out);
}

// --- PNG ---------------------------------------------------------------------

Tensor parse_png(std::span<const std::byte> bytes) {
    need(bytes, 0, 8, 0, "PNG signature");
    for (std::size_t k = 0; k < 8; ++k) {
        if (bytes[k] != static_cast<std::byte>(kPngSignature[k])) throw FormatError("bad PNG signature", k);
    }
    std::size_t pos = 8;
    std::uint32_t width = 0, height = 0;
    unsigned depth = 0;
    bool have_header = false;
    std::vector<std::byte> idat;
    std::size_t idat_at = 0;
    for (;;) {
        need(bytes, pos, 12, 0, "PNG chunk");
        const std::uint32_t len = be32(bytes, pos);
        const std::string type(reinterpret_cast<const char*>(bytes.data() + pos + 4), 4);
        need(bytes, pos + 8, static_cast<std::size_t>(len) + 4, 0, "PNG chunk");
        const auto body = bytes.subspan(pos + 8, len);
        if (crc(bytes.subspan(pos + 4, static_cast<std::size_t>(len) + 4)) != be32(bytes, pos + 8 + len)) {
            throw FormatError("PNG chunk CRC mismatch in " + type, pos);
        }
        if (type == "IHDR") {
            if (len != 13) throw FormatError("bad IHDR length", pos);
            width = be32(body, 0);
            height = be32(body, 4);
            depth = std::to_integer<unsigned>(body[8]);
            const auto color = std::to_integer<unsigned>(body[9]);
            const auto interlace = std::to_integer<unsigned>(body[12]);
            if (color != 0) throw FormatError("only grayscale PNG is supported (colour type " + std::to_string(color) + ")", pos + 17);
            if (depth != 8 && depth != 16) throw FormatError("only 8- and 16-bit PNG is supported", pos + 16);
            if (interlace != 0) throw FormatError("interlaced PNG is not supported", pos + 20);
            if (width == 0 || height == 0) throw FormatError("PNG has zero extent", pos + 8);
            have_header = true;
        } else if (type == "IDAT") {
            if (idat.empty()) idat_at = pos + 8;
            idat.insert(idat.end(), body.begin(), body.end());
        } else if (type == "IEND") {
            break;
        }
        pos += 12 + len;
    }
    if (!have_header) throw FormatError("PNG lacks IHDR", 8);

    const std::size_t bpp = depth / 8;
    const std::size_t stride = static_cast<std::size_t>(width) * bpp;
    const auto raw = inflate_bytes(idat, (stride + 1) * height, 15, idat_at);
    if (raw.size() != (stride + 1) * height) throw FormatError("PNG image data has wrong size", idat_at);

    std::vector<std::uint8_t> img(stride * height);
    for (std::size_t r = 0; r < height; ++r) {
        const auto filter = std::to_integer<unsigned>(raw[r * (stride + 1)]);
        const std::byte* src = raw.data() + r * (stride + 1) + 1;
        std::uint8_t* dst = img.data() + r * stride;
        const std::uint8_t* up = r > 0 ? dst - stride : nullptr;
        for (std::size_t k = 0; k < stride; ++k) {
            const int x = std::to_integer<int>(src[k]);
            const int a = k >= bpp ? dst[k - bpp] : 0;
            const int b = up ? up[k] : 0;
            const int c = (up && k >= bpp) ? up[k - bpp] : 0;
            int v = 0;
            switch (filter) {
                case 0: v = x; break;
                case 1: v = x + a; break;
                case 2: v = x + b; break;
                case 3: v = x + (a + b) / 2; break;
                case 4: v = x + paeth(a, b, c); break;
                default: throw FormatError("unknown PNG filter type " + std::to_string(filter), idat_at);
            }
            dst[k] = static_cast<std::uint8_t>(v & 0xff);
        }
    }

    Tensor t{depth == 8 ? DType::uint8 : DType::uint16, {height, width}, {}};
    t.data.resize(img.size());
    if (depth == 8) {
        std::memcpy(t.data.data(), img.data(), img.size());
    } else {
        for (std::size_t k = 0; k < img.size(); k += 2) {
            t.data[k] = static_cast<std::byte>(img[k + 1]);
            t.data[k + 1] = static_cast<std::byte>(img[k]);
        }
    }
    return t;
}

Tensor read_png(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return parse_png(bytes);
}

void write_png(const std::filesystem::path& path, const Tensor& t) {
    if (t.shape.size() != 2) throw InvalidArgument("PNG output needs a 2-D tensor");
    if (t.dtype != DType::uint8 && t.dtype != DType::uint16) throw InvalidArgument("PNG output needs uint8 or uint16");
    const std::size_t height = t.shape[0];
    const std::size_t width = t.shape[1];
    const std::size_t bpp = dtype_size(t.dtype);
    const std::size_t stride = width * bpp;

    std::vector<std::byte> raw;
    raw.reserve((stride + 1) * height);
    for (std::size_t r = 0; r < height; ++r) {
        raw.push_back(std::byte{0});
        const std::byte* row = t.data.data() + r * stride;
        for (std::size_t k = 0; k < stride; k += bpp) {
            if (bpp == 1) {
                raw.push_back(row[k]);
            } else {
                raw.push_back(row[k + 1]);  // PNG samples are big-endian
                raw.push_back(row[k]);
            }
        }
    }
    uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::byte> z(zlen);
    if (compress2(reinterpret_cast<Bytef*>(z.data()), &zlen, reinterpret_cast<const Bytef*>(raw.data()),
                  static_cast<uLong>(raw.size()), Z_BEST_COMPRESSION) != Z_OK) {
        throw IoError("PNG compression failed");
    }
    z.resize(zlen);

    std::vector<std::byte> out;
    for (std::uint8_t b : kPngSignature) out.push_back(static_cast<std::byte>(b));
    std::vector<std::byte> ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(width));
    put_be32(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(static_cast<std::byte>(bpp * 8));
    ihdr.push_back(std::byte{0});  // grayscale
    ihdr.push_back(std::byte{0});
    ihdr.push_back(std::byte{0});
    ihdr.push_back(std::byte{0});
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", z);
    append_chunk(out, "IEND", {});
    write_file(path, out);
}

// --- helpers -------------------------------------------------------------------

Tensor read_tensor(const std::filesystem::path& path) {
    const std::string ext = lower_ext(path);
    if (ext == ".npy") return read_npy(path);
    if (ext == ".png") return read_png(path);
    if (ext == ".npz") {
        auto arrays = read_npz(path);
        if (arrays.empty()) throw FormatError("empty NPZ archive " + path.string(), 0);
        return std::move(arrays.front().second);
    }
    throw InvalidArgument("unsupported tensor file type '" + ext + "' (use .npy, .npz or .png)");
}

Heatmap tensor_to_heatmap(const Tensor& t, std::size_t spatial_dims, std::optional<Spacing> spacing) {
    std::size_t channels = 1;
    Extents extents;
    if (t.shape.size() == spatial_dims) {
        extents = t.shape;
    } else if (t.shape.size() == spatial_dims + 1) {
        channels = t.shape[0];
        extents.assign(t.shape.begin() + 1, t.shape.end());
    } else {
        throw InvalidArgument("tensor of rank " + std::to_string(t.shape.size()) + " cannot hold " +
                              std::to_string(spatial_dims) + "-D heatmaps");
    }
    return Heatmap(channels, std::move(extents), t.to_double(), std::move(spacing));
}

Tensor heatmap_to_tensor(const Heatmap& h, DType dtype) {
    std::vector<std::size_t> shape{h.channels()};
    shape.insert(shape.end(), h.extents().begin(), h.extents().end());
    return Tensor::from_double(std::move(shape), h.values(), dtype);
}

std::vector<std::byte> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    std::vector<std::byte> bytes(size);
    if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size))) {
        throw IoError("cannot read " + path.string());
    }
    return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace lmk
