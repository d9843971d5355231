#pragma once

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "nfcds/degradation.hpp"
#include "nfcds/error.hpp"
#include "nfcds/image.hpp"

namespace nfcds::io {

/// Write `content` to `path` through a temporary file and rename, so readers
/// never observe a partially written file.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    const auto tmp = path.string() + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp + " for writing");
        os.write(content.data(), static_cast<std::streamsize>(content.size()));
        os.flush();
        if (!os) throw IoError("write failed for " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot move " + tmp + " to " + path.string());
    }
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// --- NFCT raw float32 tensors ---------------------------------------------
// 16-byte header: "NFCT" | u32 H | u32 W | u32 C, then H*W*C little-endian
// float32 values in channel-interleaved row-major order.

namespace detail {
inline void put_u32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}
inline std::uint32_t get_u32(const std::string& s, std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[off + i])) << (8 * i);
    return v;
}
}  // namespace detail

inline std::string encode_nfct(const ImageTensor& img) {
    std::string s = "NFCT";
    detail::put_u32(s, static_cast<std::uint32_t>(img.height()));
    detail::put_u32(s, static_cast<std::uint32_t>(img.width()));
    detail::put_u32(s, static_cast<std::uint32_t>(img.channels()));
    s.reserve(16 + 4 * img.size());
    for (double v : img.values()) detail::put_u32(s, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    return s;
}

inline ImageTensor decode_nfct(const std::string& s, const std::string& origin = "<buffer>") {
    if (s.size() < 16 || s.compare(0, 4, "NFCT") != 0) throw IoError(origin + ": not an NFCT tensor");
    const Shape sh{detail::get_u32(s, 4), detail::get_u32(s, 8), detail::get_u32(s, 12)};
    if (sh.size() == 0 || s.size() != 16 + 4 * sh.size())
        throw IoError(origin + ": NFCT payload size does not match header " + to_string(sh));
    ImageTensor img(sh);
    for (std::size_t k = 0; k < sh.size(); ++k) img[k] = std::bit_cast<float>(detail::get_u32(s, 16 + 4 * k));
    return img;
}

// --- binary PGM (P5) / PPM (P6) -------------------------------------------
// Values map to [0, 1] by dividing by maxval; 16-bit samples are big-endian.

inline ImageTensor decode_pnm(const std::string& s, const std::string& origin = "<buffer>") {
    std::size_t pos = 0;
    const auto token = [&]() {
        for (;;) {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
            if (pos < s.size() && s[pos] == '#') {
                while (pos < s.size() && s[pos] != '\n') ++pos;
                continue;
            }
            break;
        }
        const std::size_t start = pos;
        while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        if (start == pos) throw IoError(origin + ": truncated PNM header");
        return s.substr(start, pos - start);
    };
    const auto number = [&]() {
        const auto tok = token();
        try {
            return static_cast<std::size_t>(std::stoul(tok));
        } catch (const std::exception&) {
            throw IoError(origin + ": bad PNM header field '" + tok + "'");
        }
    };
    const auto magic = token();
    if (magic != "P5" && magic != "P6") throw IoError(origin + ": only binary P5/P6 PNM files are supported");
    const std::size_t channels = magic == "P5" ? 1 : 3;
    const std::size_t w = number(), h = number(), maxval = number();
    if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) throw IoError(origin + ": invalid PNM dimensions or maxval");
    ++pos;  // single whitespace before raster
    const std::size_t bps = maxval > 255 ? 2 : 1;
    const std::size_t n = w * h * channels;
    if (s.size() < pos + n * bps) throw IoError(origin + ": truncated PNM raster");
    ImageTensor img(h, w, channels);
    for (std::size_t k = 0; k < n; ++k) {
        const auto* p = reinterpret_cast<const unsigned char*>(s.data() + pos + k * bps);
        const unsigned v = bps == 1 ? p[0] : (static_cast<unsigned>(p[0]) << 8) | p[1];
        img[k] = static_cast<double>(v) / static_cast<double>(maxval);
    }
    return img;
}

/// Values are clamped to [0, 1] and rounded to the nearest level.
inline std::string encode_pnm(const ImageTensor& img, int bit_depth = 8) {
    if (img.channels() != 1 && img.channels() != 3) throw IoError("PNM output needs 1 or 3 channels");
    if (bit_depth != 8 && bit_depth != 16) throw ConfigError("io.bit_depth must be 8 or 16");
    const unsigned maxval = bit_depth == 8 ? 255u : 65535u;
    std::string s = (img.channels() == 1 ? "P5\n" : "P6\n") + std::to_string(img.width()) + " " +
                    std::to_string(img.height()) + "\n" + std::to_string(maxval) + "\n";
    for (double v : img.values()) {
        const double c = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
        const auto q = static_cast<unsigned>(std::lround(c * maxval));
        if (bit_depth == 16) s.push_back(static_cast<char>(q >> 8));
        s.push_back(static_cast<char>(q & 0xffu));
    }
    return s;
}

enum class ImageFormat { Pnm, Nfct };

inline ImageFormat format_for(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return ImageFormat::Pnm;
    return ImageFormat::Nfct;
}

/// Reads NFCT or PNM by content; PNM values land in [0, 1].
inline ImageTensor read_image(const std::filesystem::path& path) {
    const auto s = read_file(path);
    if (s.size() >= 4 && s.compare(0, 4, "NFCT") == 0) return decode_nfct(s, path.string());
    if (s.size() >= 2 && s[0] == 'P') return decode_pnm(s, path.string());
    throw IoError(path.string() + ": unrecognized image format");
}

inline void write_image(const std::filesystem::path& path, const ImageTensor& img, int bit_depth = 8) {
    write_atomic(path, format_for(path) == ImageFormat::Pnm ? encode_pnm(img, bit_depth) : encode_nfct(img));
}

/// Kernel text file: header line "H W" then H*W whitespace-separated floats, row-major.
inline Kernel2d parse_kernel(const std::string& text, const std::string& origin = "<kernel>") {
    std::istringstream is(text);
    Kernel2d k;
    if (!(is >> k.height >> k.width) || k.height == 0 || k.width == 0)
        throw ConfigError(origin + ": kernel header must be 'H W'");
    k.values.resize(k.height * k.width);
    for (auto& v : k.values)
        if (!(is >> v)) throw ConfigError(origin + ": kernel has fewer than H*W values");
    std::string extra;
    if (is >> extra) throw ConfigError(origin + ": kernel has more than H*W values");
    return k;
}

inline Kernel2d read_kernel(const std::filesystem::path& path) { return parse_kernel(read_file(path), path.string()); }

}  // namespace nfcds::io
