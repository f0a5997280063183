#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <zlib.h>

#include "chameleon/error.hpp"

namespace chameleon {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kWhite{255, 255, 255};
inline constexpr Rgb kBlack{0, 0, 0};
inline constexpr Rgb kGreen{0, 255, 0};
inline constexpr Rgb kBlue{0, 0, 255};

/// 8-bit RGB, row-major, no padding.
class Image {
public:
    Image() = default;
    Image(int width, int height, Rgb fill = kWhite)
        : width_(width), height_(height), pixels_(static_cast<std::size_t>(width) * height * 3) {
        for (std::size_t i = 0; i < pixels_.size(); i += 3) {
            pixels_[i] = fill.r;
            pixels_[i + 1] = fill.g;
            pixels_[i + 2] = fill.b;
        }
    }

    int width() const { return width_; }
    int height() const { return height_; }
    const std::vector<std::uint8_t>& pixels() const { return pixels_; }

    Rgb at(int x, int y) const {
        const auto i = index(x, y);
        return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
    }
    void set(int x, int y, Rgb c) {
        const auto i = index(x, y);
        pixels_[i] = c.r;
        pixels_[i + 1] = c.g;
        pixels_[i + 2] = c.b;
    }
    bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t index(int x, int y) const { return (static_cast<std::size_t>(y) * width_ + x) * 3; }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> pixels_;
};

/// Nearest-neighbour resample.
inline Image scale_nearest(const Image& src, int width, int height) {
    Image out(width, height);
    for (int y = 0; y < height; ++y) {
        const int sy = static_cast<int>(static_cast<long long>(y) * src.height() / height);
        for (int x = 0; x < width; ++x) {
            const int sx = static_cast<int>(static_cast<long long>(x) * src.width() / width);
            out.set(x, y, src.at(sx, sy));
        }
    }
    return out;
}

/// Side-by-side; the shorter image is scaled up to the taller one's height.
inline Image mosaic(const Image& left, const Image& right) {
    const int h = std::max(left.height(), right.height());
    auto fit = [h](const Image& im) {
        if (im.height() == h) return im;
        const int w = static_cast<int>((static_cast<long long>(im.width()) * h + im.height() / 2) / im.height());
        return scale_nearest(im, w, h);
    };
    const Image l = fit(left);
    const Image r = fit(right);
    Image out(l.width() + r.width(), h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < l.width(); ++x) out.set(x, y, l.at(x, y));
        for (int x = 0; x < r.width(); ++x) out.set(l.width() + x, y, r.at(x, y));
    }
    return out;
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>((v >> 24) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
}

inline void put_chunk(std::string& out, const char* type, const std::string& data) {
    put_u32(out, static_cast<std::uint32_t>(data.size()));
    const std::string body = std::string(type, 4) + data;
    out += body;
    put_u32(out, static_cast<std::uint32_t>(
                     crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()))));
}

}  // namespace detail

/// Lossless PNG (8-bit RGB, filter 0, fixed zlib level so output bytes are stable).
inline std::string encode_png(const Image& img) {
    std::string raw;
    raw.reserve(static_cast<std::size_t>(img.height()) * (img.width() * 3 + 1));
    const auto& px = img.pixels();
    const std::size_t stride = static_cast<std::size_t>(img.width()) * 3;
    for (int y = 0; y < img.height(); ++y) {
        raw.push_back('\0');
        raw.append(reinterpret_cast<const char*>(px.data()) + y * stride, stride);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::string z(bound, '\0');
    if (compress2(reinterpret_cast<Bytef*>(z.data()), &bound, reinterpret_cast<const Bytef*>(raw.data()),
                  static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw Error("png: deflate failed");
    z.resize(bound);

    std::string out("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    detail::put_u32(ihdr, static_cast<std::uint32_t>(img.width()));
    detail::put_u32(ihdr, static_cast<std::uint32_t>(img.height()));
    ihdr += std::string("\x08\x02\x00\x00\x00", 5);
    detail::put_chunk(out, "IHDR", ihdr);
    detail::put_chunk(out, "IDAT", z);
    detail::put_chunk(out, "IEND", "");
    return out;
}

/// Decodes PNGs written by encode_png (8-bit RGB, filter 0 only).
inline Image decode_png(const std::string& png) {
    auto u32 = [&](std::size_t at) {
        return (std::uint32_t(std::uint8_t(png[at])) << 24) | (std::uint32_t(std::uint8_t(png[at + 1])) << 16) |
               (std::uint32_t(std::uint8_t(png[at + 2])) << 8) | std::uint32_t(std::uint8_t(png[at + 3]));
    };
    if (png.size() < 8 || png.compare(0, 8, std::string("\x89PNG\r\n\x1a\n", 8)) != 0) throw Error("png: bad signature");
    std::size_t pos = 8;
    int w = 0, h = 0;
    std::string idat;
    while (pos + 8 <= png.size()) {
        const std::uint32_t len = u32(pos);
        const std::string type = png.substr(pos + 4, 4);
        if (pos + 12 + len > png.size()) throw Error("png: truncated chunk");
        const std::string data = png.substr(pos + 8, len);
        if (type == "IHDR") {
            w = static_cast<int>(u32(pos + 8));
            h = static_cast<int>(u32(pos + 12));
            if (data[8] != 8 || data[9] != 2) throw Error("png: only 8-bit RGB supported");
        } else if (type == "IDAT") {
            idat += data;
        }
        pos += 12 + len;
    }
    const std::size_t stride = static_cast<std::size_t>(w) * 3;
    std::string raw((stride + 1) * h, '\0');
    uLongf n = static_cast<uLongf>(raw.size());
    if (uncompress(reinterpret_cast<Bytef*>(raw.data()), &n, reinterpret_cast<const Bytef*>(idat.data()),
                   static_cast<uLong>(idat.size())) != Z_OK || n != raw.size())
        throw Error("png: inflate failed");
    Image img(w, h);
    for (int y = 0; y < h; ++y) {
        if (raw[y * (stride + 1)] != 0) throw Error("png: unsupported filter");
        for (int x = 0; x < w; ++x) {
            const std::size_t i = y * (stride + 1) + 1 + x * 3;
            img.set(x, y, {std::uint8_t(raw[i]), std::uint8_t(raw[i + 1]), std::uint8_t(raw[i + 2])});
        }
    }
    return img;
}

}  // namespace chameleon
