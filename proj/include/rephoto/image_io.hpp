#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <png.h>

#include "rephoto/error.hpp"
#include "rephoto/file_util.hpp"
#include "rephoto/image.hpp"

namespace rephoto {

namespace detail {

struct PngImage {
    png_image image{};
    PngImage()
    {
        image.version = PNG_IMAGE_VERSION;
    }
    ~PngImage() { png_image_free(&image); }
    PngImage(PngImage const&) = delete;
    PngImage& operator=(PngImage const&) = delete;
};

inline std::vector<std::uint8_t> read_png_bytes(std::filesystem::path const& path,
                                                png_uint_32 format, int& width,
                                                int& height)
{
    std::string const name = path.string();
    std::ifstream probe(path, std::ios::binary);
    if (!probe)
        throw IoError("cannot open image: " + name);
    unsigned char sig[8] = {};
    probe.read(reinterpret_cast<char*>(sig), sizeof(sig));
    if (probe.gcount() != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw ValidationError("unsupported image format (PNG required): " + name);
    probe.close();

    PngImage png;
    if (!png_image_begin_read_from_file(&png.image, name.c_str()))
        throw IoError("failed to read PNG " + name + ": " + png.image.message);
    if (PNG_IMAGE_SAMPLE_COMPONENT_SIZE(png.image.format) != 1)
        throw ValidationError("only 8-bit PNG is supported: " + name);
    png.image.format = format;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(png.image));
    if (!png_image_finish_read(&png.image, nullptr, buffer.data(), 0, nullptr))
        throw IoError("failed to decode PNG " + name + ": " + png.image.message);
    width = static_cast<int>(png.image.width);
    height = static_cast<int>(png.image.height);
    return buffer;
}

inline void write_png_bytes(std::filesystem::path const& path,
                            std::vector<std::uint8_t> const& bytes, int width,
                            int height, png_uint_32 format)
{
    atomic_write(path, [&](std::filesystem::path const& tmp) {
        PngImage png;
        png.image.width = static_cast<png_uint_32>(width);
        png.image.height = static_cast<png_uint_32>(height);
        png.image.format = format;
        if (!png_image_write_to_file(&png.image, tmp.string().c_str(), 0,
                                     bytes.data(), 0, nullptr))
            throw IoError("failed to write PNG " + path.string() + ": " +
                          png.image.message);
    });
}

}  // namespace detail

/// Loads an 8-bit RGB or gray PNG; channels are divided by 255.
inline RgbImage load_image(std::filesystem::path const& path)
{
    int w = 0, h = 0;
    auto bytes = detail::read_png_bytes(path, PNG_FORMAT_RGB, w, h);
    RgbImage image(w, h);
    for (std::size_t i = 0; i < image.size(); ++i)
        image[i] = Rgb(from_byte(bytes[3 * i]), from_byte(bytes[3 * i + 1]),
                       from_byte(bytes[3 * i + 2]));
    return image;
}

inline void save_image(RgbImage const& image, std::filesystem::path const& path)
{
    std::vector<std::uint8_t> bytes(image.size() * 3);
    for (std::size_t i = 0; i < image.size(); ++i)
        for (int c = 0; c < 3; ++c)
            bytes[3 * i + c] = to_byte(image[i][c]);
    detail::write_png_bytes(path, bytes, image.width(), image.height(),
                            PNG_FORMAT_RGB);
}

/// Masks are 8-bit gray with 0 = unrendered and 255 = rendered. Anything
/// in between is rejected.
inline Mask load_mask(std::filesystem::path const& path)
{
    int w = 0, h = 0;
    auto bytes = detail::read_png_bytes(path, PNG_FORMAT_GRAY, w, h);
    Mask mask(w, h);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (bytes[i] != 0 && bytes[i] != 255)
            throw ValidationError("mask " + path.string() +
                                  " contains values other than 0 and 255");
        mask[i] = bytes[i] ? 1 : 0;
    }
    return mask;
}

inline void save_mask(Mask const& mask, std::filesystem::path const& path)
{
    std::vector<std::uint8_t> bytes(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i)
        bytes[i] = mask[i] ? 255 : 0;
    detail::write_png_bytes(path, bytes, mask.width(), mask.height(),
                            PNG_FORMAT_GRAY);
}

/// Grayscale little-endian PFM ("Pf", scale -1). Rows are stored
/// bottom-to-top as the format requires. NaN marks undefined pixels.
inline void save_pfm(ScalarImage const& image, std::filesystem::path const& path)
{
    static_assert(std::endian::native == std::endian::little,
                  "PFM writer assumes a little-endian host");
    atomic_write(path, [&](std::filesystem::path const& tmp) {
        std::ofstream out(tmp, std::ios::binary);
        if (!out)
            throw IoError("cannot open for writing: " + tmp.string());
        out << "Pf\n" << image.width() << ' ' << image.height() << "\n-1.0\n";
        std::vector<float> row(image.width());
        for (int y = image.height() - 1; y >= 0; --y) {
            for (int x = 0; x < image.width(); ++x)
                row[x] = static_cast<float>(image.at(x, y));
            out.write(reinterpret_cast<char const*>(row.data()),
                      static_cast<std::streamsize>(row.size() * sizeof(float)));
        }
        if (!out)
            throw IoError("failed writing PFM " + path.string());
    });
}

inline ScalarImage load_pfm(std::filesystem::path const& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open PFM: " + path.string());
    std::string magic;
    int w = 0, h = 0;
    double scale = 0.0;
    in >> magic >> w >> h >> scale;
    if (!in || magic != "Pf" || w < 0 || h < 0)
        throw ValidationError("not a grayscale PFM: " + path.string());
    if (scale >= 0.0)
        throw ValidationError("big-endian PFM not supported: " + path.string());
    in.get();  // single whitespace after the header
    ScalarImage image(w, h);
    std::vector<float> row(w);
    for (int y = h - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!in)
            throw ValidationError("truncated PFM: " + path.string());
        for (int x = 0; x < w; ++x)
            image.at(x, y) = row[x];
    }
    return image;
}

}  // namespace rephoto
