#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "rephoto/error.hpp"

namespace rephoto {

using Rgb = Eigen::Vector3d;

/// Row-major 2D buffer with the origin at the top-left pixel.
template <typename T>
class Image {
public:
    using value_type = T;

    Image() = default;
    Image(int width, int height, T const& fill = T{})
        : width_(width), height_(height)
    {
        if (width < 0 || height < 0)
            throw ValidationError("image dimensions must be non-negative");
        data_.assign(static_cast<std::size_t>(width) * height, fill);
    }

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    bool same_size(int w, int h) const { return width_ == w && height_ == h; }
    template <typename U>
    bool same_size(Image<U> const& other) const
    {
        return same_size(other.width(), other.height());
    }

    bool in_bounds(int x, int y) const
    {
        return x >= 0 && y >= 0 && x < width_ && y < height_;
    }

    std::size_t index(int x, int y) const
    {
        return static_cast<std::size_t>(y) * width_ + x;
    }

    T& at(int x, int y) { return data_[index(x, y)]; }
    T const& at(int x, int y) const { return data_[index(x, y)]; }
    T& operator[](std::size_t i) { return data_[i]; }
    T const& operator[](std::size_t i) const { return data_[i]; }

    std::vector<T>& data() { return data_; }
    std::vector<T> const& data() const { return data_; }

    bool operator==(Image const& other) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

/// Linear RGB, every channel in [0,1].
using RgbImage = Image<Rgb>;
/// Nonzero = rendered (valid).
using Mask = Image<std::uint8_t>;
using ScalarImage = Image<double>;

inline Rgb clamp01(Rgb const& c)
{
    return c.cwiseMax(0.0).cwiseMin(1.0);
}

inline std::uint8_t to_byte(double v)
{
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline double from_byte(std::uint8_t b)
{
    return b / 255.0;
}

/// Rounds every channel to the nearest 8-bit level, i.e. what a PNG
/// round trip would produce.
inline RgbImage quantize_8bit(RgbImage const& image)
{
    RgbImage out(image.width(), image.height());
    for (std::size_t i = 0; i < image.size(); ++i) {
        Rgb const& c = image[i];
        out[i] = Rgb(from_byte(to_byte(c.x())), from_byte(to_byte(c.y())),
                     from_byte(to_byte(c.z())));
    }
    return out;
}

inline std::size_t count_valid(Mask const& mask)
{
    return static_cast<std::size_t>(
        std::count_if(mask.data().begin(), mask.data().end(),
                      [](std::uint8_t v) { return v != 0; }));
}

}  // namespace rephoto
