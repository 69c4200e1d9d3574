#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rephoto/error.hpp"
#include "rephoto/image.hpp"

namespace rephoto {

enum class Metric { cbcr, ncc, zssd, dssim, census };

inline constexpr std::array<Metric, 5> kAllMetrics = {Metric::cbcr, Metric::ncc, Metric::zssd,
                                                      Metric::dssim, Metric::census};

inline std::string_view to_string(Metric m)
{
    switch (m) {
    case Metric::cbcr: return "cbcr";
    case Metric::ncc: return "ncc";
    case Metric::zssd: return "zssd";
    case Metric::dssim: return "dssim";
    case Metric::census: return "census";
    }
    return "?";
}

inline Metric parse_metric(std::string_view name)
{
    for (Metric m : kAllMetrics)
        if (to_string(m) == name)
            return m;
    throw ValidationError("unknown metric '" + std::string(name) +
                          "' (expected cbcr, ncc, zssd, dssim or census)");
}

struct MetricConfig {
    Metric metric = Metric::ncc;
    int patch = 15;
    double min_valid_fraction = 0.5;

    void validate() const
    {
        if (patch < 3 || patch % 2 == 0)
            throw ValidationError("patch size must be odd and at least 3");
        if (!(min_valid_fraction > 0.0 && min_valid_fraction <= 1.0))
            throw ValidationError("min valid fraction must be in (0, 1]");
    }
};

/// Per-pixel error; `value` is meaningful only where `defined` is set.
struct ErrorImage {
    ScalarImage value;
    Mask defined;

    ErrorImage() = default;
    ErrorImage(int width, int height) : value(width, height, 0.0), defined(width, height, 0) {}

    int width() const { return value.width(); }
    int height() const { return value.height(); }

    /// NaN where undefined, as stored in PFM files.
    ScalarImage to_nan_image() const
    {
        ScalarImage out = value;
        for (std::size_t i = 0; i < out.size(); ++i)
            if (!defined[i])
                out[i] = std::numeric_limits<double>::quiet_NaN();
        return out;
    }

    static ErrorImage from_nan_image(ScalarImage const& img)
    {
        ErrorImage e(img.width(), img.height());
        for (std::size_t i = 0; i < img.size(); ++i) {
            if (std::isfinite(img[i])) {
                e.value[i] = img[i];
                e.defined[i] = 1;
            }
        }
        return e;
    }
};

struct YCbCr {
    double y, cb, cr;
};

/// BT.601 full range; Cb and Cr land in [-0.5, 0.5].
inline YCbCr rgb_to_ycbcr(Rgb const& c)
{
    double const y = 0.299 * c.x() + 0.587 * c.y() + 0.114 * c.z();
    return {y, (c.z() - y) / 1.772, (c.x() - y) / 1.402};
}

inline Image<YCbCr> rgb_to_ycbcr(RgbImage const& image)
{
    Image<YCbCr> out(image.width(), image.height());
    for (std::size_t i = 0; i < image.size(); ++i)
        out[i] = rgb_to_ycbcr(image[i]);
    return out;
}

inline ScalarImage luminance(RgbImage const& image)
{
    ScalarImage out(image.width(), image.height());
    for (std::size_t i = 0; i < image.size(); ++i)
        out[i] = rgb_to_ycbcr(image[i]).y;
    return out;
}

inline double completeness(Mask const& mask)
{
    if (mask.empty())
        return 0.0;
    return static_cast<double>(count_valid(mask)) / static_cast<double>(mask.size());
}

/// Mean over defined pixels in row-major order; nullopt if none is defined.
inline std::optional<double> mean_error(ErrorImage const& err)
{
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < err.value.size(); ++i) {
        if (err.defined[i]) {
            sum += err.value[i];
            ++n;
        }
    }
    if (n == 0)
        return std::nullopt;
    return sum / static_cast<double>(n);
}

namespace detail {

inline void check_dimensions(RgbImage const& photo, RgbImage const& rephoto, Mask const& mask)
{
    if (!photo.same_size(rephoto) || !photo.same_size(mask))
        throw ValidationError("photo, rephoto and mask dimensions differ (" +
                              std::to_string(photo.width()) + "x" + std::to_string(photo.height()) +
                              " vs " + std::to_string(rephoto.width()) + "x" +
                              std::to_string(rephoto.height()) + " vs " +
                              std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                              ")");
}

/// Luminance samples of one patch restricted to mask-valid positions.
struct PatchSamples {
    std::vector<double> a, b;
    double center_a = 0.0, center_b = 0.0;
    std::size_t center_index = 0;
};

/*
 * Visits every mask-valid pixel whose window holds enough valid positions
 * and stores score(samples) there. The window is clipped at the image
 * border; positions outside the mask are skipped for both images.
 */
template <typename Score>
ErrorImage patch_metric(RgbImage const& photo, RgbImage const& rephoto, Mask const& mask,
                        MetricConfig const& cfg, Score&& score)
{
    cfg.validate();
    check_dimensions(photo, rephoto, mask);
    int const w = photo.width();
    int const h = photo.height();
    int const half = cfg.patch / 2;
    double const min_count = cfg.min_valid_fraction * cfg.patch * cfg.patch;
    ScalarImage const ya = luminance(photo);
    ScalarImage const yb = luminance(rephoto);

    ErrorImage out(w, h);
    PatchSamples s;
    s.a.reserve(static_cast<std::size_t>(cfg.patch) * cfg.patch);
    s.b.reserve(s.a.capacity());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.at(x, y))
                continue;
            s.a.clear();
            s.b.clear();
            for (int wy = std::max(0, y - half); wy <= std::min(h - 1, y + half); ++wy) {
                for (int wx = std::max(0, x - half); wx <= std::min(w - 1, x + half); ++wx) {
                    std::size_t const idx = mask.index(wx, wy);
                    if (!mask[idx])
                        continue;
                    if (wx == x && wy == y)
                        s.center_index = s.a.size();
                    s.a.push_back(ya[idx]);
                    s.b.push_back(yb[idx]);
                }
            }
            if (static_cast<double>(s.a.size()) < min_count)
                continue;
            s.center_a = ya.at(x, y);
            s.center_b = yb.at(x, y);
            out.value.at(x, y) = score(s);
            out.defined.at(x, y) = 1;
        }
    }
    return out;
}

struct Moments {
    double mean_a = 0.0, mean_b = 0.0;
    double var_a = 0.0, var_b = 0.0, cov = 0.0;  // population (divide by N)
};

inline Moments moments(std::vector<double> const& a, std::vector<double> const& b)
{
    double const n = static_cast<double>(a.size());
    Moments m;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m.mean_a += a[i];
        m.mean_b += b[i];
    }
    m.mean_a /= n;
    m.mean_b /= n;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double const da = a[i] - m.mean_a;
        double const db = b[i] - m.mean_b;
        m.var_a += da * da;
        m.var_b += db * db;
        m.cov += da * db;
    }
    m.var_a /= n;
    m.var_b /= n;
    m.cov /= n;
    return m;
}

}  // namespace detail

/// |dCb| + |dCr| at every mask-valid pixel.
inline ErrorImage cbcr_error(RgbImage const& photo, RgbImage const& rephoto, Mask const& mask)
{
    detail::check_dimensions(photo, rephoto, mask);
    ErrorImage out(photo.width(), photo.height());
    for (std::size_t i = 0; i < photo.size(); ++i) {
        if (!mask[i])
            continue;
        YCbCr const a = rgb_to_ycbcr(photo[i]);
        YCbCr const b = rgb_to_ycbcr(rephoto[i]);
        out.value[i] = std::abs(a.cb - b.cb) + std::abs(a.cr - b.cr);
        out.defined[i] = 1;
    }
    return out;
}

inline constexpr double kFlatPatchStddev = 1e-6;

/// 1 - NCC on luminance, in [0, 2].
inline ErrorImage ncc_error(RgbImage const& photo, RgbImage const& rephoto, Mask const& mask,
                            MetricConfig const& cfg)
{
    return detail::patch_metric(photo, rephoto, mask, cfg, [](detail::PatchSamples const& s) {
        auto const m = detail::moments(s.a, s.b);
        double const sa = std::sqrt(m.var_a);
        double const sb = std::sqrt(m.var_b);
        bool const flat_a = sa < kFlatPatchStddev;
        bool const flat_b = sb < kFlatPatchStddev;
        if (flat_a && flat_b)
            return 0.0;
        if (flat_a || flat_b)
            return 1.0;
        // sqrt(v * v) == v exactly, so identical patches score exactly 0.
        return std::clamp(1.0 - m.cov / std::sqrt(m.var_a * m.var_b), 0.0, 2.0);
    });
}

/// Zero-mean SSD normalized by the number of valid positions.
inline ErrorImage zssd_error(RgbImage const& photo, RgbImage const& rephoto, Mask const& mask,
                             MetricConfig const& cfg)
{
    return detail::patch_metric(photo, rephoto, mask, cfg, [](detail::PatchSamples const& s) {
        auto const m = detail::moments(s.a, s.b);
        double sum = 0.0;
        for (std::size_t i = 0; i < s.a.size(); ++i) {
            double const d = (s.a[i] - m.mean_a) - (s.b[i] - m.mean_b);
            sum += d * d;
        }
        return sum / static_cast<double>(s.a.size());
    });
}

/*
 * Luminance differences up to this size count as ties. Colors with equal
 * luminance in exact arithmetic can differ by an ulp once computed, and a
 * strict comparison would then order them by rounding noise.
 */
inline constexpr double kCensusTieTolerance = 1e-12;

/// Fraction of differing census bits (neighbor darker than center; ties give 0).
inline ErrorImage census_error(RgbImage const& photo, RgbImage const& rephoto, Mask const& mask,
                               MetricConfig const& cfg)
{
    return detail::patch_metric(photo, rephoto, mask, cfg, [](detail::PatchSamples const& s) {
        std::size_t differing = 0;
        std::size_t compared = 0;
        for (std::size_t i = 0; i < s.a.size(); ++i) {
            if (i == s.center_index)
                continue;
            bool const bit_a = s.center_a - s.a[i] > kCensusTieTolerance;
            bool const bit_b = s.center_b - s.b[i] > kCensusTieTolerance;
            differing += bit_a != bit_b;
            ++compared;
        }
        return compared ? static_cast<double>(differing) / static_cast<double>(compared) : 0.0;
    });
}

inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// (1 - SSIM) / 2 with a uniform window, dynamic range 1.
inline ErrorImage dssim_error(RgbImage const& photo, RgbImage const& rephoto, Mask const& mask,
                              MetricConfig const& cfg)
{
    return detail::patch_metric(photo, rephoto, mask, cfg, [](detail::PatchSamples const& s) {
        auto const m = detail::moments(s.a, s.b);
        double const ssim = ((2.0 * m.mean_a * m.mean_b + kSsimC1) * (2.0 * m.cov + kSsimC2)) /
                            ((m.mean_a * m.mean_a + m.mean_b * m.mean_b + kSsimC1) *
                             (m.var_a + m.var_b + kSsimC2));
        return std::clamp((1.0 - ssim) / 2.0, 0.0, 1.0);
    });
}

inline ErrorImage compute_error(RgbImage const& photo, RgbImage const& rephoto, Mask const& mask,
                                MetricConfig const& cfg)
{
    switch (cfg.metric) {
    case Metric::cbcr: return cbcr_error(photo, rephoto, mask);
    case Metric::ncc: return ncc_error(photo, rephoto, mask, cfg);
    case Metric::zssd: return zssd_error(photo, rephoto, mask, cfg);
    case Metric::dssim: return dssim_error(photo, rephoto, mask, cfg);
    case Metric::census: return census_error(photo, rephoto, mask, cfg);
    }
    throw InvariantError("unhandled metric");
}

}  // namespace rephoto
