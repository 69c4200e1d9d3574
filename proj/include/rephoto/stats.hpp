#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "rephoto/error.hpp"

namespace rephoto {

/// Linear-interpolation quantile of sorted data (inclusive / "type 7").
inline double quantile_sorted(std::span<double const> sorted, double p)
{
    if (sorted.empty())
        throw ValidationError("quantile of empty data");
    double const h = (static_cast<double>(sorted.size()) - 1.0) * p;
    auto const lo = static_cast<std::size_t>(std::floor(h));
    auto const hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double percentile(std::vector<double> values, double percent)
{
    std::sort(values.begin(), values.end());
    return quantile_sorted(values, percent / 100.0);
}

struct BoxplotStats {
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
};

inline BoxplotStats boxplot_stats(std::span<double const> values)
{
    if (values.empty())
        throw ValidationError("boxplot of empty data");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return {sorted.front(), quantile_sorted(sorted, 0.25), quantile_sorted(sorted, 0.5),
            quantile_sorted(sorted, 0.75), sorted.back()};
}

/// Sample Pearson correlation coefficient.
inline double pearson(std::span<double const> xs, std::span<double const> ys)
{
    if (xs.size() != ys.size())
        throw ValidationError("pearson: inputs differ in length");
    if (xs.size() < 2)
        throw ValidationError("pearson: need at least two samples");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(ys.size());
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double const dx = xs[i] - mx;
        double const dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0))
        throw ValidationError("pearson: an input has zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace rephoto
