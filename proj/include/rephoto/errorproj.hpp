#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <vector>

#include "rephoto/error.hpp"
#include "rephoto/geometry.hpp"
#include "rephoto/mesh_io.hpp"
#include "rephoto/metrics.hpp"
#include "rephoto/rasterizer.hpp"
#include "rephoto/stats.hpp"

namespace rephoto {

/*
 * Double-double accumulator (error-free TwoSum / FMA TwoProduct). Sums of
 * a few hundred thousand terms stay accurate far below one ulp, so a
 * weighted mean of a constant comes out as exactly that constant.
 */
class CompensatedSum {
public:
    void add(double x)
    {
        double const s = hi_ + x;
        double const bp = s - hi_;
        double const err = (hi_ - (s - bp)) + (x - bp);
        hi_ = s;
        lo_ += err;
    }

    void add_product(double a, double b)
    {
        double const p = a * b;
        add(p);
        lo_ += std::fma(a, b, -p);
    }

    void add(CompensatedSum const& o)
    {
        add(o.hi_);
        lo_ += o.lo_;
    }

    double value() const { return hi_ + lo_; }

    /// Correctly rounded (up to double-double accuracy) quotient.
    double divide(CompensatedSum const& d) const
    {
        double const den = d.value();
        double const q = value() / den;
        // Residual of the first quotient, computed exactly with FMA.
        double const r = std::fma(-q, d.hi_, hi_) + (lo_ - q * d.lo_);
        return q + r / den;
    }

private:
    double hi_ = 0.0;
    double lo_ = 0.0;
};

/// Per-vertex weighted error sums gathered from one or more views.
struct VertexErrorField {
    std::vector<CompensatedSum> sum;
    std::vector<CompensatedSum> weight;

    VertexErrorField() = default;
    explicit VertexErrorField(std::size_t vertices) : sum(vertices), weight(vertices) {}

    std::size_t size() const { return sum.size(); }

    std::optional<double> mean(std::size_t v) const
    {
        if (!(weight[v].value() > 0.0))
            return std::nullopt;
        return sum[v].divide(weight[v]);
    }

    /// Element-wise addition; merge partial fields in a fixed order.
    void merge(VertexErrorField const& other)
    {
        if (other.size() != size())
            throw ValidationError("cannot merge error fields of different sizes");
        for (std::size_t i = 0; i < size(); ++i) {
            sum[i].add(other.sum[i]);
            weight[i].add(other.weight[i]);
        }
    }
};

namespace detail {

inline void check_render_error_pair(RenderOutput const& render, ErrorImage const& err)
{
    if (!render.faceid.same_size(err.value) || !render.mask.same_size(err.defined))
        throw ValidationError("error image and render output differ in size");
}

}  // namespace detail

/*
 * Splats each defined error pixel onto the vertices of the face it shows,
 * weighted by the pixel's barycentric coordinates.
 */
inline void accumulate(VertexErrorField& field, TriMesh const& mesh, RenderOutput const& render,
                       ErrorImage const& err)
{
    if (field.size() != mesh.vertex_count())
        throw ValidationError("error field does not match the mesh vertex count");
    detail::check_render_error_pair(render, err);
    for (std::size_t i = 0; i < render.faceid.size(); ++i) {
        if (!err.defined[i] || !render.mask[i])
            continue;
        std::uint32_t const f = render.faceid[i];
        if (f >= mesh.faces.size())
            throw ValidationError("render output references a face the mesh does not have");
        Face const& face = mesh.faces[f];
        Vec3 const& b = render.bary[i];
        double const e = err.value[i];
        for (int k = 0; k < 3; ++k) {
            field.sum[face[k]].add_product(e, b[k]);
            field.weight[face[k]].add(b[k]);
        }
    }
}

/// Point clouds: every pixel goes to the splat it shows with full weight.
inline void accumulate(VertexErrorField& field, PointCloud const& cloud,
                       RenderOutput const& render, ErrorImage const& err)
{
    if (field.size() != cloud.size())
        throw ValidationError("error field does not match the point count");
    detail::check_render_error_pair(render, err);
    for (std::size_t i = 0; i < render.faceid.size(); ++i) {
        if (!err.defined[i] || !render.mask[i])
            continue;
        std::uint32_t const p = render.faceid[i];
        if (p >= cloud.size())
            throw ValidationError("render output references a point the cloud does not have");
        field.sum[p].add(err.value[i]);
        field.weight[p].add(1.0);
    }
}

/*
 * Maps values to [0,1] between the lo-th and hi-th percentile of
 * `values` (linear interpolation), clamping outside. If both percentiles
 * coincide every value maps to 0.
 */
inline std::vector<double> normalize_percentile(std::vector<double> const& values, double lo = 2.5,
                                                double hi = 97.5)
{
    if (values.empty())
        throw ValidationError("no defined vertex errors to normalize");
    if (!(lo >= 0.0 && lo < hi && hi <= 100.0))
        throw ValidationError("percentiles must satisfy 0 <= lo < hi <= 100");
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    double const p_lo = quantile_sorted(sorted, lo / 100.0);
    double const p_hi = quantile_sorted(sorted, hi / 100.0);
    std::vector<double> t(values.size(), 0.0);
    if (p_hi == p_lo)
        return t;
    for (std::size_t i = 0; i < values.size(); ++i)
        t[i] = std::clamp((values[i] - p_lo) / (p_hi - p_lo), 0.0, 1.0);
    return t;
}

/// The classic "jet" color map.
inline Rgb jet(double t)
{
    auto ramp = [t](double center) { return std::clamp(1.5 - std::abs(4.0 * t - center), 0.0, 1.0); };
    return {ramp(3.0), ramp(2.0), ramp(1.0)};
}

inline Rgb const kUncoveredColor{0.5, 0.5, 0.5};

/// Jet colors from percentile-normalized vertex means; gray where no view saw the vertex.
inline std::vector<Rgb> error_colors(VertexErrorField const& field, double lo = 2.5,
                                     double hi = 97.5)
{
    std::vector<double> means;
    std::vector<std::size_t> covered;
    for (std::size_t v = 0; v < field.size(); ++v) {
        if (auto m = field.mean(v)) {
            means.push_back(*m);
            covered.push_back(v);
        }
    }
    auto const t = normalize_percentile(means, lo, hi);
    std::vector<Rgb> colors(field.size(), kUncoveredColor);
    for (std::size_t i = 0; i < covered.size(); ++i)
        colors[covered[i]] = jet(t[i]);
    return colors;
}

/// Writes a copy of `mesh` colored by the error field as binary PLY.
inline TriMesh export_error_mesh(TriMesh const& mesh, VertexErrorField const& field,
                                 std::filesystem::path const& path)
{
    if (field.size() != mesh.vertex_count())
        throw ValidationError("error field does not match the mesh vertex count");
    TriMesh out;
    out.vertices = mesh.vertices;
    out.faces = mesh.faces;
    out.normals = mesh.normals;
    out.colors = error_colors(field);
    save_ply(out, path);
    return out;
}

inline PointCloud export_error_cloud(PointCloud const& cloud, VertexErrorField const& field,
                                     std::filesystem::path const& path)
{
    if (field.size() != cloud.size())
        throw ValidationError("error field does not match the point count");
    PointCloud out = cloud;
    out.colors = error_colors(field);
    save_ply(out, path);
    return out;
}

}  // namespace rephoto
