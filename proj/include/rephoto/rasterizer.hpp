#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <boost/geometry.hpp>
#include <boost/iterator/function_output_iterator.hpp>
#include <boost/geometry/geometries/point.hpp>
#include <boost/geometry/index/rtree.hpp>

#include "rephoto/error.hpp"
#include "rephoto/geometry.hpp"
#include "rephoto/image.hpp"
#include "rephoto/parallel.hpp"
#include "rephoto/scene.hpp"

namespace rephoto {

inline constexpr std::uint32_t kNoFace = std::numeric_limits<std::uint32_t>::max();

/// One rephoto: color plus the buffers needed to score and back-project it.
struct RenderOutput {
    RgbImage color;
    Mask mask;
    ScalarImage depth;            // camera-space z, +inf where nothing was drawn
    Image<std::uint32_t> faceid;  // face or splat index, kNoFace where invalid
    Image<Vec3> bary;             // barycentrics w.r.t. the original face

    RenderOutput() = default;
    RenderOutput(int width, int height)
        : color(width, height, Rgb::Zero()),
          mask(width, height, 0),
          depth(width, height, std::numeric_limits<double>::infinity()),
          faceid(width, height, kNoFace),
          bary(width, height, Vec3::Zero())
    {
    }

    bool operator==(RenderOutput const&) const = default;
};

enum class Shading { unlit };
enum class TextureFilter { nearest, bilinear };

struct RenderOptions {
    Shading shading = Shading::unlit;
    TextureFilter texture_filter = TextureFilter::bilinear;
    bool backface_culling = false;
    unsigned threads = 1;
};

/// Clamp-to-edge texture lookup; uv (0,0) is the bottom-left corner.
inline Rgb sample_texture(RgbImage const& tex, Vec2 const& uv, TextureFilter filter)
{
    int const w = tex.width();
    int const h = tex.height();
    double const fx = uv.x() * w - 0.5;
    double const fy = (1.0 - uv.y()) * h - 0.5;
    if (filter == TextureFilter::nearest) {
        int const x = std::clamp(static_cast<int>(std::floor(fx + 0.5)), 0, w - 1);
        int const y = std::clamp(static_cast<int>(std::floor(fy + 0.5)), 0, h - 1);
        return tex.at(x, y);
    }
    double const x0f = std::floor(fx);
    double const y0f = std::floor(fy);
    double const ax = fx - x0f;
    double const ay = fy - y0f;
    auto clampi = [](double v, int hi) {
        return static_cast<int>(std::clamp(v, 0.0, static_cast<double>(hi)));
    };
    int const x0 = clampi(x0f, w - 1), x1 = clampi(x0f + 1.0, w - 1);
    int const y0 = clampi(y0f, h - 1), y1 = clampi(y0f + 1.0, h - 1);
    Rgb const top = (1.0 - ax) * tex.at(x0, y0) + ax * tex.at(x1, y0);
    Rgb const bottom = (1.0 - ax) * tex.at(x0, y1) + ax * tex.at(x1, y1);
    return (1.0 - ay) * top + ay * bottom;
}

namespace detail {

// Screen coordinates are snapped to 1/65536 px so coverage decisions are
// exact integer arithmetic; edge products need 128 bits.
inline constexpr int kSubpixelBits = 16;
inline constexpr double kSubpixelScale = 65536.0;
inline constexpr double kMaxScreenCoord = 35184372088832.0;  // 2^45 px
using wide = __int128;

struct ClipVertex {
    Vec3 pos;   // camera space
    Vec3 bary;  // w.r.t. the original face
};

struct ScreenTriangle {
    std::array<std::int64_t, 3> x, y;
    std::array<double, 3> inv_z;
    std::array<Vec3, 3> bary;
    std::array<bool, 3> top_left;  // edge k runs from vertex k to k+1
    wide area2;
    std::uint32_t face;
    int xmin, xmax, ymin, ymax;
};

inline std::int64_t snap(double v)
{
    return static_cast<std::int64_t>(
        std::llround(std::clamp(v, -kMaxScreenCoord, kMaxScreenCoord) * kSubpixelScale));
}

inline std::int64_t floor_div_subpixel(std::int64_t v)
{
    return v >= 0 ? (v >> kSubpixelBits) : -((-v + (1LL << kSubpixelBits) - 1) >> kSubpixelBits);
}

inline std::int64_t ceil_div_subpixel(std::int64_t v)
{
    return -floor_div_subpixel(-v);
}

/// Keeps the part of the polygon with z >= near.
inline std::vector<ClipVertex> clip_near(std::array<ClipVertex, 3> const& tri, double near)
{
    std::vector<ClipVertex> out;
    out.reserve(4);
    for (int i = 0; i < 3; ++i) {
        ClipVertex const& a = tri[i];
        ClipVertex const& b = tri[(i + 1) % 3];
        bool const a_in = a.pos.z() >= near;
        bool const b_in = b.pos.z() >= near;
        if (a_in)
            out.push_back(a);
        if (a_in != b_in) {
            double const t = (near - a.pos.z()) / (b.pos.z() - a.pos.z());
            ClipVertex c{a.pos + t * (b.pos - a.pos), a.bary + t * (b.bary - a.bary)};
            c.pos.z() = near;
            out.push_back(c);
        }
    }
    return out;
}

inline bool setup_triangle(PinholeCamera const& cam, std::array<ClipVertex, 3> v,
                           std::uint32_t face, ScreenTriangle& out)
{
    for (int i = 0; i < 3; ++i) {
        double const inv = 1.0 / v[i].pos.z();
        out.x[i] = snap(cam.fx * v[i].pos.x() * inv + cam.cx);
        out.y[i] = snap(cam.fy * v[i].pos.y() * inv + cam.cy);
        out.inv_z[i] = inv;
        out.bary[i] = v[i].bary;
    }
    auto edge_area = [&] {
        return wide(out.x[1] - out.x[0]) * (out.y[2] - out.y[0]) -
               wide(out.y[1] - out.y[0]) * (out.x[2] - out.x[0]);
    };
    wide area = edge_area();
    if (area == 0)
        return false;
    if (area < 0) {
        std::swap(out.x[1], out.x[2]);
        std::swap(out.y[1], out.y[2]);
        std::swap(out.inv_z[1], out.inv_z[2]);
        std::swap(out.bary[1], out.bary[2]);
        area = -area;
    }
    out.area2 = area;
    out.face = face;
    for (int k = 0; k < 3; ++k) {
        std::int64_t const dx = out.x[(k + 1) % 3] - out.x[k];
        std::int64_t const dy = out.y[(k + 1) % 3] - out.y[k];
        // Interior lies along (-dy, dx): a left edge has it to the right, a
        // top edge has it below (y grows downwards).
        out.top_left[k] = dy < 0 || (dy == 0 && dx > 0);
    }
    auto [xmin, xmax] = std::minmax({out.x[0], out.x[1], out.x[2]});
    auto [ymin, ymax] = std::minmax({out.y[0], out.y[1], out.y[2]});
    out.xmin = static_cast<int>(std::clamp<std::int64_t>(ceil_div_subpixel(xmin), 0, cam.width));
    out.ymin = static_cast<int>(std::clamp<std::int64_t>(ceil_div_subpixel(ymin), 0, cam.height));
    out.xmax = static_cast<int>(std::clamp<std::int64_t>(floor_div_subpixel(xmax), -1, cam.width - 1));
    out.ymax = static_cast<int>(std::clamp<std::int64_t>(floor_div_subpixel(ymax), -1, cam.height - 1));
    return out.xmin <= out.xmax && out.ymin <= out.ymax;
}

/// Nearer wins; exact depth ties go to the lower index.
inline bool closer(double depth, std::uint32_t id, double cur_depth, std::uint32_t cur_id)
{
    return depth < cur_depth || (depth == cur_depth && id < cur_id);
}

inline void rasterize_rows(ScreenTriangle const& t, int row_begin, int row_end,
                           RenderOutput& out)
{
    int const y0 = std::max(t.ymin, row_begin);
    int const y1 = std::min(t.ymax, row_end - 1);
    if (y0 > y1)
        return;
    constexpr std::int64_t one = std::int64_t{1} << kSubpixelBits;
    double const inv_area = 1.0 / static_cast<double>(t.area2);

    std::array<wide, 3> step_x, step_y, row_start;
    std::int64_t const px0 = static_cast<std::int64_t>(t.xmin) * one;
    std::int64_t const py0 = static_cast<std::int64_t>(y0) * one;
    for (int k = 0; k < 3; ++k) {
        int const n = (k + 1) % 3;
        std::int64_t const dx = t.x[n] - t.x[k];
        std::int64_t const dy = t.y[n] - t.y[k];
        // E_k(p) = dx * (p.y - y_k) - dy * (p.x - x_k)
        row_start[k] = wide(dx) * (py0 - t.y[k]) - wide(dy) * (px0 - t.x[k]);
        step_x[k] = -wide(dy) * one;
        step_y[k] = wide(dx) * one;
    }
    for (int y = y0; y <= y1; ++y) {
        std::array<wide, 3> e = row_start;
        for (int x = t.xmin; x <= t.xmax; ++x) {
            bool inside = true;
            for (int k = 0; k < 3; ++k)
                if (e[k] < 0 || (e[k] == 0 && !t.top_left[k]))
                    inside = false;
            if (inside) {
                // e[k] is the weight of the vertex opposite edge k.
                double const l0 = static_cast<double>(e[1]) * inv_area;
                double const l1 = static_cast<double>(e[2]) * inv_area;
                double const l2 = static_cast<double>(e[0]) * inv_area;
                double const w0 = l0 * t.inv_z[0];
                double const w1 = l1 * t.inv_z[1];
                double const w2 = l2 * t.inv_z[2];
                double const wsum = w0 + w1 + w2;
                double const depth = 1.0 / wsum;
                std::size_t const idx = out.depth.index(x, y);
                if (wsum > 0.0 && closer(depth, t.face, out.depth[idx], out.faceid[idx])) {
                    out.depth[idx] = depth;
                    out.faceid[idx] = t.face;
                    out.bary[idx] = (w0 * t.bary[0] + w1 * t.bary[1] + w2 * t.bary[2]) / wsum;
                }
            }
            for (int k = 0; k < 3; ++k)
                e[k] += step_x[k];
        }
        for (int k = 0; k < 3; ++k)
            row_start[k] += step_y[k];
    }
}

inline constexpr int kBandRows = 8;

inline int band_count(int height) { return (height + kBandRows - 1) / kBandRows; }

}  // namespace detail

/// Writes mask and color from the depth/faceid/bary buffers.
template <typename Shade>
void resolve_colors(RenderOutput& out, Shade&& shade)
{
    for (std::size_t i = 0; i < out.faceid.size(); ++i) {
        if (out.faceid[i] == kNoFace)
            continue;
        out.mask[i] = 1;
        out.color[i] = clamp01(shade(out.faceid[i], out.bary[i]));
    }
}

/*
 * Z-buffered rasterization of an unlit mesh. Coverage follows the top-left
 * fill rule on pixel centers; color and UVs are interpolated perspective
 * correctly. Triangles crossing the near plane (1e-6 of the scene extent)
 * are clipped. Output is bit-identical for identical input regardless of
 * the thread count.
 */
inline RenderOutput render_mesh(TriMesh const& mesh, PinholeCamera const& camera,
                                RenderOptions const& opts = {})
{
    RenderOutput out(camera.width, camera.height);
    if (mesh.vertices.empty() || mesh.faces.empty())
        return out;
    bool const use_colors = mesh.has_colors();
    if (!use_colors && !mesh.has_texture())
        throw ValidationError("mesh has neither vertex colors nor a texture");
    if (mesh.faces.size() >= kNoFace)
        throw ValidationError("mesh has too many faces to render");

    double const near = std::max(1e-6 * scene_extent(mesh), 1e-12);
    std::vector<Vec3> cam_pos(mesh.vertices.size());
    for (std::size_t i = 0; i < cam_pos.size(); ++i)
        cam_pos[i] = camera.to_camera(mesh.vertices[i]);

    std::vector<detail::ScreenTriangle> tris;
    tris.reserve(mesh.faces.size());
    for (std::size_t fi = 0; fi < mesh.faces.size(); ++fi) {
        Face const& f = mesh.faces[fi];
        std::array<detail::ClipVertex, 3> v{{{cam_pos[f[0]], Vec3::UnitX()},
                                             {cam_pos[f[1]], Vec3::UnitY()},
                                             {cam_pos[f[2]], Vec3::UnitZ()}}};
        if (opts.backface_culling) {
            Vec3 const n = (v[1].pos - v[0].pos).cross(v[2].pos - v[0].pos);
            if (n.dot(-v[0].pos) <= 0.0)
                continue;
        }
        auto const face = static_cast<std::uint32_t>(fi);
        detail::ScreenTriangle st;
        if (v[0].pos.z() >= near && v[1].pos.z() >= near && v[2].pos.z() >= near) {
            if (detail::setup_triangle(camera, v, face, st))
                tris.push_back(st);
            continue;
        }
        auto poly = detail::clip_near(v, near);
        for (std::size_t k = 1; k + 1 < poly.size(); ++k)
            if (detail::setup_triangle(camera, {poly[0], poly[k], poly[k + 1]}, face, st))
                tris.push_back(st);
    }

    int const bands = detail::band_count(camera.height);
    parallel_for(static_cast<std::size_t>(bands), opts.threads, [&](std::size_t b) {
        int const row_begin = static_cast<int>(b) * detail::kBandRows;
        int const row_end = std::min(row_begin + detail::kBandRows, camera.height);
        for (auto const& t : tris)
            if (t.ymin < row_end && t.ymax >= row_begin)
                detail::rasterize_rows(t, row_begin, row_end, out);
    });

    if (use_colors) {
        resolve_colors(out, [&](std::uint32_t face, Vec3 const& b) -> Rgb {
            Face const& f = mesh.faces[face];
            return b.x() * mesh.colors[f[0]] + b.y() * mesh.colors[f[1]] +
                   b.z() * mesh.colors[f[2]];
        });
    } else {
        resolve_colors(out, [&](std::uint32_t face, Vec3 const& b) -> Rgb {
            Face const& f = mesh.faces[face];
            Vec2 const uv = b.x() * mesh.uvs[f[0]] + b.y() * mesh.uvs[f[1]] +
                            b.z() * mesh.uvs[f[2]];
            return sample_texture(*mesh.texture, uv, opts.texture_filter);
        });
    }
    return out;
}

/*
 * Mean distance to the k nearest neighbors (exact; the point itself is not
 * its own neighbor), times `scale`.
 */
inline PointCloud estimate_splat_radii(PointCloud cloud, int k = 6, double scale = 1.0)
{
    namespace bg = boost::geometry;
    namespace bgi = boost::geometry::index;
    using BPoint = bg::model::point<double, 3, bg::cs::cartesian>;
    using Entry = std::pair<BPoint, std::size_t>;

    if (k < 1)
        throw ValidationError("splat neighbor count must be at least 1");
    if (!(scale > 0.0))
        throw ValidationError("splat radius scale must be positive");
    if (cloud.points.size() < static_cast<std::size_t>(k) + 1)
        throw ValidationError("need at least k+1 points to estimate splat radii");

    std::vector<Entry> entries;
    entries.reserve(cloud.points.size());
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        Vec3 const& p = cloud.points[i];
        entries.emplace_back(BPoint(p.x(), p.y(), p.z()), i);
    }
    bgi::rtree<Entry, bgi::rstar<16>> tree(entries.begin(), entries.end());

    auto distance = [](Vec3 const& a, Vec3 const& b) {
        double const dx = a.x() - b.x(), dy = a.y() - b.y(), dz = a.z() - b.z();
        return std::sqrt(dx * dx + dy * dy + dz * dz);
    };

    // The tree's candidate set is re-ranked with our own distance so the
    // result does not depend on its internal summation order.
    unsigned const candidates = static_cast<unsigned>(
        std::min<std::size_t>(cloud.points.size(), static_cast<std::size_t>(k) + 8));
    cloud.radii.assign(cloud.points.size(), 0.0);
    std::vector<std::pair<double, std::size_t>> found;
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        found.clear();
        tree.query(bgi::nearest(entries[i].first, candidates),
                   boost::make_function_output_iterator([&](Entry const& e) {
                       if (e.second != i)
                           found.emplace_back(distance(cloud.points[i], cloud.points[e.second]),
                                              e.second);
                   }));
        std::sort(found.begin(), found.end());
        double sum = 0.0;
        for (int j = 0; j < k; ++j)
            sum += found[j].first;
        cloud.radii[i] = scale * (sum / k);
    }
    return cloud;
}

/*
 * Camera-facing disks with constant color. A pixel is covered when its
 * center lies within fx * r / z pixels of the projected point; all pixels
 * of a splat share the point's depth.
 */
inline RenderOutput render_pointcloud(PointCloud const& cloud, PinholeCamera const& camera,
                                      RenderOptions const& opts = {})
{
    if (cloud.points.empty())
        throw ValidationError("cannot render an empty point cloud");
    if (cloud.colors.size() != cloud.points.size())
        throw ValidationError("point cloud lacks colors");
    if (cloud.points.size() >= kNoFace)
        throw ValidationError("point cloud too large to render");
    PointCloud const* source = &cloud;
    PointCloud with_radii;
    if (!cloud.has_radii()) {
        with_radii = estimate_splat_radii(cloud);
        source = &with_radii;
    }
    source->validate();

    struct Splat {
        double u, v, radius, depth;
        std::uint32_t id;
        int xmin, xmax, ymin, ymax;
    };
    double const near = std::max(1e-6 * bounding_box(cloud).extent(), 1e-12);
    std::vector<Splat> splats;
    for (std::size_t i = 0; i < source->points.size(); ++i) {
        Vec3 const pc = camera.to_camera(source->points[i]);
        if (pc.z() < near)
            continue;
        Splat s;
        s.u = camera.fx * pc.x() / pc.z() + camera.cx;
        s.v = camera.fy * pc.y() / pc.z() + camera.cy;
        s.radius = camera.fx * source->radii[i] / pc.z();
        s.depth = pc.z();
        s.id = static_cast<std::uint32_t>(i);
        s.xmin = static_cast<int>(
            std::clamp(std::ceil(s.u - s.radius), 0.0, static_cast<double>(camera.width)));
        s.ymin = static_cast<int>(
            std::clamp(std::ceil(s.v - s.radius), 0.0, static_cast<double>(camera.height)));
        s.xmax = static_cast<int>(
            std::clamp(std::floor(s.u + s.radius), -1.0, static_cast<double>(camera.width - 1)));
        s.ymax = static_cast<int>(
            std::clamp(std::floor(s.v + s.radius), -1.0, static_cast<double>(camera.height - 1)));
        if (s.xmin <= s.xmax && s.ymin <= s.ymax)
            splats.push_back(s);
    }

    RenderOutput out(camera.width, camera.height);
    int const bands = detail::band_count(camera.height);
    parallel_for(static_cast<std::size_t>(bands), opts.threads, [&](std::size_t b) {
        int const row_begin = static_cast<int>(b) * detail::kBandRows;
        int const row_end = std::min(row_begin + detail::kBandRows, camera.height);
        for (auto const& s : splats) {
            int const y0 = std::max(s.ymin, row_begin);
            int const y1 = std::min(s.ymax, row_end - 1);
            double const r2 = s.radius * s.radius;
            for (int y = y0; y <= y1; ++y) {
                double const dy = y - s.v;
                for (int x = s.xmin; x <= s.xmax; ++x) {
                    double const dx = x - s.u;
                    if (dx * dx + dy * dy > r2)
                        continue;
                    std::size_t const idx = out.depth.index(x, y);
                    if (detail::closer(s.depth, s.id, out.depth[idx], out.faceid[idx])) {
                        out.depth[idx] = s.depth;
                        out.faceid[idx] = s.id;
                        out.bary[idx] = Vec3::UnitX();
                    }
                }
            }
        }
    });
    resolve_colors(out, [&](std::uint32_t id, Vec3 const&) { return source->colors[id]; });
    return out;
}

}  // namespace rephoto
