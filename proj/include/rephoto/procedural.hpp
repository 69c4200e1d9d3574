#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "rephoto/geometry.hpp"
#include "rephoto/image_io.hpp"
#include "rephoto/mesh_io.hpp"
#include "rephoto/rasterizer.hpp"
#include "rephoto/scene.hpp"

namespace rephoto {

/*
 * Synthetic test scene: a vertex-colored UV sphere of radius 1 resting on
 * a subdivided ground square [-3,3]^2 at z = 0, plus a ring of cameras.
 * With the defaults the mesh has about 10k faces. A part is omitted when
 * its resolution is zero.
 */
struct ProceduralSceneOptions {
    int sphere_segments = 64;
    int sphere_rings = 48;
    int ground_cells = 45;
    int cameras = 12;
    int width = 320;
    int height = 240;
    double focal = 300.0;
    double ring_radius = 5.0;
    double ring_height = 2.5;
};

namespace detail {

/// Small deterministic per-vertex jitter in [-1,1].
inline double lattice_hash(std::uint64_t a, std::uint64_t b, std::uint64_t c)
{
    std::uint64_t x = a * 0x9E3779B97F4A7C15ull ^ b * 0xC2B2AE3D27D4EB4Full ^ c * 0x165667B19E3779F9ull;
    x ^= x >> 31;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 29;
    return static_cast<double>(x >> 11) / static_cast<double>(1ull << 52) - 1.0;
}

inline Rgb scene_color(Vec3 const& p, double jitter)
{
    double const s = std::sin(5.0 * p.x() + 1.3 * p.z()) * std::cos(4.0 * p.y() - 0.7 * p.z());
    double const t = std::sin(11.0 * (p.x() + p.y()) + 2.0 * p.z());
    Rgb c{0.5 + 0.25 * s + 0.1 * t, 0.45 + 0.2 * t - 0.1 * s, 0.5 + 0.2 * s * t};
    c.array() += 0.08 * jitter;
    return clamp01(c);
}

}  // namespace detail

inline TriMesh procedural_mesh(ProceduralSceneOptions const& o = {})
{
    TriMesh mesh;
    double const pi = std::numbers::pi;
    Vec3 const center(0.0, 0.0, 1.0);

    // Sphere: north pole, (rings-1) latitude circles, south pole.
    if (o.sphere_segments >= 3 && o.sphere_rings >= 2) {
        auto const base = static_cast<std::uint32_t>(mesh.vertices.size());
        mesh.vertices.push_back(center + Vec3(0, 0, 1));
        for (int r = 1; r < o.sphere_rings; ++r) {
            double const theta = pi * r / o.sphere_rings;
            for (int s = 0; s < o.sphere_segments; ++s) {
                double const phi = 2.0 * pi * s / o.sphere_segments;
                mesh.vertices.push_back(center + Vec3(std::sin(theta) * std::cos(phi),
                                                      std::sin(theta) * std::sin(phi),
                                                      std::cos(theta)));
            }
        }
        mesh.vertices.push_back(center - Vec3(0, 0, 1));
        auto const ring_vertex = [&](int r, int s) {
            return base + 1 + static_cast<std::uint32_t>((r - 1) * o.sphere_segments +
                                                          (s % o.sphere_segments));
        };
        auto const south = static_cast<std::uint32_t>(mesh.vertices.size() - 1);
        for (int s = 0; s < o.sphere_segments; ++s)
            mesh.faces.push_back({base, ring_vertex(1, s), ring_vertex(1, s + 1)});
        for (int r = 1; r + 1 < o.sphere_rings; ++r) {
            for (int s = 0; s < o.sphere_segments; ++s) {
                auto const a = ring_vertex(r, s), b = ring_vertex(r, s + 1);
                auto const c = ring_vertex(r + 1, s), d = ring_vertex(r + 1, s + 1);
                mesh.faces.push_back({a, c, d});
                mesh.faces.push_back({a, d, b});
            }
        }
        for (int s = 0; s < o.sphere_segments; ++s)
            mesh.faces.push_back({south, ring_vertex(o.sphere_rings - 1, s + 1),
                                  ring_vertex(o.sphere_rings - 1, s)});
    }

    // Ground grid, counter-clockwise seen from above.
    if (o.ground_cells >= 1) {
        auto const gbase = static_cast<std::uint32_t>(mesh.vertices.size());
        int const n = o.ground_cells;
        for (int j = 0; j <= n; ++j)
            for (int i = 0; i <= n; ++i)
                mesh.vertices.emplace_back(-3.0 + 6.0 * i / n, -3.0 + 6.0 * j / n, 0.0);
        auto const grid = [&](int i, int j) { return gbase + static_cast<std::uint32_t>(j * (n + 1) + i); };
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) {
                mesh.faces.push_back({grid(i, j), grid(i + 1, j), grid(i + 1, j + 1)});
                mesh.faces.push_back({grid(i, j), grid(i + 1, j + 1), grid(i, j + 1)});
            }
        }
    }

    mesh.colors.reserve(mesh.vertices.size());
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
        mesh.colors.push_back(detail::scene_color(mesh.vertices[v], detail::lattice_hash(v, 7, 13)));
    return compute_vertex_normals(std::move(mesh));
}

/// Views on a horizontal ring, all looking at a point just below the sphere center.
inline ViewManifest procedural_views(ProceduralSceneOptions const& o = {},
                                     std::filesystem::path const& photo_dir = {})
{
    ViewManifest manifest;
    double const pi = std::numbers::pi;
    for (int i = 0; i < o.cameras; ++i) {
        double const a = 2.0 * pi * i / o.cameras;
        Vec3 const eye(o.ring_radius * std::cos(a), o.ring_radius * std::sin(a), o.ring_height);
        View v;
        char id[16];
        std::snprintf(id, sizeof(id), "v%02d", i);
        v.id = id;
        v.photo_path = photo_dir / (v.id + ".png");
        v.camera = look_at(eye, Vec3(0, 0, 0.8), Vec3(0, 0, 1), o.focal, o.width, o.height);
        manifest.views.push_back(std::move(v));
    }
    return manifest;
}

/*
 * Writes a ready-to-evaluate dataset into `dir`: model.ply, views.json
 * and photos/<id>.png rendered from the clean model.
 */
inline void write_procedural_dataset(std::filesystem::path const& dir,
                                     ProceduralSceneOptions const& o = {})
{
    ViewManifest const manifest = procedural_views(o, dir / "photos");
    save_ply(procedural_mesh(o), dir / "model.ply");
    // Render from the stored (float precision) model so photos match its rephotos.
    TriMesh const mesh = load_mesh(dir / "model.ply");
    for (auto const& v : manifest.views)
        save_image(render_mesh(mesh, v.camera).color, v.photo_path);
    save_manifest(manifest, dir / "views.json");
}

}  // namespace rephoto
