#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "rephoto/error.hpp"
#include "rephoto/image.hpp"
#include "rephoto/scene.hpp"

namespace rephoto {

using Face = std::array<std::uint32_t, 3>;

/*
 * Triangle mesh. Per-vertex attributes are either empty (absent) or have
 * exactly one entry per vertex. UVs follow the OBJ convention: (0,0) is
 * the bottom-left corner of the texture image.
 */
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<Rgb> colors;
    std::vector<Vec3> normals;
    std::vector<Vec2> uvs;
    std::vector<Face> faces;
    std::optional<RgbImage> texture;

    std::size_t vertex_count() const { return vertices.size(); }
    bool has_colors() const { return !colors.empty(); }
    bool has_normals() const { return !normals.empty(); }
    bool has_texture() const { return !uvs.empty() && texture.has_value(); }

    void validate() const
    {
        std::size_t const n = vertices.size();
        if (!colors.empty() && colors.size() != n)
            throw ValidationError("mesh color count differs from vertex count");
        if (!normals.empty() && normals.size() != n)
            throw ValidationError("mesh normal count differs from vertex count");
        if (!uvs.empty() && uvs.size() != n)
            throw ValidationError("mesh uv count differs from vertex count");
        if (uvs.empty() != !texture.has_value())
            throw ValidationError("mesh uvs and texture must be present together");
        for (auto const& f : faces)
            for (auto idx : f)
                if (idx >= n)
                    throw ValidationError("face index " + std::to_string(idx) +
                                          " out of range");
    }
};

struct PointCloud {
    std::vector<Vec3> points;
    std::vector<Rgb> colors;
    std::vector<Vec3> normals;
    std::vector<double> radii;

    std::size_t size() const { return points.size(); }
    bool has_radii() const { return !radii.empty(); }

    void validate() const
    {
        if (colors.size() != points.size())
            throw ValidationError("point cloud needs one color per point");
        if (!normals.empty() && normals.size() != points.size())
            throw ValidationError("point cloud normal count differs from point count");
        if (!radii.empty()) {
            if (radii.size() != points.size())
                throw ValidationError("point cloud radius count differs from point count");
            for (double r : radii)
                if (!(r > 0.0))
                    throw ValidationError("splat radii must be strictly positive");
        }
    }
};

struct Aabb {
    Vec3 min = Vec3::Zero();
    Vec3 max = Vec3::Zero();

    /// Diagonal length; this is what "scene extent" means throughout.
    double extent() const { return (max - min).norm(); }
    Vec3 center() const { return 0.5 * (min + max); }
};

inline Aabb bounding_box(std::span<Vec3 const> points)
{
    if (points.empty())
        throw ValidationError("bounding box of empty geometry");
    Aabb box{points.front(), points.front()};
    for (auto const& p : points) {
        box.min = box.min.cwiseMin(p);
        box.max = box.max.cwiseMax(p);
    }
    return box;
}

inline Aabb bounding_box(TriMesh const& mesh) { return bounding_box(mesh.vertices); }
inline Aabb bounding_box(PointCloud const& cloud) { return bounding_box(cloud.points); }

inline double scene_extent(TriMesh const& mesh) { return bounding_box(mesh).extent(); }

/// Twice-area-weighted face normal (unnormalized cross product).
inline Vec3 face_normal(TriMesh const& mesh, Face const& f)
{
    Vec3 const& a = mesh.vertices[f[0]];
    return (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a);
}

/*
 * Area-weighted vertex normals. Vertices whose accumulated normal is zero
 * (isolated, or only on degenerate faces) get (0,0,1); their indices are
 * appended to `degenerate` if given.
 */
inline TriMesh compute_vertex_normals(TriMesh mesh,
                                      std::vector<std::size_t>* degenerate = nullptr)
{
    std::vector<Vec3> acc(mesh.vertices.size(), Vec3::Zero());
    for (auto const& f : mesh.faces) {
        Vec3 const n = face_normal(mesh, f);
        for (auto idx : f)
            acc[idx] += n;
    }
    for (std::size_t i = 0; i < acc.size(); ++i) {
        double const len = acc[i].norm();
        if (len > 0.0 && std::isfinite(len)) {
            acc[i] /= len;
        } else {
            acc[i] = Vec3::UnitZ();
            if (degenerate)
                degenerate->push_back(i);
        }
    }
    mesh.normals = std::move(acc);
    return mesh;
}

}  // namespace rephoto
