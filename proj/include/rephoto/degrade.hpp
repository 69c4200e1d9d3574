#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <queue>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "rephoto/error.hpp"
#include "rephoto/geometry.hpp"

namespace rephoto {

struct DegradationParams {
    double n_tex = 0.0;      // max per-channel color offset
    double n_geom = 0.0;     // max displacement, fraction of the scene extent
    double n_simp = 0.0;     // fraction of vertices to eliminate, [0,1)
    std::uint64_t seed = 0;
    double frequency = 8.0;  // noise cycles per bounding-box diagonal

    void validate() const
    {
        if (!(n_tex >= 0.0) || !std::isfinite(n_tex))
            throw ValidationError("texture noise strength must be >= 0");
        if (!(n_geom >= 0.0) || !std::isfinite(n_geom))
            throw ValidationError("geometry noise strength must be >= 0");
        if (!(n_simp >= 0.0 && n_simp < 1.0))
            throw ValidationError("simplification fraction must be in [0, 1)");
        if (!(frequency > 0.0) || !std::isfinite(frequency))
            throw ValidationError("noise frequency must be positive");
    }
};

/*
 * Seeded 3D gradient noise (Perlin's improved noise with a permutation
 * table shuffled from the seed). Zero on the integer lattice, C2 smooth,
 * and clamped to [-1, 1].
 */
class GradientNoise {
public:
    explicit GradientNoise(std::uint64_t seed)
    {
        std::array<int, 256> p;
        std::iota(p.begin(), p.end(), 0);
        // Fisher-Yates on raw engine output: std::shuffle's algorithm is
        // implementation-defined and would make results platform dependent.
        std::mt19937_64 rng(seed);
        for (int i = 255; i > 0; --i) {
            int const j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
            std::swap(p[i], p[j]);
        }
        for (int i = 0; i < 512; ++i)
            perm_[i] = p[i & 255];
    }

    double operator()(Vec3 const& pos) const
    {
        double const fx = std::floor(pos.x());
        double const fy = std::floor(pos.y());
        double const fz = std::floor(pos.z());
        int const X = static_cast<int>(static_cast<long long>(fx) & 255);
        int const Y = static_cast<int>(static_cast<long long>(fy) & 255);
        int const Z = static_cast<int>(static_cast<long long>(fz) & 255);
        double const x = pos.x() - fx;
        double const y = pos.y() - fy;
        double const z = pos.z() - fz;
        double const u = fade(x), v = fade(y), w = fade(z);

        int const A = perm_[X] + Y, AA = perm_[A] + Z, AB = perm_[A + 1] + Z;
        int const B = perm_[X + 1] + Y, BA = perm_[B] + Z, BB = perm_[B + 1] + Z;

        double const value =
            lerp(w,
                 lerp(v, lerp(u, grad(perm_[AA], x, y, z), grad(perm_[BA], x - 1, y, z)),
                      lerp(u, grad(perm_[AB], x, y - 1, z), grad(perm_[BB], x - 1, y - 1, z))),
                 lerp(v,
                      lerp(u, grad(perm_[AA + 1], x, y, z - 1),
                           grad(perm_[BA + 1], x - 1, y, z - 1)),
                      lerp(u, grad(perm_[AB + 1], x, y - 1, z - 1),
                           grad(perm_[BB + 1], x - 1, y - 1, z - 1))));
        return std::clamp(value, -1.0, 1.0);
    }

private:
    static double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }
    static double lerp(double t, double a, double b) { return a + t * (b - a); }
    static double grad(int hash, double x, double y, double z)
    {
        int const h = hash & 15;
        double const u = h < 8 ? x : y;
        double const v = h < 4 ? y : (h == 12 || h == 14 ? x : z);
        return ((h & 1) ? -u : u) + ((h & 2) ? -v : v);
    }

    std::array<int, 512> perm_{};
};

inline double noise3(std::uint64_t seed, Vec3 const& p)
{
    return GradientNoise(seed)(p);
}

namespace detail {

struct NoiseFrame {
    Vec3 origin;
    double scale;     // frequency / diagonal
    double diagonal;
};

inline NoiseFrame noise_frame(TriMesh const& mesh, double frequency)
{
    Aabb const box = bounding_box(mesh);
    double const diag = box.extent();
    return {box.min, frequency / (diag > 0.0 ? diag : 1.0), diag};
}

}  // namespace detail

/*
 * Adds independent noise per RGB channel, at most n_tex in magnitude, and
 * clamps to [0,1]. Geometry is untouched.
 */
inline TriMesh texture_noise(TriMesh mesh, DegradationParams const& params)
{
    params.validate();
    if (!mesh.has_colors())
        throw ValidationError("texture noise needs vertex colors");
    if (params.n_tex == 0.0 || mesh.vertices.empty())
        return mesh;
    GradientNoise const noise(params.seed);
    auto const frame = detail::noise_frame(mesh, params.frequency);
    std::array<Vec3, 3> const offsets = {Vec3(0, 0, 0), Vec3(17.17, 0, 0), Vec3(0, 17.17, 0)};
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        Vec3 const q = frame.scale * mesh.vertices[i];
        for (int c = 0; c < 3; ++c)
            mesh.colors[i][c] =
                std::clamp(mesh.colors[i][c] + params.n_tex * noise(q + offsets[c]), 0.0, 1.0);
    }
    return mesh;
}

/*
 * Moves every vertex along its normal by at most n_geom * scene extent.
 * Existing normals are used when present; normals are recomputed after.
 */
inline TriMesh geometry_noise(TriMesh mesh, DegradationParams const& params)
{
    params.validate();
    if (mesh.faces.empty())
        throw ValidationError("geometry noise needs a mesh with faces");
    if (params.n_geom == 0.0)
        return mesh;
    if (!mesh.has_normals())
        mesh = compute_vertex_normals(std::move(mesh));
    GradientNoise const noise(params.seed);
    auto const frame = detail::noise_frame(mesh, params.frequency);
    double const amplitude = params.n_geom * frame.diagonal;
    std::vector<Vec3> moved(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
        moved[i] = mesh.vertices[i] +
                   amplitude * noise(frame.scale * mesh.vertices[i]) * mesh.normals[i];
    mesh.vertices = std::move(moved);
    return compute_vertex_normals(std::move(mesh));
}

namespace detail {

using Quadric = Eigen::Matrix4d;

inline Quadric plane_quadric(Vec3 const& n, Vec3 const& point, double weight)
{
    Eigen::Vector4d p(n.x(), n.y(), n.z(), -n.dot(point));
    return weight * (p * p.transpose());
}

inline std::uint64_t splitmix64(std::uint64_t& state)
{
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class EdgeCollapser {
public:
    EdgeCollapser(TriMesh const& mesh, std::uint64_t seed)
        : pos_(mesh.vertices),
          faces_(mesh.faces),
          face_alive_(mesh.faces.size(), 1),
          vertex_faces_(mesh.vertices.size()),
          removed_(mesh.vertices.size(), 0),
          stamp_(mesh.vertices.size(), 0),
          tiebreak_(mesh.vertices.size()),
          quadric_(mesh.vertices.size(), Quadric::Zero())
    {
        std::uint64_t state = seed;
        for (auto& t : tiebreak_)
            t = splitmix64(state);
        for (std::uint32_t f = 0; f < faces_.size(); ++f) {
            auto const& face = faces_[f];
            if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
                face_alive_[f] = 0;
                continue;
            }
            for (auto v : face)
                vertex_faces_[v].push_back(f);
        }
        build_quadrics();
    }

    /// Performs up to `target` collapses; returns how many succeeded.
    std::size_t run(std::size_t target)
    {
        std::size_t performed = 0;
        while (performed < target) {
            std::size_t const before = performed;
            fill_queue();
            while (!queue_.empty() && performed < target) {
                Candidate const c = queue_.top();
                queue_.pop();
                if (removed_[c.from] || removed_[c.to] || c.stamp_from != stamp_[c.from] ||
                    c.stamp_to != stamp_[c.to])
                    continue;
                if (!legal(c.from, c.to))
                    continue;
                collapse(c.from, c.to);
                ++performed;
            }
            queue_ = {};
            if (performed == before)
                break;
        }
        return performed;
    }

    TriMesh result(TriMesh const& source) const
    {
        TriMesh out;
        std::vector<std::uint32_t> remap(pos_.size(), 0);
        std::uint32_t next = 0;
        for (std::size_t i = 0; i < pos_.size(); ++i) {
            if (removed_[i])
                continue;
            remap[i] = next++;
            out.vertices.push_back(source.vertices[i]);
            if (source.has_colors())
                out.colors.push_back(source.colors[i]);
            if (source.has_normals())
                out.normals.push_back(source.normals[i]);
            if (!source.uvs.empty())
                out.uvs.push_back(source.uvs[i]);
        }
        for (std::size_t f = 0; f < faces_.size(); ++f) {
            if (!face_alive_[f])
                continue;
            auto const& face = faces_[f];
            out.faces.push_back({remap[face[0]], remap[face[1]], remap[face[2]]});
        }
        out.texture = source.texture;
        return out;
    }

private:
    struct Candidate {
        double cost;
        std::uint64_t tiebreak;
        std::uint32_t from, to;
        std::uint32_t stamp_from, stamp_to;

        // Inverted for std::priority_queue: smallest cost on top.
        bool operator<(Candidate const& o) const
        {
            if (cost != o.cost)
                return cost > o.cost;
            if (tiebreak != o.tiebreak)
                return tiebreak > o.tiebreak;
            if (from != o.from)
                return from > o.from;
            return to > o.to;
        }
    };

    void build_quadrics()
    {
        for (std::uint32_t f = 0; f < faces_.size(); ++f) {
            if (!face_alive_[f])
                continue;
            auto const& face = faces_[f];
            Vec3 const n = (pos_[face[1]] - pos_[face[0]]).cross(pos_[face[2]] - pos_[face[0]]);
            double const len = n.norm();
            if (len <= 0.0)
                continue;
            Quadric const q = plane_quadric(n / len, pos_[face[0]], 0.5 * len);
            for (auto v : face)
                quadric_[v] += q;
        }
        // Boundary edges get a perpendicular constraint plane so open
        // borders do not erode.
        for (std::uint32_t f = 0; f < faces_.size(); ++f) {
            if (!face_alive_[f])
                continue;
            auto const& face = faces_[f];
            Vec3 const n = (pos_[face[1]] - pos_[face[0]]).cross(pos_[face[2]] - pos_[face[0]]);
            for (int k = 0; k < 3; ++k) {
                std::uint32_t const a = face[k], b = face[(k + 1) % 3];
                if (shared_faces(a, b) != 1)
                    continue;
                Vec3 const edge = pos_[b] - pos_[a];
                Vec3 const perp = edge.cross(n);
                double const len = perp.norm();
                if (len <= 0.0)
                    continue;
                Quadric const q =
                    plane_quadric(perp / len, pos_[a], kBoundaryWeight * edge.squaredNorm());
                quadric_[a] += q;
                quadric_[b] += q;
            }
        }
    }

    static constexpr double kBoundaryWeight = 100.0;

    std::size_t shared_faces(std::uint32_t a, std::uint32_t b) const
    {
        std::size_t n = 0;
        for (auto f : vertex_faces_[a])
            if (contains(faces_[f], b))
                ++n;
        return n;
    }

    static bool contains(Face const& f, std::uint32_t v)
    {
        return f[0] == v || f[1] == v || f[2] == v;
    }

    std::vector<std::uint32_t> neighbors(std::uint32_t v) const
    {
        std::vector<std::uint32_t> out;
        for (auto f : vertex_faces_[v])
            for (auto w : faces_[f])
                if (w != v)
                    out.push_back(w);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    bool is_boundary_vertex(std::uint32_t v) const
    {
        for (auto w : neighbors(v))
            if (shared_faces(v, w) == 1)
                return true;
        return false;
    }

    double cost(std::uint32_t from, std::uint32_t to) const
    {
        Eigen::Vector4d const p(pos_[to].x(), pos_[to].y(), pos_[to].z(), 1.0);
        return p.dot((quadric_[from] + quadric_[to]) * p);
    }

    void push(std::uint32_t from, std::uint32_t to)
    {
        queue_.push({cost(from, to), tiebreak_[from] ^ (tiebreak_[to] * 0x9E3779B97F4A7C15ULL),
                     from, to, stamp_[from], stamp_[to]});
    }

    void fill_queue()
    {
        for (std::uint32_t v = 0; v < pos_.size(); ++v) {
            if (removed_[v])
                continue;
            for (auto w : neighbors(v))
                push(v, w);
        }
    }

    bool legal(std::uint32_t from, std::uint32_t to) const
    {
        std::size_t const shared = shared_faces(from, to);
        if (shared == 0)
            return false;
        // Link condition: the only common neighbors are the apexes of the
        // faces on the edge; anything else would pinch the surface.
        auto const nf = neighbors(from);
        auto const nt = neighbors(to);
        std::vector<std::uint32_t> common;
        std::set_intersection(nf.begin(), nf.end(), nt.begin(), nt.end(),
                              std::back_inserter(common));
        if (common.size() != shared)
            return false;
        if (shared == 2 && is_boundary_vertex(from))
            return false;

        for (auto f : vertex_faces_[from]) {
            Face const& face = faces_[f];
            if (contains(face, to))
                continue;
            Face moved = face;
            for (auto& v : moved)
                if (v == from)
                    v = to;
            Vec3 const n_old =
                (pos_[face[1]] - pos_[face[0]]).cross(pos_[face[2]] - pos_[face[0]]);
            Vec3 const n_new =
                (pos_[moved[1]] - pos_[moved[0]]).cross(pos_[moved[2]] - pos_[moved[0]]);
            if (!(n_old.dot(n_new) > 0.0))
                return false;
            for (auto g : vertex_faces_[to])
                if (same_vertex_set(faces_[g], moved))
                    return false;
        }
        return true;
    }

    static bool same_vertex_set(Face a, Face b)
    {
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        return a == b;
    }

    void collapse(std::uint32_t from, std::uint32_t to)
    {
        for (auto f : vertex_faces_[from]) {
            Face& face = faces_[f];
            if (contains(face, to)) {
                face_alive_[f] = 0;
                for (auto v : face) {
                    if (v == from)
                        continue;
                    auto& list = vertex_faces_[v];
                    list.erase(std::remove(list.begin(), list.end(), f), list.end());
                }
            } else {
                for (auto& v : face)
                    if (v == from)
                        v = to;
                vertex_faces_[to].push_back(f);
            }
        }
        vertex_faces_[from].clear();
        removed_[from] = 1;
        quadric_[to] += quadric_[from];
        ++stamp_[to];
        for (auto w : neighbors(to)) {
            push(to, w);
            push(w, to);
        }
    }

    std::vector<Vec3> pos_;
    std::vector<Face> faces_;
    std::vector<std::uint8_t> face_alive_;
    std::vector<std::vector<std::uint32_t>> vertex_faces_;
    std::vector<std::uint8_t> removed_;
    std::vector<std::uint32_t> stamp_;
    std::vector<std::uint64_t> tiebreak_;
    std::vector<Quadric> quadric_;
    std::priority_queue<Candidate> queue_;
};

}  // namespace detail

/*
 * Removes floor(n_simp * |V|) vertices by half-edge collapses (the kept
 * endpoint retains its position and attributes), cheapest quadric error
 * first. Collapses that would flip a face, pinch the surface or pull an
 * open border inwards are skipped; if too few legal collapses exist the
 * result keeps more vertices. The seed only breaks cost ties.
 */
inline TriMesh simplify(TriMesh const& mesh, double n_simp, std::uint64_t seed,
                        std::size_t* performed = nullptr)
{
    if (!(n_simp >= 0.0 && n_simp < 1.0))
        throw ValidationError("simplification fraction must be in [0, 1)");
    mesh.validate();
    auto const target =
        static_cast<std::size_t>(std::floor(n_simp * static_cast<double>(mesh.vertex_count())));
    if (performed)
        *performed = 0;
    if (target == 0)
        return mesh;
    detail::EdgeCollapser collapser(mesh, seed);
    std::size_t const done = collapser.run(target);
    if (performed)
        *performed = done;
    return collapser.result(mesh);
}

}  // namespace rephoto
