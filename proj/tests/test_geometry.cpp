#include <cmath>

#include <gtest/gtest.h>

#include "rephoto/geometry.hpp"
#include "rephoto/image_io.hpp"
#include "rephoto/mesh_io.hpp"
#include "test_util.hpp"

using namespace rephoto;

namespace {

TriMesh octahedron()
{
    TriMesh m;
    m.vertices = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    m.faces = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4},
               {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
    return m;
}

}  // namespace

TEST(Geometry, BoundingBoxExtent)
{
    std::vector<Vec3> pts{{0, 0, 0}, {3, 4, 0}, {1, 1, 0}};
    auto const box = bounding_box(pts);
    EXPECT_EQ(box.min, Vec3(0, 0, 0));
    EXPECT_EQ(box.max, Vec3(3, 4, 0));
    EXPECT_DOUBLE_EQ(box.extent(), 5.0);
    EXPECT_THROW(bounding_box(std::vector<Vec3>{}), ValidationError);

    std::vector<Vec3> cube;
    for (int i = 0; i < 8; ++i)
        cube.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
    auto const unit = bounding_box(cube);
    EXPECT_EQ(unit.max, Vec3(1, 1, 1));
    EXPECT_DOUBLE_EQ(unit.extent(), std::sqrt(3.0));

    std::vector<Vec3> single{{2, -1, 7}};
    EXPECT_EQ(bounding_box(single).min, single[0]);
    EXPECT_EQ(bounding_box(single).extent(), 0.0);
}

TEST(Geometry, FlatTriangleNormals)
{
    TriMesh m;
    m.vertices = {{0, 0, 0}, {2, 0, 0}, {0, 3, 0}};
    m.faces = {{0, 1, 2}};
    for (auto const& n : compute_vertex_normals(m).normals)
        EXPECT_EQ(n, Vec3(0, 0, 1));
}

TEST(Geometry, OctahedronNormalsPointAlongAxes)
{
    auto const m = compute_vertex_normals(octahedron());
    for (std::size_t i = 0; i < m.vertex_count(); ++i)
        EXPECT_LT((m.normals[i] - m.vertices[i]).norm(), 1e-12) << i;
}

TEST(Geometry, CubeCornerNormalsAreDiagonal)
{
    TriMesh m;
    for (int i = 0; i < 8; ++i)
        m.vertices.emplace_back(i & 1 ? 1 : -1, i & 2 ? 1 : -1, i & 4 ? 1 : -1);
    m.vertices.emplace_back(0, 0, 0);  // isolated
    // Four triangles around each face center, so every corner receives the
    // same area from each of its three faces.
    auto quad = [&](int a, int b, int c, int d) {
        Vec3 const center = (m.vertices[a] + m.vertices[b] + m.vertices[c] + m.vertices[d]) / 4;
        auto const ci = static_cast<std::uint32_t>(m.vertices.size());
        m.vertices.push_back(center);
        std::uint32_t const q[4] = {std::uint32_t(a), std::uint32_t(b), std::uint32_t(c),
                                    std::uint32_t(d)};
        for (int k = 0; k < 4; ++k)
            m.faces.push_back({q[k], q[(k + 1) % 4], ci});
    };
    quad(0, 2, 3, 1);  // z = -1
    quad(4, 5, 7, 6);  // z = +1
    quad(0, 1, 5, 4);  // y = -1
    quad(2, 6, 7, 3);  // y = +1
    quad(0, 4, 6, 2);  // x = -1
    quad(1, 3, 7, 5);  // x = +1

    std::vector<std::size_t> degenerate;
    auto const out = compute_vertex_normals(m, &degenerate);
    for (int i = 0; i < 8; ++i) {
        Vec3 const expected = m.vertices[i] / std::sqrt(3.0);
        EXPECT_LT((out.normals[i] - expected).norm(), 1e-12) << i;
    }
    ASSERT_EQ(degenerate.size(), 1u);
    EXPECT_EQ(degenerate[0], 8u);
    EXPECT_EQ(out.normals[8], Vec3::UnitZ());
}

TEST(Geometry, ValidateRejectsBadMeshes)
{
    TriMesh m = octahedron();
    EXPECT_NO_THROW(m.validate());
    m.faces.push_back({0, 1, 6});
    EXPECT_THROW(m.validate(), ValidationError);
    m = octahedron();
    m.colors.resize(2);
    EXPECT_THROW(m.validate(), ValidationError);

    PointCloud c;
    c.points = {{0, 0, 0}};
    c.colors = {Rgb(1, 0, 0)};
    c.radii = {0.0};
    EXPECT_THROW(c.validate(), ValidationError);
}

class PlyRoundTrip : public ::testing::TestWithParam<PlyEncoding> {};

TEST_P(PlyRoundTrip, MeshAttributesSurvive)
{
    test::TempDir dir;
    TriMesh m = compute_vertex_normals(octahedron());
    for (std::size_t i = 0; i < m.vertex_count(); ++i)
        m.colors.push_back(Rgb(i * 40, 255 - i * 30, 7) / 255.0);
    save_ply(m, dir / "m.ply", GetParam());
    auto const back = load_mesh(dir / "m.ply");
    EXPECT_EQ(back.faces, m.faces);
    ASSERT_EQ(back.vertex_count(), m.vertex_count());
    for (std::size_t i = 0; i < m.vertex_count(); ++i) {
        EXPECT_EQ(back.vertices[i], m.vertices[i]);  // exactly representable in float
        EXPECT_EQ(back.colors[i], m.colors[i]);
        EXPECT_LT((back.normals[i] - m.normals[i]).norm(), 1e-6);
    }
}

TEST_P(PlyRoundTrip, PointCloudWithRadii)
{
    test::TempDir dir;
    PointCloud c;
    c.points = {{0.5, 0.25, -1}, {2, 3, 4}};
    c.colors = {Rgb(0, 0, 0), Rgb(1, 1, 1)};
    c.radii = {0.125, 2.5};
    save_ply(c, dir / "c.ply", GetParam());
    auto const g = load_ply(dir / "c.ply");
    ASSERT_TRUE(std::holds_alternative<PointCloud>(g));
    auto const& back = std::get<PointCloud>(g);
    EXPECT_EQ(back.points, c.points);
    EXPECT_EQ(back.colors, c.colors);
    EXPECT_EQ(back.radii, c.radii);
    EXPECT_THROW(load_mesh(dir / "c.ply"), ValidationError);
}

INSTANTIATE_TEST_SUITE_P(Encodings, PlyRoundTrip,
                         ::testing::Values(PlyEncoding::binary, PlyEncoding::ascii));

TEST(Ply, ColorlessCloudIsGray)
{
    test::TempDir dir;
    test::write_file(dir / "p.ply", "ply\nformat ascii 1.0\nelement vertex 2\n"
                                    "property double x\nproperty double y\nproperty double z\n"
                                    "end_header\n0 0 0\n1 2 3\n");
    auto const c = load_point_cloud(dir / "p.ply");
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(c.points[1], Vec3(1, 2, 3));
    EXPECT_EQ(c.colors[0], Rgb::Constant(0.5));
}

TEST(Ply, QuadFacesAreFanned)
{
    test::TempDir dir;
    test::write_file(dir / "q.ply", "ply\nformat ascii 1.0\nelement vertex 4\n"
                                    "property float x\nproperty float y\nproperty float z\n"
                                    "element face 1\nproperty list uchar int vertex_indices\n"
                                    "end_header\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n");
    auto const m = load_mesh(dir / "q.ply");
    ASSERT_EQ(m.faces.size(), 2u);
    EXPECT_EQ(m.faces[0], (Face{0, 1, 2}));
    EXPECT_EQ(m.faces[1], (Face{0, 2, 3}));
}

TEST(Ply, MalformedInputIsRejected)
{
    test::TempDir dir;
    test::write_file(dir / "a.ply", "not a ply\n");
    EXPECT_THROW(load_ply(dir / "a.ply"), ValidationError);
    test::write_file(dir / "b.ply", "ply\nformat ascii 1.0\nelement vertex 1\n"
                                    "property float x\nproperty float y\nproperty float z\n"
                                    "element face 1\nproperty list uchar int vertex_indices\n"
                                    "end_header\n0 0 0\n3 0 0 5\n");
    EXPECT_THROW(load_ply(dir / "b.ply"), ValidationError);
    test::write_file(dir / "c.ply", "ply\nformat binary_little_endian 1.0\nelement vertex 3\n"
                                    "property float x\nproperty float y\nproperty float z\n"
                                    "end_header\n\x01\x02");
    EXPECT_THROW(load_ply(dir / "c.ply"), ValidationError);
    EXPECT_THROW(load_ply(dir / "missing.ply"), IoError);
}

TEST(Obj, QuadFanAndNegativeIndices)
{
    test::TempDir dir;
    test::write_file(dir / "q.obj", "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\n"
                                    "vn 0 0 1\nf -4 -3 -2 -1\n");
    auto const m = load_obj(dir / "q.obj");
    ASSERT_EQ(m.vertex_count(), 4u);
    ASSERT_EQ(m.faces.size(), 2u);
    EXPECT_EQ(m.faces[0], (Face{0, 1, 2}));
    EXPECT_EQ(m.faces[1], (Face{0, 2, 3}));
    EXPECT_FALSE(m.has_texture());
}

TEST(Obj, TexturedCubeSplitsSeamVertices)
{
    test::TempDir dir;
    RgbImage tex(2, 2, Rgb(0.2, 0.4, 0.6));
    save_image(tex, dir / "tex.png");
    test::write_file(dir / "cube.mtl", "newmtl skin\nmap_Kd tex.png\n");
    std::string obj = "mtllib cube.mtl\nusemtl skin\n";
    for (int i = 0; i < 8; ++i)
        obj += "v " + std::to_string(i & 1) + " " + std::to_string((i >> 1) & 1) + " " +
               std::to_string((i >> 2) & 1) + "\n";
    // Every face gets its own four texcoords, as in a cube map atlas.
    for (int f = 0; f < 6; ++f)
        obj += "vt 0 0\nvt 1 0\nvt 1 1\nvt 0 1\n";
    int const quads[6][4] = {{1, 3, 4, 2}, {5, 6, 8, 7}, {1, 2, 6, 5},
                             {3, 7, 8, 4}, {1, 5, 7, 3}, {2, 4, 8, 6}};
    for (int f = 0; f < 6; ++f) {
        obj += "f";
        for (int k = 0; k < 4; ++k)
            obj += " " + std::to_string(quads[f][k]) + "/" + std::to_string(4 * f + k + 1);
        obj += "\n";
    }
    test::write_file(dir / "cube.obj", obj);
    auto const m = load_obj(dir / "cube.obj");
    EXPECT_EQ(m.vertex_count(), 24u);
    EXPECT_EQ(m.faces.size(), 12u);
    ASSERT_TRUE(m.has_texture());
    EXPECT_EQ(m.texture->width(), 2);
    EXPECT_EQ(m.uvs.size(), 24u);
}

TEST(Obj, BadReferencesAreRejected)
{
    test::TempDir dir;
    test::write_file(dir / "a.obj", "v 0 0 0\nv 1 0 0\nf 1 2 3\n");
    EXPECT_THROW(load_obj(dir / "a.obj"), ValidationError);
    test::write_file(dir / "b.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2\n");
    EXPECT_THROW(load_obj(dir / "b.obj"), ValidationError);
    test::write_file(dir / "c.obj", "mtllib none.mtl\n");
    EXPECT_THROW(load_obj(dir / "c.obj"), IoError);
    EXPECT_THROW(load_mesh(dir / "x.stl"), ValidationError);
}
