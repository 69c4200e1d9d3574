#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "rephoto/error.hpp"
#include "rephoto/file_util.hpp"
#include "rephoto/geometry.hpp"
#include "rephoto/image_io.hpp"

namespace rephoto {

namespace ply {

enum class Type { int8, uint8, int16, uint16, int32, uint32, float32, float64 };

inline Type parse_type(std::string const& name)
{
    static std::map<std::string, Type> const table = {
        {"char", Type::int8},     {"int8", Type::int8},
        {"uchar", Type::uint8},   {"uint8", Type::uint8},
        {"short", Type::int16},   {"int16", Type::int16},
        {"ushort", Type::uint16}, {"uint16", Type::uint16},
        {"int", Type::int32},     {"int32", Type::int32},
        {"uint", Type::uint32},   {"uint32", Type::uint32},
        {"float", Type::float32}, {"float32", Type::float32},
        {"double", Type::float64}, {"float64", Type::float64}};
    auto it = table.find(name);
    if (it == table.end())
        throw ValidationError("PLY: unknown property type '" + name + "'");
    return it->second;
}

inline std::size_t type_size(Type t)
{
    switch (t) {
    case Type::int8:
    case Type::uint8: return 1;
    case Type::int16:
    case Type::uint16: return 2;
    case Type::int32:
    case Type::uint32:
    case Type::float32: return 4;
    case Type::float64: return 8;
    }
    return 0;
}

inline bool is_integer(Type t) { return t != Type::float32 && t != Type::float64; }

struct Property {
    std::string name;
    Type type = Type::float32;
    bool is_list = false;
    Type count_type = Type::uint8;
};

struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<Property> properties;
    // Decoded data: one column per scalar property, flattened lists with
    // offsets for list properties.
    std::map<std::string, std::vector<double>> scalars;
    std::map<std::string, std::vector<double>> list_values;
    std::map<std::string, std::vector<std::size_t>> list_offsets;

    Property const* find(std::string const& prop) const
    {
        for (auto const& p : properties)
            if (p.name == prop)
                return &p;
        return nullptr;
    }
};

enum class Format { ascii, binary_little_endian };

class BinaryReader {
public:
    explicit BinaryReader(std::istream& in) : in_(in) {}

    double read(Type t)
    {
        unsigned char buf[8];
        std::size_t const n = type_size(t);
        in_.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n));
        if (!in_)
            throw ValidationError("PLY: unexpected end of binary data");
        switch (t) {
        case Type::int8: return decode<std::int8_t>(buf);
        case Type::uint8: return decode<std::uint8_t>(buf);
        case Type::int16: return decode<std::int16_t>(buf);
        case Type::uint16: return decode<std::uint16_t>(buf);
        case Type::int32: return decode<std::int32_t>(buf);
        case Type::uint32: return decode<std::uint32_t>(buf);
        case Type::float32: return decode<float>(buf);
        case Type::float64: return decode<double>(buf);
        }
        return 0.0;
    }

private:
    template <typename T>
    static double decode(unsigned char const* buf)
    {
        static_assert(std::endian::native == std::endian::little);
        T v;
        std::memcpy(&v, buf, sizeof(T));
        return static_cast<double>(v);
    }

    std::istream& in_;
};

class AsciiReader {
public:
    explicit AsciiReader(std::istream& in) : in_(in) {}

    double read(Type)
    {
        std::string token;
        if (!(in_ >> token))
            throw ValidationError("PLY: unexpected end of ascii data");
        double v = 0.0;
        auto const* first = token.data();
        auto const* last = token.data() + token.size();
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last)
            throw ValidationError("PLY: bad number '" + token + "'");
        return v;
    }

private:
    std::istream& in_;
};

template <typename Reader>
void read_body(Reader& reader, std::vector<Element>& elements)
{
    for (auto& el : elements) {
        for (auto const& p : el.properties) {
            if (p.is_list) {
                el.list_offsets[p.name].reserve(el.count + 1);
                el.list_offsets[p.name].push_back(0);
            } else {
                el.scalars[p.name].reserve(el.count);
            }
        }
        for (std::size_t i = 0; i < el.count; ++i) {
            for (auto const& p : el.properties) {
                if (p.is_list) {
                    double const n = reader.read(p.count_type);
                    if (n < 0 || n > 1e6)
                        throw ValidationError("PLY: implausible list length");
                    auto& values = el.list_values[p.name];
                    for (int k = 0; k < static_cast<int>(n); ++k)
                        values.push_back(reader.read(p.type));
                    el.list_offsets[p.name].push_back(values.size());
                } else {
                    el.scalars[p.name].push_back(reader.read(p.type));
                }
            }
        }
    }
}

inline std::vector<Element> read_file(std::filesystem::path const& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open PLY: " + path.string());
    std::string line;
    std::getline(in, line);
    if (line.rfind("ply", 0) != 0)
        throw ValidationError("not a PLY file: " + path.string());

    std::vector<Element> elements;
    std::optional<Format> format;
    bool header_done = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        std::istringstream ls(line);
        std::string keyword;
        ls >> keyword;
        if (keyword.empty() || keyword == "comment" || keyword == "obj_info")
            continue;
        if (keyword == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "ascii")
                format = Format::ascii;
            else if (fmt == "binary_little_endian")
                format = Format::binary_little_endian;
            else
                throw ValidationError("PLY: unsupported format '" + fmt + "'");
        } else if (keyword == "element") {
            Element el;
            long long count = -1;
            ls >> el.name >> count;
            if (!ls || count < 0)
                throw ValidationError("PLY: malformed element line '" + line + "'");
            el.count = static_cast<std::size_t>(count);
            elements.push_back(std::move(el));
        } else if (keyword == "property") {
            if (elements.empty())
                throw ValidationError("PLY: property before any element");
            Property p;
            std::string type;
            ls >> type;
            if (type == "list") {
                std::string count_type, item_type;
                ls >> count_type >> item_type >> p.name;
                p.is_list = true;
                p.count_type = parse_type(count_type);
                p.type = parse_type(item_type);
                if (!is_integer(p.count_type))
                    throw ValidationError("PLY: list count type must be integral");
            } else {
                p.type = parse_type(type);
                ls >> p.name;
            }
            if (p.name.empty())
                throw ValidationError("PLY: property without a name");
            elements.back().properties.push_back(p);
        } else if (keyword == "end_header") {
            header_done = true;
            break;
        } else {
            throw ValidationError("PLY: unexpected header line '" + line + "'");
        }
    }
    if (!header_done)
        throw ValidationError("PLY: header not terminated");
    if (!format)
        throw ValidationError("PLY: missing format line");

    if (*format == Format::ascii) {
        AsciiReader reader(in);
        read_body(reader, elements);
    } else {
        BinaryReader reader(in);
        read_body(reader, elements);
    }
    return elements;
}

}  // namespace ply

using GeometryVariant = std::variant<TriMesh, PointCloud>;

namespace detail {

inline double color_scale(ply::Property const* p)
{
    if (!p)
        return 1.0;
    switch (p->type) {
    case ply::Type::uint8: return 1.0 / 255.0;
    case ply::Type::uint16: return 1.0 / 65535.0;
    default: return 1.0;
    }
}

struct PlyVertexData {
    std::vector<Vec3> positions;
    std::vector<Rgb> colors;
    std::vector<Vec3> normals;
    std::vector<double> radii;
};

inline PlyVertexData extract_vertices(ply::Element const& el)
{
    for (char const* key : {"x", "y", "z"})
        if (!el.find(key) || el.find(key)->is_list)
            throw ValidationError(std::string("PLY: vertex element lacks scalar '") + key + "'");
    PlyVertexData out;
    auto const& xs = el.scalars.at("x");
    auto const& ys = el.scalars.at("y");
    auto const& zs = el.scalars.at("z");
    out.positions.resize(el.count);
    for (std::size_t i = 0; i < el.count; ++i)
        out.positions[i] = Vec3(xs[i], ys[i], zs[i]);

    auto scalar = [&](char const* name) -> std::vector<double> const* {
        auto const* p = el.find(name);
        if (!p || p->is_list)
            return nullptr;
        return &el.scalars.at(name);
    };
    auto const* r = scalar("red");
    auto const* g = scalar("green");
    auto const* b = scalar("blue");
    if (r && g && b) {
        double const s = color_scale(el.find("red"));
        out.colors.resize(el.count);
        for (std::size_t i = 0; i < el.count; ++i)
            out.colors[i] = clamp01(Rgb((*r)[i], (*g)[i], (*b)[i]) * s);
    }
    auto const* nx = scalar("nx");
    auto const* ny = scalar("ny");
    auto const* nz = scalar("nz");
    if (nx && ny && nz) {
        out.normals.resize(el.count);
        for (std::size_t i = 0; i < el.count; ++i)
            out.normals[i] = Vec3((*nx)[i], (*ny)[i], (*nz)[i]);
    }
    if (auto const* rad = scalar("radius"))
        out.radii = *rad;
    return out;
}

inline std::vector<Face> extract_faces(ply::Element const& el, std::size_t vertex_count)
{
    std::string key;
    for (char const* candidate : {"vertex_indices", "vertex_index"})
        if (auto const* p = el.find(candidate); p && p->is_list)
            key = candidate;
    if (key.empty())
        throw ValidationError("PLY: face element lacks a vertex_indices list");
    auto const& values = el.list_values.count(key) ? el.list_values.at(key)
                                                   : std::vector<double>{};
    auto const& offsets = el.list_offsets.at(key);
    std::vector<Face> faces;
    faces.reserve(el.count);
    for (std::size_t f = 0; f < el.count; ++f) {
        std::size_t const begin = offsets[f];
        std::size_t const n = offsets[f + 1] - begin;
        if (n < 3)
            throw ValidationError("PLY: face with fewer than 3 vertices");
        auto index = [&](std::size_t k) {
            double const v = values[begin + k];
            if (v < 0 || v >= static_cast<double>(vertex_count))
                throw ValidationError("PLY: face index out of range");
            return static_cast<std::uint32_t>(v);
        };
        for (std::size_t k = 1; k + 1 < n; ++k)
            faces.push_back({index(0), index(k), index(k + 1)});
    }
    return faces;
}

}  // namespace detail

/// A PLY without a face element loads as a PointCloud, otherwise as a
/// TriMesh. Colorless point clouds get mid-gray.
inline GeometryVariant load_ply(std::filesystem::path const& path)
{
    auto const elements = ply::read_file(path);
    ply::Element const* vertex_el = nullptr;
    ply::Element const* face_el = nullptr;
    for (auto const& el : elements) {
        if (el.name == "vertex")
            vertex_el = &el;
        else if (el.name == "face")
            face_el = &el;
    }
    if (!vertex_el)
        throw ValidationError("PLY: no vertex element in " + path.string());
    auto vd = detail::extract_vertices(*vertex_el);

    if (!face_el) {
        PointCloud cloud;
        cloud.points = std::move(vd.positions);
        cloud.colors = vd.colors.empty()
                           ? std::vector<Rgb>(cloud.points.size(), Rgb::Constant(0.5))
                           : std::move(vd.colors);
        cloud.normals = std::move(vd.normals);
        cloud.radii = std::move(vd.radii);
        cloud.validate();
        return cloud;
    }
    TriMesh mesh;
    mesh.faces = detail::extract_faces(*face_el, vd.positions.size());
    mesh.vertices = std::move(vd.positions);
    mesh.colors = std::move(vd.colors);
    mesh.normals = std::move(vd.normals);
    mesh.validate();
    return mesh;
}

enum class PlyEncoding { binary, ascii };

namespace detail {

struct PlyWriteSource {
    std::span<Vec3 const> positions;
    std::span<Rgb const> colors;
    std::span<Vec3 const> normals;
    std::span<double const> radii;
    std::span<Face const> faces;
    bool write_faces = false;
};

template <typename T>
void put(std::ostream& out, T v)
{
    static_assert(std::endian::native == std::endian::little);
    out.write(reinterpret_cast<char const*>(&v), sizeof(T));
}

inline void write_ply(std::filesystem::path const& path, PlyWriteSource const& src,
                      PlyEncoding encoding)
{
    atomic_write(path, [&](std::filesystem::path const& tmp) {
        std::ofstream out(tmp, std::ios::binary);
        if (!out)
            throw IoError("cannot open for writing: " + tmp.string());
        bool const ascii = encoding == PlyEncoding::ascii;
        out << "ply\nformat " << (ascii ? "ascii" : "binary_little_endian")
            << " 1.0\ncomment rephoto\n";
        out << "element vertex " << src.positions.size() << "\n"
            << "property float x\nproperty float y\nproperty float z\n";
        if (!src.normals.empty())
            out << "property float nx\nproperty float ny\nproperty float nz\n";
        if (!src.colors.empty())
            out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
        if (!src.radii.empty())
            out << "property float radius\n";
        if (src.write_faces)
            out << "element face " << src.faces.size() << "\n"
                << "property list uchar int vertex_indices\n";
        out << "end_header\n";

        if (ascii)
            out << std::setprecision(9);
        for (std::size_t i = 0; i < src.positions.size(); ++i) {
            auto emit_float = [&](double v, bool last) {
                if (ascii)
                    out << static_cast<float>(v) << (last ? '\n' : ' ');
                else
                    put(out, static_cast<float>(v));
            };
            auto emit_byte = [&](double v, bool last) {
                if (ascii)
                    out << static_cast<int>(to_byte(v)) << (last ? '\n' : ' ');
                else
                    put(out, to_byte(v));
            };
            bool const has_n = !src.normals.empty();
            bool const has_c = !src.colors.empty();
            bool const has_r = !src.radii.empty();
            Vec3 const& p = src.positions[i];
            emit_float(p.x(), false);
            emit_float(p.y(), false);
            emit_float(p.z(), !has_n && !has_c && !has_r);
            if (has_n) {
                Vec3 const& n = src.normals[i];
                emit_float(n.x(), false);
                emit_float(n.y(), false);
                emit_float(n.z(), !has_c && !has_r);
            }
            if (has_c) {
                Rgb const& c = src.colors[i];
                emit_byte(c.x(), false);
                emit_byte(c.y(), false);
                emit_byte(c.z(), !has_r);
            }
            if (has_r)
                emit_float(src.radii[i], true);
        }
        for (auto const& f : src.faces) {
            if (ascii) {
                out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
            } else {
                put<std::uint8_t>(out, 3);
                for (auto idx : f)
                    put(out, static_cast<std::int32_t>(idx));
            }
        }
        if (!out)
            throw IoError("failed writing PLY " + path.string());
    });
}

}  // namespace detail

inline void save_ply(TriMesh const& mesh, std::filesystem::path const& path,
                     PlyEncoding encoding = PlyEncoding::binary)
{
    mesh.validate();
    detail::write_ply(path,
                      {mesh.vertices, mesh.colors, mesh.normals, {}, mesh.faces, true},
                      encoding);
}

inline void save_ply(PointCloud const& cloud, std::filesystem::path const& path,
                     PlyEncoding encoding = PlyEncoding::binary)
{
    cloud.validate();
    detail::write_ply(path, {cloud.points, cloud.colors, cloud.normals, cloud.radii, {}, false},
                      encoding);
}

namespace detail {

inline std::string trim(std::string s)
{
    auto const not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

/// material name -> map_Kd path (resolved against the MTL directory)
inline std::map<std::string, std::filesystem::path>
read_mtl(std::filesystem::path const& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open material library: " + path.string());
    std::map<std::string, std::filesystem::path> maps;
    std::string current;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        std::istringstream ls(line);
        std::string keyword;
        ls >> keyword;
        if (keyword == "newmtl") {
            std::getline(ls, current);
            current = trim(current);
        } else if (keyword == "map_Kd") {
            // Options such as -s or -o may precede the file name; it is the
            // last token.
            std::string token, last;
            while (ls >> token)
                last = token;
            if (last.empty())
                throw ValidationError("MTL: map_Kd without a file name");
            maps[current] = path.parent_path() / last;
        }
    }
    return maps;
}

inline long parse_obj_index(std::string const& token, std::size_t count, char const* what)
{
    long idx = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), idx);
    if (ec != std::errc() || ptr != token.data() + token.size() || idx == 0)
        throw ValidationError(std::string("OBJ: bad ") + what + " index '" + token + "'");
    long const resolved = idx > 0 ? idx - 1 : static_cast<long>(count) + idx;
    if (resolved < 0 || resolved >= static_cast<long>(count))
        throw ValidationError(std::string("OBJ: face references undefined ") + what +
                              " " + token);
    return resolved;
}

}  // namespace detail

/*
 * Wavefront OBJ with an optional MTL providing one diffuse texture.
 * Polygons are fan-triangulated; vertices are split wherever one position
 * is used with several texture coordinates. "v x y z r g b" vertex colors
 * are honored when every vertex carries them.
 */
inline TriMesh load_obj(std::filesystem::path const& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open OBJ: " + path.string());

    std::vector<Vec3> positions;
    std::vector<Rgb> position_colors;
    std::vector<Vec2> texcoords;
    std::map<std::string, std::filesystem::path> materials;
    std::optional<std::filesystem::path> texture_path;

    TriMesh mesh;
    std::map<std::pair<long, long>, std::uint32_t> corner_index;
    std::vector<long> corner_position;
    std::vector<long> corner_texcoord;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = detail::trim(line);
        if (line.empty() || line[0] == '#')
            continue;
        std::istringstream ls(line);
        std::string keyword;
        ls >> keyword;
        if (keyword == "v") {
            std::vector<double> vals;
            double d;
            while (ls >> d)
                vals.push_back(d);
            if (vals.size() < 3)
                throw ValidationError("OBJ line " + std::to_string(line_no) +
                                      ": vertex needs 3 coordinates");
            positions.emplace_back(vals[0], vals[1], vals[2]);
            if (vals.size() >= 6)
                position_colors.push_back(clamp01(Rgb(vals[3], vals[4], vals[5])));
        } else if (keyword == "vt") {
            double u = 0.0, v = 0.0;
            if (!(ls >> u >> v))
                throw ValidationError("OBJ line " + std::to_string(line_no) +
                                      ": texture coordinate needs 2 values");
            texcoords.emplace_back(u, v);
        } else if (keyword == "mtllib") {
            std::string name;
            std::getline(ls, name);
            auto lib = detail::read_mtl(path.parent_path() / detail::trim(name));
            materials.insert(lib.begin(), lib.end());
        } else if (keyword == "usemtl") {
            std::string name;
            std::getline(ls, name);
            auto it = materials.find(detail::trim(name));
            if (it != materials.end()) {
                if (texture_path && *texture_path != it->second)
                    throw ValidationError("OBJ: more than one texture map is not supported");
                texture_path = it->second;
            }
        } else if (keyword == "f") {
            std::vector<std::uint32_t> polygon;
            std::string corner;
            while (ls >> corner) {
                std::string vs = corner, ts;
                auto slash = corner.find('/');
                if (slash != std::string::npos) {
                    vs = corner.substr(0, slash);
                    auto rest = corner.substr(slash + 1);
                    auto slash2 = rest.find('/');
                    ts = slash2 == std::string::npos ? rest : rest.substr(0, slash2);
                }
                long const vi = detail::parse_obj_index(vs, positions.size(), "vertex");
                long const ti = ts.empty()
                                    ? -1
                                    : detail::parse_obj_index(ts, texcoords.size(), "texcoord");
                auto [it, inserted] = corner_index.try_emplace(
                    {vi, ti}, static_cast<std::uint32_t>(corner_position.size()));
                if (inserted) {
                    corner_position.push_back(vi);
                    corner_texcoord.push_back(ti);
                }
                polygon.push_back(it->second);
            }
            if (polygon.size() < 3)
                throw ValidationError("OBJ line " + std::to_string(line_no) +
                                      ": face with fewer than 3 vertices");
            for (std::size_t k = 1; k + 1 < polygon.size(); ++k)
                mesh.faces.push_back({polygon[0], polygon[k], polygon[k + 1]});
        }
        // vn, g, o, s and other records are not needed for rendering.
    }

    // Materials may be declared without usemtl; a lone map is still used.
    if (!texture_path && materials.size() == 1)
        texture_path = materials.begin()->second;

    std::size_t const n = corner_position.size();
    mesh.vertices.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        mesh.vertices[i] = positions[corner_position[i]];
    if (!position_colors.empty() && position_colors.size() == positions.size()) {
        mesh.colors.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            mesh.colors[i] = position_colors[corner_position[i]];
    }
    if (texture_path) {
        if (!std::filesystem::exists(*texture_path))
            throw IoError("OBJ texture not found: " + texture_path->string());
        mesh.texture = load_image(*texture_path);
        mesh.uvs.resize(n, Vec2::Zero());
        for (std::size_t i = 0; i < n; ++i)
            if (corner_texcoord[i] >= 0)
                mesh.uvs[i] = texcoords[corner_texcoord[i]];
    }
    mesh.validate();
    return mesh;
}

/// Loads a triangle mesh from .ply or .obj.
inline TriMesh load_mesh(std::filesystem::path const& path)
{
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".obj")
        return load_obj(path);
    if (ext != ".ply")
        throw ValidationError("unsupported mesh format: " + path.string());
    auto g = load_ply(path);
    if (auto* mesh = std::get_if<TriMesh>(&g))
        return std::move(*mesh);
    throw ValidationError("expected a mesh but " + path.string() + " has no faces");
}

/// Loads a point cloud; the vertices of a mesh PLY are accepted as points.
inline PointCloud load_point_cloud(std::filesystem::path const& path)
{
    auto g = load_ply(path);
    if (auto* cloud = std::get_if<PointCloud>(&g))
        return std::move(*cloud);
    auto& mesh = std::get<TriMesh>(g);
    PointCloud cloud;
    cloud.points = std::move(mesh.vertices);
    cloud.colors = mesh.colors.empty()
                       ? std::vector<Rgb>(cloud.points.size(), Rgb::Constant(0.5))
                       : std::move(mesh.colors);
    cloud.normals = std::move(mesh.normals);
    return cloud;
}

}  // namespace rephoto
