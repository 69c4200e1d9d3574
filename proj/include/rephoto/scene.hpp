#pragma once

#include <cmath>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include "rephoto/error.hpp"
#include "rephoto/file_util.hpp"

namespace rephoto {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/*
 * Pinhole camera without distortion. World-to-camera: x_c = R * x_w + t.
 * The camera looks down +z, image x runs right and y runs down, and pixel
 * centers sit at integer coordinates.
 */
struct PinholeCamera {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 1;
    int height = 1;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 to_camera(Vec3 const& world) const { return rotation * world + translation; }
    Vec3 center() const { return -rotation.transpose() * translation; }

    /// Throws ValidationError if an invariant is violated.
    void validate() const
    {
        if (!(fx > 0.0) || !(fy > 0.0))
            throw ValidationError("camera focal lengths must be positive");
        if (width < 1 || height < 1)
            throw ValidationError("camera image size must be at least 1x1");
        if (!rotation.allFinite() || !translation.allFinite() ||
            !std::isfinite(cx) || !std::isfinite(cy))
            throw ValidationError("camera parameters must be finite");
        double const ortho = (rotation * rotation.transpose() - Mat3::Identity())
                                 .cwiseAbs()
                                 .maxCoeff();
        if (ortho > 1e-6)
            throw ValidationError("camera rotation is not orthonormal");
        if (std::abs(rotation.determinant() - 1.0) > 1e-6)
            throw ValidationError("camera rotation must have determinant +1");
    }
};

struct Projection {
    Vec2 pixel;  // (u, v)
    double depth = 0.0;
    bool behind = false;  // depth <= 0; pixel is meaningless then
};

inline Projection project(PinholeCamera const& camera, Vec3 const& world)
{
    Vec3 const pc = camera.to_camera(world);
    Projection p;
    p.depth = pc.z();
    if (pc.z() <= 0.0) {
        p.behind = true;
        p.pixel = Vec2::Zero();
        return p;
    }
    p.pixel = Vec2(camera.fx * pc.x() / pc.z() + camera.cx,
                   camera.fy * pc.y() / pc.z() + camera.cy);
    return p;
}

/// Inverse of project() for a known camera-space depth.
inline Vec3 unproject(PinholeCamera const& camera, double u, double v, double depth)
{
    Vec3 const pc((u - camera.cx) / camera.fx * depth,
                  (v - camera.cy) / camera.fy * depth, depth);
    return camera.rotation.transpose() * (pc - camera.translation);
}

/// Camera at `eye` looking at `target`; `up` only fixes the roll.
inline PinholeCamera look_at(Vec3 const& eye, Vec3 const& target, Vec3 const& up,
                             double focal, int width, int height)
{
    Vec3 const forward = (target - eye).normalized();
    Vec3 const right = forward.cross(up).normalized();
    Vec3 const down = forward.cross(right);
    PinholeCamera cam;
    cam.fx = cam.fy = focal;
    cam.width = width;
    cam.height = height;
    cam.cx = (width - 1) * 0.5;
    cam.cy = (height - 1) * 0.5;
    cam.rotation.row(0) = right;
    cam.rotation.row(1) = down;
    cam.rotation.row(2) = forward;
    cam.translation = -cam.rotation * eye;
    return cam;
}

struct View {
    std::string id;
    std::filesystem::path photo_path;
    PinholeCamera camera;
};

struct ViewManifest {
    std::vector<View> views;

    View const* find(std::string const& id) const
    {
        for (auto const& v : views)
            if (v.id == id)
                return &v;
        return nullptr;
    }

    void validate() const
    {
        if (views.empty())
            throw ValidationError("manifest contains no views");
        std::set<std::string> seen;
        for (auto const& v : views) {
            if (v.id.empty())
                throw ValidationError("view id must not be empty");
            if (!seen.insert(v.id).second)
                throw ValidationError("duplicate view id '" + v.id + "'");
            try {
                v.camera.validate();
            } catch (ValidationError const& e) {
                throw ValidationError("view '" + v.id + "': " + e.what());
            }
        }
    }
};

namespace detail {

inline double json_number(nlohmann::json const& j, char const* key)
{
    if (!j.contains(key) || !j.at(key).is_number())
        throw ValidationError(std::string("camera field '") + key +
                              "' missing or not a number");
    return j.at(key).get<double>();
}

inline int json_int(nlohmann::json const& j, char const* key)
{
    if (!j.contains(key) || !j.at(key).is_number_integer())
        throw ValidationError(std::string("camera field '") + key +
                              "' missing or not an integer");
    return j.at(key).get<int>();
}

template <int N>
Eigen::Matrix<double, N, 1> json_vector(nlohmann::json const& j, char const* key)
{
    if (!j.contains(key) || !j.at(key).is_array() ||
        j.at(key).size() != static_cast<std::size_t>(N))
        throw ValidationError(std::string("camera field '") + key + "' must be an array of " +
                              std::to_string(N) + " numbers");
    Eigen::Matrix<double, N, 1> out;
    for (int i = 0; i < N; ++i) {
        auto const& e = j.at(key)[i];
        if (!e.is_number())
            throw ValidationError(std::string("camera field '") + key +
                                  "' contains a non-number");
        out[i] = e.get<double>();
    }
    return out;
}

}  // namespace detail

inline PinholeCamera camera_from_json(nlohmann::json const& j)
{
    PinholeCamera cam;
    cam.width = detail::json_int(j, "width");
    cam.height = detail::json_int(j, "height");
    cam.fx = detail::json_number(j, "fx");
    cam.fy = detail::json_number(j, "fy");
    cam.cx = detail::json_number(j, "cx");
    cam.cy = detail::json_number(j, "cy");
    auto const r = detail::json_vector<9>(j, "R");
    for (int row = 0; row < 3; ++row)
        for (int col = 0; col < 3; ++col)
            cam.rotation(row, col) = r[3 * row + col];
    cam.translation = detail::json_vector<3>(j, "t");
    return cam;
}

inline nlohmann::json camera_to_json(PinholeCamera const& cam)
{
    nlohmann::json r = nlohmann::json::array();
    for (int row = 0; row < 3; ++row)
        for (int col = 0; col < 3; ++col)
            r.push_back(cam.rotation(row, col));
    return {{"width", cam.width}, {"height", cam.height}, {"fx", cam.fx},
            {"fy", cam.fy},       {"cx", cam.cx},         {"cy", cam.cy},
            {"R", r},
            {"t", {cam.translation.x(), cam.translation.y(), cam.translation.z()}}};
}

/// Parses a manifest; relative image paths resolve against `base_dir`.
inline ViewManifest manifest_from_json(nlohmann::json const& j,
                                       std::filesystem::path const& base_dir)
{
    if (!j.is_object() || !j.contains("views") || !j.at("views").is_array())
        throw ValidationError("manifest must be an object with a 'views' array");
    ViewManifest manifest;
    for (auto const& jv : j.at("views")) {
        if (!jv.is_object() || !jv.contains("id") || !jv.at("id").is_string() ||
            !jv.contains("image") || !jv.at("image").is_string() ||
            !jv.contains("camera") || !jv.at("camera").is_object())
            throw ValidationError("each view needs string 'id', string 'image' and object 'camera'");
        View v;
        v.id = jv.at("id").get<std::string>();
        std::filesystem::path image = jv.at("image").get<std::string>();
        v.photo_path = image.is_absolute() ? image : base_dir / image;
        v.camera = camera_from_json(jv.at("camera"));
        manifest.views.push_back(std::move(v));
    }
    manifest.validate();
    return manifest;
}

inline ViewManifest load_manifest(std::filesystem::path const& path)
{
    std::string const text = read_text_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (nlohmann::json::parse_error const& e) {
        throw ValidationError("manifest " + path.string() + " is not valid JSON: " + e.what());
    }
    return manifest_from_json(j, path.parent_path());
}

/// Image paths are written relative to `base_dir` when they live below it.
inline nlohmann::json manifest_to_json(ViewManifest const& manifest,
                                       std::filesystem::path const& base_dir)
{
    nlohmann::json views = nlohmann::json::array();
    for (auto const& v : manifest.views) {
        std::filesystem::path image = v.photo_path;
        if (!base_dir.empty()) {
            auto rel = image.lexically_relative(base_dir);
            if (!rel.empty() && *rel.begin() != "..")
                image = rel;
        }
        views.push_back({{"id", v.id},
                         {"image", image.generic_string()},
                         {"camera", camera_to_json(v.camera)}});
    }
    return {{"views", views}};
}

inline void save_manifest(ViewManifest const& manifest, std::filesystem::path const& path)
{
    write_text_file(path, manifest_to_json(manifest, path.parent_path()).dump(2) + "\n");
}

}  // namespace rephoto
