#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "rephoto/image_io.hpp"
#include "rephoto/scene.hpp"
#include "test_util.hpp"

using namespace rephoto;

TEST(Project, IdentityCamera)
{
    PinholeCamera cam;
    auto p = project(cam, Vec3(0, 0, 2));
    EXPECT_NEAR(p.pixel.x(), 0.0, 1e-9);
    EXPECT_NEAR(p.pixel.y(), 0.0, 1e-9);
    EXPECT_EQ(p.depth, 2.0);
    EXPECT_FALSE(p.behind);

    p = project(cam, Vec3(2, 0, 2));
    EXPECT_NEAR(p.pixel.x(), 1.0, 1e-9);
    EXPECT_NEAR(p.pixel.y(), 0.0, 1e-9);
}

TEST(Project, AspectRatioAndPrincipalPoint)
{
    PinholeCamera cam;
    cam.fx = 100;
    cam.fy = 50;
    cam.cx = 320;
    cam.cy = 240;
    cam.width = 640;
    cam.height = 480;
    cam.translation = Vec3(0, 0, 4);
    auto const p = project(cam, Vec3(1, 1, 0));
    // Matrix form K [R|t] X, evaluated separately.
    Eigen::Matrix3d K;
    K << 100, 0, 320, 0, 50, 240, 0, 0, 1;
    Vec3 const h = K * (Vec3(1, 1, 0) + Vec3(0, 0, 4));
    EXPECT_NEAR(p.pixel.x(), 345.0, 1e-9);
    EXPECT_NEAR(p.pixel.y(), 252.5, 1e-9);
    EXPECT_NEAR(p.pixel.x(), h.x() / h.z(), 1e-9);
    EXPECT_EQ(p.depth, 4.0);
}

TEST(Project, BehindCameraIsFlagged)
{
    PinholeCamera cam;
    EXPECT_TRUE(project(cam, Vec3(0, 0, -1)).behind);
    EXPECT_TRUE(project(cam, Vec3(1, 1, 0)).behind);
}

TEST(Project, UnprojectRoundTrip)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 200; ++i) {
        Vec3 const eye(5 * u(rng), 5 * u(rng), 5 * u(rng));
        PinholeCamera cam = look_at(eye, Vec3(u(rng), u(rng), u(rng)) * 0.1, Vec3(0, 0, 1),
                                    200 + 100 * u(rng), 320, 240);
        cam.fy = cam.fx * (1.0 + 0.2 * u(rng));
        double const px = 160 + 150 * u(rng), py = 120 + 110 * u(rng), z = 3 + 2 * u(rng);
        auto const p = project(cam, unproject(cam, px, py, z));
        EXPECT_NEAR(p.pixel.x(), px, 1e-6);
        EXPECT_NEAR(p.pixel.y(), py, 1e-6);
        EXPECT_NEAR(p.depth, z, 1e-6);
    }
}

TEST(Camera, LookAtIsValidRotation)
{
    auto const cam = look_at(Vec3(3, 4, 2), Vec3(0, 0, 0), Vec3(0, 0, 1), 300, 320, 240);
    EXPECT_NO_THROW(cam.validate());
    auto const p = project(cam, Vec3(0, 0, 0));
    EXPECT_NEAR(p.pixel.x(), cam.cx, 1e-9);
    EXPECT_NEAR(p.pixel.y(), cam.cy, 1e-9);
    // World up appears towards smaller image y.
    EXPECT_LT(project(cam, Vec3(0, 0, 0.5)).pixel.y(), cam.cy);
}

TEST(Camera, RejectsBadParameters)
{
    PinholeCamera cam;
    cam.fx = 0;
    EXPECT_THROW(cam.validate(), ValidationError);
    cam = {};
    cam.width = 0;
    EXPECT_THROW(cam.validate(), ValidationError);
    cam = {};
    cam.rotation(0, 0) = -1;  // reflection
    EXPECT_THROW(cam.validate(), ValidationError);
    cam = {};
    cam.rotation(0, 1) = 0.01;  // not orthonormal
    EXPECT_THROW(cam.validate(), ValidationError);
}

namespace {

std::string camera_json(std::string const& R = "[1,0,0,0,1,0,0,0,1]", double fx = 100)
{
    return R"({"width":4,"height":3,"fx":)" + std::to_string(fx) +
           R"(,"fy":100,"cx":1.5,"cy":1,"R":)" + R + R"(,"t":[0,0,1]})";
}

}  // namespace

TEST(Manifest, LoadsViewsInOrder)
{
    test::TempDir dir;
    test::write_file(dir / "v.json", R"({"views":[{"id":"b","image":"img/b.png","camera":)" +
                                         camera_json() +
                                         R"(},{"id":"a","image":"/abs/a.png","camera":)" +
                                         camera_json() + "}]}");
    auto const m = load_manifest(dir / "v.json");
    ASSERT_EQ(m.views.size(), 2u);
    EXPECT_EQ(m.views[0].id, "b");
    EXPECT_EQ(m.views[1].id, "a");
    EXPECT_EQ(m.views[0].photo_path, dir.path() / "img/b.png");
    EXPECT_EQ(m.views[1].photo_path, std::filesystem::path("/abs/a.png"));
    EXPECT_EQ(m.views[0].camera.width, 4);
    EXPECT_EQ(m.views[0].camera.translation, Vec3(0, 0, 1));
}

TEST(Manifest, RejectsInvalidInput)
{
    test::TempDir dir;
    auto load = [&](std::string const& text) {
        test::write_file(dir / "m.json", text);
        return load_manifest(dir / "m.json");
    };
    std::string const view = R"({"id":"v001","image":"x.png","camera":)" + camera_json() + "}";
    EXPECT_THROW(load(R"({"views":[)" + view + "," + view + "]}"), ValidationError);
    EXPECT_THROW(load(R"({"views":[{"id":"v","image":"x.png","camera":)" +
                      camera_json("[1,0,0,0,1,0,0,0,-1]") + "}]}"),
                 ValidationError);
    EXPECT_THROW(load(R"({"views":[{"id":"v","image":"x.png","camera":)" +
                      camera_json("[1,0,0,0,1,0,0,0,1]", -5) + "}]}"),
                 ValidationError);
    EXPECT_THROW(load(R"({"views":[]})"), ValidationError);
    EXPECT_THROW(load("{not json"), ValidationError);
    EXPECT_THROW(load_manifest(dir / "missing.json"), IoError);
}

TEST(Manifest, SaveLoadRoundTrip)
{
    test::TempDir dir;
    ViewManifest m;
    for (int i = 0; i < 3; ++i) {
        View v;
        v.id = "view" + std::to_string(i);
        v.photo_path = dir / "photos" / (v.id + ".png");
        v.camera = look_at(Vec3(i + 2.0, 1, 1), Vec3(0, 0, 0), Vec3(0, 0, 1), 250, 64, 48);
        m.views.push_back(v);
    }
    save_manifest(m, dir / "views.json");
    auto const back = load_manifest(dir / "views.json");
    ASSERT_EQ(back.views.size(), 3u);
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(back.views[i].id, m.views[i].id);
        EXPECT_EQ(back.views[i].photo_path, m.views[i].photo_path);
        EXPECT_TRUE(back.views[i].camera.rotation.isApprox(m.views[i].camera.rotation, 1e-15));
    }
}

TEST(ImageIo, EightBitNormalization)
{
    test::TempDir dir;
    RgbImage img(2, 1);
    img[0] = Rgb(1, 0, 0);
    img[1] = Rgb(0, 0.5, 1);
    save_image(img, dir / "a.png");
    auto const back = load_image(dir / "a.png");
    EXPECT_EQ(back[0], Rgb(1, 0, 0));
    EXPECT_EQ(back[1].y(), 128 / 255.0);
}

TEST(ImageIo, ByteStableRoundTrip)
{
    test::TempDir dir;
    std::mt19937 rng(3);
    RgbImage img(17, 9);
    for (auto& p : img.data())
        p = Rgb(rng() % 256, rng() % 256, rng() % 256) / 255.0;
    save_image(img, dir / "a.png");
    auto const once = load_image(dir / "a.png");
    EXPECT_EQ(once, img);
    save_image(once, dir / "b.png");
    EXPECT_EQ(test::read_bytes(dir / "a.png"), test::read_bytes(dir / "b.png"));
}

TEST(ImageIo, GrayPhotoBecomesRgb)
{
    test::TempDir dir;
    Mask gray(3, 1);
    gray[0] = 0;
    gray[1] = 255;
    gray[2] = 0;
    save_mask(gray, dir / "g.png");
    auto const img = load_image(dir / "g.png");
    EXPECT_EQ(img[1], Rgb(1, 1, 1));
    EXPECT_EQ(img[0], Rgb(0, 0, 0));
}

TEST(ImageIo, MaskValues)
{
    test::TempDir dir;
    Mask m(2, 2, 255);
    m[2] = 0;
    save_mask(m, dir / "m.png");
    auto const back = load_mask(dir / "m.png");
    EXPECT_EQ(count_valid(back), 3u);

    RgbImage bad(2, 1, Rgb(0.5, 0.5, 0.5));  // gray 128 is neither 0 nor 255
    save_image(bad, dir / "bad.png");
    EXPECT_THROW(load_mask(dir / "bad.png"), ValidationError);
}

TEST(ImageIo, RejectsNonPng)
{
    test::TempDir dir;
    test::write_file(dir / "x.png", "definitely not a png");
    EXPECT_THROW(load_image(dir / "x.png"), ValidationError);
    EXPECT_THROW(load_image(dir / "nope.png"), IoError);
}

TEST(ImageIo, PfmRoundTripKeepsNan)
{
    test::TempDir dir;
    ScalarImage img(3, 2);
    for (std::size_t i = 0; i < img.size(); ++i)
        img[i] = 0.25 * static_cast<double>(i);
    img[4] = std::numeric_limits<double>::quiet_NaN();
    save_pfm(img, dir / "e.pfm");
    auto const back = load_pfm(dir / "e.pfm");
    ASSERT_TRUE(back.same_size(img));
    for (std::size_t i = 0; i < img.size(); ++i) {
        if (i == 4)
            EXPECT_TRUE(std::isnan(back[i]));
        else
            EXPECT_EQ(back[i], img[i]);
    }
    EXPECT_EQ(test::read_bytes(dir / "e.pfm").substr(0, 12), "Pf\n3 2\n-1.0\n");
    EXPECT_EQ(test::read_bytes(dir / "e.pfm").size(), 12u + 6 * sizeof(float));
}
