#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "rephoto/image_io.hpp"
#include "rephoto/mesh_io.hpp"
#include "rephoto/procedural.hpp"
#include "test_util.hpp"

using namespace rephoto;
namespace fs = std::filesystem;

namespace {

struct Run {
    int status = -1;
    std::string out;
};

Run cli(std::string const& args)
{
    std::string const cmd = std::string(REPHOTO_CLI) + " " + args + " 2>/dev/null";
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe)
        return r;
    std::array<char, 4096> buf{};
    while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe))
        r.out.append(buf.data(), n);
    int const raw = pclose(pipe);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return r;
}

std::string q(fs::path const& p) { return "'" + p.string() + "'"; }

ProceduralSceneOptions small_scene()
{
    ProceduralSceneOptions o;
    o.sphere_segments = 16;
    o.sphere_rings = 10;
    o.ground_cells = 8;
    o.cameras = 4;
    o.width = 64;
    o.height = 48;
    o.focal = 60;
    return o;
}

}  // namespace

TEST(Cli, HelpListsDefaults)
{
    auto const r = cli("evaluate --help");
    EXPECT_EQ(r.status, 0);
    EXPECT_NE(r.out.find("--patch-size"), std::string::npos);
    EXPECT_NE(r.out.find("--min-valid-fraction"), std::string::npos);
    EXPECT_NE(r.out.find("--folds"), std::string::npos);
}

TEST(Cli, BadArgumentsExitTwo)
{
    EXPECT_EQ(cli("score --no-such-flag").status, 2);
    EXPECT_EQ(cli("score").status, 2);                     // missing required options
    EXPECT_EQ(cli("stats --csv x.csv").status, 2);         // --column missing
    EXPECT_EQ(cli("correlate --xs 1,2 --ys 1").status, 2);  // length mismatch
}

TEST(Cli, MissingFileExitsThree)
{
    test::TempDir dir;
    auto const r = cli("score --photo " + q(dir / "nope.png") + " --rephoto " + q(dir / "nope.png"));
    EXPECT_EQ(r.status, 3);
}

TEST(Cli, ScoreIdenticalImages)
{
    test::TempDir dir;
    RgbImage img(24, 20);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 24; ++x)
            img.at(x, y) = Rgb((x * 9 % 256) / 255.0, (y * 13 % 256) / 255.0, ((x + y) * 5 % 256) / 255.0);
    save_image(img, dir / "a.png");
    auto const r = cli("score --photo " + q(dir / "a.png") + " --rephoto " + q(dir / "a.png") +
                       " --metrics cbcr,ncc,zssd,dssim,census --out " + q(dir / "err"));
    ASSERT_EQ(r.status, 0) << r.out;
    EXPECT_NE(r.out.find("completeness 1\n"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("ncc 0\n"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("cbcr 0\n"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("census 0\n"), std::string::npos) << r.out;
    for (char const* m : {"cbcr", "ncc", "zssd", "dssim", "census"})
        EXPECT_TRUE(fs::exists(dir / "err" / (std::string(m) + ".pfm"))) << m;
}

TEST(Cli, StatsAndCorrelate)
{
    auto const s = cli("stats 1 2 3 4");
    ASSERT_EQ(s.status, 0);
    EXPECT_NE(s.out.find("q1 1.75"), std::string::npos) << s.out;
    EXPECT_NE(s.out.find("median 2.5"), std::string::npos) << s.out;
    EXPECT_NE(s.out.find("q3 3.25"), std::string::npos) << s.out;

    auto const c = cli("correlate --xs 1,2,3,4 --ys 2,1,4,3");
    ASSERT_EQ(c.status, 0);
    ASSERT_EQ(c.out.rfind("pearson ", 0), 0u) << c.out;
    EXPECT_NEAR(std::stod(c.out.substr(8)), 0.6, 1e-15);

    test::TempDir dir;
    test::write_file(dir / "t.csv", "a,b\n1,2\n2,\n3,6\n4,8\n");
    auto const k = cli("correlate --csv " + q(dir / "t.csv") + " --x a --y b");
    ASSERT_EQ(k.status, 0);
    EXPECT_EQ(k.out.rfind("pearson 1 ", 0), 0u) << k.out;
    EXPECT_NE(k.out.find("n = 3"), std::string::npos) << k.out;
}

TEST(Cli, SplitWritesFolds)
{
    test::TempDir dir;
    save_manifest(procedural_views(small_scene(), dir / "photos"), dir / "views.json");
    auto const r = cli("split --manifest " + q(dir / "views.json") + " --folds 2 --seed 3");
    ASSERT_EQ(r.status, 0);
    auto const j = nlohmann::json::parse(r.out);
    ASSERT_EQ(j["folds"].size(), 2u);
    EXPECT_EQ(cli("split --manifest " + q(dir / "views.json") + " --folds 2 --seed 3").out, r.out);
    EXPECT_EQ(cli("split --manifest " + q(dir / "views.json") + " --folds 9").status, 2);
}

TEST(Cli, EvaluateDegradeProject)
{
    test::TempDir dir;
    write_procedural_dataset(dir / "data", small_scene());
    auto const manifest = q(dir / "data" / "views.json");

    // Clean model against its own photos: no error.
    auto const r = cli("evaluate --manifest " + manifest + " --model " + q(dir / "data" / "model.ply") +
                       " --folds 0 --metrics ncc,cbcr --out " + q(dir / "clean"));
    ASSERT_EQ(r.status, 0) << r.out;
    for (char const* f : {"report.json", "report.csv"})
        EXPECT_TRUE(fs::exists(dir / "clean" / f)) << f;
    EXPECT_TRUE(fs::exists(dir / "clean" / "errors" / "v00_ncc.pfm"));
    auto const report = nlohmann::json::parse(test::read_bytes(dir / "clean" / "report.json"));
    EXPECT_EQ(report["aggregate"]["errors"]["cbcr"].get<double>(), 0.0);
    EXPECT_NEAR(report["aggregate"]["errors"]["ncc"].get<double>(), 0.0, 1e-12);

    // A texture-degraded model scores worse.
    ASSERT_EQ(cli("degrade --tex 0.2 --seed 1 " + q(dir / "data" / "model.ply") + " " +
                  q(dir / "noisy.ply")).status,
              0);
    ASSERT_EQ(cli("evaluate --manifest " + manifest + " --model " + q(dir / "noisy.ply") +
                  " --folds 0 --metrics ncc,cbcr --out " + q(dir / "noisy"))
                  .status,
              0);
    auto const noisy = nlohmann::json::parse(test::read_bytes(dir / "noisy" / "report.json"));
    EXPECT_GT(noisy["aggregate"]["errors"]["cbcr"].get<double>(), 0.0);

    // Projection keeps the model topology.
    auto const p = cli("project --model " + q(dir / "noisy.ply") + " --manifest " + manifest +
                       " --errors " + q(dir / "noisy" / "errors") + " --metric cbcr --out " +
                       q(dir / "colored.ply"));
    ASSERT_EQ(p.status, 0) << p.out;
    auto const colored = load_mesh(dir / "colored.ply");
    EXPECT_EQ(colored.vertex_count(), load_mesh(dir / "noisy.ply").vertex_count());
    EXPECT_EQ(colored.faces.size(), load_mesh(dir / "noisy.ply").faces.size());

    // Unknown mode and external mode without rephotos are argument errors.
    EXPECT_EQ(cli("evaluate --manifest " + manifest + " --mode bogus --out " + q(dir / "x")).status, 2);
    EXPECT_EQ(cli("evaluate --manifest " + manifest + " --mode external --out " + q(dir / "x")).status, 2);
}
