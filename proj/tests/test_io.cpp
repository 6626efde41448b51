#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include "doctest.h"
#include "helpers.hpp"
#include "pathrec/io.hpp"

using namespace pathrec;
using namespace pathrec::testing;

namespace fs = std::filesystem;

namespace {

struct TmpDir {
    fs::path dir;
    TmpDir() : dir("test_io_tmp") { fs::create_directories(dir); }
    ~TmpDir() { fs::remove_all(dir); }
    std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("voxel grid files") {
    TmpDir tmp;
    VoxelGridField f;
    f.geom = cube_grid(3);
    f.values.resize(27);
    for (int i = 0; i < 27; ++i) f.values[static_cast<size_t>(i)] = 0.25f * i;

    SUBCASE("round trip preserves geometry and f32 payload") {
        save_grid(f, LengthUnit::Kilometers, tmp / "g.vgrd");
        LengthUnit unit = LengthUnit::Meters;
        VoxelGridField g = load_grid(tmp / "g.vgrd", &unit);
        CHECK(unit == LengthUnit::Kilometers);
        CHECK(g.geom == f.geom);
        REQUIRE(g.values.size() == 27);
        for (size_t i = 0; i < 27; ++i)
            CHECK(g.values[i] == static_cast<double>(static_cast<float>(f.values[i])));
    }
    SUBCASE("file layout: 69-byte header plus 4 bytes per voxel") {
        save_grid(f, LengthUnit::Meters, tmp / "g.vgrd");
        CHECK(fs::file_size(tmp / "g.vgrd") == 69 + 4 * 27);
    }
    SUBCASE("bad magic is reported with its offset") {
        std::ofstream os(tmp / "bad.vgrd", std::ios::binary);
        os << "NOPEsome other bytes here to pad the file out a bit";
        os.close();
        CHECK_THROWS_WITH_AS(load_grid(tmp / "bad.vgrd"), doctest::Contains("bad magic at offset 0"),
                             std::runtime_error);
    }
    SUBCASE("truncated payload is rejected") {
        save_grid(f, LengthUnit::Meters, tmp / "g.vgrd");
        fs::resize_file(tmp / "g.vgrd", 69 + 4 * 10);
        CHECK_THROWS_WITH_AS(load_grid(tmp / "g.vgrd"), doctest::Contains("truncated"),
                             std::runtime_error);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_WITH_AS(load_grid(tmp / "absent.vgrd"), doctest::Contains("cannot open"),
                             std::runtime_error);
    }
}

TEST_CASE("pfm images") {
    TmpDir tmp;
    Image im = Image::zeros(3, 2);
    im.data = {0.0, 1.5, -2.25, 3.0, 0.125, 1e-9};

    SUBCASE("round trip") {
        save_pfm(im, tmp / "a.pfm");
        Image back = load_pfm(tmp / "a.pfm");
        CHECK(back.rows == 3);
        CHECK(back.cols == 2);
        for (size_t i = 0; i < im.data.size(); ++i)
            CHECK(back.data[i] == static_cast<double>(static_cast<float>(im.data[i])));
    }
    SUBCASE("header is little-endian grayscale") {
        save_pfm(im, tmp / "a.pfm");
        std::ifstream is(tmp / "a.pfm", std::ios::binary);
        std::string l1, l2, l3;
        std::getline(is, l1);
        std::getline(is, l2);
        std::getline(is, l3);
        CHECK(l1 == "Pf");
        CHECK(l2 == "2 3");
        CHECK(l3 == "-1.0");
    }
    SUBCASE("non-finite pixels are rejected with a location") {
        Image bad = im;
        bad.data[4] = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_WITH_AS(save_pfm(bad, tmp / "nan.pfm"),
                             doctest::Contains("first at index 4"), std::runtime_error);
        bad.data[1] = std::numeric_limits<double>::infinity();
        CHECK_THROWS_WITH_AS(save_pfm(bad, tmp / "nan.pfm"),
                             doctest::Contains("2 non-finite"), std::runtime_error);
    }
    SUBCASE("wrong magic") {
        std::ofstream os(tmp / "bad.pfm", std::ios::binary);
        os << "PF\n2 2\n-1.0\n";
        os.close();
        CHECK_THROWS_AS(load_pfm(tmp / "bad.pfm"), std::runtime_error);
    }
}

TEST_CASE("pgm preview") {
    TmpDir tmp;
    Image im = Image::zeros(2, 2);
    im.data = {0.0, 0.5, 1.0, 2.0};
    save_pgm_preview(im, tmp / "p.pgm");
    std::ifstream is(tmp / "p.pgm", std::ios::binary);
    std::string magic;
    is >> magic;
    CHECK(magic == "P5");
    CHECK(fs::file_size(tmp / "p.pgm") > 10);
}

TEST_CASE("loss log csv") {
    TmpDir tmp;
    std::vector<IterationLog> rows(2);
    rows[0] = {0, 0.5, 12.25, 0.25, -0.125, 0};
    rows[1] = {1, 1.0, 11.0, 0.2421875, -0.09375, 1};
    save_csv(rows, tmp / "loss.csv");
    std::ifstream is(tmp / "loss.csv", std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    CHECK(content.substr(0, 34) == "iter,time_s,loss,eps,delta,stage\r\n");
    CHECK(content.find("\r\n0,0.5,12.25,0.25,-0.125,0\r\n") != std::string::npos);
    // Every row ends CRLF.
    size_t lines = 0;
    for (size_t p = content.find("\r\n"); p != std::string::npos; p = content.find("\r\n", p + 2))
        ++lines;
    CHECK(lines == 3);
}

TEST_CASE("scene files") {
    TmpDir tmp;

    SUBCASE("full scene with a grid reference") {
        VoxelGridField f;
        f.geom = cube_grid(2);
        f.values.assign(8, 4.5);
        save_grid(f, LengthUnit::Meters, tmp / "cloud.vgrd");
        std::ofstream os(tmp / "scene.json");
        os << R"({
            "unit": "m",
            "bounds": {"min": [0,0,0], "max": [1,1,1]},
            "light": {"type": "point", "position": [0.5,0.5,0.5], "radiance": 2.0},
            "species": [
                {"name": "cloud", "albedo": 0.99, "unknown": true,
                 "phase": {"type": "hg", "g": 0.85},
                 "extinction": {"grid": "cloud.vgrd"}},
                {"name": "air", "albedo": 0.912,
                 "phase": {"type": "rayleigh"},
                 "extinction": {"constant": 0.04,
                                "dims": [2,2,2], "origin": [0,0,0],
                                "voxel_size": [0.5,0.5,0.5]}}
            ],
            "surfaces": [
                {"type": "face", "axis": 2, "coord": 0.0,
                 "lo": [0,0], "hi": [1,1], "normal": 1.0, "target": true,
                 "brdf": {"type": "phong", "kappa_s": 0.7, "gamma": 50.0}}
            ],
            "detectors": [
                {"position": [0.5,0.5,3.0], "direction": [0,0,-1],
                 "up": [0,1,0], "rows": 4, "cols": 6, "fov": 0.6}
            ]
        })";
        os.close();

        Scene s = load_scene(tmp / "scene.json");
        CHECK(s.unit == LengthUnit::Meters);
        REQUIRE(s.species.size() == 2);
        CHECK(s.species[0].extinction.values[0] == doctest::Approx(4.5));
        CHECK(s.species[0].unknown);
        CHECK(s.species[0].phase.g() == doctest::Approx(0.85));
        CHECK(s.species[1].extinction.values[7] == doctest::Approx(0.04));
        CHECK(s.unknown_species() == 0);
        REQUIRE(s.surfaces.size() == 1);
        CHECK(s.target_surface() == 0);
        CHECK(s.surfaces[0].brdf.phong.gamma == doctest::Approx(50.0));
        REQUIRE(s.detectors.size() == 1);
        CHECK(s.detectors[0].rows == 4);
        CHECK(s.detectors[0].cols == 6);
        CHECK(s.light.radiance == doctest::Approx(2.0));
        // finalize ran: the camera frame is derived.
        CHECK(norm(s.detectors[0].right_axis) == doctest::Approx(1.0));
        CHECK(validate_scene(s).empty());
    }
    SUBCASE("sun light") {
        std::ofstream os(tmp / "sun.json");
        os << R"({
            "bounds": {"min": [0,0,0], "max": [1,1,1]},
            "light": {"type": "sun", "direction": [0,0,-2]},
            "detectors": [{"position": [0.5,0.5,3.0], "direction": [0,0,-1],
                           "rows": 2, "cols": 2, "fov": 0.5}]
        })";
        os.close();
        Scene s = load_scene(tmp / "sun.json");
        CHECK(s.light.kind == LightSource::Kind::DirectionalSun);
        CHECK(s.light.direction.z == doctest::Approx(-1.0));  // normalized on load
    }
    SUBCASE("parse and schema errors") {
        std::ofstream os(tmp / "broken.json");
        os << "{ not json";
        os.close();
        CHECK_THROWS_WITH_AS(load_scene(tmp / "broken.json"), doctest::Contains("parse error"),
                             std::runtime_error);
        std::ofstream os2(tmp / "nolight.json");
        os2 << R"({"bounds": {"min": [0,0,0], "max": [1,1,1]}, "detectors": []})";
        os2.close();
        CHECK_THROWS(load_scene(tmp / "nolight.json"));
        CHECK_THROWS_WITH_AS(load_scene(tmp / "absent.json"), doctest::Contains("cannot open"),
                             std::runtime_error);
    }
}

TEST_CASE("run manifest") {
    TmpDir tmp;
    RunManifest m;
    m.command = "render";
    m.scene_path = "scene.json";
    m.seed = 42;
    m.n_paths = 1000;
    m.workers = 2;
    m.extra = "bounces=500\n";
    save_manifest(m, tmp / "manifest.txt");
    std::ifstream is(tmp / "manifest.txt");
    std::string content((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    CHECK(content.find("command=render\n") != std::string::npos);
    CHECK(content.find("seed=42\n") != std::string::npos);
    CHECK(content.find("paths=1000\n") != std::string::npos);
    CHECK(content.find("version=" + library_version()) != std::string::npos);
    CHECK(content.find("bounces=500\n") != std::string::npos);
}

TEST_CASE("library version string") {
    CHECK(library_version().substr(0, 8) == "pathrec ");
}
