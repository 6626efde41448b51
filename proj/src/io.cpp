#include "pathrec/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace pathrec {

namespace {

using nlohmann::json;

template <class T>
void put(std::ofstream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

}  // namespace

VoxelGridField load_grid(const std::string& path, LengthUnit* unit) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_grid: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "VGRD", 4) != 0)
        throw std::runtime_error("load_grid: bad magic at offset 0 in " + path);
    const uint32_t version = get<uint32_t>(is);
    if (version != 1) throw std::runtime_error("load_grid: unsupported version in " + path);
    VoxelGridField f;
    for (int a = 0; a < 3; ++a) {
        const uint32_t d = get<uint32_t>(is);
        if (d == 0 || d > (1u << 20)) throw std::runtime_error("load_grid: bad dims in " + path);
        f.geom.dims[a] = static_cast<int>(d);
    }
    f.geom.origin = {get<double>(is), get<double>(is), get<double>(is)};
    f.geom.voxel_size = {get<double>(is), get<double>(is), get<double>(is)};
    const uint8_t tag = get<uint8_t>(is);
    if (tag > 1) throw std::runtime_error("load_grid: bad unit tag in " + path);
    if (unit) *unit = static_cast<LengthUnit>(tag);
    const size_t count = static_cast<size_t>(f.geom.voxel_count());
    std::vector<float> raw(count);
    is.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (!is) throw std::runtime_error("load_grid: truncated payload in " + path);
    f.values.assign(raw.begin(), raw.end());
    return f;
}

void save_grid(const VoxelGridField& grid, LengthUnit unit, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_grid: cannot open " + path);
    os.write("VGRD", 4);
    put<uint32_t>(os, 1u);
    for (int a = 0; a < 3; ++a) put<uint32_t>(os, static_cast<uint32_t>(grid.geom.dims[a]));
    put<double>(os, grid.geom.origin.x);
    put<double>(os, grid.geom.origin.y);
    put<double>(os, grid.geom.origin.z);
    put<double>(os, grid.geom.voxel_size.x);
    put<double>(os, grid.geom.voxel_size.y);
    put<double>(os, grid.geom.voxel_size.z);
    put<uint8_t>(os, static_cast<uint8_t>(unit));
    for (double v : grid.values) put<float>(os, static_cast<float>(v));
    if (!os) throw std::runtime_error("save_grid: write failure on " + path);
}

namespace {

void check_finite(const Image& im, const char* what) {
    size_t bad = 0, first = 0;
    for (size_t i = 0; i < im.data.size(); ++i)
        if (!std::isfinite(im.data[i])) {
            if (bad == 0) first = i;
            ++bad;
        }
    if (bad > 0)
        throw std::runtime_error(std::string(what) + ": " + std::to_string(bad) +
                                 " non-finite pixel(s), first at index " + std::to_string(first));
}

}  // namespace

void save_pfm(const Image& image, const std::string& path) {
    check_finite(image, "save_pfm");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_pfm: cannot open " + path);
    os << "Pf\n" << image.cols << " " << image.rows << "\n-1.0\n";
    // PFM stores rows bottom-to-top
    for (int r = image.rows - 1; r >= 0; --r)
        for (int c = 0; c < image.cols; ++c) {
            const float v = static_cast<float>(image.at(r, c));
            os.write(reinterpret_cast<const char*>(&v), sizeof(float));
        }
    if (!os) throw std::runtime_error("save_pfm: write failure on " + path);
}

Image load_pfm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_pfm: cannot open " + path);
    std::string magic;
    is >> magic;
    if (magic != "Pf") throw std::runtime_error("load_pfm: not a grayscale PFM: " + path);
    int cols = 0, rows = 0;
    double scale = 0.0;
    is >> cols >> rows >> scale;
    is.get();  // single whitespace before the payload
    if (cols <= 0 || rows <= 0 || scale >= 0.0)
        throw std::runtime_error("load_pfm: unsupported header in " + path);
    Image im = Image::zeros(rows, cols);
    for (int r = rows - 1; r >= 0; --r)
        for (int c = 0; c < cols; ++c) {
            float v = 0.0f;
            is.read(reinterpret_cast<char*>(&v), sizeof(float));
            im.at(r, c) = v;
        }
    if (!is) throw std::runtime_error("load_pfm: truncated payload in " + path);
    return im;
}

void save_pgm_preview(const Image& image, const std::string& path) {
    check_finite(image, "save_pgm_preview");
    double mx = 0.0;
    for (double v : image.data) mx = std::max(mx, v);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_pgm_preview: cannot open " + path);
    os << "P5\n" << image.cols << " " << image.rows << "\n255\n";
    for (int r = 0; r < image.rows; ++r)
        for (int c = 0; c < image.cols; ++c) {
            const double t = mx > 0.0 ? std::clamp(image.at(r, c) / mx, 0.0, 1.0) : 0.0;
            const auto b = static_cast<unsigned char>(
                std::lround(255.0 * std::pow(t, 1.0 / 2.2)));
            os.put(static_cast<char>(b));
        }
}

void save_csv(const std::vector<IterationLog>& rows, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_csv: cannot open " + path);
    os << "iter,time_s,loss,eps,delta,stage\r\n";
    os.precision(17);
    for (const auto& r : rows)
        os << r.iter << "," << r.time_s << "," << r.loss << "," << r.eps << "," << r.delta << ","
           << r.stage << "\r\n";
}

namespace {

Vec3 vec3_of(const json& j) {
    if (!j.is_array() || j.size() != 3) throw std::runtime_error("scene: expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

PhaseFunction phase_of(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "hg") return PhaseFunction::henyey_greenstein(j.at("g").get<double>());
    if (type == "rayleigh") return PhaseFunction::rayleigh();
    throw std::runtime_error("scene: unknown phase type '" + type + "'");
}

Brdf brdf_of(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "diffuse") return Brdf::make_diffuse(j.at("albedo").get<double>());
    if (type == "phong")
        return Brdf::make_phong(j.at("kappa_s").get<double>(), j.at("gamma").get<double>());
    throw std::runtime_error("scene: unknown brdf type '" + type + "'");
}

GridGeometry geom_of(const json& j) {
    GridGeometry g;
    const auto dims = j.at("dims");
    for (int a = 0; a < 3; ++a) g.dims[a] = dims[a].get<int>();
    g.origin = vec3_of(j.at("origin"));
    g.voxel_size = vec3_of(j.at("voxel_size"));
    return g;
}

}  // namespace

Scene load_scene(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_scene: cannot open " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("load_scene: parse error in " + path + ": " + e.what());
    }
    const auto base = std::filesystem::path(path).parent_path();

    Scene scene;
    const std::string unit = j.value("unit", std::string("m"));
    if (unit == "m") scene.unit = LengthUnit::Meters;
    else if (unit == "km") scene.unit = LengthUnit::Kilometers;
    else throw std::runtime_error("load_scene: unit must be 'm' or 'km'");

    scene.bounds.min = vec3_of(j.at("bounds").at("min"));
    scene.bounds.max = vec3_of(j.at("bounds").at("max"));

    const auto& jl = j.at("light");
    const std::string lt = jl.at("type").get<std::string>();
    if (lt == "point") {
        scene.light.kind = LightSource::Kind::IsotropicPoint;
        scene.light.position = vec3_of(jl.at("position"));
    } else if (lt == "sun") {
        scene.light.kind = LightSource::Kind::DirectionalSun;
        scene.light.direction = vec3_of(jl.at("direction")).normalized();
    } else {
        throw std::runtime_error("load_scene: unknown light type '" + lt + "'");
    }
    scene.light.radiance = jl.value("radiance", 1.0);

    for (const auto& js : j.value("species", json::array())) {
        ParticleSpecies sp;
        sp.name = js.value("name", std::string("species"));
        sp.albedo = js.at("albedo").get<double>();
        sp.phase = phase_of(js.at("phase"));
        sp.unknown = js.value("unknown", false);
        const auto& je = js.at("extinction");
        if (je.contains("grid")) {
            const auto rel = je.at("grid").get<std::string>();
            sp.extinction = load_grid((base / rel).string());
        } else {
            sp.extinction =
                VoxelGridField::constant(geom_of(je), je.at("constant").get<double>());
        }
        scene.species.push_back(std::move(sp));
    }

    for (const auto& js : j.value("surfaces", json::array())) {
        Surface sf;
        const std::string type = js.at("type").get<std::string>();
        if (type == "sphere") {
            sf.kind = Surface::Kind::Sphere;
            sf.sphere.center = vec3_of(js.at("center"));
            sf.sphere.radius = js.at("radius").get<double>();
        } else if (type == "face") {
            sf.kind = Surface::Kind::Face;
            sf.face.axis = js.at("axis").get<int>();
            sf.face.coord = js.at("coord").get<double>();
            const auto lo = js.at("lo"), hi = js.at("hi");
            sf.face.lo[0] = lo[0].get<double>();
            sf.face.lo[1] = lo[1].get<double>();
            sf.face.hi[0] = hi[0].get<double>();
            sf.face.hi[1] = hi[1].get<double>();
            sf.face.normal_sign = js.value("normal", 1.0);
        } else {
            throw std::runtime_error("load_scene: unknown surface type '" + type + "'");
        }
        sf.brdf = brdf_of(js.at("brdf"));
        sf.target = js.value("target", false);
        scene.surfaces.push_back(sf);
    }

    for (const auto& jd : j.at("detectors")) {
        Detector det;
        det.position = vec3_of(jd.at("position"));
        det.direction = vec3_of(jd.at("direction"));
        if (jd.contains("up")) det.up = vec3_of(jd.at("up"));
        det.rows = jd.at("rows").get<int>();
        det.cols = jd.at("cols").get<int>();
        det.fov = jd.at("fov").get<double>();
        scene.detectors.push_back(det);
    }

    scene.finalize();
    return scene;
}

void save_manifest(const RunManifest& m, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_manifest: cannot open " + path);
    os << "command=" << m.command << "\n"
       << "scene=" << m.scene_path << "\n"
       << "seed=" << m.seed << "\n"
       << "paths=" << m.n_paths << "\n"
       << "workers=" << m.workers << "\n"
       << "version=" << library_version() << "\n";
    if (!m.extra.empty()) os << m.extra;
}

std::string library_version() { return "pathrec 0.1.0"; }

}  // namespace pathrec
