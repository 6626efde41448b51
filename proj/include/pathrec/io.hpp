#pragma once

#include <string>
#include <vector>

#include "pathrec/inverse.hpp"

namespace pathrec {

/// Binary voxel grid, magic "VGRD": version u32, dims 3xu32, origin 3xf64,
/// voxel size 3xf64, unit tag u8 (0 = m, 1 = km), then nx*ny*nz f32 values
/// little-endian, x-fastest. Values are widened to f64 in memory.
VoxelGridField load_grid(const std::string& path, LengthUnit* unit = nullptr);
void save_grid(const VoxelGridField& grid, LengthUnit unit, const std::string& path);

/// Grayscale portable float map, scale -1.0 (little-endian); rows are
/// written bottom-to-top per the format.
void save_pfm(const Image& image, const std::string& path);
Image load_pfm(const std::string& path);

/// 8-bit preview with max-normalized gamma-2.2 tone mapping.
void save_pgm_preview(const Image& image, const std::string& path);

/// Loss log: header iter,time_s,loss,eps,delta,stage then one row per entry.
void save_csv(const std::vector<IterationLog>& rows, const std::string& path);

/// Scene description file (JSON): species with grid references by relative
/// path, surfaces, light, detectors, unit.
Scene load_scene(const std::string& path);

struct RunManifest {
    std::string command;
    std::string scene_path;
    uint64_t seed = 0;
    uint64_t n_paths = 0;
    int workers = 0;
    std::string extra;  // command-specific key=value lines
};

void save_manifest(const RunManifest& m, const std::string& path);

std::string library_version();

}  // namespace pathrec
