// mesh.hpp - triangle surface meshes: extraction and conditioning.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "corrtps/segment.hpp"

namespace corrtps {

struct TriMesh {
    std::vector<Vec3> vertices;                      // mm coordinates
    std::vector<std::array<std::int32_t, 3>> faces;  // outward winding
    std::string label;
};

struct MeshDiagnostics {
    std::int64_t euler_characteristic = 0;
    double surface_area = 0.0;    // mm^2
    double enclosed_volume = 0.0; // mm^3, signed divergence sum
    bool watertight = false;      // every edge on exactly 2 faces
};

// 0.5-isosurface of the 0/1 mask field. Vertices sit at cell-edge midpoints
// in physical mm. The mask must be non-empty and must not touch the volume
// border (pad_mask first if it does). Ambiguous faces always separate the
// foreground corners, which keeps adjacent cells crack-free.
TriMesh marching_cubes(const Mask& mask);

// Alternating Laplacian steps with factors lambda then mu per iteration,
// uniform umbrella weights. Requires 0 < lambda < -mu < 1.
TriMesh taubin_smooth(const TriMesh& mesh, double lambda, double mu, int iterations);

// Quadric-error edge-collapse decimation to at most target_faces faces.
// Collapses that break the link condition or flip a surviving face normal
// are rejected, so watertight inputs stay watertight.
TriMesh decimate(const TriMesh& mesh, std::size_t target_faces);

MeshDiagnostics mesh_diagnostics(const TriMesh& mesh);

// Merge exactly coincident vertices and drop degenerate faces.
TriMesh remove_duplicates_and_degenerate(const TriMesh& mesh);

bool mask_touches_border(const Mask& mask);
Mask pad_mask(const Mask& mask, int voxels);

// ASCII PLY with double-precision coordinates; round-trips exactly.
void write_ply(const TriMesh& mesh, const std::filesystem::path& path);
TriMesh read_ply(const std::filesystem::path& path);

} // namespace corrtps
