// tps.hpp - regularised 3D thin-plate-spline fitting and dense evaluation.
//
// Kernel U(r) = r, the 3D biharmonic analogue of Bookstein's 2D r^2 log r.
// The fitted map is f(x) = x + A x + t + sum_i w_i U(|x - c_i|); lambda_tps
// shifts the kernel diagonal (sign matching the kernel's conditional
// negative definiteness) and penalises only the non-affine part.
#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "corrtps/field.hpp"
#include "corrtps/geometry.hpp"

namespace corrtps {

struct ControlPointSet {
    std::vector<Vec3> sources;  // moving patient, mm
    std::vector<Vec3> targets;  // fixed patient, mm
    std::map<std::string, std::size_t> per_structure_counts;

    std::size_t size() const { return sources.size(); }
};

struct TpsModel {
    std::vector<Vec3> controls;            // copy of the fit's source points
    std::vector<Vec3> weights;             // non-affine coefficients, per control
    std::array<std::array<double, 3>, 3> linear{};  // affine displacement: L x + t
    Vec3 translation{};
    double lambda_tps = 0.0;

    // Displacement (mm) at a point; the mapped position is point + displacement.
    Vec3 displacement(Vec3 p) const;
};

// Solves the bordered system [K - lambda I, P; P^T, 0] [w; a] = [d; 0] per
// output dimension, d = targets - sources. lambda = 0 interpolates exactly.
TpsModel tps_fit(const ControlPointSet& cps, double lambda_tps);

std::vector<Vec3> tps_evaluate(const TpsModel& model, std::span<const Vec3> points);

// Dense displacement field on the grid. stride 1 evaluates every voxel
// center exactly; stride s evaluates the s-subsampled lattice (last planes
// included) and fills the rest by trilinear interpolation.
DisplacementField tps_field_on_grid(const TpsModel& model, const GridGeometry& geometry,
                                    int coarse_stride);

// Smoothness functional of the non-affine part (>= 0); shrinks as lambda grows.
double bending_energy(const TpsModel& model);

// Greedy farthest-point subsampling, per structure, proportional to structure
// counts. Deterministic; retained pairs are a subset of the input.
ControlPointSet subsample_controls(const ControlPointSet& cps, std::size_t max_n,
                                   double min_separation);

// Flat binary record with a versioned magic header.
void write_tps_model(const TpsModel& model, const std::filesystem::path& path);
TpsModel read_tps_model(const std::filesystem::path& path);

} // namespace corrtps
