// field.hpp - dense displacement fields on a voxel grid (units mm).
#pragma once

#include <vector>

#include "corrtps/geometry.hpp"

namespace corrtps {

// One 3-vector per voxel of `geometry` (the moving-image grid), x-fastest.
struct DisplacementField {
    GridGeometry geometry;
    std::vector<Vec3> vectors;

    Vec3 at(int i, int j, int k) const {
        return vectors[static_cast<std::size_t>(geometry.linear_index(i, j, k))];
    }
    Vec3& at(int i, int j, int k) {
        return vectors[static_cast<std::size_t>(geometry.linear_index(i, j, k))];
    }
    void validate() const {
        geometry.validate();
        if (static_cast<std::int64_t>(vectors.size()) != geometry.voxel_count())
            throw ContractError("DisplacementField: vectors length does not match dims product");
    }
};

// Trilinear interpolation of the field at a physical point; outside the grid
// the nearest border voxel's vector is used (clamp).
Vec3 sample_field(const DisplacementField& field, Vec3 point);

} // namespace corrtps
