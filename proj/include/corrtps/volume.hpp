// volume.hpp - scalar CT volumes: preprocessing and interpolation.
#pragma once

#include <cstdint>
#include <vector>

#include "corrtps/geometry.hpp"

namespace corrtps {

enum class IntensityKind { HU, Normalised };

constexpr double kAirHU = -1000.0;

struct Volume {
    GridGeometry geometry;
    std::vector<float> values;  // x-fastest, geometry.voxel_count() elements
    IntensityKind kind = IntensityKind::HU;

    float at(int i, int j, int k) const {
        return values[static_cast<std::size_t>(geometry.linear_index(i, j, k))];
    }
    float& at(int i, int j, int k) {
        return values[static_cast<std::size_t>(geometry.linear_index(i, j, k))];
    }
    double border_value() const { return kind == IntensityKind::HU ? kAirHU : 0.0; }
    void validate() const;
};

// Contrast windowing: v -> clamp((v - (level - window/2)) / window, 0, 1).
Volume window_normalize(const Volume& vol, double window, double level);

// Crop/pad to `target` dims, window centred on `center` (mm); padding is air.
Volume crop_to_dims(const Volume& vol, Index3 target, Vec3 center);

// Start indices of the crop window used by crop_to_dims (shared with mask crops).
Index3 crop_start_indices(const GridGeometry& geometry, Index3 target, Vec3 center);

// Exact trilinear interpolation at a physical point; outside the grid the
// missing neighbours take the border value (air for HU, 0 for normalised).
double trilinear_sample(const Volume& vol, Vec3 point);

} // namespace corrtps
