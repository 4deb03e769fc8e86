// segment.hpp - threshold masks for bony anatomy and the body envelope.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "corrtps/volume.hpp"

namespace corrtps {

enum class Connectivity { Six = 6, TwentySix = 26 };

struct Mask {
    GridGeometry geometry;
    std::vector<std::uint8_t> bits;  // 0/1, x-fastest
    std::string label;

    bool at(int i, int j, int k) const {
        return bits[static_cast<std::size_t>(geometry.linear_index(i, j, k))] != 0;
    }
    void set(int i, int j, int k, bool v) {
        bits[static_cast<std::size_t>(geometry.linear_index(i, j, k))] = v ? 1 : 0;
    }
    std::int64_t foreground_count() const;
    void validate() const;
};

// Bit set iff HU value >= low (boundary inclusive).
Mask threshold_mask(const Volume& vol, double low);

// Keep only the largest connected component; ties go to the component
// containing the smallest linear voxel index. Empty input stays empty.
Mask largest_component(const Mask& mask, Connectivity connectivity);

// Background components not 6-connected to the volume border become foreground.
Mask fill_holes(const Mask& mask);

// threshold(-200) -> largest 26-component -> fill_holes; label "envelope".
Mask extract_body_envelope(const Volume& vol);

// threshold(400) intersected with the envelope, voxels below the z-plane
// `crop_inferior` (mm) removed; label "bone".
Mask extract_bone(const Volume& vol, const Mask& envelope, double crop_inferior);

// Same crop window rule as crop_to_dims; padding is background.
Mask crop_mask(const Mask& mask, Index3 target, Vec3 center);

// Centroid of foreground voxel centers, mm. Empty mask -> degenerate error.
Vec3 mask_centroid(const Mask& mask);

} // namespace corrtps
