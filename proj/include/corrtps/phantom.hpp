// phantom.hpp - synthetic head-and-neck-like CT pairs with known deformation.
//
// A fixed phantom (body ellipsoid, bone cylinder, four organ blobs, detached
// table slab) is deformed by a known smooth TPS to produce the moving
// phantom, so registration accuracy can be scored against the exact field.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "corrtps/field.hpp"
#include "corrtps/segment.hpp"
#include "corrtps/tps.hpp"
#include "corrtps/volume.hpp"

namespace corrtps {

struct PhantomArgs {
    Index3 dims{96, 128, 160};
    Vec3 spacing{1.0, 1.0, 1.0};
    std::uint64_t seed = 1;
    bool deform = true;               // false: moving == fixed (self-pair)
    double max_displacement = 12.0;   // mm, cap on the ground-truth field
    int truth_stride = 1;             // stride used to rasterise the truth field
    int corrtps_organs = 4;           // first N organs marked in_corrtps
};

struct PhantomPair {
    Volume fixed_hu;
    Volume moving_hu;
    std::map<std::string, Mask> fixed_masks;   // organ structures only
    std::map<std::string, Mask> moving_masks;
    DisplacementField truth;                   // moving -> fixed displacement
    std::vector<std::string> corrtps_structures;
    std::vector<std::string> evaluation_structures;
};

PhantomPair make_phantom_pair(const PhantomArgs& args);

// Writes volumes, masks, the truth field and a ready-to-run pipeline config;
// returns the config path.
std::filesystem::path write_phantom_pair(const PhantomPair& pair,
                                         const std::filesystem::path& dir);

} // namespace corrtps
