// phantom.cpp
#include "corrtps/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "corrtps/metaimage.hpp"
#include "corrtps/parallel.hpp"
#include "corrtps/resample.hpp"

namespace corrtps {

namespace {

// splitmix64: tiny deterministic generator, identical on every platform.
struct Rng {
    std::uint64_t state;
    explicit Rng(std::uint64_t seed) : state(seed) {}
    std::uint64_t next() {
        state += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    double uniform(double lo, double hi) {
        const double u = static_cast<double>(next() >> 11) * 0x1.0p-53;
        return lo + u * (hi - lo);
    }
};

// Ellipsoid with a low-order angular radius modulation. The lobes give the
// surfaces tangential features, which nearest-vertex correspondence needs;
// perfectly smooth quadrics would leave the matching free to slide.
struct LobedEllipsoid {
    Vec3 center;
    Vec3 radii;
    double hu = 0.0;
    double lobe_amplitude = 0.0;   // azimuthal lobes pin rotation about z
    int lobe_count = 3;
    double lobe_phase = 0.0;
    double axial_amplitude = 0.0;  // latitude waves pin sliding along z
    double axial_waves = 2.5;
    double axial_phase = 0.0;

    bool contains(Vec3 p) const {
        const double ux = (p.x - center.x) / radii.x;
        const double uy = (p.y - center.y) / radii.y;
        const double uz = (p.z - center.z) / radii.z;
        const double rho = std::sqrt(ux * ux + uy * uy + uz * uz);
        if (rho <= 1e-12) return true;
        const double theta = std::atan2(uy, ux);
        const double lat = uz / rho;  // in [-1, 1]
        const double boundary =
            1.0 +
            lobe_amplitude * std::cos(lobe_count * theta + lobe_phase) * (1.0 - lat * lat) +
            axial_amplitude * std::cos(axial_waves * 3.14159265358979323846 * lat + axial_phase);
        return rho <= boundary;
    }
};

} // namespace

PhantomPair make_phantom_pair(const PhantomArgs& args) {
    GridGeometry geom;
    geom.dims = args.dims;
    geom.spacing = args.spacing;
    geom.origin = {0, 0, 0};
    geom.validate();
    Rng rng(args.seed * 0x2545f4914f6cdd1dull + 0x9e3779b9ull);

    const Vec3 extent{(geom.dims[0] - 1) * geom.spacing.x, (geom.dims[1] - 1) * geom.spacing.y,
                      (geom.dims[2] - 1) * geom.spacing.z};
    const double scale_xy = std::min(extent.x, extent.y);

    // Odd lobe counts with generic phases leave no 180-degree symmetry, so
    // the PCA sign disambiguation in the prealignment is never ambiguous.
    LobedEllipsoid body;
    body.center = {0.5 * extent.x, 0.48 * extent.y, 0.5 * extent.z};
    body.radii = {0.34 * extent.x, 0.37 * extent.y, 0.46 * extent.z};
    body.hu = 20.0;
    body.lobe_amplitude = 0.07;
    body.lobe_count = 3;
    body.lobe_phase = rng.uniform(0.3, 1.2);
    body.axial_amplitude = 0.05;
    body.axial_waves = 3.5;
    body.axial_phase = rng.uniform(0.2, 2.8);

    // Bone column along z: bowed axis, vertebra-like rings, an axial taper
    // and a one-sided longitudinal ridge, so both axial position and
    // rotation about the axis are observable from the surface.
    const double bone_radius = 0.085 * scale_xy;
    const double bone_z_lo = 0.10 * extent.z, bone_z_hi = 0.90 * extent.z;
    const double bone_bow = 0.035 * scale_xy;
    const double segment_mm = std::max(14.0, extent.z / 8.0);
    const double ridge_angle = rng.uniform(0, 6.28);
    auto in_bone = [&](Vec3 p) {
        if (p.z < bone_z_lo || p.z > bone_z_hi) return false;
        const double zt = (p.z - bone_z_lo) / (bone_z_hi - bone_z_lo);
        const double ax = 0.5 * extent.x +
                          bone_bow * std::sin(3.14159265358979323846 * zt);
        const double ay = 0.60 * extent.y;
        const double theta = std::atan2(p.y - ay, p.x - ax);
        double r = bone_radius *
                   (1.0 + 0.15 * std::cos(2.0 * 3.14159265358979323846 * p.z / segment_mm) +
                    0.30 * (zt - 0.5));
        const double ridge = std::max(0.0, std::cos(theta - ridge_angle));
        r *= 1.0 + 0.25 * ridge * ridge * ridge;
        return std::hypot(p.x - ax, p.y - ay) <= r;
    };

    // Lobed organ blobs on a ring around the bone, jittered per seed.
    std::vector<LobedEllipsoid> organs;
    const double hu_values[4] = {-80.0, 60.0, 110.0, 160.0};
    const double ring = bone_radius + 0.21 * scale_xy;
    for (int o = 0; o < 4; ++o) {
        const double angle = 2.0 * 3.14159265358979323846 * (0.125 + 0.25 * o) +
                             rng.uniform(-0.12, 0.12);
        const double zfrac = 0.26 + 0.16 * o + rng.uniform(-0.03, 0.03);
        LobedEllipsoid e;
        e.center = {0.5 * extent.x + ring * std::cos(angle),
                    0.60 * extent.y + ring * std::sin(angle), zfrac * extent.z};
        e.radii = {(0.14 + rng.uniform(0, 0.015)) * scale_xy,
                   (0.095 + rng.uniform(0, 0.01)) * scale_xy,
                   (0.185 + rng.uniform(0, 0.015)) * scale_xy};
        e.hu = hu_values[o];
        e.lobe_amplitude = 0.26;
        e.lobe_count = 3;
        e.lobe_phase = rng.uniform(0.4, 5.8);
        e.axial_amplitude = 0.16;
        e.axial_waves = 2.0;
        e.axial_phase = rng.uniform(0.3, 2.9);
        organs.push_back(e);
    }

    PhantomPair pair;
    pair.fixed_hu.geometry = geom;
    pair.fixed_hu.kind = IntensityKind::HU;
    pair.fixed_hu.values.resize(static_cast<std::size_t>(geom.voxel_count()));

    const std::string organ_names[4] = {"organ_a", "organ_b", "organ_c", "organ_d"};
    for (int o = 0; o < 4; ++o) {
        Mask m;
        m.geometry = geom;
        m.label = organ_names[o];
        m.bits.assign(static_cast<std::size_t>(geom.voxel_count()), 0);
        pair.fixed_masks[organ_names[o]] = std::move(m);
    }

    parallel_for(geom.voxel_count(), [&](std::int64_t idx) {
        const Index3 c = geom.delinearize(idx);
        const Vec3 p = geom.index_to_point(c[0], c[1], c[2]);
        double hu = kAirHU;
        if (body.contains(p)) {
            hu = body.hu;
            if (in_bone(p)) hu = 1200.0;
            for (int o = 0; o < 4; ++o) {
                if (organs[static_cast<std::size_t>(o)].contains(p)) {
                    hu = organs[static_cast<std::size_t>(o)].hu;
                    pair.fixed_masks[organ_names[o]].bits[static_cast<std::size_t>(idx)] = 1;
                }
            }
        } else if (p.y > 0.90 * extent.y && p.y < 0.95 * extent.y && p.x > 0.2 * extent.x &&
                   p.x < 0.8 * extent.x && p.z > 0.1 * extent.z && p.z < 0.9 * extent.z) {
            hu = 100.0;  // detached table slab
        }
        pair.fixed_hu.values[static_cast<std::size_t>(idx)] = static_cast<float>(hu);
    });

    for (int o = 0; o < args.corrtps_organs && o < 4; ++o)
        pair.corrtps_structures.push_back(organ_names[o]);
    for (int o = args.corrtps_organs; o < 4; ++o)
        pair.evaluation_structures.push_back(organ_names[o]);

    if (!args.deform) {
        pair.moving_hu = pair.fixed_hu;
        pair.moving_masks = pair.fixed_masks;
        pair.truth = compose_identity(geom);
        return pair;
    }

    // Known smooth deformation: translation + mild linear part + a long-period
    // sinusoidal bow, rasterised through a TPS on a lattice spanning the
    // whole domain. Amplitudes are rescaled so no control displacement
    // exceeds max_displacement.
    const Vec3 shift{rng.uniform(-7, 7), rng.uniform(-7, 7), rng.uniform(-7, 7)};
    const double shear = rng.uniform(-0.008, 0.008);
    const double scale = rng.uniform(-0.012, 0.012);
    const Vec3 amp{rng.uniform(2, 3.5), rng.uniform(2, 3.5), rng.uniform(1.5, 3)};
    const double phase = rng.uniform(0, 6.28);
    auto analytic = [&](Vec3 p) -> Vec3 {
        const Vec3 q = p - 0.5 * extent;
        const double s = std::sin(2.0 * 3.14159265358979323846 * p.z / (3.0 * extent.z) + phase);
        const double c = std::cos(2.0 * 3.14159265358979323846 * p.y / (3.2 * extent.y) - phase);
        return {shift.x + scale * q.x + amp.x * s, shift.y + shear * q.z + amp.y * c,
                shift.z + amp.z * s * c - scale * q.z};
    };

    ControlPointSet truth_controls;
    for (int k = 0; k < 5; ++k)
        for (int j = 0; j < 4; ++j)
            for (int i = 0; i < 4; ++i) {
                const Vec3 p{(0.04 + 0.92 * i / 3.0) * extent.x +
                                 rng.uniform(-0.01, 0.01) * extent.x,
                             (0.04 + 0.92 * j / 3.0) * extent.y +
                                 rng.uniform(-0.01, 0.01) * extent.y,
                             (0.04 + 0.92 * k / 4.0) * extent.z +
                                 rng.uniform(-0.01, 0.01) * extent.z};
                truth_controls.sources.push_back(p);
                truth_controls.targets.push_back(p + analytic(p));
            }
    double peak = 0.0;
    for (std::size_t i = 0; i < truth_controls.size(); ++i)
        peak = std::max(peak, distance(truth_controls.sources[i], truth_controls.targets[i]));
    if (peak > args.max_displacement) {
        const double rescale = args.max_displacement / peak;
        for (std::size_t i = 0; i < truth_controls.size(); ++i)
            truth_controls.targets[i] =
                truth_controls.sources[i] +
                rescale * (truth_controls.targets[i] - truth_controls.sources[i]);
    }
    const TpsModel truth_model = tps_fit(truth_controls, 0.0);
    pair.truth = tps_field_on_grid(truth_model, geom, args.truth_stride);

    pair.moving_hu = warp_volume(pair.truth, pair.fixed_hu);
    for (const auto& [name, mask] : pair.fixed_masks)
        pair.moving_masks[name] = warp_mask(pair.truth, mask);
    return pair;
}

std::filesystem::path write_phantom_pair(const PhantomPair& pair,
                                         const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "masks");
    write_metaimage(pair.fixed_hu, dir / "fixed.mhd");
    write_metaimage(pair.moving_hu, dir / "moving.mhd");
    write_field(pair.truth, dir / "truth_field.mhd");
    for (const auto& [name, mask] : pair.fixed_masks)
        write_mask(mask, dir / "masks" / ("fixed_" + name + ".mhd"));
    for (const auto& [name, mask] : pair.moving_masks)
        write_mask(mask, dir / "masks" / ("moving_" + name + ".mhd"));

    const fs::path config_path = dir / "config.toml";
    std::ofstream cfg(config_path);
    if (!cfg) throw IoError("cannot write phantom config: " + config_path.string());
    cfg << "# corrtps pipeline configuration (synthetic phantom pair)\n";
    cfg << "fixed_volume = fixed.mhd\n";
    cfg << "moving_volume = moving.mhd\n";
    cfg << "output_dir = out\n";
    cfg << "structures = ";
    bool first = true;
    for (const auto& [name, mask] : pair.fixed_masks) {
        if (!first) cfg << ",";
        cfg << name;
        first = false;
    }
    cfg << "\n";
    for (const auto& [name, mask] : pair.fixed_masks) {
        const bool in_corrtps =
            std::find(pair.corrtps_structures.begin(), pair.corrtps_structures.end(), name) !=
            pair.corrtps_structures.end();
        cfg << "structure." << name << ".fixed_mask = masks/fixed_" << name << ".mhd\n";
        cfg << "structure." << name << ".moving_mask = masks/moving_" << name << ".mhd\n";
        cfg << "structure." << name << ".in_corrtps = " << (in_corrtps ? "true" : "false")
            << "\n";
    }
    cfg << "crop_enabled = false\n";
    cfg << "window_width = 1600\n";
    cfg << "window_level = 0\n";
    if (!cfg) throw IoError("failed writing phantom config");
    return config_path;
}

} // namespace corrtps
