// helpers.hpp - shared builders for tests (deterministic, self-contained).
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "corrtps/segment.hpp"
#include "corrtps/volume.hpp"

namespace corrtps::test {

// splitmix64-based uniform generator; identical on every platform.
struct TestRng {
    std::uint64_t state;
    explicit TestRng(std::uint64_t seed) : state(seed) {}
    std::uint64_t next() {
        state += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    double uniform(double lo, double hi) {
        return lo + static_cast<double>(next() >> 11) * 0x1.0p-53 * (hi - lo);
    }
    int uniform_int(int lo, int hi) {  // inclusive
        return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1));
    }
};

inline GridGeometry make_geometry(Index3 dims, Vec3 spacing = {1, 1, 1},
                                  Vec3 origin = {0, 0, 0}) {
    GridGeometry g;
    g.dims = dims;
    g.spacing = spacing;
    g.origin = origin;
    return g;
}

inline Volume make_volume(Index3 dims, float fill, IntensityKind kind = IntensityKind::HU,
                          Vec3 spacing = {1, 1, 1}, Vec3 origin = {0, 0, 0}) {
    Volume v;
    v.geometry = make_geometry(dims, spacing, origin);
    v.kind = kind;
    v.values.assign(static_cast<std::size_t>(v.geometry.voxel_count()), fill);
    return v;
}

inline Mask make_empty_mask(Index3 dims, Vec3 spacing = {1, 1, 1}, Vec3 origin = {0, 0, 0},
                            const std::string& label = "test") {
    Mask m;
    m.geometry = make_geometry(dims, spacing, origin);
    m.label = label;
    m.bits.assign(static_cast<std::size_t>(m.geometry.voxel_count()), 0);
    return m;
}

// Digital ball of `radius` voxels centred in a grid with a 2-voxel margin.
inline Mask make_ball_mask(int radius, Vec3 spacing = {1, 1, 1}) {
    const int n = 2 * radius + 5;
    Mask m = make_empty_mask({n, n, n}, spacing, {0, 0, 0}, "ball");
    const double c = (n - 1) / 2.0;
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const double dx = i - c, dy = j - c, dz = k - c;
                if (dx * dx + dy * dy + dz * dz <= static_cast<double>(radius) * radius)
                    m.set(i, j, k, true);
            }
    return m;
}

inline Mask make_box_mask(Index3 dims, Index3 lo, Index3 hi,
                          const std::string& label = "box") {
    Mask m = make_empty_mask(dims, {1, 1, 1}, {0, 0, 0}, label);
    for (int k = lo[2]; k <= hi[2]; ++k)
        for (int j = lo[1]; j <= hi[1]; ++j)
            for (int i = lo[0]; i <= hi[0]; ++i) m.set(i, j, k, true);
    return m;
}

// Solid torus around the z-axis: (sqrt(x^2+y^2) - R)^2 + z^2 <= r^2.
inline Mask make_torus_mask(double major, double minor) {
    const int n = static_cast<int>(2 * (major + minor)) + 7;
    Mask m = make_empty_mask({n, n, n}, {1, 1, 1}, {0, 0, 0}, "torus");
    const double c = (n - 1) / 2.0;
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const double rho = std::hypot(i - c, j - c);
                const double d = rho - major;
                if (d * d + (k - c) * (k - c) <= minor * minor) m.set(i, j, k, true);
            }
    return m;
}

// Unique writable scratch directory per test site.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("corrtps_test_" + name);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace corrtps::test
