// geometry.hpp - mm-space vectors and the voxel-grid <-> physical mapping.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "corrtps/errors.hpp"

namespace corrtps {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    constexpr double operator[](int a) const { return a == 0 ? x : (a == 1 ? y : z); }
    double& operator[](int a) { return a == 0 ? x : (a == 1 ? y : z); }

    friend constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend constexpr Vec3 operator*(double s, Vec3 v) { return {s * v.x, s * v.y, s * v.z}; }
    friend constexpr Vec3 operator*(Vec3 v, double s) { return s * v; }
    friend constexpr Vec3 operator/(Vec3 v, double s) { return {v.x / s, v.y / s, v.z / s}; }
    Vec3& operator+=(Vec3 o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(Vec3 o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
    friend constexpr bool operator==(Vec3 a, Vec3 b) { return a.x == b.x && a.y == b.y && a.z == b.z; }

    friend constexpr double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
    friend constexpr Vec3 cross(Vec3 a, Vec3 b) {
        return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
    }
    friend double norm(Vec3 v) { return std::sqrt(dot(v, v)); }
    friend constexpr double squared_norm(Vec3 v) { return dot(v, v); }
    friend double distance(Vec3 a, Vec3 b) { return norm(a - b); }
    friend constexpr double squared_distance(Vec3 a, Vec3 b) {
        const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
        return dx * dx + dy * dy + dz * dz;
    }
};

using Index3 = std::array<int, 3>;

// Regular voxel lattice: index (i,j,k) sits at origin + (i,j,k) * spacing.
// Array storage is x-fastest (i varies quickest), the MetaImage convention.
struct GridGeometry {
    Index3 dims{0, 0, 0};
    Vec3 spacing{1.0, 1.0, 1.0};
    Vec3 origin{0.0, 0.0, 0.0};

    void validate() const {
        for (int a = 0; a < 3; ++a) {
            if (dims[a] < 1) throw ContractError("GridGeometry: dims must be >= 1 per axis");
            if (!(spacing[a] > 0.0)) throw ContractError("GridGeometry: spacing must be > 0");
        }
    }

    std::int64_t voxel_count() const {
        return static_cast<std::int64_t>(dims[0]) * dims[1] * dims[2];
    }

    std::int64_t linear_index(int i, int j, int k) const {
        return static_cast<std::int64_t>(i) +
               static_cast<std::int64_t>(dims[0]) * (static_cast<std::int64_t>(j) +
               static_cast<std::int64_t>(dims[1]) * static_cast<std::int64_t>(k));
    }

    Index3 delinearize(std::int64_t idx) const {
        const int i = static_cast<int>(idx % dims[0]);
        const std::int64_t rest = idx / dims[0];
        const int j = static_cast<int>(rest % dims[1]);
        const int k = static_cast<int>(rest / dims[1]);
        return {i, j, k};
    }

    bool contains(int i, int j, int k) const {
        return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
    }

    Vec3 index_to_point(int i, int j, int k) const {
        return {origin.x + i * spacing.x, origin.y + j * spacing.y, origin.z + k * spacing.z};
    }

    // Real-valued voxel coordinates of a physical point.
    Vec3 point_to_continuous_index(Vec3 p) const {
        return {(p.x - origin.x) / spacing.x, (p.y - origin.y) / spacing.y,
                (p.z - origin.z) / spacing.z};
    }

    friend bool operator==(const GridGeometry& a, const GridGeometry& b) {
        return a.dims == b.dims && a.spacing == b.spacing && a.origin == b.origin;
    }

    std::string describe() const {
        return std::to_string(dims[0]) + "x" + std::to_string(dims[1]) + "x" +
               std::to_string(dims[2]);
    }
};

} // namespace corrtps
