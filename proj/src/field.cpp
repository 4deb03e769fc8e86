// field.cpp
#include "corrtps/field.hpp"

#include <algorithm>
#include <cmath>

namespace corrtps {

Vec3 sample_field(const DisplacementField& field, Vec3 point) {
    const auto& g = field.geometry;
    const Vec3 u = g.point_to_continuous_index(point);
    const double fi = std::floor(u.x), fj = std::floor(u.y), fk = std::floor(u.z);
    const double fx = u.x - fi, fy = u.y - fj, fz = u.z - fk;
    const int i0 = static_cast<int>(fi), j0 = static_cast<int>(fj), k0 = static_cast<int>(fk);
    auto fetch = [&](int i, int j, int k) -> Vec3 {
        i = std::clamp(i, 0, g.dims[0] - 1);
        j = std::clamp(j, 0, g.dims[1] - 1);
        k = std::clamp(k, 0, g.dims[2] - 1);
        return field.at(i, j, k);
    };
    const Vec3 c00 = (1.0 - fx) * fetch(i0, j0, k0) + fx * fetch(i0 + 1, j0, k0);
    const Vec3 c10 = (1.0 - fx) * fetch(i0, j0 + 1, k0) + fx * fetch(i0 + 1, j0 + 1, k0);
    const Vec3 c01 = (1.0 - fx) * fetch(i0, j0, k0 + 1) + fx * fetch(i0 + 1, j0, k0 + 1);
    const Vec3 c11 = (1.0 - fx) * fetch(i0, j0 + 1, k0 + 1) + fx * fetch(i0 + 1, j0 + 1, k0 + 1);
    const Vec3 c0 = (1.0 - fy) * c00 + fy * c10;
    const Vec3 c1 = (1.0 - fy) * c01 + fy * c11;
    return (1.0 - fz) * c0 + fz * c1;
}

} // namespace corrtps
