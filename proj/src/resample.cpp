// resample.cpp
#include "corrtps/resample.hpp"

#include <cmath>

#include "corrtps/parallel.hpp"

namespace corrtps {

Volume warp_volume(const DisplacementField& field, const Volume& fixed) {
    field.validate();
    fixed.validate();
    Volume out;
    out.geometry = field.geometry;
    out.kind = fixed.kind;
    out.values.resize(static_cast<std::size_t>(field.geometry.voxel_count()));
    parallel_for(field.geometry.voxel_count(), [&](std::int64_t idx) {
        const Index3 c = field.geometry.delinearize(idx);
        const Vec3 x = field.geometry.index_to_point(c[0], c[1], c[2]);
        const Vec3 p = x + field.vectors[static_cast<std::size_t>(idx)];
        out.values[static_cast<std::size_t>(idx)] = static_cast<float>(trilinear_sample(fixed, p));
    });
    return out;
}

Mask warp_mask(const DisplacementField& field, const Mask& fixed_mask) {
    field.validate();
    fixed_mask.validate();
    Mask out;
    out.geometry = field.geometry;
    out.label = fixed_mask.label;
    out.bits.resize(static_cast<std::size_t>(field.geometry.voxel_count()));
    const auto& g = fixed_mask.geometry;
    parallel_for(field.geometry.voxel_count(), [&](std::int64_t idx) {
        const Index3 c = field.geometry.delinearize(idx);
        const Vec3 x = field.geometry.index_to_point(c[0], c[1], c[2]);
        const Vec3 p = x + field.vectors[static_cast<std::size_t>(idx)];
        const Vec3 u = g.point_to_continuous_index(p);
        const int i = static_cast<int>(std::llround(u.x));
        const int j = static_cast<int>(std::llround(u.y));
        const int k = static_cast<int>(std::llround(u.z));
        out.bits[static_cast<std::size_t>(idx)] =
            g.contains(i, j, k) && fixed_mask.at(i, j, k) ? 1 : 0;
    });
    return out;
}

DisplacementField compose_identity(const GridGeometry& geometry) {
    geometry.validate();
    DisplacementField f;
    f.geometry = geometry;
    f.vectors.assign(static_cast<std::size_t>(geometry.voxel_count()), Vec3{0, 0, 0});
    return f;
}

DisplacementField compose_pullback(const DisplacementField& outer,
                                   const DisplacementField& inner) {
    inner.validate();
    outer.validate();
    DisplacementField total;
    total.geometry = inner.geometry;
    total.vectors.resize(inner.vectors.size());
    parallel_for(inner.geometry.voxel_count(), [&](std::int64_t idx) {
        const Index3 c = inner.geometry.delinearize(idx);
        const Vec3 x = inner.geometry.index_to_point(c[0], c[1], c[2]);
        const Vec3 u = inner.vectors[static_cast<std::size_t>(idx)];
        total.vectors[static_cast<std::size_t>(idx)] = u + sample_field(outer, x + u);
    });
    return total;
}

} // namespace corrtps
