// volume.cpp
#include "corrtps/volume.hpp"

#include <algorithm>
#include <cmath>

#include "corrtps/parallel.hpp"

namespace corrtps {

void Volume::validate() const {
    geometry.validate();
    if (static_cast<std::int64_t>(values.size()) != geometry.voxel_count())
        throw ContractError("Volume: values length does not match dims product");
}

Volume window_normalize(const Volume& vol, double window, double level) {
    if (vol.kind != IntensityKind::HU)
        throw ContractError("window_normalize: input must be HU-valued");
    if (!(window > 0.0)) throw ContractError("window_normalize: window must be > 0");
    Volume out;
    out.geometry = vol.geometry;
    out.kind = IntensityKind::Normalised;
    out.values.resize(vol.values.size());
    const double low = level - window / 2.0;
    parallel_for(static_cast<std::int64_t>(vol.values.size()), [&](std::int64_t i) {
        const double t = (static_cast<double>(vol.values[static_cast<std::size_t>(i)]) - low) / window;
        out.values[static_cast<std::size_t>(i)] =
            static_cast<float>(std::clamp(t, 0.0, 1.0));
    });
    return out;
}

Index3 crop_start_indices(const GridGeometry& geometry, Index3 target, Vec3 center) {
    Index3 start{};
    for (int a = 0; a < 3; ++a) {
        if (target[a] < 1) throw ContractError("crop: target dims must be >= 1");
        const double c = (center[a] - geometry.origin[a]) / geometry.spacing[a];
        start[a] = static_cast<int>(std::llround(c - (target[a] - 1) / 2.0));
    }
    return start;
}

Volume crop_to_dims(const Volume& vol, Index3 target, Vec3 center) {
    vol.validate();
    const Index3 start = crop_start_indices(vol.geometry, target, center);
    Volume out;
    out.kind = vol.kind;
    out.geometry.dims = target;
    out.geometry.spacing = vol.geometry.spacing;
    out.geometry.origin = {vol.geometry.origin.x + start[0] * vol.geometry.spacing.x,
                           vol.geometry.origin.y + start[1] * vol.geometry.spacing.y,
                           vol.geometry.origin.z + start[2] * vol.geometry.spacing.z};
    const float pad = static_cast<float>(vol.border_value());
    out.values.assign(static_cast<std::size_t>(out.geometry.voxel_count()), pad);
    const auto& g = vol.geometry;
    parallel_for(out.geometry.voxel_count(), [&](std::int64_t idx) {
        const Index3 o = out.geometry.delinearize(idx);
        const int si = o[0] + start[0], sj = o[1] + start[1], sk = o[2] + start[2];
        if (g.contains(si, sj, sk))
            out.values[static_cast<std::size_t>(idx)] = vol.at(si, sj, sk);
    });
    return out;
}

double trilinear_sample(const Volume& vol, Vec3 point) {
    const Vec3 u = vol.geometry.point_to_continuous_index(point);
    const double fi = std::floor(u.x), fj = std::floor(u.y), fk = std::floor(u.z);
    const int i0 = static_cast<int>(fi), j0 = static_cast<int>(fj), k0 = static_cast<int>(fk);
    const double fx = u.x - fi, fy = u.y - fj, fz = u.z - fk;
    const double border = vol.border_value();
    const auto& g = vol.geometry;
    auto fetch = [&](int i, int j, int k) -> double {
        return g.contains(i, j, k) ? static_cast<double>(vol.at(i, j, k)) : border;
    };
    const double c000 = fetch(i0, j0, k0), c100 = fetch(i0 + 1, j0, k0);
    const double c010 = fetch(i0, j0 + 1, k0), c110 = fetch(i0 + 1, j0 + 1, k0);
    const double c001 = fetch(i0, j0, k0 + 1), c101 = fetch(i0 + 1, j0, k0 + 1);
    const double c011 = fetch(i0, j0 + 1, k0 + 1), c111 = fetch(i0 + 1, j0 + 1, k0 + 1);
    const double c00 = c000 * (1.0 - fx) + c100 * fx;
    const double c10 = c010 * (1.0 - fx) + c110 * fx;
    const double c01 = c001 * (1.0 - fx) + c101 * fx;
    const double c11 = c011 * (1.0 - fx) + c111 * fx;
    const double c0 = c00 * (1.0 - fy) + c10 * fy;
    const double c1 = c01 * (1.0 - fy) + c11 * fy;
    return c0 * (1.0 - fz) + c1 * fz;
}

} // namespace corrtps
