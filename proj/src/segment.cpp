// segment.cpp
#include "corrtps/segment.hpp"

#include <array>
#include <vector>

#include "corrtps/parallel.hpp"

namespace corrtps {

void Mask::validate() const {
    geometry.validate();
    if (static_cast<std::int64_t>(bits.size()) != geometry.voxel_count())
        throw ContractError("Mask: bits length does not match dims product");
}

std::int64_t Mask::foreground_count() const {
    std::int64_t n = 0;
    for (std::uint8_t b : bits) n += b != 0;
    return n;
}

Mask threshold_mask(const Volume& vol, double low) {
    if (vol.kind != IntensityKind::HU)
        throw ContractError("threshold_mask: input must be HU-valued");
    vol.validate();
    Mask out;
    out.geometry = vol.geometry;
    out.bits.resize(vol.values.size());
    parallel_for(static_cast<std::int64_t>(vol.values.size()), [&](std::int64_t i) {
        out.bits[static_cast<std::size_t>(i)] =
            static_cast<double>(vol.values[static_cast<std::size_t>(i)]) >= low ? 1 : 0;
    });
    return out;
}

namespace {

std::vector<Index3> neighbour_offsets(Connectivity connectivity) {
    std::vector<Index3> offs;
    for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0 && dz == 0) continue;
                const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
                if (connectivity == Connectivity::Six && manhattan != 1) continue;
                offs.push_back({dx, dy, dz});
            }
    return offs;
}

// BFS flood fill over the voxels where `inside(idx)` holds, starting from
// `seed`; marks labels[] with `id`. Returns component size.
std::int64_t flood(const GridGeometry& g, const std::vector<Index3>& offs,
                   std::vector<std::int32_t>& labels, std::int32_t id,
                   std::int64_t seed, const std::vector<std::uint8_t>& bits,
                   std::uint8_t wanted) {
    std::vector<std::int64_t> queue;
    queue.push_back(seed);
    labels[static_cast<std::size_t>(seed)] = id;
    std::int64_t size = 0;
    while (!queue.empty()) {
        const std::int64_t cur = queue.back();
        queue.pop_back();
        ++size;
        const Index3 c = g.delinearize(cur);
        for (const Index3& o : offs) {
            const int ni = c[0] + o[0], nj = c[1] + o[1], nk = c[2] + o[2];
            if (!g.contains(ni, nj, nk)) continue;
            const std::int64_t lin = g.linear_index(ni, nj, nk);
            if (bits[static_cast<std::size_t>(lin)] != wanted) continue;
            if (labels[static_cast<std::size_t>(lin)] >= 0) continue;
            labels[static_cast<std::size_t>(lin)] = id;
            queue.push_back(lin);
        }
    }
    return size;
}

} // namespace

Mask largest_component(const Mask& mask, Connectivity connectivity) {
    mask.validate();
    const auto& g = mask.geometry;
    const std::int64_t n = g.voxel_count();
    std::vector<std::int32_t> labels(static_cast<std::size_t>(n), -1);
    const auto offs = neighbour_offsets(connectivity);

    std::int32_t best_id = -1;
    std::int64_t best_size = 0;
    std::int32_t next_id = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        if (mask.bits[static_cast<std::size_t>(i)] == 0) continue;
        if (labels[static_cast<std::size_t>(i)] >= 0) continue;
        const std::int64_t size = flood(g, offs, labels, next_id, i, mask.bits, 1);
        if (size > best_size) {  // strict: earliest component wins ties
            best_size = size;
            best_id = next_id;
        }
        ++next_id;
    }

    Mask out;
    out.geometry = g;
    out.label = mask.label;
    out.bits.assign(static_cast<std::size_t>(n), 0);
    if (best_id >= 0) {
        for (std::int64_t i = 0; i < n; ++i)
            if (labels[static_cast<std::size_t>(i)] == best_id)
                out.bits[static_cast<std::size_t>(i)] = 1;
    }
    return out;
}

Mask fill_holes(const Mask& mask) {
    mask.validate();
    const auto& g = mask.geometry;
    const std::int64_t n = g.voxel_count();
    std::vector<std::int32_t> labels(static_cast<std::size_t>(n), -1);
    const auto offs = neighbour_offsets(Connectivity::Six);

    // Flood background from every border voxel.
    for (std::int64_t i = 0; i < n; ++i) {
        if (mask.bits[static_cast<std::size_t>(i)] != 0) continue;
        if (labels[static_cast<std::size_t>(i)] >= 0) continue;
        const Index3 c = g.delinearize(i);
        const bool border = c[0] == 0 || c[1] == 0 || c[2] == 0 ||
                            c[0] == g.dims[0] - 1 || c[1] == g.dims[1] - 1 ||
                            c[2] == g.dims[2] - 1;
        if (!border) continue;
        flood(g, offs, labels, 0, i, mask.bits, 0);
    }

    Mask out;
    out.geometry = g;
    out.label = mask.label;
    out.bits.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const bool fg = mask.bits[static_cast<std::size_t>(i)] != 0 ||
                        labels[static_cast<std::size_t>(i)] < 0;
        out.bits[static_cast<std::size_t>(i)] = fg ? 1 : 0;
    }
    return out;
}

Mask extract_body_envelope(const Volume& vol) {
    Mask m = threshold_mask(vol, -200.0);
    m = largest_component(m, Connectivity::TwentySix);
    m = fill_holes(m);
    m.label = "envelope";
    if (m.foreground_count() == 0)
        throw DegenerateInputError("extract_body_envelope: no tissue above -200 HU");
    return m;
}

Mask extract_bone(const Volume& vol, const Mask& envelope, double crop_inferior) {
    if (!(vol.geometry == envelope.geometry))
        throw ContractError("extract_bone: volume and envelope geometries differ");
    Mask bone = threshold_mask(vol, 400.0);
    const auto& g = bone.geometry;
    parallel_for(g.voxel_count(), [&](std::int64_t idx) {
        if (bone.bits[static_cast<std::size_t>(idx)] == 0) return;
        if (envelope.bits[static_cast<std::size_t>(idx)] == 0) {
            bone.bits[static_cast<std::size_t>(idx)] = 0;
            return;
        }
        const Index3 c = g.delinearize(idx);
        const double z = g.origin.z + c[2] * g.spacing.z;
        if (z < crop_inferior) bone.bits[static_cast<std::size_t>(idx)] = 0;
    });
    bone.label = "bone";
    return bone;
}

Mask crop_mask(const Mask& mask, Index3 target, Vec3 center) {
    mask.validate();
    const Index3 start = crop_start_indices(mask.geometry, target, center);
    Mask out;
    out.label = mask.label;
    out.geometry.dims = target;
    out.geometry.spacing = mask.geometry.spacing;
    out.geometry.origin = {mask.geometry.origin.x + start[0] * mask.geometry.spacing.x,
                           mask.geometry.origin.y + start[1] * mask.geometry.spacing.y,
                           mask.geometry.origin.z + start[2] * mask.geometry.spacing.z};
    out.bits.assign(static_cast<std::size_t>(out.geometry.voxel_count()), 0);
    const auto& g = mask.geometry;
    parallel_for(out.geometry.voxel_count(), [&](std::int64_t idx) {
        const Index3 o = out.geometry.delinearize(idx);
        const int si = o[0] + start[0], sj = o[1] + start[1], sk = o[2] + start[2];
        if (g.contains(si, sj, sk))
            out.bits[static_cast<std::size_t>(idx)] = mask.at(si, sj, sk) ? 1 : 0;
    });
    return out;
}

Vec3 mask_centroid(const Mask& mask) {
    mask.validate();
    const auto& g = mask.geometry;
    double sx = 0, sy = 0, sz = 0;
    std::int64_t count = 0;
    for (std::int64_t idx = 0; idx < g.voxel_count(); ++idx) {
        if (mask.bits[static_cast<std::size_t>(idx)] == 0) continue;
        const Index3 c = g.delinearize(idx);
        sx += c[0]; sy += c[1]; sz += c[2];
        ++count;
    }
    if (count == 0) throw DegenerateInputError("mask_centroid: empty mask");
    return {g.origin.x + (sx / count) * g.spacing.x,
            g.origin.y + (sy / count) * g.spacing.y,
            g.origin.z + (sz / count) * g.spacing.z};
}

} // namespace corrtps
