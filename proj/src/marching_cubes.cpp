// marching_cubes.cpp - binary-mask isosurface extraction.
//
// The 256-case triangle table is generated at first use instead of being
// typed in. For each corner configuration the iso-contour segments are
// derived face by face (ambiguous faces always separate the positive
// corners), chained into closed loops, and fan-triangulated. Because every
// face decision depends only on that face's four corners, the two cells
// sharing a face always agree on its segments and the global surface is
// crack-free.
#include <algorithm>
#include <array>
#include <cassert>
#include <cstdint>
#include <map>
#include <vector>

#include "corrtps/mesh.hpp"

namespace corrtps {

namespace {

// Corner c in [0,8): offset bits (x, y, z) = (c&1, c>>1&1, c>>2&1).
// Edge id e in [0,12): axis a = e/4, sub = e%4 gives the coordinates of the
// two remaining axes u=(a+1)%3, v=(a+2)%3 as (sub&1, sub>>1&1).
struct EdgeInfo {
    int axis;
    int corner0, corner1;  // corner with coord[axis]=0, =1
};

std::array<EdgeInfo, 12> make_edges() {
    std::array<EdgeInfo, 12> edges{};
    for (int e = 0; e < 12; ++e) {
        const int a = e / 4;
        const int u = (a + 1) % 3, v = (a + 2) % 3;
        const int cu = e % 4 & 1, cv = (e % 4 >> 1) & 1;
        int coord0[3];
        coord0[a] = 0;
        coord0[u] = cu;
        coord0[v] = cv;
        int coord1[3] = {coord0[0], coord0[1], coord0[2]};
        coord1[a] = 1;
        edges[static_cast<std::size_t>(e)] = {
            a, coord0[0] + 2 * coord0[1] + 4 * coord0[2],
            coord1[0] + 2 * coord1[1] + 4 * coord1[2]};
    }
    return edges;
}

// One closed iso-contour within a cell: the crossed edges in cyclic order.
// Loops whose fan diagonals would lie on a cell face (possible when the cell
// has an ambiguous face) are triangulated around a centroid vertex instead,
// so no triangle edge coincides with another cell's and every mesh edge ends
// up on exactly two faces.
struct CaseLoop {
    std::vector<int> edges;
    bool use_centroid = false;
};
using CaseLoops = std::vector<CaseLoop>;

std::array<CaseLoops, 256> build_case_table() {
    const auto edges = make_edges();

    // corner-pair -> edge id
    std::map<std::pair<int, int>, int> edge_of;
    for (int e = 0; e < 12; ++e) {
        const auto& info = edges[static_cast<std::size_t>(e)];
        edge_of[{info.corner0, info.corner1}] = e;
        edge_of[{info.corner1, info.corner0}] = e;
    }

    // faces containing each edge, for the diagonal-on-face test
    std::array<std::array<int, 2>, 12> faces_of_edge{};
    for (int e = 0; e < 12; ++e) {
        const int a = edges[static_cast<std::size_t>(e)].axis;
        const int u = (a + 1) % 3, v = (a + 2) % 3;
        const int cu = e % 4 & 1, cv = (e % 4 >> 1) & 1;
        faces_of_edge[static_cast<std::size_t>(e)] = {u * 2 + cu, v * 2 + cv};
    }
    auto share_face = [&](int e1, int e2) {
        for (const int f1 : faces_of_edge[static_cast<std::size_t>(e1)])
            for (const int f2 : faces_of_edge[static_cast<std::size_t>(e2)])
                if (f1 == f2) return true;
        return false;
    };

    // 4-corner cycles of each face, counter-clockwise seen from outside.
    std::array<std::array<int, 4>, 6> face_cycle{};
    for (int f = 0; f < 6; ++f) {
        const int a = f / 2, side = f % 2;
        const int u = (a + 1) % 3, v = (a + 2) % 3;
        // (cu,cv) order is CCW w.r.t. +e_a; reverse it on the low side.
        const std::array<std::array<int, 2>, 4> uv =
            side == 1 ? std::array<std::array<int, 2>, 4>{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}}
                      : std::array<std::array<int, 2>, 4>{{{0, 0}, {0, 1}, {1, 1}, {1, 0}}};
        for (int t = 0; t < 4; ++t) {
            int coord[3];
            coord[a] = side;
            coord[u] = uv[static_cast<std::size_t>(t)][0];
            coord[v] = uv[static_cast<std::size_t>(t)][1];
            face_cycle[static_cast<std::size_t>(f)][static_cast<std::size_t>(t)] =
                coord[0] + 2 * coord[1] + 4 * coord[2];
        }
    }

    std::array<CaseLoops, 256> table{};
    for (int config = 0; config < 256; ++config) {
        // Directed iso-segments (tail edge -> head edge) over all faces.
        std::map<int, int> next;  // tail -> head
        for (int f = 0; f < 6; ++f) {
            const auto& cyc = face_cycle[static_cast<std::size_t>(f)];
            bool pos[4];
            for (int t = 0; t < 4; ++t)
                pos[t] = (config >> cyc[static_cast<std::size_t>(t)]) & 1;
            // Maximal cyclic runs of positive corners; each run contributes a
            // segment from its exit crossing to its entry crossing.
            for (int s = 0; s < 4; ++s) {
                if (!pos[s] || pos[(s + 3) % 4]) continue;  // s starts a run
                int e = s;
                while (pos[(e + 1) % 4]) e = (e + 1) % 4;
                if ((e + 1) % 4 == s) break;  // whole face positive
                const int entry = edge_of.at({cyc[static_cast<std::size_t>((s + 3) % 4)],
                                              cyc[static_cast<std::size_t>(s)]});
                const int exit = edge_of.at({cyc[static_cast<std::size_t>(e)],
                                             cyc[static_cast<std::size_t>((e + 1) % 4)]});
                next[exit] = entry;
            }
        }

        // Chain segments into closed loops.
        CaseLoops loops;
        std::map<int, int> remaining = next;
        while (!remaining.empty()) {
            const int start = remaining.begin()->first;
            CaseLoop loop;
            int cur = start;
            do {
                loop.edges.push_back(cur);
                const auto it = remaining.find(cur);
                assert(it != remaining.end() && "marching cubes: open contour");
                cur = it->second;
                remaining.erase(it);
            } while (cur != start);
            assert(loop.edges.size() >= 3);
            // A fan diagonal between two non-consecutive loop vertices that
            // share a face would lie on that face; switch to a centroid.
            const std::size_t len = loop.edges.size();
            for (std::size_t i = 0; i < len && !loop.use_centroid; ++i) {
                for (std::size_t j = i + 2; j < len; ++j) {
                    if (i == 0 && j == len - 1) continue;  // consecutive via wrap
                    if (share_face(loop.edges[i], loop.edges[j])) {
                        loop.use_centroid = true;
                        break;
                    }
                }
            }
            loops.push_back(std::move(loop));
        }
        table[static_cast<std::size_t>(config)] = std::move(loops);
    }
    return table;
}

const std::array<CaseLoops, 256>& case_table() {
    static const std::array<CaseLoops, 256> table = build_case_table();
    return table;
}

} // namespace

bool mask_touches_border(const Mask& mask) {
    const auto& g = mask.geometry;
    for (std::int64_t idx = 0; idx < g.voxel_count(); ++idx) {
        if (mask.bits[static_cast<std::size_t>(idx)] == 0) continue;
        const Index3 c = g.delinearize(idx);
        if (c[0] == 0 || c[1] == 0 || c[2] == 0 || c[0] == g.dims[0] - 1 ||
            c[1] == g.dims[1] - 1 || c[2] == g.dims[2] - 1)
            return true;
    }
    return false;
}

Mask pad_mask(const Mask& mask, int voxels) {
    if (voxels < 0) throw ContractError("pad_mask: negative padding");
    Mask out;
    out.label = mask.label;
    out.geometry.spacing = mask.geometry.spacing;
    out.geometry.dims = {mask.geometry.dims[0] + 2 * voxels, mask.geometry.dims[1] + 2 * voxels,
                         mask.geometry.dims[2] + 2 * voxels};
    out.geometry.origin = {mask.geometry.origin.x - voxels * mask.geometry.spacing.x,
                           mask.geometry.origin.y - voxels * mask.geometry.spacing.y,
                           mask.geometry.origin.z - voxels * mask.geometry.spacing.z};
    out.bits.assign(static_cast<std::size_t>(out.geometry.voxel_count()), 0);
    for (int k = 0; k < mask.geometry.dims[2]; ++k)
        for (int j = 0; j < mask.geometry.dims[1]; ++j)
            for (int i = 0; i < mask.geometry.dims[0]; ++i)
                if (mask.at(i, j, k)) out.set(i + voxels, j + voxels, k + voxels, true);
    return out;
}

TriMesh marching_cubes(const Mask& mask) {
    mask.validate();
    if (mask.foreground_count() == 0)
        throw DegenerateInputError("marching_cubes: empty mask");
    if (mask_touches_border(mask))
        throw ContractError("marching_cubes: mask touches the volume border; pad it first");

    const auto& table = case_table();
    const auto& g = mask.geometry;
    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];

    TriMesh mesh;
    mesh.label = mask.label;

    // Rolling per-plane caches of vertex ids: x- and y-edges for planes k and
    // k+1, z-edges between them. -1 = not created yet.
    const std::size_t plane = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
    std::vector<std::int32_t> xe_lo(plane, -1), xe_hi(plane, -1);
    std::vector<std::int32_t> ye_lo(plane, -1), ye_hi(plane, -1);
    std::vector<std::int32_t> ze(plane, -1);
    const auto at2 = [nx](int i, int j) {
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx) +
               static_cast<std::size_t>(i);
    };

    // Vertex at the midpoint of the edge leaving voxel (i,j,zc) along `axis`.
    // x/y caches are keyed by the parity of the edge's z-plane; z-edges use
    // the single between-planes cache.
    auto vertex_on_edge = [&](int axis, int i, int j, int zc) -> std::int32_t {
        std::vector<std::int32_t>* cache = nullptr;
        const std::size_t slot = at2(i, j);
        if (axis == 0) cache = (zc % 2 == 0) ? &xe_lo : &xe_hi;
        else if (axis == 1) cache = (zc % 2 == 0) ? &ye_lo : &ye_hi;
        else cache = &ze;
        std::int32_t& id = (*cache)[slot];
        if (id < 0) {
            Vec3 p = g.index_to_point(i, j, zc);
            p[axis] += 0.5 * g.spacing[axis];
            id = static_cast<std::int32_t>(mesh.vertices.size());
            mesh.vertices.push_back(p);
        }
        return id;
    };

    for (int k = 0; k + 1 < nz; ++k) {
        const bool even = k % 2 == 0;
        auto& xn = even ? xe_hi : xe_lo;  // caches for plane k+1
        auto& yn = even ? ye_hi : ye_lo;
        std::fill(xn.begin(), xn.end(), -1);
        std::fill(yn.begin(), yn.end(), -1);
        std::fill(ze.begin(), ze.end(), -1);
        for (int j = 0; j + 1 < ny; ++j) {
            for (int i = 0; i + 1 < nx; ++i) {
                int config = 0;
                for (int c = 0; c < 8; ++c) {
                    if (mask.at(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)))
                        config |= 1 << c;
                }
                if (config == 0 || config == 255) continue;
                for (const auto& loop : table[static_cast<std::size_t>(config)]) {
                    const std::size_t len = loop.edges.size();
                    std::vector<std::int32_t> ids(len);
                    for (std::size_t t = 0; t < len; ++t) {
                        const int e = loop.edges[t];
                        const int a = e / 4;
                        const int u = (a + 1) % 3, v = (a + 2) % 3;
                        int coord[3] = {i, j, k};
                        coord[u] += e % 4 & 1;
                        coord[v] += (e % 4 >> 1) & 1;
                        ids[t] = vertex_on_edge(a, coord[0], coord[1], coord[2]);
                    }
                    // Loops trace the contour with inward orientation; the
                    // reversed emission makes normals point outward.
                    if (loop.use_centroid) {
                        Vec3 c{0, 0, 0};
                        for (const std::int32_t id : ids)
                            c += mesh.vertices[static_cast<std::size_t>(id)];
                        c = c / static_cast<double>(len);
                        const auto cid = static_cast<std::int32_t>(mesh.vertices.size());
                        mesh.vertices.push_back(c);
                        for (std::size_t t = 0; t < len; ++t)
                            mesh.faces.push_back({cid, ids[(t + 1) % len], ids[t]});
                    } else {
                        for (std::size_t t = 1; t + 1 < len; ++t)
                            mesh.faces.push_back({ids[0], ids[t + 1], ids[t]});
                    }
                }
            }
        }
    }
    return mesh;
}

} // namespace corrtps
