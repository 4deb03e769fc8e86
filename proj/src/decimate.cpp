// decimate.cpp - quadric-error edge-collapse decimation.
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <queue>
#include <set>
#include <vector>

#include "corrtps/mesh.hpp"

namespace corrtps {

namespace {

// Symmetric 4x4 quadric, upper triangle: [a2 ab ac ad b2 bc bd c2 cd d2].
struct Quadric {
    std::array<double, 10> q{};

    void add_plane(Vec3 n, double d, double weight) {
        const double c[4] = {n.x, n.y, n.z, d};
        int t = 0;
        for (int i = 0; i < 4; ++i)
            for (int j = i; j < 4; ++j) q[static_cast<std::size_t>(t++)] += weight * c[i] * c[j];
    }
    Quadric& operator+=(const Quadric& o) {
        for (int i = 0; i < 10; ++i) q[static_cast<std::size_t>(i)] += o.q[static_cast<std::size_t>(i)];
        return *this;
    }
    double evaluate(Vec3 v) const {
        const double c[4] = {v.x, v.y, v.z, 1.0};
        double sum = 0.0;
        int t = 0;
        for (int i = 0; i < 4; ++i)
            for (int j = i; j < 4; ++j) {
                const double term = q[static_cast<std::size_t>(t++)] * c[i] * c[j];
                sum += (i == j) ? term : 2.0 * term;
            }
        return sum;
    }
    // Minimiser of the quadratic form, if the 3x3 system is well conditioned.
    bool optimal_point(Vec3& out) const {
        const double a11 = q[0], a12 = q[1], a13 = q[2], b1 = -q[3];
        const double a22 = q[4], a23 = q[5], b2 = -q[6];
        const double a33 = q[7], b3 = -q[8];
        const double det = a11 * (a22 * a33 - a23 * a23) - a12 * (a12 * a33 - a23 * a13) +
                           a13 * (a12 * a23 - a22 * a13);
        const double scale = std::abs(a11) + std::abs(a22) + std::abs(a33);
        if (std::abs(det) <= 1e-10 * scale * scale * scale) return false;
        out.x = (b1 * (a22 * a33 - a23 * a23) - a12 * (b2 * a33 - a23 * b3) +
                 a13 * (b2 * a23 - a22 * b3)) / det;
        out.y = (a11 * (b2 * a33 - a23 * b3) - b1 * (a12 * a33 - a13 * a23) +
                 a13 * (a12 * b3 - b2 * a13)) / det;
        out.z = (a11 * (a22 * b3 - b2 * a23) - a12 * (a12 * b3 - b2 * a13) +
                 b1 * (a12 * a23 - a22 * a13)) / det;
        return std::isfinite(out.x) && std::isfinite(out.y) && std::isfinite(out.z);
    }
};

struct Candidate {
    double cost;
    std::int32_t a, b;          // a < b
    std::uint32_t va, vb;        // vertex versions at push time
    Vec3 position;
    // Deterministic order: cost, then edge indices.
    bool operator>(const Candidate& o) const {
        if (cost != o.cost) return cost > o.cost;
        if (a != o.a) return a > o.a;
        return b > o.b;
    }
};

struct Working {
    std::vector<Vec3> verts;
    std::vector<std::array<std::int32_t, 3>> faces;
    std::vector<bool> face_alive;
    std::vector<bool> vert_alive;
    std::vector<Quadric> quadrics;
    std::vector<std::vector<std::int32_t>> vfaces;  // vertex -> incident faces
    std::vector<std::uint32_t> version;

    Vec3 face_normal(std::int32_t f) const {
        const auto& t = faces[static_cast<std::size_t>(f)];
        return cross(verts[static_cast<std::size_t>(t[1])] - verts[static_cast<std::size_t>(t[0])],
                     verts[static_cast<std::size_t>(t[2])] - verts[static_cast<std::size_t>(t[0])]);
    }
};

} // namespace

TriMesh decimate(const TriMesh& mesh, std::size_t target_faces) {
    if (target_faces < 4) throw ContractError("decimate: target below minimum closed surface");
    if (mesh.faces.size() <= target_faces) return mesh;

    Working w;
    w.verts = mesh.vertices;
    w.faces = mesh.faces;
    w.face_alive.assign(w.faces.size(), true);
    w.vert_alive.assign(w.verts.size(), true);
    w.quadrics.assign(w.verts.size(), Quadric{});
    w.vfaces.assign(w.verts.size(), {});
    w.version.assign(w.verts.size(), 0);

    for (std::size_t f = 0; f < w.faces.size(); ++f) {
        const auto& t = w.faces[f];
        const Vec3 v0 = w.verts[static_cast<std::size_t>(t[0])];
        const Vec3 v1 = w.verts[static_cast<std::size_t>(t[1])];
        const Vec3 v2 = w.verts[static_cast<std::size_t>(t[2])];
        const Vec3 n2 = cross(v1 - v0, v2 - v0);
        const double area2 = norm(n2);
        if (area2 > 0.0) {
            const Vec3 n = n2 / area2;
            w.quadrics[static_cast<std::size_t>(t[0])].add_plane(n, -dot(n, v0), area2 * 0.5);
            w.quadrics[static_cast<std::size_t>(t[1])].add_plane(n, -dot(n, v0), area2 * 0.5);
            w.quadrics[static_cast<std::size_t>(t[2])].add_plane(n, -dot(n, v0), area2 * 0.5);
        }
        for (const std::int32_t v : t) w.vfaces[static_cast<std::size_t>(v)].push_back(static_cast<std::int32_t>(f));
    }

    auto neighbours = [&](std::int32_t v) {
        std::set<std::int32_t> out;
        for (const std::int32_t f : w.vfaces[static_cast<std::size_t>(v)]) {
            if (!w.face_alive[static_cast<std::size_t>(f)]) continue;
            for (const std::int32_t u : w.faces[static_cast<std::size_t>(f)])
                if (u != v) out.insert(u);
        }
        return out;
    };

    std::priority_queue<Candidate, std::vector<Candidate>, std::greater<Candidate>> heap;

    auto push_edge = [&](std::int32_t a, std::int32_t b) {
        if (a > b) std::swap(a, b);
        const Quadric sum = [&] {
            Quadric s = w.quadrics[static_cast<std::size_t>(a)];
            s += w.quadrics[static_cast<std::size_t>(b)];
            return s;
        }();
        Vec3 best;
        if (!sum.optimal_point(best)) {
            const Vec3 pa = w.verts[static_cast<std::size_t>(a)];
            const Vec3 pb = w.verts[static_cast<std::size_t>(b)];
            const Vec3 mid = 0.5 * (pa + pb);
            best = mid;
            double best_cost = sum.evaluate(mid);
            for (const Vec3& p : {pa, pb}) {
                const double c = sum.evaluate(p);
                if (c < best_cost) { best_cost = c; best = p; }
            }
        }
        heap.push({sum.evaluate(best), a, b, w.version[static_cast<std::size_t>(a)],
                   w.version[static_cast<std::size_t>(b)], best});
    };

    {
        std::set<std::pair<std::int32_t, std::int32_t>> pushed;
        for (const auto& t : w.faces) {
            for (int e = 0; e < 3; ++e) {
                std::int32_t a = t[static_cast<std::size_t>(e)];
                std::int32_t b = t[static_cast<std::size_t>((e + 1) % 3)];
                if (a > b) std::swap(a, b);
                if (pushed.insert({a, b}).second) push_edge(a, b);
            }
        }
    }

    std::size_t alive_faces = w.faces.size();

    while (alive_faces > target_faces && !heap.empty()) {
        const Candidate c = heap.top();
        heap.pop();
        const auto a = static_cast<std::size_t>(c.a), b = static_cast<std::size_t>(c.b);
        if (!w.vert_alive[a] || !w.vert_alive[b]) continue;
        if (c.va != w.version[a] || c.vb != w.version[b]) continue;

        // Faces on the edge (must be exactly 2 for a manifold interior edge).
        std::vector<std::int32_t> edge_faces;
        for (const std::int32_t f : w.vfaces[a]) {
            if (!w.face_alive[static_cast<std::size_t>(f)]) continue;
            const auto& t = w.faces[static_cast<std::size_t>(f)];
            if (std::find(t.begin(), t.end(), c.b) != t.end()) edge_faces.push_back(f);
        }
        if (edge_faces.size() != 2) continue;

        // Link condition: shared neighbours must be exactly the two vertices
        // opposite the edge, else the collapse pinches the surface.
        const auto na = neighbours(c.a);
        const auto nb = neighbours(c.b);
        std::vector<std::int32_t> shared;
        std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(),
                              std::back_inserter(shared));
        if (shared.size() != 2) continue;

        // Reject collapses that flip or crush any surviving face.
        bool ok = true;
        for (const std::size_t v : {a, b}) {
            for (const std::int32_t f : w.vfaces[v]) {
                if (!ok) break;
                if (!w.face_alive[static_cast<std::size_t>(f)]) continue;
                if (std::find(edge_faces.begin(), edge_faces.end(), f) != edge_faces.end())
                    continue;
                auto t = w.faces[static_cast<std::size_t>(f)];
                const Vec3 before = w.face_normal(f);
                for (auto& idx : t)
                    if (idx == c.a || idx == c.b) idx = -1;
                Vec3 p[3];
                for (int i = 0; i < 3; ++i)
                    p[i] = t[static_cast<std::size_t>(i)] < 0
                               ? c.position
                               : w.verts[static_cast<std::size_t>(t[static_cast<std::size_t>(i)])];
                const Vec3 after = cross(p[1] - p[0], p[2] - p[0]);
                if (norm(after) <= 1e-14 || dot(before, after) <= 0.0) ok = false;
            }
            if (!ok) break;
        }
        if (!ok) continue;

        // Apply: b merges into a, a moves to the optimal position.
        w.verts[a] = c.position;
        w.quadrics[a] += w.quadrics[b];
        w.vert_alive[b] = false;
        for (const std::int32_t f : edge_faces) {
            w.face_alive[static_cast<std::size_t>(f)] = false;
            --alive_faces;
        }
        for (const std::int32_t f : w.vfaces[b]) {
            if (!w.face_alive[static_cast<std::size_t>(f)]) continue;
            auto& t = w.faces[static_cast<std::size_t>(f)];
            for (auto& idx : t)
                if (idx == c.b) idx = c.a;
            w.vfaces[a].push_back(f);
        }
        w.vfaces[b].clear();
        ++w.version[a];
        for (const std::int32_t u : neighbours(c.a)) {
            ++w.version[static_cast<std::size_t>(u)];
            push_edge(c.a, u);
        }
        // Re-seed edges between pairs of neighbours of a (their versions
        // changed); only edges incident to a need fresh candidates, the rest
        // re-enter the heap lazily when popped stale.
        const auto nbrs = neighbours(c.a);
        for (auto it = nbrs.begin(); it != nbrs.end(); ++it) {
            auto jt = it;
            for (++jt; jt != nbrs.end(); ++jt) {
                // Edge exists only if the two share a live face.
                for (const std::int32_t f : w.vfaces[static_cast<std::size_t>(*it)]) {
                    if (!w.face_alive[static_cast<std::size_t>(f)]) continue;
                    const auto& t = w.faces[static_cast<std::size_t>(f)];
                    if (std::find(t.begin(), t.end(), *jt) != t.end()) {
                        push_edge(*it, *jt);
                        break;
                    }
                }
            }
        }
    }

    if (alive_faces > target_faces)
        throw DegenerateInputError("decimate: stalled before reaching target face count");

    // Compact.
    TriMesh out;
    out.label = mesh.label;
    std::vector<std::int32_t> remap(w.verts.size(), -1);
    for (std::size_t f = 0; f < w.faces.size(); ++f) {
        if (!w.face_alive[f]) continue;
        std::array<std::int32_t, 3> t{};
        for (int i = 0; i < 3; ++i) {
            const auto v = static_cast<std::size_t>(w.faces[f][static_cast<std::size_t>(i)]);
            if (remap[v] < 0) {
                remap[v] = static_cast<std::int32_t>(out.vertices.size());
                out.vertices.push_back(w.verts[v]);
            }
            t[static_cast<std::size_t>(i)] = remap[v];
        }
        out.faces.push_back(t);
    }
    return out;
}

} // namespace corrtps
