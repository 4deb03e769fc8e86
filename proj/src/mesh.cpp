// mesh.cpp - smoothing, diagnostics, cleanup and PLY I/O.
#include "corrtps/mesh.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

namespace corrtps {

namespace {

std::vector<std::vector<std::int32_t>> vertex_adjacency(const TriMesh& mesh) {
    std::vector<std::vector<std::int32_t>> adj(mesh.vertices.size());
    auto link = [&](std::int32_t a, std::int32_t b) {
        auto& v = adj[static_cast<std::size_t>(a)];
        if (std::find(v.begin(), v.end(), b) == v.end()) v.push_back(b);
    };
    for (const auto& f : mesh.faces) {
        link(f[0], f[1]); link(f[1], f[0]);
        link(f[1], f[2]); link(f[2], f[1]);
        link(f[2], f[0]); link(f[0], f[2]);
    }
    for (auto& v : adj) std::sort(v.begin(), v.end());
    return adj;
}

} // namespace

TriMesh taubin_smooth(const TriMesh& mesh, double lambda, double mu, int iterations) {
    if (!(lambda > 0.0 && mu < 0.0 && lambda < -mu && -mu < 1.0))
        throw ContractError("taubin_smooth: need 0 < lambda < -mu < 1");
    if (iterations < 0) throw ContractError("taubin_smooth: negative iteration count");
    TriMesh out = mesh;
    if (iterations == 0 || mesh.vertices.empty()) return out;
    const auto adj = vertex_adjacency(mesh);
    std::vector<Vec3> next(out.vertices.size());
    for (int it = 0; it < iterations; ++it) {
        for (const double factor : {lambda, mu}) {
            for (std::size_t v = 0; v < out.vertices.size(); ++v) {
                const auto& nbrs = adj[v];
                if (nbrs.empty()) {
                    next[v] = out.vertices[v];
                    continue;
                }
                Vec3 mean{0, 0, 0};
                for (std::int32_t n : nbrs) mean += out.vertices[static_cast<std::size_t>(n)];
                mean = mean / static_cast<double>(nbrs.size());
                next[v] = out.vertices[v] + factor * (mean - out.vertices[v]);
            }
            out.vertices.swap(next);
        }
    }
    return out;
}

MeshDiagnostics mesh_diagnostics(const TriMesh& mesh) {
    MeshDiagnostics d;
    std::map<std::pair<std::int32_t, std::int32_t>, int> edge_count;
    for (const auto& f : mesh.faces) {
        for (int t = 0; t < 3; ++t) {
            std::int32_t a = f[static_cast<std::size_t>(t)];
            std::int32_t b = f[static_cast<std::size_t>((t + 1) % 3)];
            if (a > b) std::swap(a, b);
            ++edge_count[{a, b}];
        }
        const Vec3 v0 = mesh.vertices[static_cast<std::size_t>(f[0])];
        const Vec3 v1 = mesh.vertices[static_cast<std::size_t>(f[1])];
        const Vec3 v2 = mesh.vertices[static_cast<std::size_t>(f[2])];
        d.surface_area += 0.5 * norm(cross(v1 - v0, v2 - v0));
        d.enclosed_volume += dot(v0, cross(v1, v2)) / 6.0;
    }
    d.euler_characteristic = static_cast<std::int64_t>(mesh.vertices.size()) -
                             static_cast<std::int64_t>(edge_count.size()) +
                             static_cast<std::int64_t>(mesh.faces.size());
    d.watertight = !mesh.faces.empty();
    for (const auto& [edge, count] : edge_count)
        if (count != 2) { d.watertight = false; break; }
    return d;
}

TriMesh remove_duplicates_and_degenerate(const TriMesh& mesh) {
    TriMesh out;
    out.label = mesh.label;
    std::map<std::array<double, 3>, std::int32_t> seen;
    std::vector<std::int32_t> remap(mesh.vertices.size());
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        const Vec3& p = mesh.vertices[v];
        const std::array<double, 3> key{p.x, p.y, p.z};
        auto [it, inserted] = seen.try_emplace(key, static_cast<std::int32_t>(out.vertices.size()));
        if (inserted) out.vertices.push_back(p);
        remap[v] = it->second;
    }
    for (const auto& f : mesh.faces) {
        const std::array<std::int32_t, 3> m{remap[static_cast<std::size_t>(f[0])],
                                            remap[static_cast<std::size_t>(f[1])],
                                            remap[static_cast<std::size_t>(f[2])]};
        if (m[0] == m[1] || m[1] == m[2] || m[2] == m[0]) continue;
        out.faces.push_back(m);
    }
    return out;
}

void write_ply(const TriMesh& mesh, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write PLY: " + path.string());
    out.precision(std::numeric_limits<double>::max_digits10);
    out << "ply\nformat ascii 1.0\n";
    if (!mesh.label.empty()) out << "comment label " << mesh.label << "\n";
    out << "element vertex " << mesh.vertices.size() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    out << "element face " << mesh.faces.size() << "\n";
    out << "property list uchar int vertex_indices\n";
    out << "end_header\n";
    for (const Vec3& v : mesh.vertices) out << v.x << " " << v.y << " " << v.z << "\n";
    for (const auto& f : mesh.faces) out << "3 " << f[0] << " " << f[1] << " " << f[2] << "\n";
    if (!out) throw IoError("failed writing PLY: " + path.string());
}

TriMesh read_ply(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open PLY: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty PLY file: " + path.string());
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line != "ply") throw FormatError("not a PLY file: " + path.string());
    std::size_t n_vertices = 0, n_faces = 0;
    TriMesh mesh;
    bool ascii = false;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        if (word == "format") {
            std::string fmt;
            ss >> fmt;
            ascii = fmt == "ascii";
        } else if (word == "comment") {
            std::string tag;
            ss >> tag;
            if (tag == "label") ss >> mesh.label;
        } else if (word == "element") {
            std::string kind;
            std::size_t count = 0;
            ss >> kind >> count;
            if (kind == "vertex") n_vertices = count;
            else if (kind == "face") n_faces = count;
        } else if (word == "end_header") {
            break;
        }
    }
    if (!ascii) throw UnsupportedFormatError("read_ply: only ascii PLY supported");
    mesh.vertices.resize(n_vertices);
    for (std::size_t v = 0; v < n_vertices; ++v) {
        if (!(in >> mesh.vertices[v].x >> mesh.vertices[v].y >> mesh.vertices[v].z))
            throw FormatError("read_ply: truncated vertex list");
    }
    mesh.faces.resize(n_faces);
    for (std::size_t f = 0; f < n_faces; ++f) {
        int arity = 0;
        if (!(in >> arity) || arity != 3)
            throw UnsupportedFormatError("read_ply: only triangle faces supported");
        auto& face = mesh.faces[f];
        if (!(in >> face[0] >> face[1] >> face[2]))
            throw FormatError("read_ply: truncated face list");
        for (std::int32_t idx : face)
            if (idx < 0 || static_cast<std::size_t>(idx) >= n_vertices)
                throw FormatError("read_ply: face index out of range");
    }
    return mesh;
}

} // namespace corrtps
