// correspond.cpp
#include "corrtps/correspond.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "corrtps/kdtree.hpp"

namespace corrtps {

namespace {

Vec3 centroid(const std::vector<Vec3>& pts) {
    Vec3 c{0, 0, 0};
    for (const Vec3& p : pts) c += p;
    return c / static_cast<double>(pts.size());
}

// Principal axes, columns sorted by descending eigenvalue, signs canonical
// (largest-magnitude component positive), determinant forced to +1.
Eigen::Matrix3d principal_axes(const std::vector<Vec3>& pts, Vec3 mean) {
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const Vec3& p : pts) {
        const Eigen::Vector3d d(p.x - mean.x, p.y - mean.y, p.z - mean.z);
        cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    if (eig.info() != Eigen::Success)
        throw DegenerateInputError("rigid_prealign: eigen decomposition failed");
    const Eigen::Vector3d evals = eig.eigenvalues();
    if (evals(0) <= 1e-9 * std::max(evals(2), 1e-300))
        throw DegenerateInputError("rigid_prealign: point cloud is coplanar or collinear");
    Eigen::Matrix3d axes;
    axes.col(0) = eig.eigenvectors().col(2);
    axes.col(1) = eig.eigenvectors().col(1);
    axes.col(2) = eig.eigenvectors().col(0);
    for (int c = 0; c < 3; ++c) {
        int arg = 0;
        for (int r = 1; r < 3; ++r)
            if (std::abs(axes(r, c)) > std::abs(axes(arg, c))) arg = r;
        if (axes(arg, c) < 0.0) axes.col(c) *= -1.0;
    }
    if (axes.determinant() < 0.0) axes.col(2) *= -1.0;
    return axes;
}

double rms_radius(const std::vector<Vec3>& pts, Vec3 mean) {
    double s = 0.0;
    for (const Vec3& p : pts) s += squared_distance(p, mean);
    return std::sqrt(s / static_cast<double>(pts.size()));
}

} // namespace

SimilarityTransform rigid_prealign(const std::vector<Vec3>& source_points,
                                   const std::vector<Vec3>& target_points) {
    if (source_points.size() < 4 || target_points.size() < 4)
        throw ContractError("rigid_prealign: need at least 4 points per cloud");
    const Vec3 cs = centroid(source_points);
    const Vec3 ct = centroid(target_points);
    const Eigen::Matrix3d us = principal_axes(source_points, cs);
    const Eigen::Matrix3d ut = principal_axes(target_points, ct);
    const double rs = rms_radius(source_points, cs);
    const double rt = rms_radius(target_points, ct);
    if (!(rs > 0.0)) throw DegenerateInputError("rigid_prealign: zero-extent source cloud");
    const double scale = rt / rs;

    const KdTree3 tree(target_points);
    static constexpr std::array<std::array<double, 3>, 4> kSigns{
        {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}}};

    SimilarityTransform best;
    double best_ssd = std::numeric_limits<double>::infinity();
    for (const auto& sign : kSigns) {
        Eigen::Matrix3d flipped = ut;
        for (int c = 0; c < 3; ++c) flipped.col(c) *= sign[static_cast<std::size_t>(c)];
        const Eigen::Matrix3d rot = flipped * us.transpose();
        SimilarityTransform t;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                t.rotation[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = rot(r, c);
        t.scale = scale;
        const Vec3 rc = {rot(0, 0) * cs.x + rot(0, 1) * cs.y + rot(0, 2) * cs.z,
                         rot(1, 0) * cs.x + rot(1, 1) * cs.y + rot(1, 2) * cs.z,
                         rot(2, 0) * cs.x + rot(2, 1) * cs.y + rot(2, 2) * cs.z};
        t.translation = ct - scale * rc;
        double ssd = 0.0;
        for (const Vec3& p : source_points) ssd += tree.nearest(t.apply(p)).squared_dist;
        if (ssd < best_ssd) {
            best_ssd = ssd;
            best = t;
        }
    }
    return best;
}

CorrespondenceSet baseline_match(const TriMesh& source, const TriMesh& target,
                                 double null_threshold) {
    if (source.vertices.empty() || target.vertices.empty())
        throw ContractError("baseline_match: empty mesh");
    const SimilarityTransform t = rigid_prealign(source.vertices, target.vertices);

    std::vector<Vec3> aligned(source.vertices.size());
    for (std::size_t i = 0; i < source.vertices.size(); ++i)
        aligned[i] = t.apply(source.vertices[i]);

    const KdTree3 target_tree(target.vertices);
    const KdTree3 aligned_tree(aligned);

    // Distance from each target vertex back to the aligned source cloud, for
    // the mutual-nearest check.
    std::vector<double> back_dist(target.vertices.size());
    for (std::size_t j = 0; j < target.vertices.size(); ++j)
        back_dist[j] = std::sqrt(aligned_tree.nearest(target.vertices[j]).squared_dist);

    CorrespondenceSet set;
    set.source_structure = source.label;
    set.target_structure = target.label;
    set.pairs.reserve(source.vertices.size());
    for (std::size_t i = 0; i < source.vertices.size(); ++i) {
        const KdTree3::Hit hit = target_tree.nearest(aligned[i]);
        const double d = std::sqrt(hit.squared_dist);
        CorrespondencePair pair;
        pair.source = source.vertices[i];
        pair.target = target.vertices[static_cast<std::size_t>(hit.index)];
        pair.structure = source.label;
        pair.is_null = d > null_threshold ||
                       d > 2.0 * back_dist[static_cast<std::size_t>(hit.index)];
        set.pairs.push_back(pair);
    }
    return set;
}

ControlPointSet gather_control_points(const std::vector<CorrespondenceSet>& sets,
                                      double dedup_tolerance) {
    if (sets.empty()) throw ContractError("gather_control_points: no correspondence sets");
    ControlPointSet out;

    // Spatial hash over cells of dedup_tolerance for the duplicate check.
    struct CellHash {
        std::size_t operator()(const std::array<std::int64_t, 3>& c) const {
            std::size_t h = 1469598103934665603ull;
            for (const std::int64_t v : c) {
                h ^= static_cast<std::size_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
            }
            return h;
        }
    };
    std::unordered_map<std::array<std::int64_t, 3>, std::vector<std::size_t>, CellHash> grid;
    const double cell = std::max(dedup_tolerance, 1e-12);
    auto cell_of = [&](Vec3 p) -> std::array<std::int64_t, 3> {
        return {static_cast<std::int64_t>(std::floor(p.x / cell)),
                static_cast<std::int64_t>(std::floor(p.y / cell)),
                static_cast<std::int64_t>(std::floor(p.z / cell))};
    };
    auto is_duplicate = [&](Vec3 p) {
        const auto c = cell_of(p);
        for (std::int64_t dz = -1; dz <= 1; ++dz)
            for (std::int64_t dy = -1; dy <= 1; ++dy)
                for (std::int64_t dx = -1; dx <= 1; ++dx) {
                    const auto it = grid.find({c[0] + dx, c[1] + dy, c[2] + dz});
                    if (it == grid.end()) continue;
                    for (const std::size_t s : it->second)
                        if (distance(out.sources[s], p) < dedup_tolerance) return true;
                }
        return false;
    };

    for (const CorrespondenceSet& set : sets) {
        std::size_t kept = 0;
        for (const CorrespondencePair& pair : set.pairs) {
            if (pair.is_null) continue;
            if (is_duplicate(pair.source)) continue;
            grid[cell_of(pair.source)].push_back(out.sources.size());
            out.sources.push_back(pair.source);
            out.targets.push_back(pair.target);
            ++kept;
        }
        if (kept > 0) out.per_structure_counts[set.source_structure] += kept;
    }
    if (out.sources.empty())
        throw DegenerateInputError("gather_control_points: every pair is null");
    return out;
}

void write_correspondences_csv(const std::vector<CorrespondenceSet>& sets,
                               const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write correspondences: " + path.string());
    out.precision(std::numeric_limits<double>::max_digits10);
    out << "structure,src_x,src_y,src_z,tgt_x,tgt_y,tgt_z,is_null\n";
    for (const auto& set : sets)
        for (const auto& p : set.pairs)
            out << p.structure << ',' << p.source.x << ',' << p.source.y << ',' << p.source.z
                << ',' << p.target.x << ',' << p.target.y << ',' << p.target.z << ','
                << (p.is_null ? 1 : 0) << '\n';
    if (!out) throw IoError("failed writing correspondences: " + path.string());
}

std::vector<CorrespondenceSet> read_correspondences_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open correspondences: " + path.string());
    std::string line;
    if (!std::getline(in, line))
        throw FormatError("empty correspondence CSV: " + path.string());
    std::vector<CorrespondenceSet> sets;
    std::unordered_map<std::string, std::size_t> index;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        CorrespondencePair p;
        auto next = [&](const char* what) -> std::string {
            if (!std::getline(ss, field, ','))
                throw FormatError(path.string() + ":" + std::to_string(lineno) +
                                  ": missing field " + what);
            return field;
        };
        p.structure = next("structure");
        p.source.x = std::stod(next("src_x"));
        p.source.y = std::stod(next("src_y"));
        p.source.z = std::stod(next("src_z"));
        p.target.x = std::stod(next("tgt_x"));
        p.target.y = std::stod(next("tgt_y"));
        p.target.z = std::stod(next("tgt_z"));
        p.is_null = std::stoi(next("is_null")) != 0;
        auto [it, inserted] = index.try_emplace(p.structure, sets.size());
        if (inserted) {
            sets.emplace_back();
            sets.back().source_structure = p.structure;
            sets.back().target_structure = p.structure;
        }
        sets[it->second].pairs.push_back(std::move(p));
    }
    return sets;
}

} // namespace corrtps
