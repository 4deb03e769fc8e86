// tps.cpp
#include "corrtps/tps.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "corrtps/kdtree.hpp"
#include "corrtps/parallel.hpp"

namespace corrtps {

namespace {

inline double kernel(double r) { return r; }

void check_sources(const ControlPointSet& cps) {
    const std::size_t n = cps.sources.size();
    if (n != cps.targets.size())
        throw ContractError("tps_fit: sources and targets differ in length");
    if (n < 4) throw ContractError("tps_fit: need at least 4 control points");

    // Coplanarity check via the covariance spectrum.
    Vec3 mean{0, 0, 0};
    for (const Vec3& p : cps.sources) mean += p;
    mean = mean / static_cast<double>(n);
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const Vec3& p : cps.sources) {
        const Eigen::Vector3d d(p.x - mean.x, p.y - mean.y, p.z - mean.z);
        cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    if (eig.eigenvalues()(0) <= 1e-9 * std::max(eig.eigenvalues()(2), 1e-300))
        throw DegenerateInputError("tps_fit: control points are coplanar or collinear");

    // Exact duplicates make the kernel block singular. The nearest hit for a
    // duplicated point resolves to the lower index, so the higher one sees a
    // zero-distance neighbour that is not itself.
    KdTree3 tree(cps.sources);
    for (std::size_t i = 0; i < n; ++i) {
        const KdTree3::Hit h = tree.nearest(cps.sources[i]);
        if (static_cast<std::size_t>(h.index) != i && h.squared_dist <= 0.0)
            throw DegenerateInputError("tps_fit: duplicate control points");
    }
}

} // namespace

Vec3 TpsModel::displacement(Vec3 p) const {
    Vec3 out{
        linear[0][0] * p.x + linear[0][1] * p.y + linear[0][2] * p.z + translation.x,
        linear[1][0] * p.x + linear[1][1] * p.y + linear[1][2] * p.z + translation.y,
        linear[2][0] * p.x + linear[2][1] * p.y + linear[2][2] * p.z + translation.z};
    for (std::size_t i = 0; i < controls.size(); ++i) {
        const double u = kernel(distance(p, controls[i]));
        out += u * weights[i];
    }
    return out;
}

TpsModel tps_fit(const ControlPointSet& cps, double lambda_tps) {
    if (lambda_tps < 0.0) throw ContractError("tps_fit: lambda must be >= 0");
    check_sources(cps);
    const std::int64_t n = static_cast<std::int64_t>(cps.sources.size());
    const std::int64_t m = n + 4;

    // U(r) = r is conditionally negative definite, so the smoothing term
    // enters as -lambda I: the penalised least-squares solution of
    // min |d - f(c)|^2 + lambda J(f) satisfies (K - lambda I) w + P a = d.
    // (+lambda I would regularise with the wrong sign for this kernel and
    // hit singularities at positive lambda.)
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = i + 1; j < n; ++j) {
            const double u = kernel(distance(cps.sources[static_cast<std::size_t>(i)],
                                             cps.sources[static_cast<std::size_t>(j)]));
            A(i, j) = u;
            A(j, i) = u;
        }
        A(i, i) = -lambda_tps;
        const Vec3 p = cps.sources[static_cast<std::size_t>(i)];
        A(i, n) = 1.0;     A(n, i) = 1.0;
        A(i, n + 1) = p.x; A(n + 1, i) = p.x;
        A(i, n + 2) = p.y; A(n + 2, i) = p.y;
        A(i, n + 3) = p.z; A(n + 3, i) = p.z;
    }

    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m, 3);
    for (std::int64_t i = 0; i < n; ++i) {
        const Vec3 d = cps.targets[static_cast<std::size_t>(i)] -
                       cps.sources[static_cast<std::size_t>(i)];
        B(i, 0) = d.x;
        B(i, 1) = d.y;
        B(i, 2) = d.z;
    }

    // Matrix-free product for iterative refinement, so the factorisation can
    // overwrite A in place (the matrix dominates memory at large n).
    auto apply_system = [&](const Eigen::MatrixXd& X) {
        Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(m, 3);
        parallel_chunks(n, [&](std::int64_t, std::int64_t lo, std::int64_t hi) {
            for (std::int64_t i = lo; i < hi; ++i) {
                const Vec3 pi = cps.sources[static_cast<std::size_t>(i)];
                double acc[3] = {-lambda_tps * X(i, 0), -lambda_tps * X(i, 1),
                                 -lambda_tps * X(i, 2)};
                for (std::int64_t j = 0; j < n; ++j) {
                    if (j == i) continue;
                    const double u =
                        kernel(distance(pi, cps.sources[static_cast<std::size_t>(j)]));
                    acc[0] += u * X(j, 0);
                    acc[1] += u * X(j, 1);
                    acc[2] += u * X(j, 2);
                }
                for (int d = 0; d < 3; ++d)
                    Y(i, d) = acc[d] + X(n, d) + pi.x * X(n + 1, d) + pi.y * X(n + 2, d) +
                              pi.z * X(n + 3, d);
            }
        });
        for (int d = 0; d < 3; ++d) {
            double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
            for (std::int64_t i = 0; i < n; ++i) {
                const Vec3 pi = cps.sources[static_cast<std::size_t>(i)];
                s0 += X(i, d);
                s1 += pi.x * X(i, d);
                s2 += pi.y * X(i, d);
                s3 += pi.z * X(i, d);
            }
            Y(n, d) = s0;
            Y(n + 1, d) = s1;
            Y(n + 2, d) = s2;
            Y(n + 3, d) = s3;
        }
        return Y;
    };

    Eigen::PartialPivLU<Eigen::Ref<Eigen::MatrixXd>> lu(A);  // in-place
    Eigen::MatrixXd X = lu.solve(B);
    for (int pass = 0; pass < 2; ++pass) {
        const Eigen::MatrixXd R = B - apply_system(X);
        const double rnorm = R.template lpNorm<Eigen::Infinity>();
        const double bnorm = std::max(B.template lpNorm<Eigen::Infinity>(), 1.0);
        if (rnorm <= 1e-13 * bnorm) break;
        X += lu.solve(R);
    }
    if (!X.allFinite())
        throw DegenerateInputError("tps_fit: singular system (degenerate control points)");

    TpsModel model;
    model.lambda_tps = lambda_tps;
    model.controls = cps.sources;
    model.weights.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i)
        model.weights[static_cast<std::size_t>(i)] = {X(i, 0), X(i, 1), X(i, 2)};
    for (int d = 0; d < 3; ++d) {
        model.translation[d] = X(n, d);
        for (int c = 0; c < 3; ++c) model.linear[static_cast<std::size_t>(d)][static_cast<std::size_t>(c)] = X(n + 1 + c, d);
    }

    // Side conditions sum(w) = 0 and sum(w c^T) = 0 hold for every valid fit.
    double target_scale = 1.0;
    for (const Vec3& t : cps.targets)
        target_scale = std::max({target_scale, std::abs(t.x), std::abs(t.y), std::abs(t.z)});
    double worst = 0.0;
    for (int d = 0; d < 3; ++d) {
        double s0 = 0, sx = 0, sy = 0, sz = 0;
        for (std::int64_t i = 0; i < n; ++i) {
            const double wi = X(i, d);
            const Vec3 c = cps.sources[static_cast<std::size_t>(i)];
            s0 += wi; sx += wi * c.x; sy += wi * c.y; sz += wi * c.z;
        }
        worst = std::max({worst, std::abs(s0), std::abs(sx) / std::max(1.0, target_scale),
                          std::abs(sy) / std::max(1.0, target_scale),
                          std::abs(sz) / std::max(1.0, target_scale)});
    }
    if (worst > 1e-6 * target_scale)
        throw DegenerateInputError("tps_fit: orthogonality side conditions violated "
                                   "(ill-conditioned control points)");
    return model;
}

std::vector<Vec3> tps_evaluate(const TpsModel& model, std::span<const Vec3> points) {
    std::vector<Vec3> out(points.size());
    parallel_for(static_cast<std::int64_t>(points.size()), [&](std::int64_t i) {
        out[static_cast<std::size_t>(i)] = model.displacement(points[static_cast<std::size_t>(i)]);
    });
    return out;
}

DisplacementField tps_field_on_grid(const TpsModel& model, const GridGeometry& geometry,
                                    int coarse_stride) {
    if (coarse_stride < 1) throw ContractError("tps_field_on_grid: stride must be >= 1");
    geometry.validate();
    DisplacementField field;
    field.geometry = geometry;
    field.vectors.resize(static_cast<std::size_t>(geometry.voxel_count()));

    if (coarse_stride == 1) {
        parallel_for(geometry.voxel_count(), [&](std::int64_t idx) {
            const Index3 c = geometry.delinearize(idx);
            field.vectors[static_cast<std::size_t>(idx)] =
                model.displacement(geometry.index_to_point(c[0], c[1], c[2]));
        });
        return field;
    }

    // Subsampled lattice including the last plane of every axis.
    std::array<std::vector<int>, 3> lattice;
    for (int a = 0; a < 3; ++a) {
        for (int i = 0; i < geometry.dims[a]; i += coarse_stride) lattice[static_cast<std::size_t>(a)].push_back(i);
        if (lattice[static_cast<std::size_t>(a)].back() != geometry.dims[a] - 1)
            lattice[static_cast<std::size_t>(a)].push_back(geometry.dims[a] - 1);
    }
    const std::size_t lx = lattice[0].size(), ly = lattice[1].size(), lz = lattice[2].size();
    std::vector<Vec3> coarse(lx * ly * lz);
    parallel_for(static_cast<std::int64_t>(coarse.size()), [&](std::int64_t idx) {
        const std::size_t i = static_cast<std::size_t>(idx) % lx;
        const std::size_t j = (static_cast<std::size_t>(idx) / lx) % ly;
        const std::size_t k = static_cast<std::size_t>(idx) / (lx * ly);
        coarse[static_cast<std::size_t>(idx)] = model.displacement(
            geometry.index_to_point(lattice[0][i], lattice[1][j], lattice[2][k]));
    });

    // Per-axis cell index and interpolation fraction for every voxel index.
    std::array<std::vector<std::pair<int, double>>, 3> locate;
    for (int a = 0; a < 3; ++a) {
        auto& rows = locate[static_cast<std::size_t>(a)];
        rows.resize(static_cast<std::size_t>(geometry.dims[a]));
        const auto& knots = lattice[static_cast<std::size_t>(a)];
        int cell = 0;
        for (int i = 0; i < geometry.dims[a]; ++i) {
            while (cell + 2 < static_cast<int>(knots.size()) && i >= knots[static_cast<std::size_t>(cell + 1)])
                ++cell;
            const int k0 = knots[static_cast<std::size_t>(cell)];
            const int k1 = knots[static_cast<std::size_t>(cell + 1)];
            rows[static_cast<std::size_t>(i)] = {cell, static_cast<double>(i - k0) /
                                                           static_cast<double>(k1 - k0)};
        }
    }

    parallel_for(geometry.voxel_count(), [&](std::int64_t idx) {
        const Index3 c = geometry.delinearize(idx);
        const auto [ci, fx] = locate[0][static_cast<std::size_t>(c[0])];
        const auto [cj, fy] = locate[1][static_cast<std::size_t>(c[1])];
        const auto [ck, fz] = locate[2][static_cast<std::size_t>(c[2])];
        auto lat = [&](int i, int j, int k) -> const Vec3& {
            return coarse[static_cast<std::size_t>(i) +
                          lx * (static_cast<std::size_t>(j) + ly * static_cast<std::size_t>(k))];
        };
        const Vec3 c00 = (1 - fx) * lat(ci, cj, ck) + fx * lat(ci + 1, cj, ck);
        const Vec3 c10 = (1 - fx) * lat(ci, cj + 1, ck) + fx * lat(ci + 1, cj + 1, ck);
        const Vec3 c01 = (1 - fx) * lat(ci, cj, ck + 1) + fx * lat(ci + 1, cj, ck + 1);
        const Vec3 c11 = (1 - fx) * lat(ci, cj + 1, ck + 1) + fx * lat(ci + 1, cj + 1, ck + 1);
        const Vec3 c0 = (1 - fy) * c00 + fy * c10;
        const Vec3 c1 = (1 - fy) * c01 + fy * c11;
        field.vectors[static_cast<std::size_t>(idx)] = (1 - fz) * c0 + fz * c1;
    });
    return field;
}

double bending_energy(const TpsModel& model) {
    // -sum_d w_d^T K w_d; U(r) = r is conditionally negative definite on the
    // side-condition subspace, so the negated form is the non-negative
    // smoothness functional.
    const std::size_t n = model.controls.size();
    double energy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double u = kernel(distance(model.controls[i], model.controls[j]));
            energy -= 2.0 * u * dot(model.weights[i], model.weights[j]);
        }
    }
    return energy;
}

ControlPointSet subsample_controls(const ControlPointSet& cps, std::size_t max_n,
                                   double min_separation) {
    if (max_n < 4) throw ContractError("subsample_controls: max_n must be >= 4");
    const std::size_t n = cps.size();
    if (n <= max_n) return cps;

    // Group input indices per structure, in input order. Points outside any
    // declared structure fall into one implicit group.
    std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
    if (cps.per_structure_counts.empty()) {
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), 0);
        groups.emplace_back("", std::move(all));
    } else {
        std::size_t cursor = 0;
        for (const auto& [label, count] : cps.per_structure_counts) {
            std::vector<std::size_t> idx(count);
            std::iota(idx.begin(), idx.end(), cursor);
            cursor += count;
            groups.emplace_back(label, std::move(idx));
        }
        if (cursor != n)
            throw ContractError("subsample_controls: per-structure counts do not sum to size");
    }

    // Proportional quotas; remainders go to the largest fractional parts,
    // then every non-empty group is guaranteed one slot by stealing from the
    // largest quota so the total never exceeds max_n.
    std::vector<std::size_t> quota(groups.size());
    std::vector<std::pair<double, std::size_t>> frac;
    std::size_t assigned = 0;
    for (std::size_t gidx = 0; gidx < groups.size(); ++gidx) {
        const double ideal = static_cast<double>(max_n) *
                             static_cast<double>(groups[gidx].second.size()) /
                             static_cast<double>(n);
        quota[gidx] = std::min(groups[gidx].second.size(),
                               static_cast<std::size_t>(std::floor(ideal)));
        assigned += quota[gidx];
        frac.emplace_back(ideal - std::floor(ideal), gidx);
    }
    std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (const auto& [f, gidx] : frac) {
        if (assigned >= max_n) break;
        if (quota[gidx] < groups[gidx].second.size()) {
            ++quota[gidx];
            ++assigned;
        }
    }
    for (std::size_t gidx = 0; gidx < groups.size(); ++gidx) {
        if (quota[gidx] > 0 || groups[gidx].second.empty()) continue;
        const std::size_t donor = static_cast<std::size_t>(
            std::distance(quota.begin(), std::max_element(quota.begin(), quota.end())));
        if (quota[donor] > 1) {
            --quota[donor];
            quota[gidx] = 1;
        }
    }

    // Farthest-point sampling within each group; stops early once the whole
    // group is within min_separation of the picked set.
    std::vector<std::size_t> selected;
    for (std::size_t gidx = 0; gidx < groups.size(); ++gidx) {
        const auto& idx = groups[gidx].second;
        if (idx.empty() || quota[gidx] == 0) continue;
        std::vector<double> dist2(idx.size(), std::numeric_limits<double>::infinity());
        std::size_t cur = 0;  // deterministic seed: first point of the group
        selected.push_back(idx[cur]);
        for (std::size_t picked = 1; picked < quota[gidx]; ++picked) {
            double best = -1.0;
            std::size_t best_i = 0;
            for (std::size_t t = 0; t < idx.size(); ++t) {
                dist2[t] = std::min(dist2[t], squared_distance(cps.sources[idx[t]],
                                                               cps.sources[idx[cur]]));
                if (dist2[t] > best) {
                    best = dist2[t];
                    best_i = t;
                }
            }
            if (best <= min_separation * min_separation) break;
            cur = best_i;
            selected.push_back(idx[cur]);
        }
    }

    // Non-degeneracy floor: keep at least 4 points when the input permits.
    if (selected.size() < std::min<std::size_t>(4, n)) {
        std::vector<bool> taken(n, false);
        for (const std::size_t s : selected) taken[s] = true;
        while (selected.size() < std::min<std::size_t>(4, n)) {
            double best = -1.0;
            std::size_t best_i = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (taken[i]) continue;
                double d2 = std::numeric_limits<double>::infinity();
                for (const std::size_t s : selected)
                    d2 = std::min(d2, squared_distance(cps.sources[i], cps.sources[s]));
                if (d2 > best) {
                    best = d2;
                    best_i = i;
                }
            }
            if (best_i == n) break;
            taken[best_i] = true;
            selected.push_back(best_i);
        }
    }

    std::sort(selected.begin(), selected.end());
    ControlPointSet out;
    for (const std::size_t s : selected) {
        out.sources.push_back(cps.sources[s]);
        out.targets.push_back(cps.targets[s]);
    }
    if (!cps.per_structure_counts.empty()) {
        std::size_t cursor = 0;
        for (const auto& [label, count] : cps.per_structure_counts) {
            const std::size_t lo = cursor, hi = cursor + count;
            cursor = hi;
            const auto c = static_cast<std::size_t>(std::count_if(
                selected.begin(), selected.end(),
                [&](std::size_t s) { return s >= lo && s < hi; }));
            if (c > 0) out.per_structure_counts[label] = c;
        }
    }
    return out;
}

namespace {
constexpr char kTpsMagic[8] = {'C', 'T', 'P', 'S', 'M', 'D', 'L', '\0'};
constexpr std::uint32_t kTpsVersion = 1;
} // namespace

void write_tps_model(const TpsModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write TPS model: " + path.string());
    out.write(kTpsMagic, sizeof(kTpsMagic));
    out.write(reinterpret_cast<const char*>(&kTpsVersion), sizeof(kTpsVersion));
    const std::uint64_t n = model.controls.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(&model.lambda_tps), sizeof(double));
    auto write_vecs = [&](const std::vector<Vec3>& v) {
        for (const Vec3& p : v) {
            out.write(reinterpret_cast<const char*>(&p.x), sizeof(double));
            out.write(reinterpret_cast<const char*>(&p.y), sizeof(double));
            out.write(reinterpret_cast<const char*>(&p.z), sizeof(double));
        }
    };
    write_vecs(model.controls);
    write_vecs(model.weights);
    for (const auto& row : model.linear)
        out.write(reinterpret_cast<const char*>(row.data()), 3 * sizeof(double));
    out.write(reinterpret_cast<const char*>(&model.translation.x), sizeof(double));
    out.write(reinterpret_cast<const char*>(&model.translation.y), sizeof(double));
    out.write(reinterpret_cast<const char*>(&model.translation.z), sizeof(double));
    if (!out) throw IoError("failed writing TPS model: " + path.string());
}

TpsModel read_tps_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open TPS model: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kTpsMagic, sizeof(magic)) != 0)
        throw FormatError("not a TPS model file: " + path.string());
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != kTpsVersion)
        throw UnsupportedFormatError("unsupported TPS model version");
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    TpsModel model;
    in.read(reinterpret_cast<char*>(&model.lambda_tps), sizeof(double));
    auto read_vecs = [&](std::vector<Vec3>& v) {
        v.resize(n);
        for (Vec3& p : v) {
            in.read(reinterpret_cast<char*>(&p.x), sizeof(double));
            in.read(reinterpret_cast<char*>(&p.y), sizeof(double));
            in.read(reinterpret_cast<char*>(&p.z), sizeof(double));
        }
    };
    read_vecs(model.controls);
    read_vecs(model.weights);
    for (auto& row : model.linear)
        in.read(reinterpret_cast<char*>(row.data()), 3 * sizeof(double));
    in.read(reinterpret_cast<char*>(&model.translation.x), sizeof(double));
    in.read(reinterpret_cast<char*>(&model.translation.y), sizeof(double));
    in.read(reinterpret_cast<char*>(&model.translation.z), sizeof(double));
    if (!in) throw FormatError("truncated TPS model: " + path.string());
    return model;
}

} // namespace corrtps
