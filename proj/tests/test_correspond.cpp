#include <doctest.h>

#include <cmath>
#include <set>

#include "corrtps/correspond.hpp"
#include "corrtps/kdtree.hpp"
#include "corrtps/mesh.hpp"
#include "helpers.hpp"

using namespace corrtps;
using corrtps::test::TestRng;

namespace {

std::vector<Vec3> random_cloud(TestRng& rng, std::size_t n, double extent = 50.0) {
    std::vector<Vec3> pts;
    // anisotropic so the principal axes are well separated
    for (std::size_t i = 0; i < n; ++i)
        pts.push_back({rng.uniform(0, extent), rng.uniform(0, 0.6 * extent),
                       rng.uniform(0, 0.3 * extent)});
    return pts;
}

Vec3 rotate_z(Vec3 p, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * p.x - s * p.y, s * p.x + c * p.y, p.z};
}

TriMesh ball_mesh(int radius, Vec3 offset = {0, 0, 0}, const std::string& label = "ball") {
    Mask m = test::make_ball_mask(radius);
    m.geometry.origin = m.geometry.origin + offset;
    TriMesh mesh = marching_cubes(m);
    mesh.label = label;
    return mesh;
}

// Distinct radii keep the principal axes well separated.
TriMesh ellipsoid_mesh(double rx, double ry, double rz, Vec3 offset = {0, 0, 0},
                       const std::string& label = "ellipsoid") {
    const int n = static_cast<int>(2 * std::max({rx, ry, rz})) + 5;
    Mask m = test::make_empty_mask({n, n, n});
    const double c = (n - 1) / 2.0;
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const double dx = (i - c) / rx, dy = (j - c) / ry, dz = (k - c) / rz;
                if (dx * dx + dy * dy + dz * dz <= 1.0) m.set(i, j, k, true);
            }
    m.geometry.origin = m.geometry.origin + offset;
    TriMesh mesh = marching_cubes(m);
    mesh.label = label;
    return mesh;
}

double frobenius_to_identity(const SimilarityTransform& t) {
    double sum = 0.0;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            const double expect = r == c ? 1.0 : 0.0;
            const double d = t.rotation[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] - expect;
            sum += d * d;
        }
    return std::sqrt(sum);
}

} // namespace

TEST_SUITE("correspond") {

TEST_CASE("rigid_prealign: identity, translation, rotate+scale recovery") {
    TestRng rng(301);
    const std::vector<Vec3> cloud = random_cloud(rng, 200);

    SUBCASE("identical clouds give the identity") {
        const SimilarityTransform t = rigid_prealign(cloud, cloud);
        CHECK(frobenius_to_identity(t) < 1e-9);
        CHECK(t.scale == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(norm(t.translation) < 1e-9);
    }
    SUBCASE("pure translation is recovered exactly") {
        std::vector<Vec3> shifted;
        for (const Vec3& p : cloud) shifted.push_back(p + Vec3{10, 0, 0});
        const SimilarityTransform t = rigid_prealign(cloud, shifted);
        CHECK(frobenius_to_identity(t) < 1e-9);
        CHECK(distance(t.translation, Vec3{10, 0, 0}) < 1e-9);
    }
    SUBCASE("rotation about z plus scale 1.1 is recovered to 1e-6") {
        const double angle = 30.0 * 3.14159265358979323846 / 180.0;
        std::vector<Vec3> transformed;
        for (const Vec3& p : cloud) transformed.push_back(1.1 * rotate_z(p, angle));
        const SimilarityTransform t = rigid_prealign(cloud, transformed);
        CHECK(t.scale == doctest::Approx(1.1).epsilon(1e-6));
        // recovered rotation angle
        const double trace = t.rotation[0][0] + t.rotation[1][1] + t.rotation[2][2];
        const double recovered = std::acos(std::clamp((trace - 1.0) / 2.0, -1.0, 1.0));
        CHECK(std::abs(recovered - angle) < 1e-6);
        // alignment error at the points
        double worst = 0.0;
        for (std::size_t i = 0; i < cloud.size(); ++i)
            worst = std::max(worst, distance(t.apply(cloud[i]), transformed[i]));
        CHECK(worst < 1e-6);
    }
    SUBCASE("rotation matrix is orthonormal with determinant +1") {
        std::vector<Vec3> other;
        for (const Vec3& p : cloud) other.push_back(0.9 * rotate_z(p, 1.2) + Vec3{5, -3, 2});
        const SimilarityTransform t = rigid_prealign(cloud, other);
        const auto& r = t.rotation;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double dot_ij = 0.0;
                for (int k = 0; k < 3; ++k)
                    dot_ij += r[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] *
                              r[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
                CHECK(std::abs(dot_ij - (i == j ? 1.0 : 0.0)) < 1e-9);
            }
        const double det =
            r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) -
            r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0]) +
            r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
        CHECK(det == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("coplanar clouds are degenerate") {
        std::vector<Vec3> flat;
        for (int i = 0; i < 20; ++i) flat.push_back({rng.uniform(0, 10), rng.uniform(0, 10), 2.0});
        CHECK_THROWS_AS(rigid_prealign(flat, flat), DegenerateInputError);
        CHECK_THROWS_AS(rigid_prealign({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}},
                                       {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}),
                        ContractError);
    }
    SUBCASE("alignment never hurts nearest-neighbour distances") {
        const std::vector<Vec3> target = random_cloud(rng, 150);
        std::vector<Vec3> source;
        for (const Vec3& p : target) source.push_back(rotate_z(p, 0.7) + Vec3{20, 5, -4});
        const SimilarityTransform t = rigid_prealign(source, target);
        const KdTree3 tree(target);
        double before = 0.0, after = 0.0;
        for (const Vec3& p : source) {
            before += tree.nearest(p).squared_dist;
            after += tree.nearest(t.apply(p)).squared_dist;
        }
        CHECK(after <= before);
    }
}

TEST_CASE("baseline_match maps a mesh onto itself exactly") {
    const TriMesh mesh = ball_mesh(6);
    const CorrespondenceSet set = baseline_match(mesh, mesh, 20.0);
    REQUIRE(set.pairs.size() == mesh.vertices.size());
    for (std::size_t i = 0; i < set.pairs.size(); ++i) {
        CHECK_FALSE(set.pairs[i].is_null);
        CHECK(set.pairs[i].source == mesh.vertices[i]);
        CHECK(set.pairs[i].target == mesh.vertices[i]);
    }
    CHECK_THROWS_AS(baseline_match(TriMesh{}, mesh, 20.0), ContractError);
}

TEST_CASE("baseline_match on a translated sphere finds tight matches") {
    const TriMesh source = ball_mesh(8, {0, 0, 0});
    const TriMesh target = ball_mesh(8, {5, 0, 0});
    const CorrespondenceSet set = baseline_match(source, target, 10.0);
    double sum = 0.0;
    for (const auto& p : set.pairs) {
        CHECK_FALSE(p.is_null);
        sum += distance(p.source + Vec3{5, 0, 0}, p.target);
    }
    CHECK(sum / static_cast<double>(set.pairs.size()) < 1.0);
}

TEST_CASE("baseline_match flags structure with no counterpart as null") {
    // Source carries a satellite blob that is absent from the target; the
    // global prealignment folds unmatched regions inward, so the expectation
    // is strong-majority null on the satellite, not unanimity.
    const int n = 76;
    const double c = (n - 1) / 2.0;
    auto build = [&](bool with_satellite) {
        Mask m = test::make_empty_mask({n, n, n});
        for (int k = 0; k < n; ++k)
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i) {
                    const double dx = (i - c) / 20.0, dy = (j - c) / 13.0, dz = (k - c) / 9.0;
                    bool in = dx * dx + dy * dy + dz * dz <= 1.0;
                    if (with_satellite) {
                        const double sx = i - (c + 31), sy = j - c, sz = k - c;
                        in = in || (sx * sx + sy * sy + sz * sz <= 25.0);
                    }
                    if (in) m.set(i, j, k, true);
                }
        TriMesh mesh = marching_cubes(m);
        mesh.label = "s";
        return mesh;
    };
    const TriMesh source = build(true);
    const TriMesh target = build(false);
    const CorrespondenceSet set = baseline_match(source, target, 10.0);
    std::size_t sat_null = 0, sat_total = 0, main_nonnull = 0, main_total = 0;
    for (const auto& p : set.pairs) {
        if (p.source.x > c + 24) {
            ++sat_total;
            if (p.is_null) ++sat_null;
        } else {
            ++main_total;
            if (!p.is_null) ++main_nonnull;
        }
    }
    REQUIRE(sat_total > 0);
    REQUIRE(main_total > 0);
    CHECK(static_cast<double>(sat_null) >= 0.8 * static_cast<double>(sat_total));
    CHECK(static_cast<double>(main_nonnull) >= 0.95 * static_cast<double>(main_total));
}

TEST_CASE("assignment is invariant to a common rigid motion") {
    TestRng rng(307);
    // An off-center bump breaks the ellipsoid's mirror symmetries, so the
    // aligned orientation is unambiguous.
    auto bumped = [&](double grow, Vec3 offset, const std::string& label) {
        const int n = 33;
        Mask m = test::make_empty_mask({n, n, n});
        const double c = (n - 1) / 2.0;
        for (int k = 0; k < n; ++k)
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i) {
                    const double dx = (i - c) / (12.0 + grow), dy = (j - c) / (9.0 + grow);
                    const double dz = (k - c) / (6.0 + grow);
                    bool in = dx * dx + dy * dy + dz * dz <= 1.0;
                    const double bx = i - c - 8, by = j - c - 4, bz = k - c;
                    in = in || (bx * bx + by * by + bz * bz <= 16.0 + grow);
                    if (in) m.set(i, j, k, true);
                }
        m.geometry.origin = m.geometry.origin + offset;
        TriMesh mesh = marching_cubes(m);
        mesh.label = label;
        return mesh;
    };
    const TriMesh source = bumped(0.0, {0, 0, 0}, "a");
    TriMesh target = bumped(0.5, {3, 1, 0}, "b");
    // jitter the target so nearest neighbours are unambiguous
    for (auto& v : target.vertices)
        v += Vec3{rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05)};

    const CorrespondenceSet base = baseline_match(source, target, 15.0);

    // 90-degree rotation about z is exact in floating point
    auto rot90 = [](Vec3 p) { return Vec3{-p.y, p.x, p.z}; };
    TriMesh rs = source, rt = target;
    for (auto& v : rs.vertices) v = rot90(v) + Vec3{7, -2, 4};
    for (auto& v : rt.vertices) v = rot90(v) + Vec3{7, -2, 4};
    const CorrespondenceSet moved = baseline_match(rs, rt, 15.0);

    REQUIRE(moved.pairs.size() == base.pairs.size());
    for (std::size_t i = 0; i < base.pairs.size(); ++i) {
        CHECK(moved.pairs[i].is_null == base.pairs[i].is_null);
        CHECK(distance(moved.pairs[i].target, rot90(base.pairs[i].target) + Vec3{7, -2, 4}) <
              1e-9);
    }
}

TEST_CASE("gather_control_points concatenates non-null pairs and deduplicates") {
    CorrespondenceSet a;
    a.source_structure = "a";
    for (int i = 0; i < 10; ++i)
        a.pairs.push_back({{static_cast<double>(i), 0, 0},
                           {static_cast<double>(i), 1, 0},
                           i % 3 == 0,
                           "a"});
    CorrespondenceSet b;
    b.source_structure = "b";
    b.pairs.push_back({{0.1, 0, 0}, {9, 9, 9}, false, "b"});   // within dedup radius of a's (0,0,0)? that one is null
    b.pairs.push_back({{1.05, 0, 0}, {8, 8, 8}, false, "b"});  // duplicate of kept (1,0,0)
    b.pairs.push_back({{50, 50, 50}, {51, 50, 50}, false, "b"});

    const ControlPointSet cps = gather_control_points({a, b}, 0.25);
    // a: indices 1,2,4,5,7,8 kept (nulls 0,3,6,9 dropped) = 6
    CHECK(cps.per_structure_counts.at("a") == 6);
    // b: (0.1,0,0) kept (the nearby a-point was null), (1.05,0,0) dropped, far point kept
    CHECK(cps.per_structure_counts.at("b") == 2);
    CHECK(cps.size() == 8);

    // no duplicates closer than the tolerance
    for (std::size_t i = 0; i < cps.size(); ++i)
        for (std::size_t j = i + 1; j < cps.size(); ++j)
            CHECK(distance(cps.sources[i], cps.sources[j]) >= 0.25);

    SUBCASE("all-null input is degenerate") {
        CorrespondenceSet nulls;
        nulls.source_structure = "n";
        nulls.pairs.push_back({{0, 0, 0}, {1, 1, 1}, true, "n"});
        CHECK_THROWS_AS(gather_control_points({nulls}, 0.25), DegenerateInputError);
    }
    SUBCASE("no sets is a contract error") {
        CHECK_THROWS_AS(gather_control_points({}, 0.25), ContractError);
    }
}

TEST_CASE("eleven structure sets gather to the expected control-point scale") {
    // Set sizes mirror conditioned meshes at the default 3000-face target
    // (about 1500 vertices each): 9 organs plus bone and envelope.
    TestRng rng(811);
    std::vector<CorrespondenceSet> sets;
    for (int s = 0; s < 11; ++s) {
        CorrespondenceSet set;
        set.source_structure = "structure_" + std::to_string(s);
        const int pairs = rng.uniform_int(1200, 1550);
        for (int i = 0; i < pairs; ++i) {
            const Vec3 src{rng.uniform(0, 300) + 40.0 * s, rng.uniform(0, 300),
                           rng.uniform(0, 300)};
            CorrespondencePair p;
            p.source = src;
            p.target = src + Vec3{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
            p.is_null = rng.uniform(0, 1) < 0.06;
            p.structure = set.source_structure;
            set.pairs.push_back(p);
        }
        sets.push_back(std::move(set));
    }
    const ControlPointSet cps = gather_control_points(sets, 0.5);
    CHECK(cps.size() >= 10500);
    CHECK(cps.size() <= 16000);
    CHECK(cps.per_structure_counts.size() == 11);
}

TEST_CASE("estimator interface routes to the baseline matcher") {
    const TriMesh mesh = ball_mesh(5);
    const NearestVertexEstimator estimator(20.0);
    const CorrespondenceEstimator& iface = estimator;
    const CorrespondenceSet set = iface.estimate(mesh, mesh);
    CHECK(set.pairs.size() == mesh.vertices.size());
}

TEST_CASE("correspondence CSV round-trips") {
    const auto dir = test::scratch_dir("corr_csv");
    const TriMesh source = ball_mesh(4, {0, 0, 0}, "organ_x");
    const TriMesh target = ball_mesh(4, {2, 0, 0}, "organ_x");
    const CorrespondenceSet set = baseline_match(source, target, 10.0);
    write_correspondences_csv({set}, dir / "c.csv");
    const auto sets = read_correspondences_csv(dir / "c.csv");
    REQUIRE(sets.size() == 1);
    REQUIRE(sets[0].pairs.size() == set.pairs.size());
    for (std::size_t i = 0; i < set.pairs.size(); ++i) {
        CHECK(sets[0].pairs[i].source == set.pairs[i].source);
        CHECK(sets[0].pairs[i].target == set.pairs[i].target);
        CHECK(sets[0].pairs[i].is_null == set.pairs[i].is_null);
        CHECK(sets[0].pairs[i].structure == "organ_x");
    }
}

} // TEST_SUITE
