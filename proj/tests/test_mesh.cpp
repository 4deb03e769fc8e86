#include <doctest.h>

#include <cmath>
#include <vector>

#include "corrtps/mesh.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace corrtps;
using corrtps::test::TestRng;
using corrtps::test::oracle_mesh_stats;

namespace {

// Plain lambda-only Laplacian smoothing, used as the shrink comparator.
TriMesh laplacian_smooth(const TriMesh& mesh, double lambda, int iterations) {
    TriMesh out = mesh;
    std::vector<std::vector<std::int32_t>> adj(mesh.vertices.size());
    for (const auto& f : mesh.faces)
        for (int t = 0; t < 3; ++t) {
            const auto a = f[static_cast<std::size_t>(t)];
            const auto b = f[static_cast<std::size_t>((t + 1) % 3)];
            adj[static_cast<std::size_t>(a)].push_back(b);
            adj[static_cast<std::size_t>(b)].push_back(a);
        }
    std::vector<Vec3> next(out.vertices.size());
    for (int it = 0; it < iterations; ++it) {
        for (std::size_t v = 0; v < out.vertices.size(); ++v) {
            Vec3 mean{0, 0, 0};
            for (const auto n : adj[v]) mean += out.vertices[static_cast<std::size_t>(n)];
            mean = mean / static_cast<double>(adj[v].size());
            next[v] = out.vertices[v] + lambda * (mean - out.vertices[v]);
        }
        out.vertices.swap(next);
    }
    return out;
}

TriMesh unit_cube_mesh() {
    TriMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                  {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
    m.faces = {{0, 2, 1}, {0, 3, 2},   // z=0, outward -z
               {4, 5, 6}, {4, 6, 7},   // z=1, outward +z
               {0, 1, 5}, {0, 5, 4},   // y=0
               {3, 7, 6}, {3, 6, 2},   // y=1
               {0, 4, 7}, {0, 7, 3},   // x=0
               {1, 2, 6}, {1, 6, 5}};  // x=1
    return m;
}

double max_vertex_distance(const TriMesh& a, const TriMesh& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.vertices.size(); ++i)
        worst = std::max(worst, distance(a.vertices[i], b.vertices[i]));
    return worst;
}

} // namespace

TEST_SUITE("mesh") {

TEST_CASE("marching cubes on a single voxel gives a tiny watertight octahedron") {
    Mask m = test::make_empty_mask({3, 3, 3}, {1, 1, 1});
    m.set(1, 1, 1, true);
    const TriMesh mesh = marching_cubes(m);
    const auto s = oracle_mesh_stats(mesh);
    CHECK(s.closed);
    CHECK(s.euler == 2);
    CHECK(s.volume > 0.0);
    CHECK(s.volume <= 1.0);
    CHECK(mesh.vertices.size() == 6);
    CHECK(mesh.faces.size() == 8);
}

TEST_CASE("marching cubes on digital balls: watertight, genus 0, calibrated area") {
    for (const int r : {5, 10}) {
        CAPTURE(r);
        const Mask ball = test::make_ball_mask(r);
        const TriMesh mesh = marching_cubes(ball);
        const auto s = oracle_mesh_stats(mesh);
        CHECK(s.closed);
        CHECK(s.euler == 2);
        CHECK(s.volume > 0.0);
        // enclosed volume within one voxel-shell of the voxel-count volume
        const double voxels = static_cast<double>(ball.foreground_count());
        const double shell = 4.0 * 3.14159265358979323846 * r * r * 1.0;
        CHECK(std::abs(s.volume - voxels) <= shell);

        // conditioned (smoothed) mesh matches the analytic sphere area to 5%
        const TriMesh smooth = taubin_smooth(mesh, 0.5, -0.53, 10);
        const auto ss = oracle_mesh_stats(smooth);
        const double r_cal = std::cbrt(3.0 * ss.volume / (4.0 * 3.14159265358979323846));
        const double analytic = 4.0 * 3.14159265358979323846 * r_cal * r_cal;
        CHECK(std::abs(ss.area - analytic) / analytic < 0.05);
    }
}

TEST_CASE("marching cubes on a solid torus has Euler characteristic 0") {
    const Mask torus = test::make_torus_mask(8.0, 3.0);
    const TriMesh mesh = marching_cubes(torus);
    const auto s = oracle_mesh_stats(mesh);
    CHECK(s.closed);
    CHECK(s.euler == 0);
}

TEST_CASE("marching cubes is watertight and outward on random masks") {
    TestRng rng(101);
    for (int trial = 0; trial < 60; ++trial) {
        Mask m = test::make_empty_mask({8, 8, 8});
        const int fill = rng.uniform_int(5, 200);
        for (int t = 0; t < fill; ++t)
            m.set(rng.uniform_int(1, 6), rng.uniform_int(1, 6), rng.uniform_int(1, 6), true);
        if (m.foreground_count() == 0) continue;
        const TriMesh mesh = marching_cubes(m);
        const auto s = oracle_mesh_stats(mesh);
        CAPTURE(trial);
        CHECK(s.closed);
        CHECK(s.volume > 0.0);
        // volume can never exceed the voxel count
        CHECK(s.volume <= static_cast<double>(m.foreground_count()));
    }
}

TEST_CASE("marching cubes rejects empty and border-touching masks") {
    CHECK_THROWS_AS(marching_cubes(test::make_empty_mask({4, 4, 4})), DegenerateInputError);
    Mask touching = test::make_empty_mask({4, 4, 4});
    touching.set(0, 1, 1, true);
    CHECK_THROWS_AS(marching_cubes(touching), ContractError);
    CHECK(mask_touches_border(touching));
    const Mask padded = pad_mask(touching, 1);
    CHECK_FALSE(mask_touches_border(padded));
    CHECK(padded.geometry.origin.x == -1.0);
    const TriMesh mesh = marching_cubes(padded);
    CHECK(oracle_mesh_stats(mesh).closed);
}

TEST_CASE("marching cubes respects anisotropic spacing and origin") {
    Mask m = test::make_empty_mask({3, 3, 3}, {2, 1, 0.5}, {10, -5, 3});
    m.set(1, 1, 1, true);
    const TriMesh mesh = marching_cubes(m);
    for (const Vec3& v : mesh.vertices) {
        CHECK(v.x >= 10.0 + 1 * 2.0 - 1.0);
        CHECK(v.x <= 10.0 + 1 * 2.0 + 1.0 + 2.0);
    }
    const auto s = oracle_mesh_stats(mesh);
    CHECK(s.closed);
    CHECK(s.volume <= 2.0 * 1.0 * 0.5);
}

TEST_CASE("taubin smoothing: identity at 0 iterations, contract checks") {
    const TriMesh mesh = marching_cubes(test::make_ball_mask(5));
    const TriMesh same = taubin_smooth(mesh, 0.5, -0.53, 0);
    CHECK(max_vertex_distance(mesh, same) == 0.0);
    CHECK(same.faces == mesh.faces);
    CHECK_THROWS_AS(taubin_smooth(mesh, 0.5, 0.0, 1), ContractError);
    CHECK_THROWS_AS(taubin_smooth(mesh, 0.6, -0.5, 1), ContractError);
    CHECK_THROWS_AS(taubin_smooth(mesh, 0.5, -0.53, -1), ContractError);
}

TEST_CASE("taubin smoothing keeps volume and reduces roughness") {
    const TriMesh mesh = marching_cubes(test::make_ball_mask(10));
    const auto before = oracle_mesh_stats(mesh);
    const TriMesh smooth = taubin_smooth(mesh, 0.5, -0.53, 10);
    const auto after = oracle_mesh_stats(smooth);
    CHECK(after.closed);
    CHECK(after.euler == before.euler);
    CHECK(std::abs(after.volume - before.volume) / before.volume < 0.05);

    // Surface roughness proxy: spread of vertex radii about the mean radius.
    auto radius_variance = [](const TriMesh& m) {
        Vec3 c{0, 0, 0};
        for (const Vec3& v : m.vertices) c += v;
        c = c / static_cast<double>(m.vertices.size());
        double mean = 0.0;
        std::vector<double> radii;
        for (const Vec3& v : m.vertices) {
            radii.push_back(distance(v, c));
            mean += radii.back();
        }
        mean /= static_cast<double>(radii.size());
        double var = 0.0;
        for (const double r : radii) var += (r - mean) * (r - mean);
        return var / static_cast<double>(radii.size());
    };
    CHECK(radius_variance(smooth) < radius_variance(mesh));

    // Taubin shrinks strictly less than lambda-only smoothing.
    const TriMesh shrunk = laplacian_smooth(mesh, 0.5, 10);
    const auto lap = oracle_mesh_stats(shrunk);
    CHECK(std::abs(after.volume - before.volume) < std::abs(lap.volume - before.volume));
}

TEST_CASE("decimation: identity, sphere volume drift, cube collapse") {
    const TriMesh sphere = taubin_smooth(marching_cubes(test::make_ball_mask(14)), 0.5, -0.53, 5);
    REQUIRE(sphere.faces.size() > 5000);

    SUBCASE("target >= faces is identity") {
        const TriMesh same = decimate(sphere, sphere.faces.size());
        CHECK(same.faces.size() == sphere.faces.size());
        CHECK(max_vertex_distance(sphere, same) == 0.0);
    }
    SUBCASE("40% face reduction keeps volume within 2%") {
        const TriMesh five = decimate(sphere, 5000);
        const auto before = oracle_mesh_stats(five);
        const TriMesh three = decimate(five, 3000);
        const auto after = oracle_mesh_stats(three);
        CHECK(after.faces <= 3000);
        CHECK(after.closed);
        CHECK(after.euler == 2);
        CHECK(std::abs(after.volume - before.volume) / before.volume < 0.02);
    }
    SUBCASE("a subdivided cube decimates to 12 faces with volume within 10%") {
        const Mask cube = test::make_box_mask({16, 16, 16}, {3, 3, 3}, {12, 12, 12});
        const TriMesh cube_mesh = marching_cubes(cube);
        const auto before = oracle_mesh_stats(cube_mesh);
        const TriMesh tiny = decimate(cube_mesh, 12);
        const auto after = oracle_mesh_stats(tiny);
        CHECK(after.faces <= 12);
        CHECK(after.closed);
        CHECK(std::abs(after.volume - before.volume) / before.volume < 0.10);
    }
    SUBCASE("target below a closed surface minimum is rejected") {
        CHECK_THROWS_AS(decimate(sphere, 3), ContractError);
    }
}

TEST_CASE("mesh diagnostics on analytic solids") {
    const TriMesh cube = unit_cube_mesh();
    const MeshDiagnostics d = mesh_diagnostics(cube);
    CHECK(d.euler_characteristic == 2);
    CHECK(d.surface_area == doctest::Approx(6.0));
    CHECK(d.enclosed_volume == doctest::Approx(1.0));
    CHECK(d.watertight);

    TriMesh broken = cube;
    broken.faces.pop_back();
    CHECK_FALSE(mesh_diagnostics(broken).watertight);

    // icosahedron
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    TriMesh ico;
    ico.vertices = {{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
                    {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
                    {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
    ico.faces = {{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
                 {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                 {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
                 {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
    CHECK(mesh_diagnostics(ico).euler_characteristic == 2);
    CHECK(mesh_diagnostics(ico).watertight);
}

TEST_CASE("duplicate vertices merge and degenerate faces drop") {
    TriMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 0}, {0, 0, 1}};
    m.faces = {{0, 1, 2}, {3, 1, 4}, {1, 1, 2}};
    const TriMesh clean = remove_duplicates_and_degenerate(m);
    CHECK(clean.vertices.size() == 4);
    CHECK(clean.faces.size() == 2);
    for (const auto& f : clean.faces) {
        CHECK(f[0] != f[1]);
        CHECK(f[1] != f[2]);
        CHECK(f[2] != f[0]);
    }
}

TEST_CASE("PLY round-trips exactly") {
    const auto dir = test::scratch_dir("ply");
    TriMesh mesh = marching_cubes(test::make_ball_mask(4));
    mesh.label = "ball";
    mesh.vertices[0] = {0.1234567890123456789, -7.5e-13, 3.0000000001};
    write_ply(mesh, dir / "m.ply");
    const TriMesh r = read_ply(dir / "m.ply");
    CHECK(r.label == "ball");
    REQUIRE(r.vertices.size() == mesh.vertices.size());
    REQUIRE(r.faces.size() == mesh.faces.size());
    CHECK(max_vertex_distance(mesh, r) == 0.0);
    CHECK(r.faces == mesh.faces);
}

TEST_CASE("conditioning pipeline preserves Euler characteristic") {
    const TriMesh mesh = marching_cubes(test::make_ball_mask(8));
    const TriMesh smooth = taubin_smooth(mesh, 0.5, -0.53, 10);
    const TriMesh small = decimate(smooth, 500);
    CHECK(oracle_mesh_stats(mesh).euler == 2);
    CHECK(oracle_mesh_stats(smooth).euler == 2);
    CHECK(oracle_mesh_stats(small).euler == 2);
    CHECK(oracle_mesh_stats(small).closed);
}

} // TEST_SUITE
