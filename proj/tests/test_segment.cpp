#include <doctest.h>

#include <cmath>

#include "corrtps/segment.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace corrtps;
using corrtps::test::TestRng;

namespace {

// Analytic test scene: elliptical body in air with a detached table slab and
// a bone cylinder inside the body.
Volume make_scene(Index3 dims) {
    Volume v = test::make_volume(dims, -1000.0f, IntensityKind::HU);
    const double cx = (dims[0] - 1) / 2.0, cy = (dims[1] - 1) / 2.0;
    for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j)
            for (int i = 0; i < dims[0]; ++i) {
                const double ex = (i - cx) / (0.30 * dims[0]);
                const double ey = (j - cy) / (0.28 * dims[1]);
                const bool in_z = k >= 2 && k < dims[2] - 2;
                if (ex * ex + ey * ey <= 1.0 && in_z) {
                    v.at(i, j, k) = 0.0f;  // water body
                    const double rb = std::hypot(i - cx, j - cy);
                    if (rb <= 0.08 * dims[0]) v.at(i, j, k) = 1000.0f;  // bone
                } else if (j >= dims[1] - 3 && i >= 2 && i < dims[0] - 2 && in_z) {
                    v.at(i, j, k) = 100.0f;  // detached table slab
                }
            }
    return v;
}

} // namespace

TEST_SUITE("segment") {

TEST_CASE("threshold_mask: empty, inclusive boundary, and phantom cylinder") {
    Volume v = test::make_volume({4, 4, 4}, 0.0f, IntensityKind::HU);
    CHECK(threshold_mask(v, 400.0).foreground_count() == 0);

    v.at(1, 2, 3) = 400.0f;
    const Mask m = threshold_mask(v, 400.0);
    CHECK(m.at(1, 2, 3));
    CHECK(m.foreground_count() == 1);

    // bone cylinder at 1000 HU in water: the mask must equal the analytic
    // predicate voxel by voxel
    Volume scene = test::make_volume({20, 20, 10}, 0.0f, IntensityKind::HU);
    const double cx = 9.5, cy = 9.5, r = 4.0;
    for (int k = 0; k < 10; ++k)
        for (int j = 0; j < 20; ++j)
            for (int i = 0; i < 20; ++i)
                if (std::hypot(i - cx, j - cy) <= r) scene.at(i, j, k) = 1000.0f;
    const Mask bone = threshold_mask(scene, 400.0);
    for (int k = 0; k < 10; ++k)
        for (int j = 0; j < 20; ++j)
            for (int i = 0; i < 20; ++i)
                CHECK(bone.at(i, j, k) == (std::hypot(i - cx, j - cy) <= r));

    const Volume norm = test::make_volume({2, 2, 2}, 0.5f, IntensityKind::Normalised);
    CHECK_THROWS_AS(threshold_mask(norm, 400.0), ContractError);
}

TEST_CASE("threshold_mask is monotone in the threshold") {
    TestRng rng(23);
    Volume v = test::make_volume({8, 8, 8}, 0.0f, IntensityKind::HU);
    for (auto& x : v.values) x = static_cast<float>(rng.uniform(-1200, 1800));
    const Mask lo = threshold_mask(v, 100.0);
    const Mask hi = threshold_mask(v, 500.0);
    for (std::size_t i = 0; i < lo.bits.size(); ++i)
        if (hi.bits[i]) CHECK(lo.bits[i]);
}

TEST_CASE("largest_component keeps the bigger box and is connected") {
    Mask m = test::make_empty_mask({20, 10, 10});
    for (int k = 0; k < 4; ++k)
        for (int j = 0; j < 5; ++j)
            for (int i = 0; i < 5; ++i) m.set(i, j, k, true);  // 100 voxels
    for (int k = 0; k < 2; ++k)
        for (int j = 0; j < 5; ++j)
            for (int i = 12; i < 17; ++i) m.set(i, j, k, true);  // 50 voxels
    const Mask keep = largest_component(m, Connectivity::TwentySix);
    CHECK(keep.foreground_count() == 100);
    CHECK(keep.at(0, 0, 0));
    CHECK_FALSE(keep.at(12, 0, 0));

    const auto comps = test::oracle_components(keep, 26);
    CHECK(comps.size() == 1);

    SUBCASE("single component is identity") {
        const Mask again = largest_component(keep, Connectivity::TwentySix);
        CHECK(again.bits == keep.bits);
    }
    SUBCASE("empty mask stays empty") {
        const Mask empty = test::make_empty_mask({4, 4, 4});
        CHECK(largest_component(empty, Connectivity::Six).foreground_count() == 0);
    }
    SUBCASE("equal sizes break ties to the smallest linear index") {
        Mask tie = test::make_empty_mask({10, 3, 3});
        tie.set(6, 1, 1, true);  // second in linear order
        tie.set(1, 1, 1, true);  // first
        const Mask kept = largest_component(tie, Connectivity::Six);
        CHECK(kept.at(1, 1, 1));
        CHECK_FALSE(kept.at(6, 1, 1));
    }
}

TEST_CASE("largest_component separates body from table like the oracle") {
    const Volume scene = make_scene({32, 32, 12});
    const Mask thresholded = threshold_mask(scene, -200.0);
    const auto comps = test::oracle_components(thresholded, 26);
    REQUIRE(comps.size() == 2);
    const std::size_t biggest = std::max(comps[0].size(), comps[1].size());
    const Mask keep = largest_component(thresholded, Connectivity::TwentySix);
    CHECK(static_cast<std::size_t>(keep.foreground_count()) == biggest);
    CHECK_FALSE(keep.at(16, 30, 5));  // table voxel
}

TEST_CASE("fill_holes: shell, border identity, tunnel") {
    SUBCASE("hollow sphere shell becomes a solid ball") {
        Mask ball = test::make_ball_mask(6);
        Mask shell = ball;
        const Mask inner = test::make_ball_mask(4);
        const int off = (ball.geometry.dims[0] - inner.geometry.dims[0]) / 2;
        for (int k = 0; k < inner.geometry.dims[2]; ++k)
            for (int j = 0; j < inner.geometry.dims[1]; ++j)
                for (int i = 0; i < inner.geometry.dims[0]; ++i)
                    if (inner.at(i, j, k)) shell.set(i + off, j + off, k + off, false);
        const Mask filled = fill_holes(shell);
        CHECK(filled.bits == ball.bits);
    }
    SUBCASE("mask touching all borders with no cavity is unchanged") {
        Mask slab = test::make_empty_mask({4, 4, 4});
        for (int k = 0; k < 4; ++k)
            for (int j = 0; j < 4; ++j)
                for (int i = 0; i < 4; ++i) slab.set(i, j, k, true);
        CHECK(fill_holes(slab).bits == slab.bits);
    }
    SUBCASE("a tunnel to the border stays background") {
        Mask shell = test::make_ball_mask(6);
        const int c = shell.geometry.dims[0] / 2;
        const Mask inner = test::make_ball_mask(4);
        const int off = (shell.geometry.dims[0] - inner.geometry.dims[0]) / 2;
        for (int k = 0; k < inner.geometry.dims[2]; ++k)
            for (int j = 0; j < inner.geometry.dims[1]; ++j)
                for (int i = 0; i < inner.geometry.dims[0]; ++i)
                    if (inner.at(i, j, k)) shell.set(i + off, j + off, k + off, false);
        for (int i = c; i < shell.geometry.dims[0]; ++i) shell.set(i, c, c, false);  // tunnel
        const Mask filled = fill_holes(shell);
        // oracle: background flood from the border must reach the cavity
        Mask background = filled;
        CHECK_FALSE(filled.at(c, c, c));
        // no foreground voxel was removed
        for (std::size_t i = 0; i < shell.bits.size(); ++i)
            if (shell.bits[i]) CHECK(filled.bits[i]);
    }
}

TEST_CASE("extract_body_envelope keeps the filled body and drops the table") {
    const Volume scene = make_scene({32, 32, 12});
    const Mask envelope = extract_body_envelope(scene);
    CHECK(envelope.label == "envelope");
    CHECK_FALSE(envelope.at(16, 30, 5));  // table
    CHECK(envelope.at(16, 16, 6));        // body center (bone included after fill)

    SUBCASE("all-air volume is degenerate") {
        const Volume air = test::make_volume({8, 8, 8}, -1000.0f, IntensityKind::HU);
        CHECK_THROWS_AS(extract_body_envelope(air), DegenerateInputError);
    }
    SUBCASE("internal air cavity is included by hole filling") {
        Volume v = make_scene({32, 32, 12});
        v.at(16, 12, 6) = -1000.0f;  // cavity inside the body
        const Mask env = extract_body_envelope(v);
        CHECK(env.at(16, 12, 6));
    }
}

TEST_CASE("extract_bone crops below the z-plane and respects the envelope") {
    const Volume scene = make_scene({32, 32, 16});
    const Mask envelope = extract_body_envelope(scene);

    const Mask full = extract_bone(scene, envelope, -1e30);
    CHECK(full.label == "bone");
    CHECK(full.foreground_count() > 0);
    for (std::size_t i = 0; i < full.bits.size(); ++i)
        if (full.bits[i]) CHECK(envelope.bits[i]);

    const double plane = scene.geometry.origin.z + 8 * scene.geometry.spacing.z;
    const Mask cropped = extract_bone(scene, envelope, plane);
    for (std::int64_t idx = 0; idx < cropped.geometry.voxel_count(); ++idx) {
        if (!cropped.bits[static_cast<std::size_t>(idx)]) continue;
        const Index3 c = cropped.geometry.delinearize(idx);
        CHECK(c[2] >= 8);
    }
    CHECK(cropped.foreground_count() < full.foreground_count());
    CHECK(cropped.foreground_count() > 0);

    SUBCASE("empty envelope gives an empty bone mask") {
        const Mask none = test::make_empty_mask({32, 32, 16});
        CHECK(extract_bone(scene, none, -1e30).foreground_count() == 0);
    }
    SUBCASE("geometry mismatch is a contract error") {
        const Mask wrong = test::make_empty_mask({8, 8, 8});
        CHECK_THROWS_AS(extract_bone(scene, wrong, 0.0), ContractError);
    }
}

TEST_CASE("crop_mask uses the same window rule as crop_to_dims") {
    Mask m = test::make_ball_mask(4);
    const auto& g = m.geometry;
    const Vec3 center{(g.dims[0] - 1) / 2.0, (g.dims[1] - 1) / 2.0, (g.dims[2] - 1) / 2.0};
    const Mask same = crop_mask(m, g.dims, center);
    CHECK(same.bits == m.bits);
    const Mask smaller = crop_mask(m, {5, 5, 5}, center);
    CHECK(smaller.geometry.dims == Index3{5, 5, 5});
    CHECK(smaller.foreground_count() > 0);
}

} // TEST_SUITE
