#include <doctest.h>

#include <fstream>

#include "corrtps/metaimage.hpp"
#include "corrtps/volume.hpp"
#include "helpers.hpp"

using namespace corrtps;
using corrtps::test::TestRng;

TEST_SUITE("volume") {

TEST_CASE("metaimage round-trips a minimal int16 volume in x-fastest order") {
    const auto dir = test::scratch_dir("mhd_min");
    Volume v = test::make_volume({2, 2, 2}, 0.0f, IntensityKind::HU);
    for (int i = 0; i < 8; ++i) v.values[static_cast<std::size_t>(i)] = static_cast<float>(i);
    write_metaimage(v, dir / "v.mhd");
    const Volume r = read_metaimage(dir / "v.mhd");
    CHECK(r.kind == IntensityKind::HU);
    REQUIRE(r.values.size() == 8);
    for (int i = 0; i < 8; ++i) CHECK(r.values[static_cast<std::size_t>(i)] == static_cast<float>(i));
    CHECK(r.at(1, 0, 0) == 1.0f);  // i varies quickest
    CHECK(r.at(0, 1, 0) == 2.0f);
    CHECK(r.at(0, 0, 1) == 4.0f);
}

TEST_CASE("metaimage parses the paper-scale DimSize") {
    const auto dir = test::scratch_dir("mhd_dims");
    {
        std::ofstream h(dir / "big.mhd");
        h << "ObjectType = Image\nNDims = 3\nBinaryData = True\n"
          << "BinaryDataByteOrderMSB = False\nDimSize = 128 288 480\n"
          << "ElementSpacing = 1 1 1\nOffset = 0 0 0\nElementType = MET_SHORT\n"
          << "ElementDataFile = big.raw\n";
        std::ofstream rawfile(dir / "big.raw", std::ios::binary);
        std::vector<char> zeros(static_cast<std::size_t>(128) * 288 * 480 * 2, 0);
        rawfile.write(zeros.data(), static_cast<std::streamsize>(zeros.size()));
    }
    const Volume v = read_metaimage(dir / "big.mhd");
    CHECK(v.geometry.dims == Index3{128, 288, 480});
}

TEST_CASE("metaimage header without ElementSpacing is rejected") {
    const auto dir = test::scratch_dir("mhd_bad");
    {
        std::ofstream h(dir / "bad.mhd");
        h << "ObjectType = Image\nNDims = 3\nDimSize = 2 2 2\n"
          << "ElementType = MET_SHORT\nElementDataFile = bad.raw\n";
        std::ofstream rawfile(dir / "bad.raw", std::ios::binary);
        std::vector<char> zeros(16, 0);
        rawfile.write(zeros.data(), 16);
    }
    CHECK_THROWS_AS(read_metaimage(dir / "bad.mhd"), FormatError);
}

TEST_CASE("metaimage float data and header fields round-trip bit-exactly") {
    const auto dir = test::scratch_dir("mhd_float");
    TestRng rng(7);
    Volume v = test::make_volume({5, 4, 3}, 0.0f, IntensityKind::HU, {0.97, 0.97, 2.5},
                                 {-12.25, 3.5, 99.125});
    for (auto& x : v.values) x = static_cast<float>(rng.uniform(-1000.0, 2000.0));
    v.values[0] = 0.5f;  // fractional HU forces the float path
    write_metaimage(v, dir / "f.mhd");
    const Volume r = read_metaimage(dir / "f.mhd");
    CHECK(r.kind == IntensityKind::HU);
    CHECK(r.geometry == v.geometry);
    REQUIRE(r.values.size() == v.values.size());
    for (std::size_t i = 0; i < v.values.size(); ++i) CHECK(r.values[i] == v.values[i]);
}

TEST_CASE("metaimage write to an unwritable path fails") {
    const Volume v = test::make_volume({2, 2, 2}, 0.0f);
    CHECK_THROWS_AS(write_metaimage(v, "/nonexistent_dir_xyz/v.mhd"), IoError);
}

TEST_CASE("mask and field files round-trip") {
    const auto dir = test::scratch_dir("mhd_mask_field");
    Mask m = test::make_ball_mask(3);
    write_mask(m, dir / "m.mhd");
    const Mask rm = read_mask(dir / "m.mhd");
    CHECK(rm.geometry == m.geometry);
    CHECK(rm.bits == m.bits);

    DisplacementField f;
    f.geometry = test::make_geometry({3, 3, 3});
    f.vectors.assign(27, Vec3{1.5, -2.25, 0.5});
    write_field(f, dir / "f.mhd");
    const DisplacementField rf = read_field(dir / "f.mhd");
    CHECK(rf.geometry == f.geometry);
    for (const Vec3& v : rf.vectors) {
        CHECK(v.x == 1.5);
        CHECK(v.y == -2.25);
        CHECK(v.z == 0.5);
    }
    CHECK_THROWS_AS(read_mask(dir / "f.mhd"), UnsupportedFormatError);
}

TEST_CASE("window_normalize maps the paper's window as specified") {
    Volume v = test::make_volume({3, 1, 1}, 0.0f, IntensityKind::HU);
    v.values = {-800.0f, 0.0f, 2000.0f};
    const Volume n = window_normalize(v, 1600.0, 0.0);
    CHECK(n.kind == IntensityKind::Normalised);
    CHECK(n.values[0] == doctest::Approx(0.0));
    CHECK(n.values[1] == doctest::Approx(0.5));
    CHECK(n.values[2] == doctest::Approx(1.0));
    CHECK_THROWS_AS(window_normalize(n, 1600.0, 0.0), ContractError);
}

TEST_CASE("window_normalize is monotone with image in [0,1]") {
    TestRng rng(11);
    Volume v = test::make_volume({64, 1, 1}, 0.0f, IntensityKind::HU);
    for (auto& x : v.values) x = static_cast<float>(rng.uniform(-2000.0, 3000.0));
    const Volume n = window_normalize(v, 1600.0, 0.0);
    for (std::size_t i = 0; i < v.values.size(); ++i) {
        CHECK(n.values[i] >= 0.0f);
        CHECK(n.values[i] <= 1.0f);
        for (std::size_t j = 0; j < v.values.size(); ++j)
            if (v.values[i] <= v.values[j]) CHECK(n.values[i] <= n.values[j]);
    }
}

TEST_CASE("crop_to_dims: identity, paper dims, and air padding") {
    TestRng rng(3);
    Volume v = test::make_volume({6, 5, 4}, 0.0f, IntensityKind::HU, {1, 1, 2}, {5, -3, 0});
    for (auto& x : v.values) x = static_cast<float>(rng.uniform_int(-500, 1500));

    SUBCASE("identity crop") {
        const Vec3 center{5 + 2.5 * 1, -3 + 2.0 * 1, 0 + 1.5 * 2};
        const Volume c = crop_to_dims(v, {6, 5, 4}, center);
        CHECK(c.geometry == v.geometry);
        CHECK(c.values == v.values);
    }
    SUBCASE("crop beyond the source pads with air") {
        const Vec3 center{5 + 2.5, -3 + 2.0, 1.5 * 2};
        const Volume c = crop_to_dims(v, {10, 5, 4}, center);
        CHECK(c.geometry.dims == Index3{10, 5, 4});
        bool saw_pad = false;
        for (int k = 0; k < 4; ++k)
            for (int j = 0; j < 5; ++j)
                for (int i = 0; i < 10; ++i) {
                    const Vec3 p = c.geometry.index_to_point(i, j, k);
                    const Vec3 u = v.geometry.point_to_continuous_index(p);
                    const int si = static_cast<int>(std::llround(u.x));
                    const int sj = static_cast<int>(std::llround(u.y));
                    const int sk = static_cast<int>(std::llround(u.z));
                    if (v.geometry.contains(si, sj, sk)) {
                        CHECK(c.at(i, j, k) == v.at(si, sj, sk));
                    } else {
                        CHECK(c.at(i, j, k) == -1000.0f);
                        saw_pad = true;
                    }
                }
        CHECK(saw_pad);
    }
    SUBCASE("target dims validated") {
        CHECK_THROWS_AS(crop_to_dims(v, {0, 5, 4}, Vec3{0, 0, 0}), ContractError);
    }
    SUBCASE("paper dims request is honoured") {
        Volume big = test::make_volume({40, 40, 40}, 100.0f, IntensityKind::HU);
        const Volume c = crop_to_dims(big, {12, 28, 48},
                                      Vec3{19.5, 19.5, 19.5});
        CHECK(c.geometry.dims == Index3{12, 28, 48});
    }
}

TEST_CASE("trilinear_sample: grid-point exactness, linearity, border rule") {
    TestRng rng(5);
    Volume v = test::make_volume({4, 3, 3}, 0.0f, IntensityKind::HU, {0.5, 1, 2}, {1, 2, 3});
    for (auto& x : v.values) x = static_cast<float>(rng.uniform_int(-1000, 1000));

    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 3; ++j)
            for (int i = 0; i < 4; ++i)
                CHECK(trilinear_sample(v, v.geometry.index_to_point(i, j, k)) ==
                      static_cast<double>(v.at(i, j, k)));

    Volume two = test::make_volume({2, 1, 1}, 0.0f, IntensityKind::HU);
    two.values = {0.0f, 10.0f};
    CHECK(trilinear_sample(two, Vec3{0.5, 0, 0}) == doctest::Approx(5.0));

    CHECK(trilinear_sample(v, Vec3{1000, 1000, 1000}) == -1000.0);
    Volume norm = test::make_volume({2, 2, 2}, 0.25f, IntensityKind::Normalised);
    CHECK(trilinear_sample(norm, Vec3{-50, 0, 0}) == 0.0);
}

} // TEST_SUITE
