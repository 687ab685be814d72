#include "support.hpp"

#include "vspf/volume.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <fstream>

using namespace vspf;
namespace fs = std::filesystem;

namespace {

void write_header(const fs::path& mhd, const std::string& dims, const std::string& type,
                  const std::string& raw)
{
    std::ofstream h(mhd);
    h << "ObjectType = Image\nNDims = 3\nBinaryData = True\nBinaryDataByteOrderMSB = False\n"
      << "DimSize = " << dims << "\nElementSpacing = 1 1 1\nOffset = 0 0 0\n"
      << "ElementType = " << type << "\nElementDataFile = " << raw << "\n";
}

}  // namespace

TEST_CASE("zero volume round-trips through MetaImage")
{
    const auto dir = testing::scratch_dir("zeros");
    const Volume v(testing::cube(2), 0.0);
    save_volume(v, dir / "z.mhd");
    CHECK(load_volume(dir / "z.mhd") == v);
}

TEST_CASE("random volume with anisotropic spacing round-trips exactly")
{
    const auto dir = testing::scratch_dir("roundtrip");
    Grid g;
    g.dims = {5, 4, 3};
    g.spacing = Vec3(1, 2, 3);
    g.origin = Vec3(-1.5, 0.25, 10);
    const Volume v = testing::random_volume(g, 9);
    save_volume(v, dir / "r.mhd");
    const Volume back = load_volume(dir / "r.mhd");
    CHECK(back.grid().spacing == Vec3(1, 2, 3));
    CHECK(back.grid().origin == g.origin);
    CHECK(back == v);
}

TEST_CASE("short payload is rejected")
{
    const auto dir = testing::scratch_dir("short");
    write_header(dir / "s.mhd", "4 4 4", "MET_DOUBLE", "s.raw");
    std::ofstream raw(dir / "s.raw", std::ios::binary);
    const std::vector<double> d(63, 1.0);
    raw.write(reinterpret_cast<const char*>(d.data()), static_cast<std::streamsize>(d.size() * 8));
    raw.close();
    CHECK_THROWS_WITH_AS(load_volume(dir / "s.mhd"), doctest::Contains("data length mismatch"), IoError);
}

TEST_CASE("16-bit integers are promoted exactly")
{
    const auto dir = testing::scratch_dir("short16");
    write_header(dir / "i.mhd", "2 1 1", "MET_SHORT", "i.raw");
    std::ofstream raw(dir / "i.raw", std::ios::binary);
    const std::int16_t d[2] = {0, 100};
    raw.write(reinterpret_cast<const char*>(d), sizeof d);
    raw.close();
    const Volume v = load_volume(dir / "i.mhd");
    CHECK(v[0] == 0.0);
    CHECK(v[1] == 100.0);
}

TEST_CASE("missing file and unwritable target raise I/O errors")
{
    const auto dir = testing::scratch_dir("io_errors");
    CHECK_THROWS_AS(load_volume(dir / "absent.mhd"), IoError);
    std::ofstream(dir / "plainfile") << "x";
    CHECK_THROWS_AS(save_volume(Volume(testing::cube(2), 1.0), dir / "plainfile" / "v.mhd"), IoError);
}

TEST_CASE("volume rejects mismatched data length")
{
    CHECK_THROWS_AS(Volume(testing::cube(2), std::vector<double>(7, 0.0)), InvalidArgument);
}

TEST_CASE("resampling at the native spacing is the identity")
{
    const Volume v = testing::random_volume(testing::cube(6), 3);
    const Volume r = resample_isotropic(v, 1.0);
    REQUIRE(r.grid().dims == v.grid().dims);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(r[i] == doctest::Approx(v[i]).epsilon(1e-12));
}

TEST_CASE("cubic resampling reproduces a linear ramp in the interior")
{
    Grid g;
    g.dims = {8, 4, 4};
    g.spacing = Vec3::Constant(2.0);
    std::vector<double> d(g.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = g.physical(i).x();
    const Volume r = resample_isotropic(Volume(g, d), 1.0);
    const Grid& rg = r.grid();
    CHECK(rg.dims[0] == 15);
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double x = rg.physical(i).x();
        if (x < 2.0 || x > 12.0) continue;  // needs a full 4-tap neighbourhood
        CHECK(std::abs(r[i] - x) < 1e-6);
    }
}

TEST_CASE("upsample then downsample agrees with direct decimation")
{
    const Volume v = testing::random_volume(testing::cube(8), 11);
    const Volume back = resample_isotropic(resample_isotropic(v, 0.5), 2.0);
    // Oracle: the original samples at every second node.
    REQUIRE(back.grid().dims == (std::array<int, 3>{4, 4, 4}));
    double se = 0.0;
    for (int k = 0; k < 4; ++k)
        for (int j = 0; j < 4; ++j)
            for (int i = 0; i < 4; ++i) {
                const double e = back.at(i, j, k) - v.at(2 * i, 2 * j, 2 * k);
                se += e * e;
            }
    CHECK(std::sqrt(se / 64.0) < 1e-3);
}

TEST_CASE("gaussian smoothing")
{
    const Volume v = testing::random_volume(testing::cube(5), 1);
    CHECK(gaussian_smooth(v, 0.0) == v);

    const Volume c(testing::cube(7), 7.0);
    const Volume sc = gaussian_smooth(c, 1.7);
    for (std::size_t i = 0; i < sc.size(); ++i) CHECK(sc[i] == doctest::Approx(7.0).epsilon(1e-14));

    Volume imp(testing::cube(9), 0.0);
    imp.at(4, 4, 4) = 1.0;
    const Volume s = gaussian_smooth(imp, 1.0);
    // Oracle: product of the sampled Gaussian truncated at 3 sigma, renormalized.
    double norm = 0.0;
    for (int t = -3; t <= 3; ++t) norm += std::exp(-0.5 * t * t);
    auto w = [&](int d) { return std::abs(d) > 3 ? 0.0 : std::exp(-0.5 * d * d) / norm; };
    double worst = 0.0;
    for (int k = 0; k < 9; ++k)
        for (int j = 0; j < 9; ++j)
            for (int i = 0; i < 9; ++i)
                worst = std::max(worst, std::abs(s.at(i, j, k) - w(i - 4) * w(j - 4) * w(k - 4)));
    CHECK(worst < 1e-9);
    CHECK_THROWS_AS(gaussian_smooth(v, -1.0), InvalidArgument);
}

TEST_CASE("spatial gradient of linear functions")
{
    Grid g = testing::cube(6);
    g.spacing = Vec3(1.0, 0.5, 2.0);
    std::vector<double> a(g.size()), b(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec3 p = g.physical(i);
        a[i] = 2.0 * p.x();
        b[i] = p.x() + 3.0 * p.y() - p.z();
    }
    const VectorField ga = spatial_gradient(Volume(g, a));
    const VectorField gb = spatial_gradient(Volume(g, b));
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK((ga[i] - Vec3(2, 0, 0)).norm() < 1e-12);
        CHECK((gb[i] - Vec3(1, 3, -1)).norm() < 1e-12);
    }
    const VectorField gc = spatial_gradient(Volume(g, 4.0));
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(gc[i].norm() == 0.0);
}

TEST_CASE("pyramid geometry")
{
    const Volume v = testing::random_volume(testing::cube(8), 2);
    const Pyramid p1 = build_pyramid(v, 1);
    CHECK(p1.level_count() == 1);
    CHECK(p1.level(1) == v);

    const Pyramid p2 = build_pyramid(Volume(testing::cube(64), 0.0), 2);
    CHECK(p2.level(2).grid().dims == (std::array<int, 3>{32, 32, 32}));
    CHECK(p2.level(2).grid().spacing == Vec3::Constant(2.0));

    const Pyramid p3 = build_pyramid(Volume(testing::cube(16), 3.5), 3);
    for (int l = 1; l <= 3; ++l)
        for (double x : p3.level(l).data()) CHECK(x == doctest::Approx(3.5).epsilon(1e-14));
    CHECK_THROWS_AS(build_pyramid(v, 0), InvalidArgument);
    CHECK_THROWS_AS(p3.level(4), InvalidArgument);
}

TEST_CASE("linear and cubic interpolation hit the nodes")
{
    const Volume v = testing::random_volume(testing::cube(5), 4);
    for (int k = 0; k < 5; ++k)
        for (int j = 0; j < 5; ++j)
            for (int i = 0; i < 5; ++i) {
                CHECK(sample_linear(v, Vec3(i, j, k)) == doctest::Approx(v.at(i, j, k)).epsilon(1e-14));
                CHECK(sample_cubic(v, Vec3(i, j, k)) == doctest::Approx(v.at(i, j, k)).epsilon(1e-14));
            }
    // Trilinear midpoint oracle.
    const double mid = sample_linear(v, Vec3(0.5, 0.5, 0.5));
    double avg = 0.0;
    for (int k = 0; k < 2; ++k)
        for (int j = 0; j < 2; ++j)
            for (int i = 0; i < 2; ++i) avg += v.at(i, j, k) / 8.0;
    CHECK(mid == doctest::Approx(avg).epsilon(1e-14));
}
