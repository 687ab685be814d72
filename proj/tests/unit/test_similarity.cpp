#include "support.hpp"

#include "vspf/similarity.hpp"

#include <Eigen/Eigenvalues>

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace vspf;

namespace {

double kernel(double d)
{
    if (std::abs(d) >= 2.0) return 0.0;
    const double pd = std::numbers::pi * d;
    const double s = std::abs(d) < 1e-12 ? 1.0 : std::sin(pd) / pd;
    return s * (0.5 + 0.5 * std::cos(pd / 2.0));
}

// Brute-force partial-volume table: every moving voxel, every selected sample.
std::vector<double> brute_force_table(const Volume& ref, const Volume& mov, const RigidParams& p,
                                      const SimilaritySettings& s)
{
    const int b = s.bins;
    std::vector<double> table(static_cast<std::size_t>(b * b), 0.0);
    const Grid& rg = ref.grid();
    const Grid& mg = mov.grid();
    const double rs = (b - 1) / (s.ref_window.hi - s.ref_window.lo);
    const double ms = (b - 1) / (s.mov_window.hi - s.mov_window.lo);
    for (std::size_t idx = 0; idx < ref.size(); ++idx) {
        const Vec3 q = mg.continuous_index(apply(p, rg.physical(idx), s.center));
        Vec3 norm;
        for (int a = 0; a < 3; ++a) {
            norm[a] = 0.0;
            for (int n = -10; n < 40; ++n) norm[a] += kernel(q[a] - n);
        }
        const double rpos = (ref[idx] - s.ref_window.lo) * rs;
        const int r0 = std::min(static_cast<int>(std::floor(rpos)), b - 2);
        const double fr = rpos - r0;
        for (std::size_t m = 0; m < mov.size(); ++m) {
            const auto c = mg.coords(m);
            double w = 1.0;
            for (int a = 0; a < 3; ++a) w *= kernel(q[a] - c[a]) / norm[a];
            if (w == 0.0) continue;
            const int mb = static_cast<int>(std::lround((mov[m] - s.mov_window.lo) * ms));
            table[static_cast<std::size_t>(r0 * b + mb)] += (1.0 - fr) * w;
            table[static_cast<std::size_t>((r0 + 1) * b + mb)] += fr * w;
        }
    }
    for (double& v : table) v = std::max(v, 0.0);
    return table;
}

JointHistogram table_histogram(int bins, const std::vector<double>& cells)
{
    JointHistogram h;
    h.bins = bins;
    h.table = cells;
    h.update_marginals();
    return h;
}

Selection random_selection(std::size_t n, double fraction, std::uint64_t seed)
{
    Selection s;
    s.draw_seed = seed;
    for (std::size_t i = 0; i < n; ++i)
        if (rng::uniform(seed, i) < fraction) s.indices.push_back(i);
    return s;
}

}  // namespace

TEST_CASE("windowed sinc")
{
    CHECK(windowed_sinc(0.0) == 1.0);
    CHECK(std::abs(windowed_sinc(1.0)) < 1e-15);
    CHECK(windowed_sinc(2.0) == 0.0);
    CHECK(windowed_sinc(-2.5) == 0.0);
    for (double d : {-1.7, -0.6, 0.3, 1.2}) {
        CHECK(windowed_sinc(d) == doctest::Approx(kernel(d)).epsilon(1e-14));
        const double fd = (windowed_sinc(d + 1e-6) - windowed_sinc(d - 1e-6)) / 2e-6;
        CHECK(windowed_sinc_derivative(d) == doctest::Approx(fd).epsilon(1e-7));
    }
}

TEST_CASE("self-alignment on bin centers is diagonal")
{
    const int bins = 8;
    Volume v(testing::cube(6), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 10.0 * ((i * 7 + i / 5) % bins);
    const auto s = default_similarity_settings(v, v, bins);
    const JointHistogram h = joint_histogram(v, v, RigidParams{}, full_selection(v.grid()), s);
    double off = 0.0;
    for (int a = 0; a < bins; ++a)
        for (int m = 0; m < bins; ++m)
            if (a != m) off += h(a, m);
    CHECK(off < 1e-9 * h.total_weight);
    CHECK(h.total_weight == doctest::Approx(216.0).epsilon(1e-12));
}

TEST_CASE("no overlap raises")
{
    const Volume v = testing::random_volume(testing::cube(6), 1);
    const auto s = default_similarity_settings(v, v, 16);
    CHECK_THROWS_WITH_AS(joint_histogram(v, v, RigidParams{Vec3(100, 0, 0), Vec3::Zero()},
                                         full_selection(v.grid()), s),
                         "zero in-bounds mass", NoOverlapError);
}

TEST_CASE("histogram matches brute-force re-accumulation")
{
    // Two-level phantom: a bright cube inside a dark one.
    Volume ref(testing::cube(8), 0.0);
    for (int k = 2; k < 6; ++k)
        for (int j = 2; j < 6; ++j)
            for (int i = 2; i < 6; ++i) ref.at(i, j, k) = 100.0;
    Volume mov = ref;
    for (std::size_t i = 0; i < mov.size(); ++i) mov[i] = 50.0 + 0.7 * ref[i] + (i % 3);
    auto s = default_similarity_settings(ref, mov, 16, ref.grid().center());

    for (const RigidParams& p : {RigidParams{}, RigidParams{Vec3(0.3, -0.45, 0.2), Vec3(0.05, -0.02, 0.04)}}) {
        const JointHistogram h = joint_histogram(ref, mov, p, full_selection(ref.grid()), s);
        const auto oracle = brute_force_table(ref, mov, p, s);
        double worst = 0.0;
        for (std::size_t c = 0; c < oracle.size(); ++c) worst = std::max(worst, std::abs(h.table[c] - oracle[c]));
        CHECK(worst < 1e-12);
        for (double v : h.table) CHECK(v >= 0.0);
    }
}

TEST_CASE("nmi on constructed tables")
{
    std::vector<double> diag(16, 0.0);
    for (int i = 0; i < 4; ++i) diag[static_cast<std::size_t>(i * 4 + i)] = 5.0;
    const SimilarityValue d = nmi(table_histogram(4, diag));
    CHECK(d.entropy_ref == doctest::Approx(std::log(4.0)).epsilon(1e-14));
    CHECK(d.entropy_mov == doctest::Approx(std::log(4.0)).epsilon(1e-14));
    CHECK(d.entropy_joint == doctest::Approx(std::log(4.0)).epsilon(1e-14));
    CHECK(d.nmi == doctest::Approx(2.0).epsilon(1e-14));

    const double pa[3] = {0.2, 0.5, 0.3};
    const double pb[3] = {0.6, 0.1, 0.3};
    std::vector<double> outer(9);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) outer[static_cast<std::size_t>(a * 3 + b)] = pa[a] * pb[b];
    const SimilarityValue o = nmi(table_histogram(3, outer));
    CHECK(o.entropy_joint == doctest::Approx(o.entropy_ref + o.entropy_mov).epsilon(1e-13));
    CHECK(o.nmi == doctest::Approx(1.0).epsilon(1e-13));

    const SimilarityValue t = nmi(table_histogram(2, {0.4, 0.1, 0.1, 0.4}));
    const double hm = -2.0 * 0.5 * std::log(0.5);
    const double hj = -2.0 * 0.4 * std::log(0.4) - 2.0 * 0.1 * std::log(0.1);
    CHECK(std::abs(t.nmi - 2.0 * hm / hj) < 1e-12);
}

TEST_CASE("nmi gradient matches central differences")
{
    const Volume ref = testing::small_phantom(16, 21);
    Volume mov = ref;
    for (std::size_t i = 0; i < mov.size(); ++i) mov[i] = 1000.0 - 0.8 * ref[i] + 0.002 * ref[i] * ref[i];

    rng::Stream rs(99, 0);
    int cases = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 8; ++trial) {
        RigidParams p;
        for (int a = 0; a < 3; ++a) {
            p.t[a] = 2.0 * (rs.uniform() - 0.5);
            p.r[a] = 0.1 * (rs.uniform() - 0.5);
        }
        auto s = default_similarity_settings(ref, mov, 16, ref.grid().center());
        s.sample_jitter = trial % 2 ? 1.0 : 0.0;
        const Selection sel = trial < 4 ? full_selection(ref.grid()) : random_selection(ref.size(), 0.3, 500 + trial);
        const SimilarityMetric metric(ref, mov, s);
        const Vec6 g = metric.evaluate(p, sel, true).gradient;
        for (int k = 0; k < 6; ++k) {
            const double h = k < 3 ? 1e-4 : 1e-5;
            Vec6 a = p.as_vector(), b = p.as_vector();
            a[k] += h;
            b[k] -= h;
            const double fd = (nmi(metric.histogram(RigidParams::from_vector(a), sel)).nmi -
                               nmi(metric.histogram(RigidParams::from_vector(b), sel)).nmi) /
                              (2.0 * h);
            worst = std::max(worst, std::abs(g[k] - fd) / std::abs(fd));
        }
        ++cases;
    }
    CHECK(cases == 8);
    CHECK(worst <= 1e-3);
}

TEST_CASE("gradient is stationary at self-alignment and points back after a shift")
{
    // Mirror-symmetric about the grid center in every axis, so NMI is even in
    // each parameter at the identity.
    Volume ref(testing::cube(16), 0.0);
    const Vec3 c = ref.grid().center();
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const Vec3 d = ref.grid().physical(i) - c;
        double v = 100.0 * std::exp(-d.cwiseQuotient(Vec3(4, 3, 2.5)).squaredNorm() / 2.0);
        for (int sx : {-1, 1})
            for (int sy : {-1, 1})
                for (int sz : {-1, 1})
                    v += 80.0 * std::exp(-(d - Vec3(3.0 * sx, 4.0 * sy, 2.0 * sz)).squaredNorm() / 4.0);
        ref[i] = v;
    }
    const auto s = default_similarity_settings(ref, ref, 32, c);
    const SimilarityMetric metric(ref, ref, s);
    const Selection all = full_selection(ref.grid());

    const Vec6 g0 = metric.evaluate(RigidParams{}, all, true).gradient;
    // Finite-difference scale per component, off the integer-offset cusps.
    const double f0 = nmi(metric.histogram(RigidParams{}, all)).nmi;
    for (int k = 0; k < 6; ++k) {
        Vec6 d = Vec6::Zero();
        d[k] = k < 3 ? 0.5 : 0.05;
        const double scale = std::abs(f0 - nmi(metric.histogram(RigidParams::from_vector(d), all)).nmi) / d[k];
        REQUIRE(scale > 0.0);
        CHECK(std::abs(g0[k]) <= 1e-4 * scale);
    }

    const RigidParams shifted{Vec3(1, 0, 0), Vec3::Zero()};
    const Vec6 g1 = metric.evaluate(shifted, all, true).gradient;
    // Profile scan oracle: NMI grows when tx moves back towards zero.
    const double at1 = nmi(metric.histogram(shifted, all)).nmi;
    const double at05 = nmi(metric.histogram(RigidParams{Vec3(0.5, 0, 0), Vec3::Zero()}, all)).nmi;
    REQUIRE(at05 > at1);
    CHECK(g1[0] < 0.0);
}

TEST_CASE("gauss-newton hessian")
{
    // Ramp in x: unit gradient everywhere, so the central voxel has g = e1.
    Volume ramp(testing::cube(5), 0.0);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = ramp.grid().physical(i).x();
    const VectorField grad = spatial_gradient(ramp);
    const auto s = default_similarity_settings(ramp, ramp, 8, ramp.grid().center());
    Selection one;
    one.indices = {ramp.grid().index(2, 2, 2)};
    const Mat6 h1 = gn_hessian(ramp, ramp, grad, RigidParams{}, one, s);
    Mat6 e11 = Mat6::Zero();
    e11(0, 0) = 1.0;
    CHECK((h1 - e11).norm() < 1e-14);

    const Volume ref = testing::small_phantom(16, 8);
    const VectorField g = spatial_gradient(ref);
    const RigidParams p{Vec3(0.4, -0.3, 0.2), Vec3(0.02, 0.03, -0.01)};
    const auto s2 = default_similarity_settings(ref, ref, 32, ref.grid().center());
    const Mat6 h = gn_hessian(ref, ref, g, p, full_selection(ref.grid()), s2);

    Mat6 oracle = Mat6::Zero();
    const Grid& gg = ref.grid();
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const Vec3 x = gg.physical(i);
        Vec3 gv;
        if (!g.interpolate(gg.continuous_index(apply(p, x, s2.center)), gv)) continue;
        const Vec6 gi = (gv.transpose() * jacobian(p, x, s2.center)).transpose();
        oracle += gi * gi.transpose();
    }
    CHECK((h - oracle).cwiseAbs().maxCoeff() <= 1e-12 * oracle.cwiseAbs().maxCoeff());
    CHECK((h - h.transpose()).norm() == 0.0);
    Eigen::SelfAdjointEigenSolver<Mat6> es(h);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("settings validation")
{
    const Volume v = testing::random_volume(testing::cube(4), 1);
    auto s = default_similarity_settings(v, v, 4);
    CHECK_THROWS_AS(SimilarityMetric(v, v, s), InvalidArgument);
    s.bins = 16;
    s.sample_jitter = 1.5;
    CHECK_THROWS_AS(SimilarityMetric(v, v, s), InvalidArgument);
    s.sample_jitter = 0.0;
    const SimilarityMetric m(v, v, s);
    CHECK_THROWS_AS(m.histogram(RigidParams{}, Selection{}), InvalidArgument);
}
