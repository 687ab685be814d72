#include "vspf/random.hpp"
#include "vspf/transform.hpp"

#include <Eigen/LU>

#include <doctest.h>

#include <numbers>

using namespace vspf;

namespace {

Mat36 numeric_jacobian(const RigidParams& p, const Vec3& x, const Vec3& c, double h)
{
    Mat36 j;
    for (int k = 0; k < 6; ++k) {
        Vec6 a = p.as_vector(), b = p.as_vector();
        a[k] += h;
        b[k] -= h;
        j.col(k) = (apply(RigidParams::from_vector(a), x, c) - apply(RigidParams::from_vector(b), x, c)) /
                   (2.0 * h);
    }
    return j;
}

}  // namespace

TEST_CASE("apply")
{
    const Vec3 x(3, -2, 5);
    CHECK(apply(RigidParams{}, x) == x);
    CHECK(apply(RigidParams{Vec3(1, 2, 3), Vec3::Zero()}, Vec3::Zero()) == Vec3(1, 2, 3));
    const Vec3 y = apply(RigidParams{Vec3::Zero(), Vec3(0, 0, std::numbers::pi / 2)}, Vec3(1, 0, 0));
    CHECK((y - Vec3(0, 1, 0)).norm() < 1e-12);
}

TEST_CASE("rotation about a center leaves the center fixed")
{
    const Vec3 c(10, 20, 30);
    const RigidParams p{Vec3::Zero(), Vec3(0.1, -0.2, 0.3)};
    CHECK((apply(p, c, c) - c).norm() < 1e-12);
}

TEST_CASE("rigid maps preserve distances")
{
    rng::Stream s(5, 0);
    for (int trial = 0; trial < 100; ++trial) {
        RigidParams p;
        for (int a = 0; a < 3; ++a) {
            p.t[a] = 20.0 * (s.uniform() - 0.5);
            p.r[a] = 2.0 * (s.uniform() - 0.5);
        }
        const Vec3 a(100 * s.uniform(), 100 * s.uniform(), 100 * s.uniform());
        const Vec3 b(100 * s.uniform(), 100 * s.uniform(), 100 * s.uniform());
        CHECK(std::abs((apply(p, a) - apply(p, b)).norm() - (a - b).norm()) < 1e-9);
        const Mat3 r = rotation_matrix(p.r);
        CHECK((r.transpose() * r - Mat3::Identity()).norm() < 1e-12);
        CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("jacobian")
{
    const Vec3 x(1, 0, 0);
    const Mat36 j0 = jacobian(RigidParams{}, x);
    CHECK((j0.leftCols<3>() - Mat3::Identity()).norm() == 0.0);
    const Mat36 n0 = numeric_jacobian(RigidParams{}, x, Vec3::Zero(), 1e-6);
    CHECK((j0.col(5) - Vec3(0, 1, 0)).norm() < 1e-12);
    CHECK((n0.col(5) - Vec3(0, 1, 0)).norm() < 1e-6);

    rng::Stream s(17, 0);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        RigidParams p;
        Vec3 pt, c;
        for (int a = 0; a < 3; ++a) {
            p.t[a] = 10.0 * (s.uniform() - 0.5);
            p.r[a] = 0.6 * (s.uniform() - 0.5);
            pt[a] = 100.0 * (s.uniform() - 0.5);
            c[a] = 10.0 * (s.uniform() - 0.5);
        }
        const Mat36 ja = jacobian(p, pt, c);
        CHECK((ja.leftCols<3>() - Mat3::Identity()).norm() == 0.0);
        worst = std::max(worst, (ja - numeric_jacobian(p, pt, c, 1e-6)).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("propagation to a finer grid keeps physical parameters")
{
    const RigidParams p{Vec3(2, 0, 0), Vec3::Zero()};
    CHECK(propagate_to_finer(p) == p);
    CHECK(propagate_to_finer(RigidParams{}) == RigidParams{});
    const RigidParams q{Vec3(1, -2, 3), Vec3(0.1, 0.2, -0.3)};
    CHECK(propagate_to_finer(propagate_to_finer(q)) == q);
}
