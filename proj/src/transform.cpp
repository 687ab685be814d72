#include "vspf/transform.hpp"

#include <cmath>

namespace vspf {

namespace {

struct AxisRotations {
    Mat3 x, y, z;    // elementary rotations
    Mat3 dx, dy, dz; // their derivatives with respect to the angle
};

AxisRotations axis_rotations(const Vec3& r)
{
    const double cx = std::cos(r.x()), sx = std::sin(r.x());
    const double cy = std::cos(r.y()), sy = std::sin(r.y());
    const double cz = std::cos(r.z()), sz = std::sin(r.z());
    AxisRotations a;
    a.x << 1, 0, 0, 0, cx, -sx, 0, sx, cx;
    a.y << cy, 0, sy, 0, 1, 0, -sy, 0, cy;
    a.z << cz, -sz, 0, sz, cz, 0, 0, 0, 1;
    a.dx << 0, 0, 0, 0, -sx, -cx, 0, cx, -sx;
    a.dy << -sy, 0, cy, 0, 0, 0, -cy, 0, -sy;
    a.dz << -sz, -cz, 0, cz, -sz, 0, 0, 0, 0;
    return a;
}

}  // namespace

Mat3 rotation_matrix(const Vec3& r)
{
    const auto a = axis_rotations(r);
    return a.z * a.y * a.x;
}

RigidMap::RigidMap(const RigidParams& params, const Vec3& center) : t_(params.t), center_(center)
{
    const auto a = axis_rotations(params.r);
    rot_ = a.z * a.y * a.x;
    drot_[0] = a.z * a.y * a.dx;
    drot_[1] = a.z * a.dy * a.x;
    drot_[2] = a.dz * a.y * a.x;
}

Mat36 RigidMap::jacobian(const Vec3& point) const
{
    const Vec3 p = point - center_;
    Mat36 j;
    j.leftCols<3>().setIdentity();
    for (int k = 0; k < 3; ++k) j.col(3 + k) = drot_[k] * p;
    return j;
}

Vec3 apply(const RigidParams& params, const Vec3& point, const Vec3& center)
{
    return RigidMap(params, center)(point);
}

Mat36 jacobian(const RigidParams& params, const Vec3& point, const Vec3& center)
{
    return RigidMap(params, center).jacobian(point);
}

RigidParams propagate_to_finer(const RigidParams& params)
{
    if (!params.finite()) throw InvalidArgument("non-finite rigid parameters");
    return params;
}

}  // namespace vspf
