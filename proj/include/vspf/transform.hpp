#pragma once

#include "vspf/types.hpp"

#include <array>

namespace vspf {

/// Rigid-body parameters: translation in mm, rotations in radians about the
/// x, y and z axes, composed as R = Rz * Ry * Rx.
struct RigidParams {
    Vec3 t = Vec3::Zero();
    Vec3 r = Vec3::Zero();

    Vec6 as_vector() const
    {
        Vec6 v;
        v << t, r;
        return v;
    }
    static RigidParams from_vector(const Vec6& v)
    {
        return {v.head<3>(), v.tail<3>()};
    }
    std::array<double, 6> as_array() const { return {t.x(), t.y(), t.z(), r.x(), r.y(), r.z()}; }
    static RigidParams from_array(const std::array<double, 6>& a)
    {
        return {Vec3(a[0], a[1], a[2]), Vec3(a[3], a[4], a[5])};
    }
    bool finite() const { return t.allFinite() && r.allFinite(); }

    bool operator==(const RigidParams& o) const { return t == o.t && r == o.r; }
};

Mat3 rotation_matrix(const Vec3& r);

/// x -> R (x - center) + center + t. With the default center this is R x + t.
Vec3 apply(const RigidParams& params, const Vec3& point, const Vec3& center = Vec3::Zero());

/// d(apply)/d(params) at `point`; columns are (tx, ty, tz, rx, ry, rz).
Mat36 jacobian(const RigidParams& params, const Vec3& point, const Vec3& center = Vec3::Zero());

/// Hand-off between pyramid levels. Parameters are in physical units, so the
/// mapping is the identity.
RigidParams propagate_to_finer(const RigidParams& params);

/// Precomputed rotation and its partials for evaluating many points.
class RigidMap {
public:
    explicit RigidMap(const RigidParams& params, const Vec3& center = Vec3::Zero());

    Vec3 operator()(const Vec3& point) const { return rot_ * (point - center_) + center_ + t_; }
    Mat36 jacobian(const Vec3& point) const;
    const Mat3& rotation() const { return rot_; }

private:
    Mat3 rot_;
    std::array<Mat3, 3> drot_;
    Vec3 t_;
    Vec3 center_;
};

}  // namespace vspf
