#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace vspf {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat36 = Eigen::Matrix<double, 3, 6>;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unreadable files, failed writes.
class IoError : public Error {
public:
    using Error::Error;
};

/// Precondition violations on arguments.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// The transformed moving image no longer overlaps the sampled reference voxels.
class NoOverlapError : public Error {
public:
    using Error::Error;
};

/// One realized voxel subset, as linear indices into the reference grid.
struct Selection {
    std::vector<std::size_t> indices;  // strictly increasing
    std::uint64_t draw_seed = 0;

    std::size_t size() const { return indices.size(); }
    bool empty() const { return indices.empty(); }
};

}  // namespace vspf
