#pragma once

#include "vspf/bench.hpp"
#include "vspf/random.hpp"
#include "vspf/volume.hpp"

#include <filesystem>
#include <string>

namespace testing {

inline vspf::Grid cube(int n, double spacing = 1.0)
{
    vspf::Grid g;
    g.dims = {n, n, n};
    g.spacing = vspf::Vec3::Constant(spacing);
    return g;
}

inline vspf::Volume random_volume(const vspf::Grid& g, std::uint64_t seed, double scale = 100.0)
{
    vspf::rng::Stream s(seed, 0);
    std::vector<double> d(g.size());
    for (double& v : d) v = scale * s.uniform();
    return vspf::Volume(g, std::move(d));
}

/// Smooth phantom reference with structures, small enough for brute-force oracles.
inline vspf::Volume small_phantom(int n, std::uint64_t seed)
{
    vspf::PhantomSpec spec;
    spec.size = n;
    spec.smoothing_mm = 1.0;
    return vspf::make_phantom_reference(spec, seed);
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("vspf_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
