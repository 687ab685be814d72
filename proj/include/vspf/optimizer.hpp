#pragma once

#include "vspf/sampling.hpp"
#include "vspf/similarity.hpp"
#include "vspf/transform.hpp"
#include "vspf/volume.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace vspf {

struct OptimizerConfig {
    int max_iters = 50;
    double initial_radius = 2.0;  // scaled-parameter units (~mm)
    double min_radius = 1e-4;
    double max_radius = 10.0;
    double shrink_threshold = 0.25;
    double grow_threshold = 0.75;
    /// Multipliers turning parameters into commensurate units. Defaults to
    /// (1, 1, 1, rho, rho, rho), rho = bounding radius of the reference grid.
    std::optional<Vec6> parameter_scales;
    double convergence_tol = 1e-3;
    /// When > 0, the returned parameters are the mean of the iterates after
    /// the last `tail_average` evaluated iterations instead of the last iterate.
    int tail_average = 0;
};

void validate(const OptimizerConfig& cfg);

struct ScaleResult {
    RigidParams theta;
    Mat6 final_hessian = Mat6::Zero();
    int iterations_run = 0;
    int accepted_steps = 0;
    std::vector<double> nmi_trace;  // NMI at the start of each evaluated iteration
    std::vector<std::uint64_t> selections_used;
    double final_radius = 0.0;
};

enum class SelectionMode {
    PerIteration,  // fresh draw from the field every iteration
    FixedPerScale  // one draw reused for the whole scale
};

struct ScaleProblem {
    const SimilarityMetric& metric;
    const VectorField& mov_grad;  // gradient of the smoothed moving image
    double sigma_xi2 = 1.0;
    SelectionMode mode = SelectionMode::PerIteration;
};

/// Smallest-norm solution of the trust-region subproblem
/// max g^T s - s^T B s / 2 subject to |s| <= radius, B symmetric PSD.
Vec6 trust_region_step(const Mat6& curvature, const Vec6& gradient, double radius);

/// Trust-region Gauss-Newton ascent of NMI at one pyramid level.
ScaleResult optimize_scale(const ScaleProblem& problem, const SamplingField& field,
                           const RigidParams& theta0, const OptimizerConfig& cfg,
                           std::uint64_t seed);

/// Convenience overload building the metric from the volumes.
ScaleResult optimize_scale(const Volume& ref, const Volume& mov, const VectorField& mov_grad,
                           const SamplingField& field, const RigidParams& theta0,
                           const OptimizerConfig& cfg, std::uint64_t seed,
                           const SimilaritySettings& settings,
                           SelectionMode mode = SelectionMode::PerIteration);

}  // namespace vspf
