#pragma once

#include "vspf/transform.hpp"
#include "vspf/types.hpp"
#include "vspf/volume.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vspf {

/// Per-voxel utility U_i = |R g_i|^2 / (g_i^T R g_i + sigma_xi2), together
/// with the covariance it was computed from.
struct UtilityVector {
    std::vector<double> u;
    Mat6 covariance = Mat6::Identity();
    double sigma_xi2 = 1.0;

    std::size_t size() const { return u.size(); }
};

enum class FieldKind { Vspf, Uniform, GradientMagnitude, Mixture, TopK };

std::string to_string(FieldKind kind);

/// Voxel sampling probability field.
struct SamplingField {
    std::vector<double> p;
    double c_ave = 0.0;       // target average cost, sum p_i * voxel_cost
    double voxel_cost = 1.0;
    double p_high = 1.0;
    double lambda_star = 0.0;
    double a_value = 0.0;     // +inf in threshold mode
    FieldKind kind = FieldKind::Vspf;

    std::size_t size() const { return p.size(); }
    /// Expected selection size, sum of p.
    double expected_count() const;
};

/// Symmetrizes and floors the eigenvalues at `floor` (absolute).
Mat6 make_spd(const Mat6& m, double floor = 1e-12);

/// Inverse via eigendecomposition with eigenvalues floored at
/// `relative_floor * max eigenvalue`.
Mat6 spd_inverse(const Mat6& m, double relative_floor = 1e-10);

UtilityVector utilities_from_jacobians(std::span<const Vec6> g, const Mat6& covariance,
                                       double sigma_xi2);

/// Utilities of voxels at `voxel_coords` (reference frame, mm), linearized at
/// `params`. Voxels mapping outside the gradient field get U_i = 0.
UtilityVector compute_utilities(const VectorField& mov_grad, const RigidParams& params,
                                const Mat6& covariance, double sigma_xi2,
                                const std::vector<Vec3>& voxel_coords,
                                const Vec3& center = Vec3::Zero());

struct VspfOptions {
    /// Fixes A instead of applying the minimal-A rule; +inf selects the
    /// thresholded limit.
    std::optional<double> a_value;
};

/// Solves for p_i = clamp(A (U_i + lambda C), 0, p_high) with
/// sum_i p_i C = c_ave.
SamplingField solve_vspf(const UtilityVector& u, double voxel_cost, double c_ave, double p_high,
                         const VspfOptions& options = {});

/// Constraint left-hand side sum_i clamp(A (U_i + lambda C), 0, p_high) C.
double phi(double lambda, double a_value, std::span<const double> u, double voxel_cost,
           double p_high);

/// Lagrangian objective at a solution, -sum_i p_i U_i.
double cost_j(const SamplingField& field, const UtilityVector& u);

/// Independent Bernoulli(p_i) draw per voxel, keyed by (seed, voxel index).
Selection sample_selection(const SamplingField& field, std::uint64_t seed);

SamplingField urs_field(std::size_t n, double m);
/// p_i = min(1, kappa * grad_mag_i) with sum p_i = m (water-filling).
SamplingField gms_field(std::span<const double> grad_mag, double m);
SamplingField mix_fields(const SamplingField& a, const SamplingField& b, double beta);
/// p_i = 1 on the m largest scores, lower index first among ties.
SamplingField topk_field(std::span<const double> scores, std::size_t m);

/// P_h schedule: min(1, 10 m / n) at the finest level, min(1, 3 m / n) on
/// every coarser level.
double heuristic_ph(int level, double m, double n_level);

/// Probability field laid out on a grid, for visualization.
Volume field_to_volume(const SamplingField& field, const Grid& grid);

}  // namespace vspf
