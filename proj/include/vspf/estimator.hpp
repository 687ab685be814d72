#pragma once

#include "vspf/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace vspf {

/// Linearized observation model V_i = mu_i + g_i^T (theta - mu) + xi_i with
/// theta ~ N(mu, R) and independent xi_i ~ N(0, sigma_xi2).
struct LinearGaussianModel {
    Vec6 mu = Vec6::Zero();
    Mat6 covariance = Mat6::Identity();
    std::vector<Vec6> g;
    double sigma_xi2 = 1.0;
};

void validate(const LinearGaussianModel& model);

/// R - sum_i p_i (R g_i)(R g_i)^T / (g_i^T R g_i + sigma_xi2).
Mat6 predicted_error_covariance(const LinearGaussianModel& model, std::span<const double> p);

enum class EstimatorForm {
    Diagonal,  // treats the selected observations as uncorrelated
    Full       // exact conditional mean given the selected observations
};

/// Monte-Carlo mean of |theta - theta_hat|^2 over `draws` simulated
/// (theta, noise, selection) triples. Draw d uses its own counter stream, so
/// the result depends only on the seed.
double simulate_estimation_error(const LinearGaussianModel& model, std::span<const double> p,
                                 std::size_t draws, std::uint64_t seed,
                                 EstimatorForm form = EstimatorForm::Diagonal);

}  // namespace vspf
