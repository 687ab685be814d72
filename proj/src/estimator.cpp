#include "vspf/estimator.hpp"

#include "vspf/random.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace vspf {

void validate(const LinearGaussianModel& model)
{
    if (!(model.sigma_xi2 > 0.0)) throw InvalidArgument("sigma_xi2 must be positive");
    if (!model.covariance.allFinite() || !model.mu.allFinite())
        throw InvalidArgument("model has non-finite entries");
    if (!model.covariance.isApprox(model.covariance.transpose(), 1e-12))
        throw InvalidArgument("prior covariance must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat6> es(model.covariance);
    if (es.eigenvalues().minCoeff() <= 0.0)
        throw InvalidArgument("prior covariance must be positive definite");
    for (const auto& g : model.g)
        if (!g.allFinite()) throw InvalidArgument("model has non-finite entries");
}

Mat6 predicted_error_covariance(const LinearGaussianModel& model, std::span<const double> p)
{
    if (p.size() != model.g.size()) throw InvalidArgument("probability vector length mismatch");
    const Mat6& r = model.covariance;
    Mat6 out = r;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0 || p[i] > 1.0) throw InvalidArgument("probabilities must lie in [0, 1]");
        if (p[i] == 0.0) continue;
        const Vec6 rg = r * model.g[i];
        out.noalias() -= p[i] / (model.g[i].dot(rg) + model.sigma_xi2) * rg * rg.transpose();
    }
    return 0.5 * (out + out.transpose());
}

double simulate_estimation_error(const LinearGaussianModel& model, std::span<const double> p,
                                 std::size_t draws, std::uint64_t seed, EstimatorForm form)
{
    validate(model);
    const std::size_t n = model.g.size();
    if (p.size() != n) throw InvalidArgument("probability vector length mismatch");
    if (draws == 0) throw InvalidArgument("need at least one draw");

    const Mat6& r = model.covariance;
    const Mat6 chol = Eigen::LLT<Mat6>(r).matrixL();
    const double noise_sd = std::sqrt(model.sigma_xi2);

    std::vector<Vec6> gain(n);  // R g_i / (g_i^T R g_i + sigma^2)
    for (std::size_t i = 0; i < n; ++i) {
        const Vec6 rg = r * model.g[i];
        gain[i] = rg / (model.g[i].dot(rg) + model.sigma_xi2);
    }

    double total = 0.0;
    std::vector<std::size_t> chosen;
    std::vector<double> innovation;
    for (std::size_t d = 0; d < draws; ++d) {
        rng::Stream stream(seed, d);
        Vec6 z;
        for (int k = 0; k < 6; ++k) z[k] = stream.normal();
        const Vec6 dtheta = chol * z;  // theta - mu

        chosen.clear();
        innovation.clear();
        for (std::size_t i = 0; i < n; ++i) {
            const double xi = noise_sd * stream.normal();
            const bool selected = stream.uniform() < p[i];
            if (!selected) continue;
            chosen.push_back(i);
            innovation.push_back(model.g[i].dot(dtheta) + xi);  // V_i - E{V_i}
        }

        Vec6 estimate = Vec6::Zero();  // theta_hat - mu
        if (form == EstimatorForm::Diagonal) {
            for (std::size_t c = 0; c < chosen.size(); ++c) estimate += gain[chosen[c]] * innovation[c];
        } else if (!chosen.empty()) {
            const auto m = static_cast<Eigen::Index>(chosen.size());
            Eigen::MatrixXd gd(m, 6);
            Eigen::VectorXd v(m);
            for (Eigen::Index c = 0; c < m; ++c) {
                gd.row(c) = model.g[chosen[static_cast<std::size_t>(c)]].transpose();
                v[c] = innovation[static_cast<std::size_t>(c)];
            }
            Eigen::MatrixXd cov_vv = gd * r * gd.transpose();
            cov_vv.diagonal().array() += model.sigma_xi2;
            estimate = r * gd.transpose() * cov_vv.ldlt().solve(v);
        }
        total += (dtheta - estimate).squaredNorm();
    }
    return total / static_cast<double>(draws);
}

}  // namespace vspf
