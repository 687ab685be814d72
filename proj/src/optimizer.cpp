#include "vspf/optimizer.hpp"

#include "vspf/random.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace vspf {

void validate(const OptimizerConfig& cfg)
{
    if (cfg.max_iters < 0) throw InvalidArgument("max_iters must be non-negative");
    if (!(cfg.shrink_threshold > 0.0 && cfg.shrink_threshold < cfg.grow_threshold &&
          cfg.grow_threshold < 1.0))
        throw InvalidArgument("ratio thresholds must satisfy 0 < shrink < grow < 1");
    if (!(cfg.min_radius > 0.0 && cfg.min_radius <= cfg.max_radius))
        throw InvalidArgument("radius bounds must be positive and ordered");
    if (!(cfg.initial_radius > 0.0)) throw InvalidArgument("initial radius must be positive");
    if (!(cfg.convergence_tol >= 0.0)) throw InvalidArgument("convergence_tol must be >= 0");
    if (cfg.tail_average < 0) throw InvalidArgument("tail_average must be non-negative");
    if (cfg.parameter_scales && !(cfg.parameter_scales->minCoeff() > 0.0))
        throw InvalidArgument("parameter scales must be positive");
}

Vec6 trust_region_step(const Mat6& curvature, const Vec6& gradient, double radius)
{
    Eigen::SelfAdjointEigenSolver<Mat6> es(0.5 * (curvature + curvature.transpose()));
    const double top = std::max(es.eigenvalues().maxCoeff(), 0.0);
    // Below this floor the free step along an eigenvector would exceed the
    // radius by 1e12 anyway.
    const double floor = 1e-12 * std::max(top, gradient.norm() / radius) + 1e-150;
    const Vec6 lam = es.eigenvalues().cwiseMax(floor);
    const Vec6 gq = es.eigenvectors().transpose() * gradient;

    auto step_norm2 = [&](double mu) {
        double s = 0.0;
        for (int k = 0; k < 6; ++k)
            if (gq[k] != 0.0) s += gq[k] * gq[k] / ((lam[k] + mu) * (lam[k] + mu));
        return s;
    };
    double mu = 0.0;
    if (step_norm2(0.0) > radius * radius) {
        // |s(mu)| is decreasing in mu; bracket then bisect on the log scale.
        double lo = 0.0;
        double hi = std::max(gradient.norm() / radius, 1e-300);
        while (step_norm2(hi) > radius * radius) hi *= 2.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = lo > 0.0 ? std::sqrt(lo * hi) : 0.5 * hi;
            (step_norm2(mid) > radius * radius ? lo : hi) = mid;
            if (hi - lo <= 1e-12 * hi) break;
        }
        mu = hi;
    }
    Vec6 s = Vec6::Zero();
    for (int k = 0; k < 6; ++k)
        if (gq[k] != 0.0) s += gq[k] / (lam[k] + mu) * es.eigenvectors().col(k);
    return s;
}

ScaleResult optimize_scale(const ScaleProblem& problem, const SamplingField& field,
                           const RigidParams& theta0, const OptimizerConfig& cfg,
                           std::uint64_t seed)
{
    validate(cfg);
    const SimilarityMetric& metric = problem.metric;
    const Grid& rg = metric.reference().grid();
    if (field.size() != rg.size()) throw InvalidArgument("sampling field does not match the reference grid");
    if (!theta0.finite()) throw InvalidArgument("non-finite initial parameters");

    Vec6 scales;
    if (cfg.parameter_scales) {
        scales = *cfg.parameter_scales;
    } else {
        const double rho = std::max(rg.bounding_radius(), 1.0);
        scales << 1.0, 1.0, 1.0, rho, rho, rho;
    }
    const Vec6 inv_scales = scales.cwiseInverse();

    ScaleResult res;
    res.theta = theta0;
    double radius = std::clamp(cfg.initial_radius, cfg.min_radius, cfg.max_radius);
    bool have_accepted_hessian = false;
    int empty_streak = 0;
    int small_steps = 0;

    std::vector<Vec6> iterates;
    Selection fixed;
    if (problem.mode == SelectionMode::FixedPerScale) fixed = sample_selection(field, rng::derive_seed(seed, 0));

    for (int n = 1; n <= cfg.max_iters; ++n) {
        res.iterations_run = n;
        Selection drawn;
        if (problem.mode == SelectionMode::PerIteration)
            drawn = sample_selection(field, rng::derive_seed(seed, static_cast<std::uint64_t>(n)));
        const Selection& sel = problem.mode == SelectionMode::PerIteration ? drawn : fixed;
        res.selections_used.push_back(sel.draw_seed);
        if (sel.empty()) {
            if (++empty_streak >= 5) throw Error("five consecutive empty voxel selections");
            continue;
        }
        empty_streak = 0;

        const auto ev = metric.evaluate(res.theta, sel, true);
        res.nmi_trace.push_back(ev.value.nmi);
        const Mat6 hess = metric.gn_hessian(problem.mov_grad, res.theta, sel, 1.0 / problem.sigma_xi2);
        if (!have_accepted_hessian) res.final_hessian = hess;

        // Gauss-Newton curvature of NMI: sum g g^T / (n * residual variance * H_joint).
        const JointHistogram& h = ev.histogram;
        const double width = (h.mov_window.hi - h.mov_window.lo) / std::max(h.bins - 1, 1);
        const double resid = std::max(conditional_variance(h), width * width / 12.0);
        const double hj = std::max(ev.value.entropy_joint, 1e-12);
        const Mat6 curvature = hess * (problem.sigma_xi2 / (h.total_weight * resid * hj));

        const Vec6 grad_s = ev.gradient.cwiseProduct(inv_scales);
        const Mat6 curv_s = inv_scales.asDiagonal() * curvature * inv_scales.asDiagonal();
        const Vec6 step_s = trust_region_step(curv_s, grad_s, radius);
        const double predicted = grad_s.dot(step_s) - 0.5 * step_s.dot(curv_s * step_s);
        const double step_norm = step_s.norm();

        const RigidParams trial =
            RigidParams::from_vector(res.theta.as_vector() + step_s.cwiseProduct(inv_scales));
        double actual = -1.0;
        if (predicted > 0.0) {
            try {
                actual = nmi(metric.histogram(trial, sel)).nmi - ev.value.nmi;
            } catch (const NoOverlapError&) {
                actual = -1.0;
            }
        }

        if (actual > 0.0) {
            res.theta = trial;
            res.final_hessian = hess;
            have_accepted_hessian = true;
            ++res.accepted_steps;
            const double ratio = actual / predicted;
            if (ratio > cfg.grow_threshold && step_norm >= 0.99 * radius)
                radius = std::min(2.0 * radius, cfg.max_radius);
            else if (ratio < cfg.shrink_threshold)
                radius = std::max(0.25 * radius, cfg.min_radius);
            small_steps = step_norm < cfg.convergence_tol ? small_steps + 1 : 0;
            if (small_steps >= 3) break;
        } else {
            radius = std::max(0.25 * radius, cfg.min_radius);
        }
        iterates.push_back(res.theta.as_vector());
    }
    if (cfg.tail_average > 0 && !iterates.empty()) {
        const std::size_t k = std::min<std::size_t>(cfg.tail_average, iterates.size());
        Vec6 mean = Vec6::Zero();
        for (std::size_t i = iterates.size() - k; i < iterates.size(); ++i) mean += iterates[i];
        res.theta = RigidParams::from_vector(mean / static_cast<double>(k));
    }
    res.final_radius = radius;
    return res;
}

ScaleResult optimize_scale(const Volume& ref, const Volume& mov, const VectorField& mov_grad,
                           const SamplingField& field, const RigidParams& theta0,
                           const OptimizerConfig& cfg, std::uint64_t seed,
                           const SimilaritySettings& settings, SelectionMode mode)
{
    const SimilarityMetric metric(ref, mov, settings);
    return optimize_scale(ScaleProblem{metric, mov_grad, 1.0, mode}, field, theta0, cfg, seed);
}

}  // namespace vspf
