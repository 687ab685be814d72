#include "vspf/sampling.hpp"

#include "vspf/random.hpp"
#include "vspf/similarity.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace vspf {

std::string to_string(FieldKind kind)
{
    switch (kind) {
    case FieldKind::Vspf: return "vspf";
    case FieldKind::Uniform: return "uniform";
    case FieldKind::GradientMagnitude: return "gradient_magnitude";
    case FieldKind::Mixture: return "mixture";
    case FieldKind::TopK: return "topk";
    }
    return "unknown";
}

double SamplingField::expected_count() const
{
    return std::accumulate(p.begin(), p.end(), 0.0);
}

Mat6 make_spd(const Mat6& m, double floor)
{
    const Mat6 sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Mat6> es(sym);
    Vec6 ev = es.eigenvalues().cwiseMax(floor);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Mat6 spd_inverse(const Mat6& m, double relative_floor)
{
    const Mat6 sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Mat6> es(sym);
    const double top = es.eigenvalues().maxCoeff();
    if (!(top > 0.0)) throw InvalidArgument("matrix has no positive eigenvalue");
    const Vec6 inv = es.eigenvalues().cwiseMax(relative_floor * top).cwiseInverse();
    Mat6 out = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (out + out.transpose());
}

UtilityVector utilities_from_jacobians(std::span<const Vec6> g, const Mat6& covariance,
                                       double sigma_xi2)
{
    if (!(sigma_xi2 > 0.0)) throw InvalidArgument("sigma_xi2 must be positive");
    UtilityVector out;
    out.covariance = make_spd(covariance);
    out.sigma_xi2 = sigma_xi2;
    out.u.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!g[i].allFinite()) throw InvalidArgument("non-finite intensity gradient");
        const Vec6 rg = out.covariance * g[i];
        out.u[i] = rg.squaredNorm() / (g[i].dot(rg) + sigma_xi2);
    }
    return out;
}

UtilityVector compute_utilities(const VectorField& mov_grad, const RigidParams& params,
                                const Mat6& covariance, double sigma_xi2,
                                const std::vector<Vec3>& voxel_coords, const Vec3& center)
{
    const auto g = intensity_jacobians(mov_grad, params, voxel_coords, center);
    return utilities_from_jacobians(g, covariance, sigma_xi2);
}

double phi(double lambda, double a_value, std::span<const double> u, double voxel_cost,
           double p_high)
{
    double sum = 0.0;
    for (double ui : u) sum += std::clamp(a_value * (ui + lambda * voxel_cost), 0.0, p_high);
    return sum * voxel_cost;
}

namespace {

// Water-level refinement: with the active set fixed by `lambda`, the
// constraint is linear in lambda and can be solved directly.
bool refine_active_set(std::span<const double> u, double a, double c, double budget, double p_high,
                       double lambda, std::vector<double>& p, double& lambda_out)
{
    std::size_t n_sat = 0;
    std::size_t n_lin = 0;
    double sum_lin = 0.0;
    double lin_min = std::numeric_limits<double>::infinity();
    double lin_max = -std::numeric_limits<double>::infinity();
    for (double ui : u) {
        const double v = a * (ui + lambda * c);
        if (v >= p_high) ++n_sat;
        else if (v > 0.0) {
            ++n_lin;
            sum_lin += ui;
            lin_min = std::min(lin_min, ui);
            lin_max = std::max(lin_max, ui);
        }
    }
    if (n_lin == 0) return false;
    const double lin_budget = budget / c - static_cast<double>(n_sat) * p_high;
    const double lam = (lin_budget / a - sum_lin) / (c * static_cast<double>(n_lin));
    const bool flat = lin_min == lin_max;
    const double flat_value = lin_budget / static_cast<double>(n_lin);
    p.resize(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double v = a * (u[i] + lambda * c);
        if (v >= p_high) p[i] = p_high;
        else if (v <= 0.0) p[i] = 0.0;
        else p[i] = flat ? flat_value : a * (u[i] + lam * c);
        if (p[i] < 0.0 || p[i] > p_high) return false;
    }
    lambda_out = lam;
    return true;
}

double field_sum(const std::vector<double>& p, double c)
{
    return std::accumulate(p.begin(), p.end(), 0.0) * c;
}

SamplingField threshold_solution(const UtilityVector& u, double c, double c_ave, double p_high)
{
    const std::size_t n = u.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return u.u[a] > u.u[b]; });
    SamplingField f;
    f.p.assign(n, 0.0);
    double remaining = c_ave / c;
    std::size_t k = 0;
    while (k < n && remaining >= p_high) {
        f.p[order[k++]] = p_high;
        remaining -= p_high;
    }
    if (k < n && remaining > 0.0) f.p[order[k]] = remaining;
    const std::size_t threshold_voxel = std::min(k, n - 1);
    f.lambda_star = -u.u[order[threshold_voxel]] / c;
    f.a_value = std::numeric_limits<double>::infinity();
    return f;
}

}  // namespace

SamplingField solve_vspf(const UtilityVector& u, double voxel_cost, double c_ave, double p_high,
                         const VspfOptions& options)
{
    const std::size_t n = u.size();
    if (n == 0) throw InvalidArgument("empty utility vector");
    if (!(voxel_cost > 0.0)) throw InvalidArgument("voxel cost must be positive");
    if (!(c_ave > 0.0)) throw InvalidArgument("average cost must be positive");
    if (!(p_high > 0.0) || p_high > 1.0) throw InvalidArgument("p_high must lie in (0, 1]");
    const double capacity = static_cast<double>(n) * p_high * voxel_cost;
    if (c_ave > capacity * (1.0 + 1e-12))
        throw InvalidArgument("infeasible average cost: exceeds N * p_high * C");

    const double tol = 1e-9 * c_ave;
    SamplingField f;
    const auto [umin_it, umax_it] = std::minmax_element(u.u.begin(), u.u.end());
    const double umin = *umin_it;
    const double umax = *umax_it;

    if (!(umax > 0.0)) {
        const double level = c_ave / (static_cast<double>(n) * voxel_cost);
        if (level > p_high) throw InvalidArgument("infeasible uniform fallback above p_high");
        f.p.assign(n, level);
        f.a_value = 0.0;
    } else if (options.a_value && std::isinf(*options.a_value)) {
        f = threshold_solution(u, voxel_cost, c_ave, p_high);
    } else {
        double a = options.a_value ? *options.a_value : p_high / (umax + 1e-12);
        if (!(a > 0.0)) throw InvalidArgument("A must be positive");
        bool solved = false;
        for (int doubling = 0; doubling <= 60 && !solved; ++doubling, a *= 2.0) {
            double lo = -umax / voxel_cost;
            double hi = (p_high / a - umin) / voxel_cost;
            double lambda = 0.5 * (lo + hi);
            for (int it = 0; it < 200; ++it) {
                lambda = 0.5 * (lo + hi);
                const double r = phi(lambda, a, u.u, voxel_cost, p_high) - c_ave;
                if (std::abs(r) <= tol) break;
                (r < 0.0 ? lo : hi) = lambda;
            }
            std::vector<double> p(n);
            for (std::size_t i = 0; i < n; ++i)
                p[i] = std::clamp(a * (u.u[i] + lambda * voxel_cost), 0.0, p_high);
            double best = std::abs(field_sum(p, voxel_cost) - c_ave);

            std::vector<double> refined;
            double refined_lambda = lambda;
            if (refine_active_set(u.u, a, voxel_cost, c_ave, p_high, lambda, refined,
                                  refined_lambda)) {
                const double r = std::abs(field_sum(refined, voxel_cost) - c_ave);
                if (r <= best) {
                    best = r;
                    p = std::move(refined);
                    lambda = refined_lambda;
                }
            }
            if (best <= 1e-6 * c_ave) {
                f.p = std::move(p);
                f.lambda_star = lambda;
                f.a_value = a;
                solved = true;
            }
            if (options.a_value) break;
        }
        if (!solved) throw Error("could not satisfy the average cost constraint");
    }
    f.c_ave = c_ave;
    f.voxel_cost = voxel_cost;
    f.p_high = p_high;
    f.kind = FieldKind::Vspf;
    return f;
}

double cost_j(const SamplingField& field, const UtilityVector& u)
{
    if (field.size() != u.size()) throw InvalidArgument("field and utilities differ in length");
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += field.p[i] * u.u[i];
    return -s;
}

Selection sample_selection(const SamplingField& field, std::uint64_t seed)
{
    Selection sel;
    sel.draw_seed = seed;
    const std::size_t n = field.size();
    // One Philox block yields the uniforms of voxels 2b and 2b+1.
    for (std::size_t b = 0; 2 * b < n; ++b) {
        const std::size_t i0 = 2 * b;
        const std::size_t i1 = i0 + 1;
        const double p0 = field.p[i0];
        const double p1 = i1 < n ? field.p[i1] : 0.0;
        if (p0 <= 0.0 && p1 <= 0.0) continue;
        const auto words = rng::block(seed, b);
        if (p0 > 0.0 && rng::to_unit(words[0], words[1]) < p0) sel.indices.push_back(i0);
        if (p1 > 0.0 && rng::to_unit(words[2], words[3]) < p1) sel.indices.push_back(i1);
    }
    return sel;
}

SamplingField urs_field(std::size_t n, double m)
{
    if (!(m > 0.0)) throw InvalidArgument("target count must be positive");
    if (n == 0) throw InvalidArgument("empty field");
    SamplingField f;
    const double level = std::min(1.0, m / static_cast<double>(n));
    f.p.assign(n, level);
    f.c_ave = level * static_cast<double>(n);
    f.kind = FieldKind::Uniform;
    return f;
}

SamplingField gms_field(std::span<const double> grad_mag, double m)
{
    const std::size_t n = grad_mag.size();
    if (!(m > 0.0)) throw InvalidArgument("target count must be positive");
    if (m > static_cast<double>(n)) throw InvalidArgument("target count exceeds voxel count");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return grad_mag[a] > grad_mag[b]; });
    if (n == 0 || !(grad_mag[order[0]] > 0.0))
        throw InvalidArgument("all gradient magnitudes are zero");
    for (double g : grad_mag)
        if (g < 0.0 || !std::isfinite(g)) throw InvalidArgument("invalid gradient magnitude");

    // suffix[k] = sum of the magnitudes ranked k and below
    std::vector<double> suffix(n + 1, 0.0);
    for (std::size_t k = n; k-- > 0;) suffix[k] = suffix[k + 1] + grad_mag[order[k]];

    SamplingField f;
    f.p.assign(n, 0.0);
    f.kind = FieldKind::GradientMagnitude;
    std::size_t saturated = n;
    double kappa = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (!(suffix[k] > 0.0)) break;
        const double cand = (m - static_cast<double>(k)) / suffix[k];
        if (cand * grad_mag[order[k]] <= 1.0) {
            saturated = k;
            kappa = cand;
            break;
        }
    }
    if (saturated == n) {
        // Fewer informative voxels than the target: take all of them.
        for (std::size_t i = 0; i < n; ++i) f.p[i] = grad_mag[i] > 0.0 ? 1.0 : 0.0;
    } else {
        for (std::size_t k = 0; k < n; ++k)
            f.p[order[k]] = k < saturated ? 1.0 : std::min(1.0, kappa * grad_mag[order[k]]);
    }
    f.c_ave = f.expected_count();
    return f;
}

SamplingField mix_fields(const SamplingField& a, const SamplingField& b, double beta)
{
    if (a.size() != b.size()) throw InvalidArgument("mixed fields differ in length");
    if (beta < 0.0 || beta > 1.0) throw InvalidArgument("beta must lie in [0, 1]");
    if (beta == 1.0) return a;
    if (beta == 0.0) return b;
    SamplingField f;
    f.p.resize(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) f.p[i] = beta * a.p[i] + (1.0 - beta) * b.p[i];
    f.c_ave = beta * a.c_ave + (1.0 - beta) * b.c_ave;
    f.p_high = std::max(a.p_high, b.p_high);
    f.kind = FieldKind::Mixture;
    return f;
}

SamplingField topk_field(std::span<const double> scores, std::size_t m)
{
    const std::size_t n = scores.size();
    if (m < 1 || m > n) throw InvalidArgument("top-k count must lie in [1, N]");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    SamplingField f;
    f.p.assign(n, 0.0);
    for (std::size_t k = 0; k < m; ++k) f.p[order[k]] = 1.0;
    f.c_ave = static_cast<double>(m);
    f.kind = FieldKind::TopK;
    return f;
}

double heuristic_ph(int level, double m, double n_level)
{
    if (level < 1) throw InvalidArgument("pyramid levels start at 1");
    if (!(m > 0.0) || !(n_level > 0.0)) throw InvalidArgument("counts must be positive");
    const double factor = level == 1 ? 10.0 : 3.0;
    return std::min(1.0, factor * m / n_level);
}

Volume field_to_volume(const SamplingField& field, const Grid& grid)
{
    if (field.size() != grid.size()) throw InvalidArgument("field does not match grid");
    return Volume(grid, field.p);
}

}  // namespace vspf
