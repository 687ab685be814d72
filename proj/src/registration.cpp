#include "vspf/registration.hpp"

#include "vspf/random.hpp"
#include "vspf/similarity.hpp"

#include <chrono>
#include <cmath>

namespace vspf {

namespace {

constexpr std::uint64_t kPilotStream = 0x70696c6f74ULL;

struct LevelData {
    const Volume* ref;
    const Volume* mov;
    VectorField grad;
    std::vector<Vec3> coords;
};

LevelData prepare_level(const Volume& ref, const Volume& mov, double sigma_voxels)
{
    LevelData d{&ref, &mov, {}, {}};
    const double sigma = sigma_voxels * mov.grid().spacing.maxCoeff();
    d.grad = spatial_gradient(sigma > 0.0 ? gaussian_smooth(mov, sigma) : mov);
    d.coords.resize(ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) d.coords[i] = ref.grid().physical(i);
    return d;
}

std::vector<double> gradient_magnitudes(const LevelData& d, const RigidParams& theta,
                                        const Vec3& center)
{
    const RigidMap map(theta, center);
    std::vector<double> mag(d.coords.size(), 0.0);
    const Grid& mg = d.grad.grid();
    for (std::size_t i = 0; i < d.coords.size(); ++i) {
        Vec3 g;
        if (d.grad.interpolate(mg.continuous_index(map(d.coords[i])), g)) mag[i] = g.norm();
    }
    return mag;
}

double lookup(const std::map<int, double>& m, int level, double fallback)
{
    const auto it = m.find(level);
    return it == m.end() ? fallback : it->second;
}

struct FieldContext {
    const RegistrationConfig& cfg;
    const SimilarityMetric& metric;
    const LevelData& data;
    int level;
    double m;  // expected selection size M_k
    RigidParams theta;
    Vec3 center;
    std::optional<Mat6> prior_hessian;
};

Mat6 pilot_hessian(const FieldContext& c)
{
    const std::size_t n = c.data.coords.size();
    const double size = std::min<double>(
        static_cast<double>(n),
        std::max<double>(static_cast<double>(c.cfg.pilot_min), c.cfg.pilot_factor * c.m));
    const SamplingField pilot = urs_field(n, size);
    const Selection sel =
        sample_selection(pilot, rng::derive_seed(c.cfg.seed, kPilotStream, c.level));
    return c.metric.gn_hessian(c.data.grad, c.theta, sel, 1.0 / c.cfg.sigma_xi2);
}

SamplingField build_field(const FieldContext& c)
{
    const RegistrationConfig& cfg = c.cfg;
    const std::size_t n = c.data.coords.size();
    const auto top = static_cast<std::size_t>(std::max<long long>(1, std::llround(c.m)));
    switch (cfg.sampler) {
    case SamplerKind::VspfHeuristic:
    case SamplerKind::VspfLearned:
    case SamplerKind::VspfThresholded: {
        const Mat6 hess = c.prior_hessian ? *c.prior_hessian : pilot_hessian(c);
        const UtilityVector u = compute_utilities(c.data.grad, c.theta, spd_inverse(hess),
                                                  cfg.sigma_xi2, c.data.coords, c.center);
        if (cfg.sampler == SamplerKind::VspfThresholded) {
            SamplingField f = topk_field(u.u, top);
            f.kind = FieldKind::Vspf;
            return f;
        }
        double ph;
        if (cfg.sampler == SamplerKind::VspfLearned) {
            const auto it = cfg.p_high.find(c.level);
            if (it == cfg.p_high.end())
                throw InvalidArgument("vspf_learned needs p_high for level " +
                                      std::to_string(c.level));
            ph = it->second;
        } else {
            ph = lookup(cfg.p_high, c.level,
                        heuristic_ph(c.level, c.m, static_cast<double>(n)));
        }
        return solve_vspf(u, cfg.voxel_cost, c.m * cfg.voxel_cost, ph);
    }
    case SamplerKind::Urs:
    case SamplerKind::Furs:
        return urs_field(n, c.m);
    case SamplerKind::Gms:
        return gms_field(gradient_magnitudes(c.data, c.theta, c.center), c.m);
    case SamplerKind::GmsUrs: {
        const double beta = lookup(cfg.beta, c.level, 0.5);
        return mix_fields(gms_field(gradient_magnitudes(c.data, c.theta, c.center), c.m),
                          urs_field(n, c.m), beta);
    }
    case SamplerKind::Gm:
        return topk_field(gradient_magnitudes(c.data, c.theta, c.center), top);
    }
    throw InvalidArgument("unknown sampler");
}

}  // namespace

std::string to_string(SamplerKind kind)
{
    switch (kind) {
    case SamplerKind::VspfHeuristic: return "vspf_heuristic";
    case SamplerKind::VspfLearned: return "vspf_learned";
    case SamplerKind::VspfThresholded: return "vspf_thresholded";
    case SamplerKind::Urs: return "urs";
    case SamplerKind::Furs: return "furs";
    case SamplerKind::Gms: return "gms";
    case SamplerKind::GmsUrs: return "gms_urs";
    case SamplerKind::Gm: return "gm";
    }
    return "unknown";
}

SamplerKind sampler_from_string(const std::string& name)
{
    for (auto k : {SamplerKind::VspfHeuristic, SamplerKind::VspfLearned,
                   SamplerKind::VspfThresholded, SamplerKind::Urs, SamplerKind::Furs,
                   SamplerKind::Gms, SamplerKind::GmsUrs, SamplerKind::Gm})
        if (to_string(k) == name) return k;
    throw InvalidArgument("unknown sampler '" + name + "'");
}

bool uses_fixed_selection(SamplerKind kind)
{
    return kind == SamplerKind::Furs || kind == SamplerKind::Gm ||
           kind == SamplerKind::VspfThresholded;
}

void validate(const RegistrationConfig& cfg)
{
    if (cfg.levels < 1) throw InvalidArgument("levels must be >= 1");
    if (cfg.stop_level < 1 || cfg.stop_level > cfg.levels)
        throw InvalidArgument("stop_level must lie in [1, levels]");
    if (!(cfg.sampling_rate > 0.0 && cfg.sampling_rate <= 1.0))
        throw InvalidArgument("sampling_rate must lie in (0, 1]");
    if (cfg.bins < 8) throw InvalidArgument("bins must be >= 8");
    if (!(cfg.sigma_xi2 > 0.0)) throw InvalidArgument("sigma_xi2 must be positive");
    if (!(cfg.voxel_cost > 0.0)) throw InvalidArgument("voxel_cost must be positive");
    if (!(cfg.sample_jitter >= 0.0 && cfg.sample_jitter <= 1.0))
        throw InvalidArgument("sample_jitter must lie in [0, 1]");
    if (!(cfg.gradient_sigma_voxels >= 0.0))
        throw InvalidArgument("gradient_sigma_voxels must be >= 0");
    for (const auto& [level, v] : cfg.p_high)
        if (!(v > 0.0 && v <= 1.0)) throw InvalidArgument("p_high values must lie in (0, 1]");
    for (const auto& [level, v] : cfg.beta)
        if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("beta values must lie in [0, 1]");
    for (const auto& [level, o] : cfg.optimizer) validate(o);
}

OptimizerConfig optimizer_for_level(const RegistrationConfig& cfg, int level)
{
    const auto it = cfg.optimizer.find(level);
    if (it != cfg.optimizer.end()) return it->second;
    OptimizerConfig o;
    o.max_iters = level == cfg.levels && cfg.levels > 1 ? 50 : 20;
    return o;
}

RegistrationResult register_volumes(const Volume& ref, const Volume& mov,
                                    const RegistrationConfig& cfg)
{
    validate(cfg);
    const auto start = std::chrono::steady_clock::now();
    const Pyramid ref_pyr = build_pyramid(ref, cfg.levels);
    const Pyramid mov_pyr = build_pyramid(mov, cfg.levels);

    RegistrationResult out;
    out.center = ref.grid().center();
    SimilaritySettings settings = default_similarity_settings(ref, mov, cfg.bins, out.center);
    settings.sample_jitter = cfg.sample_jitter;
    const double m_total = cfg.sampling_rate * static_cast<double>(ref.size());

    RigidParams theta;
    std::optional<Mat6> hessian;
    for (int level = cfg.levels; level >= cfg.stop_level; --level) {
        const Volume& ref_k = ref_pyr.level(level);
        const Volume& mov_k = mov_pyr.level(level);
        const LevelData data = prepare_level(ref_k, mov_k, cfg.gradient_sigma_voxels);
        const SimilarityMetric metric(ref_k, mov_k, settings);
        const double m = std::min(m_total, static_cast<double>(ref_k.size()));

        const FieldContext ctx{cfg, metric, data, level, m, theta, out.center, hessian};
        SamplingField field = build_field(ctx);

        const ScaleProblem problem{metric, data.grad, cfg.sigma_xi2,
                                   uses_fixed_selection(cfg.sampler)
                                       ? SelectionMode::FixedPerScale
                                       : SelectionMode::PerIteration};
        ScaleResult sr = optimize_scale(problem, field, theta, optimizer_for_level(cfg, level),
                                        rng::derive_seed(cfg.seed, static_cast<std::uint64_t>(level)));
        theta = propagate_to_finer(sr.theta);
        hessian = sr.final_hessian;

        LevelReport rep;
        rep.level = level;
        rep.voxels = ref_k.size();
        rep.expected_selection = m;
        rep.p_high = field.p_high;
        rep.lambda_star = field.lambda_star;
        rep.scale = std::move(sr);
        out.levels.push_back(std::move(rep));
        if (cfg.keep_fields) out.fields.push_back(std::move(field));
    }
    out.theta = theta;
    if (cfg.record_timing)
        out.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

SamplingField sampling_field_at_level(const Volume& ref, const Volume& mov,
                                      const RegistrationConfig& cfg, int level,
                                      const RigidParams& theta)
{
    validate(cfg);
    if (level < 1 || level > cfg.levels) throw InvalidArgument("level out of range");
    const Pyramid ref_pyr = build_pyramid(ref, cfg.levels);
    const Pyramid mov_pyr = build_pyramid(mov, cfg.levels);
    const Vec3 center = ref.grid().center();
    SimilaritySettings settings = default_similarity_settings(ref, mov, cfg.bins, center);
    settings.sample_jitter = cfg.sample_jitter;
    const Volume& ref_k = ref_pyr.level(level);
    const LevelData data = prepare_level(ref_k, mov_pyr.level(level), cfg.gradient_sigma_voxels);
    const SimilarityMetric metric(ref_k, mov_pyr.level(level), settings);
    const double m = std::min(cfg.sampling_rate * static_cast<double>(ref.size()),
                              static_cast<double>(ref_k.size()));
    return build_field(FieldContext{cfg, metric, data, level, m, theta, center, std::nullopt});
}

}  // namespace vspf
