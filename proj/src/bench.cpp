#include "vspf/bench.hpp"

#include "vspf/random.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <ostream>
#include <thread>

namespace vspf {

namespace {

std::string fmt(const char* spec, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

struct Ellipsoid {
    Vec3 center;
    Vec3 axes;
    Mat3 rot;
    double intensity;
    double shell;  // wall thickness in mm, 0 for solid

    bool contains(const Vec3& p) const
    {
        const Vec3 q = rot.transpose() * (p - center);
        const double r = q.cwiseQuotient(axes).norm();
        if (r > 1.0) return false;
        if (shell <= 0.0) return true;
        const Vec3 inner = (axes.array() - shell).cwiseMax(0.1).matrix();
        return q.cwiseQuotient(inner).norm() > 1.0;
    }
};

}  // namespace

void validate(const PhantomSpec& spec)
{
    if (spec.size < 16) throw InvalidArgument("phantom size must be >= 16");
    if (!(spec.spacing > 0.0)) throw InvalidArgument("phantom spacing must be positive");
    if (spec.min_structures < 1 || spec.max_structures < spec.min_structures)
        throw InvalidArgument("invalid structure count range");
    if (!(spec.noise_sigma >= 0.0) || !(spec.smoothing_mm >= 0.0))
        throw InvalidArgument("noise and smoothing must be non-negative");
    if (!(spec.max_translation >= 0.0) || !(spec.max_rotation >= 0.0))
        throw InvalidArgument("gold bounds must be non-negative");
    if (spec.voi_count < 6) throw InvalidArgument("voi_count must be >= 6");
    if (spec.remap.size() < 2) throw InvalidArgument("remap needs at least two knots");
    for (std::size_t i = 1; i < spec.remap.size(); ++i)
        if (!(spec.remap[i].first > spec.remap[i - 1].first) ||
            !(spec.remap[i].second > spec.remap[i - 1].second))
            throw InvalidArgument("remap knots must be strictly increasing");
}

double apply_remap(const std::vector<std::pair<double, double>>& k, double v)
{
    if (v <= k.front().first) return k.front().second;
    if (v >= k.back().first) return k.back().second;
    const auto it = std::upper_bound(k.begin(), k.end(), v,
                                     [](double x, const auto& knot) { return x < knot.first; });
    const auto& [x1, y1] = *it;
    const auto& [x0, y0] = *(it - 1);
    return y0 + (y1 - y0) * (v - x0) / (x1 - x0);
}

Volume make_phantom_reference(const PhantomSpec& spec, std::uint64_t seed)
{
    validate(spec);
    rng::Stream s(seed, 1);
    Grid g;
    g.dims = {spec.size, spec.size, spec.size};
    g.spacing = Vec3::Constant(spec.spacing);
    const double extent = (spec.size - 1) * spec.spacing;
    const Vec3 mid = g.center();

    std::vector<Ellipsoid> shapes;
    // Outer "head" so the whole field of view carries structure.
    const Vec3 head_axes(0.40 * extent, 0.36 * extent, 0.38 * extent);
    shapes.push_back({mid, head_axes, Mat3::Identity(), 250.0, 0.0});
    shapes.push_back({mid, head_axes, Mat3::Identity(), 850.0, 0.06 * extent});

    const int span = spec.max_structures - spec.min_structures + 1;
    const int count = spec.min_structures + std::min(span - 1, static_cast<int>(s.uniform() * span));
    for (int i = 0; i < count; ++i) {
        Ellipsoid e;
        e.center = mid + Vec3(s.uniform() - 0.5, s.uniform() - 0.5, s.uniform() - 0.5)
                             .cwiseProduct(head_axes) * 0.9;
        e.axes = Vec3(s.uniform(), s.uniform(), s.uniform()) * 0.12 * extent +
                 Vec3::Constant(0.05 * extent);
        e.rot = rotation_matrix(Vec3(s.uniform(), s.uniform(), s.uniform()) * std::numbers::pi);
        e.intensity = 100.0 + 900.0 * s.uniform();
        e.shell = s.uniform() < 0.35 ? 1.5 + 2.0 * s.uniform() : 0.0;
        shapes.push_back(e);
    }

    Volume v(g, 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const Vec3 p = g.physical(i);
        for (const auto& e : shapes)
            if (e.contains(p)) v[i] = e.intensity;
    }
    return spec.smoothing_mm > 0.0 ? gaussian_smooth(v, spec.smoothing_mm) : v;
}

RigidParams draw_gold(const PhantomSpec& spec, std::uint64_t seed)
{
    rng::Stream s(seed, 2);
    RigidParams p;
    for (int k = 0; k < 3; ++k) p.t[k] = (2.0 * s.uniform() - 1.0) * spec.max_translation;
    for (int k = 0; k < 3; ++k) p.r[k] = (2.0 * s.uniform() - 1.0) * spec.max_rotation;
    return p;
}

TrainingPair make_phantom_pair(const PhantomSpec& spec, std::uint64_t seed)
{
    return make_phantom_pair(spec, seed, draw_gold(spec, seed));
}

TrainingPair make_phantom_pair(const PhantomSpec& spec, std::uint64_t seed,
                               const RigidParams& gold)
{
    validate(spec);
    if (!gold.finite()) throw InvalidArgument("non-finite gold transform");
    TrainingPair pair;
    pair.ref = make_phantom_reference(spec, seed);
    pair.gold = gold;
    const Grid& g = pair.ref.grid();
    const Vec3 center = g.center();

    // y = R (x - c) + c + t  =>  x = R^T (y - c - t) + c
    const Mat3 rt = rotation_matrix(gold.r).transpose();
    const double background = apply_remap(spec.remap, 0.0);
    std::vector<double> mov(g.size());
    rng::Stream noise(seed, 3);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec3 x = rt * (g.physical(i) - center - gold.t) + center;
        const Vec3 ci = g.continuous_index(x);
        bool inside = true;
        for (int k = 0; k < 3; ++k)
            inside = inside && ci[k] >= -1e-9 && ci[k] <= g.dims[k] - 1 + 1e-9;
        double v = inside ? apply_remap(spec.remap, sample_cubic(pair.ref, ci)) : background;
        if (spec.noise_sigma > 0.0) v += spec.noise_sigma * noise.normal();
        mov[i] = v;
    }
    pair.mov = Volume(g, std::move(mov));

    // VOI points: interior of the phantom, mapping inside the moving lattice.
    rng::Stream s(seed, 4);
    const double extent = (spec.size - 1) * spec.spacing;
    const RigidMap map(gold, center);
    int attempts = 0;
    while (static_cast<int>(pair.voi_points.size()) < spec.voi_count) {
        if (++attempts > 100000) throw Error("could not place VOI points");
        const Vec3 p = g.origin + Vec3(0.3 + 0.4 * s.uniform(), 0.3 + 0.4 * s.uniform(),
                                       0.3 + 0.4 * s.uniform()) * extent;
        const Vec3 ci = g.continuous_index(map(p));
        if ((ci.array() >= 0.0).all() && ci[0] <= g.dims[0] - 1 && ci[1] <= g.dims[1] - 1 &&
            ci[2] <= g.dims[2] - 1)
            pair.voi_points.push_back(p);
    }
    return pair;
}

void validate(const ExperimentConfig& cfg)
{
    if (cfg.samplers.empty()) throw InvalidArgument("experiment needs at least one sampler");
    for (const auto& s : cfg.samplers) sampler_from_string(s);
    if (cfg.rates.empty()) throw InvalidArgument("experiment needs at least one rate");
    for (double r : cfg.rates)
        if (!(r > 0.0 && r <= 1.0)) throw InvalidArgument("rates must lie in (0, 1]");
    if (cfg.pairs < 1) throw InvalidArgument("pairs must be >= 1");
    if (cfg.seeds.empty()) throw InvalidArgument("experiment seeds must be given explicitly");
    if (cfg.jobs < 1) throw InvalidArgument("jobs must be >= 1");
    if (!(cfg.failure_threshold_mm > 0.0))
        throw InvalidArgument("failure threshold must be positive");
    validate(cfg.phantom);
    validate(cfg.registration);
}

std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& runs,
                                    const std::vector<std::string>& samplers,
                                    const std::vector<double>& rates)
{
    std::vector<AggregateRow> rows;
    for (const auto& s : samplers) {
        for (double r : rates) {
            AggregateRow row;
            row.sampler = s;
            row.rate = r;
            double tre_sum = 0.0;
            double time_sum = 0.0;
            for (const auto& run : runs) {
                if (run.sampler != s || run.rate != r) continue;
                ++row.runs;
                time_sum += run.wall_time_s;
                if (run.failed)
                    ++row.failures;
                else
                    tre_sum += run.mean_tre_mm;
            }
            const int ok = row.runs - row.failures;
            row.failure_rate = row.runs > 0 ? static_cast<double>(row.failures) / row.runs : 0.0;
            row.mtre_mm = ok > 0 ? tre_sum / ok : std::nan("");
            row.mean_time_s = row.runs > 0 ? time_sum / row.runs : 0.0;
            rows.push_back(row);
        }
    }
    return rows;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg)
{
    validate(cfg);
    std::vector<TrainingPair> pairs;
    pairs.reserve(cfg.pairs);
    for (int p = 0; p < cfg.pairs; ++p)
        pairs.push_back(make_phantom_pair(cfg.phantom,
                                          rng::derive_seed(cfg.phantom_seed, static_cast<std::uint64_t>(p))));
    return run_experiment(cfg, pairs);
}

ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                const std::vector<TrainingPair>& pairs)
{
    validate(cfg);
    if (static_cast<int>(pairs.size()) != cfg.pairs)
        throw InvalidArgument("pair count does not match the experiment config");

    ExperimentReport report;
    report.config = cfg;
    for (int p = 0; p < cfg.pairs; ++p)
        for (const auto& s : cfg.samplers)
            for (double r : cfg.rates)
                for (auto seed : cfg.seeds) {
                    RunRecord rec;
                    rec.sampler = s;
                    rec.rate = r;
                    rec.pair_id = p;
                    rec.seed = seed;
                    report.runs.push_back(rec);
                }

    auto work = [&](RunRecord& rec) {
        const TrainingPair& pair = pairs[rec.pair_id];
        RegistrationConfig rc = cfg.registration;
        rc.sampler = sampler_from_string(rec.sampler);
        rc.sampling_rate = rec.rate;
        rc.seed = rec.seed;
        try {
            const RegistrationResult res = register_volumes(pair.ref, pair.mov, rc);
            rec.estimate = res.theta;
            rec.wall_time_s = res.wall_time_s;
            rec.tre_mm = tre(pair.gold, res.theta, pair.voi_points, pair.center());
            rec.max_tre_mm = *std::max_element(rec.tre_mm.begin(), rec.tre_mm.end());
            double sum = 0.0;
            for (double t : rec.tre_mm) sum += t;
            rec.mean_tre_mm = sum / static_cast<double>(rec.tre_mm.size());
            rec.failed = rec.max_tre_mm > cfg.failure_threshold_mm;
        } catch (const Error& e) {
            rec.failed = true;
            rec.error = e.what();
            rec.max_tre_mm = rec.mean_tre_mm = std::numeric_limits<double>::infinity();
        }
    };

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < report.runs.size(); i = next++) work(report.runs[i]);
    };
    const int jobs = std::min<int>(cfg.jobs, static_cast<int>(report.runs.size()));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int j = 0; j < jobs; ++j) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    report.summary = aggregate(report.runs, cfg.samplers, cfg.rates);
    return report;
}

void write_runs_csv(const ExperimentReport& report, std::ostream& out)
{
    out << "sampler,rate,pair_id,seed,failed,max_tre_mm,mean_tre_mm,wall_time_s\n";
    for (const auto& r : report.runs)
        out << r.sampler << ',' << fmt("%.6g", r.rate) << ',' << r.pair_id << ',' << r.seed << ','
            << (r.failed ? 1 : 0) << ',' << fmt("%.6f", r.max_tre_mm) << ','
            << fmt("%.6f", r.mean_tre_mm) << ',' << fmt("%.6f", r.wall_time_s) << '\n';
}

void write_summary_csv(const ExperimentReport& report, std::ostream& out)
{
    out << "sampler,rate,failure_rate,mtre_mm,mean_time_s\n";
    for (const auto& r : report.summary)
        out << r.sampler << ',' << fmt("%.6g", r.rate) << ',' << fmt("%.6f", r.failure_rate)
            << ',' << fmt("%.6f", r.mtre_mm) << ',' << fmt("%.6f", r.mean_time_s) << '\n';
}

}  // namespace vspf
