#include "vspf/learning.hpp"

#include "vspf/random.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace vspf {

void validate(const TrainingPair& pair)
{
    if (pair.ref.size() == 0 || pair.mov.size() == 0)
        throw InvalidArgument("training pair has an empty volume");
    if (!pair.gold.finite()) throw InvalidArgument("training pair gold is not finite");
    if (pair.voi_points.size() < 6) throw InvalidArgument("training pair needs at least 6 VOI points");
}

std::vector<double> tre(const RigidParams& gold, const RigidParams& estimate,
                        const std::vector<Vec3>& points, const Vec3& center)
{
    const RigidMap a(gold, center);
    const RigidMap b(estimate, center);
    std::vector<double> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back((a(p) - b(p)).norm());
    return out;
}

double etre(const std::vector<TrainingPair>& pairs,
            const std::vector<std::vector<RigidParams>>& estimates)
{
    if (pairs.empty()) throw InvalidArgument("etre needs at least one pair");
    if (estimates.size() != pairs.size())
        throw InvalidArgument("etre needs one estimate list per pair");
    double total = 0.0;
    for (std::size_t v = 0; v < pairs.size(); ++v) {
        if (estimates[v].empty()) throw InvalidArgument("etre needs at least one trial per pair");
        const Vec3 c = pairs[v].center();
        const RigidMap gold(pairs[v].gold, c);
        double pair_sum = 0.0;
        for (const auto& est : estimates[v]) {
            const RigidMap e(est, c);
            for (const auto& x : pairs[v].voi_points) pair_sum += (gold(x) - e(x)).squaredNorm();
        }
        total += pair_sum / static_cast<double>(estimates[v].size());
    }
    return total / static_cast<double>(pairs.size());
}

std::string to_string(LearnedParameter p)
{
    return p == LearnedParameter::PHigh ? "p_high" : "beta";
}

LearnedParameter learned_parameter_from_string(const std::string& name)
{
    if (name == "p_high" || name == "ph") return LearnedParameter::PHigh;
    if (name == "beta") return LearnedParameter::Beta;
    throw InvalidArgument("unknown learned parameter '" + name + "'");
}

void LearnedSchedule::apply(RegistrationConfig& cfg) const
{
    for (const auto& [level, e] : entries) {
        if (parameter == LearnedParameter::PHigh)
            cfg.p_high[level] = e.value;
        else
            cfg.beta[level] = e.value;
    }
    cfg.sampler = parameter == LearnedParameter::PHigh ? SamplerKind::VspfLearned
                                                       : SamplerKind::GmsUrs;
}

RegistrationRunner default_runner()
{
    return [](const TrainingPair& pair, const RegistrationConfig& cfg) {
        return register_volumes(pair.ref, pair.mov, cfg).theta;
    };
}

std::vector<double> candidate_grid(LearnedParameter p, double grid_step)
{
    if (!(grid_step > 0.0 && grid_step <= 1.0)) throw InvalidArgument("grid_step must lie in (0, 1]");
    const double steps = 1.0 / grid_step;
    const auto count = static_cast<long long>(std::llround(steps));
    std::vector<double> out;
    if (std::abs(steps - static_cast<double>(count)) < 1e-9 * steps) {
        // Divide instead of multiply so grid points land on the nearest doubles (0.3, not 0.30000000000000004).
        for (long long i = p == LearnedParameter::Beta ? 0 : 1; i <= count; ++i)
            out.push_back(static_cast<double>(i) / static_cast<double>(count));
    } else {
        for (long long i = p == LearnedParameter::Beta ? 0 : 1; i * grid_step <= 1.0 + 1e-12; ++i)
            out.push_back(std::min(1.0, static_cast<double>(i) * grid_step));
    }
    return out;
}

std::uint64_t trial_seed(std::uint64_t base, std::size_t pair, int trial, std::size_t candidate)
{
    return rng::derive_seed(rng::derive_seed(base, pair, static_cast<std::uint64_t>(trial)),
                            candidate, 0x6c6561726eULL);
}

namespace {

LearnedEntry grid_search(const std::vector<TrainingPair>& pairs, int level,
                         const RegistrationConfig& base_cfg, const LearningOptions& opts,
                         LearnedParameter param)
{
    if (pairs.empty()) throw InvalidArgument("learning needs at least one training pair");
    for (const auto& p : pairs) validate(p);
    if (opts.trials < 1) throw InvalidArgument("trials must be >= 1");
    if (opts.jobs < 1) throw InvalidArgument("jobs must be >= 1");
    if (level < 1 || level > base_cfg.levels) throw InvalidArgument("level out of range");
    if (param == LearnedParameter::PHigh) {
        for (int k = base_cfg.levels; k > level; --k)
            if (!base_cfg.p_high.count(k))
                throw InvalidArgument("coarser level " + std::to_string(k) + " has no learned p_high");
    }

    const std::vector<double> grid = candidate_grid(param, opts.grid_step);
    const RegistrationRunner run = opts.runner ? opts.runner : default_runner();
    const std::size_t n_pairs = pairs.size();
    const auto n_trials = static_cast<std::size_t>(opts.trials);

    // One job per (candidate, pair, trial); results land in fixed slots.
    struct Slot {
        RigidParams estimate;
        bool threw = false;
    };
    std::vector<Slot> slots(grid.size() * n_pairs * n_trials);
    auto work = [&](std::size_t job) {
        const std::size_t c = job / (n_pairs * n_trials);
        const std::size_t v = (job / n_trials) % n_pairs;
        const int u = static_cast<int>(job % n_trials);
        RegistrationConfig cfg = base_cfg;
        cfg.stop_level = level;
        cfg.seed = trial_seed(base_cfg.seed, v, u, c);
        if (param == LearnedParameter::PHigh) {
            cfg.sampler = SamplerKind::VspfLearned;
            cfg.p_high[level] = grid[c];
        } else {
            cfg.sampler = SamplerKind::GmsUrs;
            cfg.beta[level] = grid[c];
        }
        try {
            slots[job].estimate = run(pairs[v], cfg);
            slots[job].threw = !slots[job].estimate.finite();
        } catch (const Error&) {
            slots[job].threw = true;
        }
    };

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t j = next++; j < slots.size(); j = next++) work(j);
    };
    const int jobs = std::min<int>(opts.jobs, static_cast<int>(slots.size()));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int j = 0; j < jobs; ++j) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    LearnedEntry entry;
    entry.level = level;
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    for (std::size_t c = 0; c < grid.size(); ++c) {
        std::vector<std::vector<RigidParams>> est(n_pairs);
        bool threw = false;
        for (std::size_t v = 0; v < n_pairs; ++v)
            for (std::size_t u = 0; u < n_trials; ++u) {
                const Slot& s = slots[(c * n_pairs + v) * n_trials + u];
                threw = threw || s.threw;
                est[v].push_back(s.estimate);
            }
        const double q = threw ? std::numeric_limits<double>::infinity() : etre(pairs, est);
        entry.curve.emplace_back(grid[c], q);
        if (q < best) {  // strict: ties keep the smaller candidate
            best = q;
            entry.value = grid[c];
            found = true;
        }
    }
    if (!found) throw Error("every candidate failed at level " + std::to_string(level));
    return entry;
}

}  // namespace

LearnedEntry learn_ph(const std::vector<TrainingPair>& pairs, int level,
                      const RegistrationConfig& base_cfg, const LearningOptions& opts)
{
    return grid_search(pairs, level, base_cfg, opts, LearnedParameter::PHigh);
}

LearnedEntry learn_beta(const std::vector<TrainingPair>& pairs, int level,
                        const RegistrationConfig& base_cfg, const LearningOptions& opts)
{
    return grid_search(pairs, level, base_cfg, opts, LearnedParameter::Beta);
}

LearnedSchedule learn_schedule(const std::vector<TrainingPair>& pairs, LearnedParameter p,
                               const RegistrationConfig& base_cfg, const LearningOptions& opts)
{
    validate(base_cfg);
    LearnedSchedule sched;
    sched.parameter = p;
    sched.sampling_rate = base_cfg.sampling_rate;
    sched.levels = base_cfg.levels;
    RegistrationConfig cfg = base_cfg;
    for (int level = base_cfg.levels; level >= base_cfg.stop_level; --level) {
        LearnedEntry e = p == LearnedParameter::PHigh ? learn_ph(pairs, level, cfg, opts)
                                                      : learn_beta(pairs, level, cfg, opts);
        if (p == LearnedParameter::PHigh)
            cfg.p_high[level] = e.value;
        else
            cfg.beta[level] = e.value;
        sched.entries[level] = std::move(e);
    }
    return sched;
}

}  // namespace vspf
