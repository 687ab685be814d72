#pragma once

#include "vspf/registration.hpp"
#include "vspf/transform.hpp"
#include "vspf/volume.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace vspf {

/// One registration problem with known ground truth. `gold` maps reference
/// points to moving points about the reference grid center.
struct TrainingPair {
    Volume ref;
    Volume mov;
    RigidParams gold;
    std::vector<Vec3> voi_points;

    Vec3 center() const { return ref.grid().center(); }
};

void validate(const TrainingPair& pair);

/// |T_gold(x) - T_est(x)| per point.
std::vector<double> tre(const RigidParams& gold, const RigidParams& estimate,
                        const std::vector<Vec3>& points, const Vec3& center);

/// Mean over pairs and trials of sum_points |T_gold(x) - T_est(x)|^2 (mm^2).
/// `estimates[v][u]` is trial u on pair v.
double etre(const std::vector<TrainingPair>& pairs,
            const std::vector<std::vector<RigidParams>>& estimates);

enum class LearnedParameter { PHigh, Beta };

std::string to_string(LearnedParameter p);
LearnedParameter learned_parameter_from_string(const std::string& name);

struct LearnedEntry {
    int level = 0;
    double value = 0.0;
    std::vector<std::pair<double, double>> curve;  // (candidate, ETRE), +inf if a run threw
};

struct LearnedSchedule {
    LearnedParameter parameter = LearnedParameter::PHigh;
    double sampling_rate = 0.0;
    int levels = 0;
    std::map<int, LearnedEntry> entries;  // keyed by level

    /// Copies the learned values into a registration config.
    void apply(RegistrationConfig& cfg) const;
};

/// Registration of one training pair under a config; returns the estimate at
/// the config's stop level. Swappable so tests can plant an optimum.
using RegistrationRunner =
    std::function<RigidParams(const TrainingPair&, const RegistrationConfig&)>;

RegistrationRunner default_runner();

struct LearningOptions {
    double grid_step = 0.01;
    int trials = 3;
    int jobs = 1;
    RegistrationRunner runner;  // empty: default_runner()
};

/// Candidate grids: P_h in {step, 2 step, ..., 1}; beta in {0, step, ..., 1}.
std::vector<double> candidate_grid(LearnedParameter p, double grid_step);

/// Grid search for one level. Levels coarser than `level` must already carry
/// their values in `base_cfg`.
LearnedEntry learn_ph(const std::vector<TrainingPair>& pairs, int level,
                      const RegistrationConfig& base_cfg, const LearningOptions& opts = {});
LearnedEntry learn_beta(const std::vector<TrainingPair>& pairs, int level,
                        const RegistrationConfig& base_cfg, const LearningOptions& opts = {});

/// Learns every level from coarsest to finest, fixing each learned value
/// before moving to the next level.
LearnedSchedule learn_schedule(const std::vector<TrainingPair>& pairs, LearnedParameter p,
                               const RegistrationConfig& base_cfg,
                               const LearningOptions& opts = {});

/// Seed of trial `trial` on pair `pair` for candidate `candidate`.
std::uint64_t trial_seed(std::uint64_t base, std::size_t pair, int trial, std::size_t candidate);

}  // namespace vspf
