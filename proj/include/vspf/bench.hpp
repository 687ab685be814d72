#pragma once

#include "vspf/learning.hpp"
#include "vspf/registration.hpp"
#include "vspf/transform.hpp"
#include "vspf/volume.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace vspf {

struct PhantomSpec {
    int size = 64;
    double spacing = 1.0;
    int min_structures = 6;
    int max_structures = 12;
    double smoothing_mm = 1.0;
    double noise_sigma = 5.0;
    double max_translation = 10.0;  // mm, per axis
    double max_rotation = 0.17;     // rad, per axis
    int voi_count = 8;
    /// Monotone piecewise-linear intensity remap applied to the moving image,
    /// as (input, output) knots with increasing inputs.
    std::vector<std::pair<double, double>> remap{
        {0.0, 40.0}, {250.0, 520.0}, {600.0, 700.0}, {1000.0, 1000.0}};
};

void validate(const PhantomSpec& spec);

double apply_remap(const std::vector<std::pair<double, double>>& knots, double v);

/// Reference phantom: a head-like outer ellipsoid with seeded inner
/// ellipsoids and shells, smoothed.
Volume make_phantom_reference(const PhantomSpec& spec, std::uint64_t seed);

/// Draws a gold transform inside the spec bounds.
RigidParams draw_gold(const PhantomSpec& spec, std::uint64_t seed);

/// Moving image: remapped reference resampled at gold^-1(y), plus noise.
TrainingPair make_phantom_pair(const PhantomSpec& spec, std::uint64_t seed);
TrainingPair make_phantom_pair(const PhantomSpec& spec, std::uint64_t seed,
                               const RigidParams& gold);

struct RunRecord {
    std::string sampler;
    double rate = 0.0;
    int pair_id = 0;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;  // set when the registration threw
    std::vector<double> tre_mm;
    double max_tre_mm = 0.0;
    double mean_tre_mm = 0.0;
    double wall_time_s = 0.0;
    RigidParams estimate;
};

struct AggregateRow {
    std::string sampler;
    double rate = 0.0;
    int runs = 0;
    int failures = 0;
    double failure_rate = 0.0;
    double mtre_mm = 0.0;  // NaN when every run failed
    double mean_time_s = 0.0;
};

struct ExperimentConfig {
    std::vector<std::string> samplers;
    std::vector<double> rates;
    int pairs = 10;
    std::vector<std::uint64_t> seeds;
    std::uint64_t phantom_seed = 1000;
    PhantomSpec phantom;
    RegistrationConfig registration;
    double failure_threshold_mm = 10.0;
    int jobs = 1;
};

void validate(const ExperimentConfig& cfg);

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<RunRecord> runs;  // ordered by (pair, sampler, rate, seed)
    std::vector<AggregateRow> summary;  // ordered by (sampler, rate)
};

std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& runs,
                                    const std::vector<std::string>& samplers,
                                    const std::vector<double>& rates);

/// Runs every (pair, sampler, rate, seed) combination. `pairs` may be given
/// to skip phantom generation.
ExperimentReport run_experiment(const ExperimentConfig& cfg);
ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                const std::vector<TrainingPair>& pairs);

void write_runs_csv(const ExperimentReport& report, std::ostream& out);
void write_summary_csv(const ExperimentReport& report, std::ostream& out);

}  // namespace vspf
