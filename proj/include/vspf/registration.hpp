#pragma once

#include "vspf/optimizer.hpp"
#include "vspf/sampling.hpp"
#include "vspf/transform.hpp"
#include "vspf/volume.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vspf {

enum class SamplerKind {
    VspfHeuristic,
    VspfLearned,
    VspfThresholded,
    Urs,
    Furs,
    Gms,
    GmsUrs,
    Gm
};

std::string to_string(SamplerKind kind);
/// Accepts the names printed by to_string (vspf_heuristic, urs, gms_urs, ...).
SamplerKind sampler_from_string(const std::string& name);
/// Samplers that draw one subset per scale and keep it.
bool uses_fixed_selection(SamplerKind kind);

struct RegistrationConfig {
    int levels = 2;
    SamplerKind sampler = SamplerKind::VspfHeuristic;
    double sampling_rate = 0.01;  // of the finest-level voxel count
    int bins = 32;
    std::uint64_t seed = 1;
    double sigma_xi2 = 1.0;
    double voxel_cost = 1.0;
    /// Smoothing applied before taking the moving-image gradient, in voxels
    /// of the current level.
    double gradient_sigma_voxels = 1.0;
    /// Sub-voxel sample offset width, in voxels (see SimilaritySettings).
    double sample_jitter = 1.0;
    /// Per-level overrides, keyed by level (1 = finest).
    std::map<int, double> p_high;
    std::map<int, double> beta;
    std::map<int, OptimizerConfig> optimizer;
    /// Finest level processed; lets the learning loop stop at a coarse level.
    int stop_level = 1;
    /// Pilot subset size for the coarsest-level Hessian is
    /// max(pilot_min, pilot_factor * M), capped at the level size.
    std::size_t pilot_min = 2000;
    double pilot_factor = 10.0;
    bool record_timing = false;
    bool keep_fields = false;
};

void validate(const RegistrationConfig& cfg);

/// Optimizer settings for a level: explicit entry if present, otherwise the
/// defaults with 50 iterations on the coarsest level and 20 elsewhere.
OptimizerConfig optimizer_for_level(const RegistrationConfig& cfg, int level);

struct LevelReport {
    int level = 0;
    std::size_t voxels = 0;
    double expected_selection = 0.0;  // M_k
    double p_high = 1.0;
    double lambda_star = 0.0;
    ScaleResult scale;
};

struct RegistrationResult {
    RigidParams theta;
    Vec3 center = Vec3::Zero();
    std::vector<LevelReport> levels;  // in processing order, coarse to fine
    std::vector<SamplingField> fields;  // filled when keep_fields is set
    double wall_time_s = 0.0;
};

RegistrationResult register_volumes(const Volume& ref, const Volume& mov,
                                    const RegistrationConfig& cfg);

/// Builds the sampling field a registration would use at `level`, starting
/// from `theta` with prior covariance taken from a pilot subset. Used for
/// exporting probability maps.
SamplingField sampling_field_at_level(const Volume& ref, const Volume& mov,
                                      const RegistrationConfig& cfg, int level,
                                      const RigidParams& theta = {});

}  // namespace vspf
