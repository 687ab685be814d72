#pragma once

#include "vspf/transform.hpp"
#include "vspf/types.hpp"
#include "vspf/volume.hpp"

#include <iosfwd>
#include <utility>
#include <vector>

namespace vspf {

struct IntensityWindow {
    double lo = 0.0;
    double hi = 1.0;
};

struct SimilaritySettings {
    int bins = 32;
    IntensityWindow ref_window;
    IntensityWindow mov_window;
    /// Rotation center of the rigid transform, in mm.
    Vec3 center = Vec3::Zero();
    /// Width, in reference voxels, of a uniform random offset applied to each
    /// sample position; 0 samples voxel centers exactly. Offsets are keyed by
    /// (selection draw seed, voxel index), and the reference intensity is then
    /// read by trilinear interpolation at the offset point.
    double sample_jitter = 0.0;
};

/// Settings with intensity windows spanning the full range of each volume.
SimilaritySettings default_similarity_settings(const Volume& ref, const Volume& mov, int bins = 32,
                                               const Vec3& center = Vec3::Zero());

/// B x B partial-volume co-occurrence table; rows index reference bins,
/// columns moving bins.
struct JointHistogram {
    int bins = 0;
    std::vector<double> table;
    std::vector<double> ref_marginal;
    std::vector<double> mov_marginal;
    double total_weight = 0.0;
    IntensityWindow ref_window;
    IntensityWindow mov_window;

    double operator()(int ref_bin, int mov_bin) const
    {
        return table[static_cast<std::size_t>(ref_bin) * bins + mov_bin];
    }
    /// Recomputes marginals and total from the table.
    void update_marginals();
    void write_csv(std::ostream& out) const;
};

struct SimilarityValue {
    double nmi = 1.0;
    double entropy_ref = 0.0;
    double entropy_mov = 0.0;
    double entropy_joint = 0.0;
};

/// Hanning-windowed sinc of radius 2: sinc(d) * (0.5 + 0.5 cos(pi d / 2)).
double windowed_sinc(double d);
double windowed_sinc_derivative(double d);

/// NMI of a histogram, entropies in nats. A single occupied cell yields nmi = 2.
SimilarityValue nmi(const JointHistogram& hist);

/// Weighted mean over reference bins of the variance of moving intensity
/// (bin centers, intensity units squared) within that bin.
double conditional_variance(const JointHistogram& hist);

/// Evaluates the partial-volume NMI between a reference volume and a rigidly
/// transformed moving volume on selected reference voxels.
///
/// Each selected reference voxel center is mapped into the moving lattice; its
/// unit mass is spread over the 4x4x4 moving neighbours with the separable
/// windowed-sinc kernel (renormalized per axis), and linearly across the two
/// nearest reference bins. Moving neighbours outside the lattice are dropped.
/// Kernel lobes can make a cell negative; such cells are clamped to zero and
/// excluded from the derivative.
///
/// Holds references to both volumes; they must outlive the metric.
class SimilarityMetric {
public:
    SimilarityMetric(const Volume& ref, const Volume& mov, SimilaritySettings settings);

    struct Evaluation {
        JointHistogram histogram;
        SimilarityValue value;
        Vec6 gradient = Vec6::Zero();  // d nmi / d params, zero unless requested
    };

    JointHistogram histogram(const RigidParams& params, const Selection& sel) const;
    Evaluation evaluate(const RigidParams& params, const Selection& sel, bool with_gradient) const;

    /// sum_i weight * g_i g_i^T with g_i = grad V(T(x_i)) * dT/dparams over
    /// selected voxels that map inside the gradient field.
    Mat6 gn_hessian(const VectorField& mov_grad, const RigidParams& params, const Selection& sel,
                    double weight = 1.0) const;

    const SimilaritySettings& settings() const { return settings_; }
    const Volume& reference() const { return *ref_; }
    const Volume& moving() const { return *mov_; }

    /// Physical sample position and continuous reference bin of voxel `idx`
    /// under selection seed `draw_seed`.
    std::pair<Vec3, double> sample_point(std::size_t idx, std::uint64_t draw_seed) const;

private:
    void accumulate(const RigidParams& params, const Selection& sel, JointHistogram& hist) const;
    Vec6 differentiate(const RigidParams& params, const Selection& sel,
                       const std::vector<double>& dnmi_dcell) const;

    const Volume* ref_;
    const Volume* mov_;
    SimilaritySettings settings_;
    double ref_scale_ = 0.0;
    std::vector<double> ref_bin_pos_;  // continuous bin coordinate per reference voxel
    std::vector<int> mov_bin_;         // bin index per moving voxel
};

JointHistogram joint_histogram(const Volume& ref, const Volume& mov, const RigidParams& params,
                               const Selection& sel, const SimilaritySettings& settings);

Vec6 nmi_gradient(const Volume& ref, const Volume& mov, const RigidParams& params,
                  const Selection& sel, const SimilaritySettings& settings);

Mat6 gn_hessian(const Volume& ref, const Volume& mov, const VectorField& mov_grad,
                const RigidParams& params, const Selection& sel,
                const SimilaritySettings& settings, double weight = 1.0);

/// g_i for arbitrary physical points (reference frame). Points mapping outside
/// the gradient field get g_i = 0 and `inside[i] = false`.
std::vector<Vec6> intensity_jacobians(const VectorField& mov_grad, const RigidParams& params,
                                      const std::vector<Vec3>& points, const Vec3& center,
                                      std::vector<bool>* inside = nullptr);

/// Selection containing every voxel of a grid.
Selection full_selection(const Grid& grid);

}  // namespace vspf
