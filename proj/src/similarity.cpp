#include "vspf/similarity.hpp"

#include "vspf/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

namespace vspf {

namespace {

constexpr double kPi = std::numbers::pi;

inline double sinc(double d)
{
    if (std::abs(d) < 1e-8) return 1.0;
    return std::sin(kPi * d) / (kPi * d);
}

inline double sinc_derivative(double d)
{
    if (std::abs(d) < 1e-5) return -kPi * kPi * d / 3.0;
    const double pd = kPi * d;
    return (pd * std::cos(pd) - std::sin(pd)) / (kPi * d * d);
}

double bin_scale(const IntensityWindow& w, int bins)
{
    const double range = w.hi - w.lo;
    return range > 0.0 ? (bins - 1) / range : 0.0;
}

// Per-axis kernel taps around a continuous index.
struct AxisTaps {
    int base = 0;  // lattice index of tap 0
    double w[4] = {0, 0, 0, 0};
    double dw[4] = {0, 0, 0, 0};
    bool valid[4] = {false, false, false, false};
    bool any = false;
};

inline void axis_taps(double q, int n, bool derivative, AxisTaps& t)
{
    const double f = std::floor(q);
    t.base = static_cast<int>(f) - 1;
    const double frac = q - f;
    double k[4];
    double dk[4];
    double sum = 0.0;
    double dsum = 0.0;
    for (int i = 0; i < 4; ++i) {
        const double d = frac + 1.0 - i;
        k[i] = windowed_sinc(d);
        sum += k[i];
        if (derivative) {
            dk[i] = windowed_sinc_derivative(d);
            dsum += dk[i];
        }
    }
    t.any = false;
    for (int i = 0; i < 4; ++i) {
        const int idx = t.base + i;
        t.valid[i] = idx >= 0 && idx < n;
        t.any = t.any || t.valid[i];
        t.w[i] = k[i] / sum;
        if (derivative) t.dw[i] = (dk[i] * sum - k[i] * dsum) / (sum * sum);
    }
}

}  // namespace

double windowed_sinc(double d)
{
    const double ad = std::abs(d);
    if (ad >= 2.0) return 0.0;
    return sinc(d) * (0.5 + 0.5 * std::cos(kPi * d / 2.0));
}

double windowed_sinc_derivative(double d)
{
    if (std::abs(d) >= 2.0) return 0.0;
    const double window = 0.5 + 0.5 * std::cos(kPi * d / 2.0);
    const double dwindow = -0.25 * kPi * std::sin(kPi * d / 2.0);
    return sinc_derivative(d) * window + sinc(d) * dwindow;
}

SimilaritySettings default_similarity_settings(const Volume& ref, const Volume& mov, int bins,
                                               const Vec3& center)
{
    SimilaritySettings s;
    s.bins = bins;
    s.ref_window = {ref.min(), ref.max()};
    s.mov_window = {mov.min(), mov.max()};
    s.center = center;
    return s;
}

void JointHistogram::update_marginals()
{
    const auto b = static_cast<std::size_t>(bins);
    ref_marginal.assign(b, 0.0);
    mov_marginal.assign(b, 0.0);
    total_weight = 0.0;
    for (std::size_t a = 0; a < b; ++a)
        for (std::size_t m = 0; m < b; ++m) {
            const double v = table[a * b + m];
            ref_marginal[a] += v;
            mov_marginal[m] += v;
        }
    for (double v : ref_marginal) total_weight += v;
}

void JointHistogram::write_csv(std::ostream& out) const
{
    const auto old = out.precision(17);
    for (int a = 0; a < bins; ++a) {
        for (int m = 0; m < bins; ++m) {
            if (m) out << ',';
            out << (*this)(a, m);
        }
        out << '\n';
    }
    out.precision(old);
}

namespace {

double entropy(const std::vector<double>& mass, double total)
{
    double h = 0.0;
    for (double v : mass)
        if (v > 0.0) {
            const double p = v / total;
            h -= p * std::log(p);
        }
    return h;
}

}  // namespace

SimilarityValue nmi(const JointHistogram& hist)
{
    if (!(hist.total_weight > 0.0)) throw NoOverlapError("zero in-bounds mass");
    SimilarityValue v;
    v.entropy_ref = entropy(hist.ref_marginal, hist.total_weight);
    v.entropy_mov = entropy(hist.mov_marginal, hist.total_weight);
    v.entropy_joint = entropy(hist.table, hist.total_weight);
    v.nmi = v.entropy_joint > 0.0 ? (v.entropy_ref + v.entropy_mov) / v.entropy_joint : 2.0;
    return v;
}

double conditional_variance(const JointHistogram& hist)
{
    const int b = hist.bins;
    const double width = b > 1 ? (hist.mov_window.hi - hist.mov_window.lo) / (b - 1) : 0.0;
    double acc = 0.0;
    for (int a = 0; a < b; ++a) {
        const double mass = hist.ref_marginal[static_cast<std::size_t>(a)];
        if (mass <= 0.0) continue;
        double mean = 0.0;
        for (int m = 0; m < b; ++m) mean += hist(a, m) * m;
        mean /= mass;
        double var = 0.0;
        for (int m = 0; m < b; ++m) var += hist(a, m) * (m - mean) * (m - mean);
        acc += var;
    }
    return hist.total_weight > 0.0 ? acc / hist.total_weight * width * width : 0.0;
}

Selection full_selection(const Grid& grid)
{
    Selection s;
    s.indices.resize(grid.size());
    for (std::size_t i = 0; i < s.indices.size(); ++i) s.indices[i] = i;
    return s;
}

SimilarityMetric::SimilarityMetric(const Volume& ref, const Volume& mov, SimilaritySettings settings)
    : ref_(&ref), mov_(&mov), settings_(settings)
{
    if (settings_.bins < 8) throw InvalidArgument("histogram needs at least 8 bins");
    if (!(settings_.sample_jitter >= 0.0 && settings_.sample_jitter <= 1.0))
        throw InvalidArgument("sample_jitter must lie in [0, 1]");
    const int b = settings_.bins;
    const double rs = bin_scale(settings_.ref_window, b);
    ref_scale_ = rs;
    const double ms = bin_scale(settings_.mov_window, b);
    ref_bin_pos_.resize(ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i)
        ref_bin_pos_[i] = std::clamp((ref[i] - settings_.ref_window.lo) * rs, 0.0, double(b - 1));
    mov_bin_.resize(mov.size());
    for (std::size_t i = 0; i < mov.size(); ++i) {
        const double pos = std::clamp((mov[i] - settings_.mov_window.lo) * ms, 0.0, double(b - 1));
        mov_bin_[i] = static_cast<int>(std::lround(pos));
    }
}

std::pair<Vec3, double> SimilarityMetric::sample_point(std::size_t idx,
                                                       std::uint64_t draw_seed) const
{
    const Grid& rg = ref_->grid();
    Vec3 x = rg.physical(idx);
    if (settings_.sample_jitter <= 0.0) return {x, ref_bin_pos_[idx]};
    const auto c = rng::block(draw_seed ^ 0x6a6974746572ULL, idx);
    const Vec3 u(c[0] * 0x1.0p-32, c[1] * 0x1.0p-32, c[2] * 0x1.0p-32);
    x += (u.array() - 0.5).matrix().cwiseProduct(rg.spacing) * settings_.sample_jitter;
    const double v = sample_linear(*ref_, rg.continuous_index(x));
    const double pos =
        std::clamp((v - settings_.ref_window.lo) * ref_scale_, 0.0, double(settings_.bins - 1));
    return {x, pos};
}

void SimilarityMetric::accumulate(const RigidParams& params, const Selection& sel,
                                  JointHistogram& hist) const
{
    const int b = settings_.bins;
    const Grid& mg = mov_->grid();
    const RigidMap map(params, settings_.center);
    hist.bins = b;
    hist.table.assign(static_cast<std::size_t>(b) * b, 0.0);
    hist.ref_window = settings_.ref_window;
    hist.mov_window = settings_.mov_window;

    const std::size_t nx = static_cast<std::size_t>(mg.dims[0]);
    const std::size_t nxy = nx * static_cast<std::size_t>(mg.dims[1]);
    AxisTaps tx, ty, tz;
    for (std::size_t idx : sel.indices) {
        const auto [x, pos] = sample_point(idx, sel.draw_seed);
        const Vec3 q = mg.continuous_index(map(x));
        axis_taps(q.x(), mg.dims[0], false, tx);
        if (!tx.any) continue;
        axis_taps(q.y(), mg.dims[1], false, ty);
        if (!ty.any) continue;
        axis_taps(q.z(), mg.dims[2], false, tz);
        if (!tz.any) continue;

        const int a0 = std::min(static_cast<int>(pos), b - 2);
        const double fr = pos - a0;
        double* row0 = hist.table.data() + static_cast<std::size_t>(a0) * b;
        double* row1 = row0 + b;

        for (int k = 0; k < 4; ++k) {
            if (!tz.valid[k]) continue;
            const std::size_t zoff = static_cast<std::size_t>(tz.base + k) * nxy;
            for (int j = 0; j < 4; ++j) {
                if (!ty.valid[j]) continue;
                const double wyz = tz.w[k] * ty.w[j];
                const std::size_t yoff = zoff + static_cast<std::size_t>(ty.base + j) * nx;
                for (int i = 0; i < 4; ++i) {
                    if (!tx.valid[i]) continue;
                    const double w = wyz * tx.w[i];
                    const int m = mov_bin_[yoff + static_cast<std::size_t>(tx.base + i)];
                    row0[m] += (1.0 - fr) * w;
                    row1[m] += fr * w;
                }
            }
        }
    }
    for (double& v : hist.table)
        if (v < 0.0) v = 0.0;
    hist.update_marginals();
}

Vec6 SimilarityMetric::differentiate(const RigidParams& params, const Selection& sel,
                                     const std::vector<double>& dnmi_dcell) const
{
    const int b = settings_.bins;
    const Grid& mg = mov_->grid();
    const RigidMap map(params, settings_.center);
    const Vec3 inv_spacing = mg.spacing.cwiseInverse();
    const std::size_t nx = static_cast<std::size_t>(mg.dims[0]);
    const std::size_t nxy = nx * static_cast<std::size_t>(mg.dims[1]);

    Vec6 grad = Vec6::Zero();
    AxisTaps tx, ty, tz;
    for (std::size_t idx : sel.indices) {
        const auto [x, pos] = sample_point(idx, sel.draw_seed);
        const Vec3 q = mg.continuous_index(map(x));
        axis_taps(q.x(), mg.dims[0], true, tx);
        if (!tx.any) continue;
        axis_taps(q.y(), mg.dims[1], true, ty);
        if (!ty.any) continue;
        axis_taps(q.z(), mg.dims[2], true, tz);
        if (!tz.any) continue;

        const int a0 = std::min(static_cast<int>(pos), b - 2);
        const double fr = pos - a0;
        const double* g0 = dnmi_dcell.data() + static_cast<std::size_t>(a0) * b;
        const double* g1 = g0 + b;

        Vec3 dq = Vec3::Zero();  // d nmi / d (continuous moving index)
        for (int k = 0; k < 4; ++k) {
            if (!tz.valid[k]) continue;
            const std::size_t zoff = static_cast<std::size_t>(tz.base + k) * nxy;
            for (int j = 0; j < 4; ++j) {
                if (!ty.valid[j]) continue;
                const std::size_t yoff = zoff + static_cast<std::size_t>(ty.base + j) * nx;
                for (int i = 0; i < 4; ++i) {
                    if (!tx.valid[i]) continue;
                    const int m = mov_bin_[yoff + static_cast<std::size_t>(tx.base + i)];
                    const double c = (1.0 - fr) * g0[m] + fr * g1[m];
                    if (c == 0.0) continue;
                    dq.x() += c * tx.dw[i] * ty.w[j] * tz.w[k];
                    dq.y() += c * tx.w[i] * ty.dw[j] * tz.w[k];
                    dq.z() += c * tx.w[i] * ty.w[j] * tz.dw[k];
                }
            }
        }
        grad += map.jacobian(x).transpose() * dq.cwiseProduct(inv_spacing);
    }
    return grad;
}

JointHistogram SimilarityMetric::histogram(const RigidParams& params, const Selection& sel) const
{
    if (sel.empty()) throw InvalidArgument("empty selection");
    JointHistogram hist;
    accumulate(params, sel, hist);
    if (!(hist.total_weight > 0.0)) throw NoOverlapError("zero in-bounds mass");
    return hist;
}

SimilarityMetric::Evaluation SimilarityMetric::evaluate(const RigidParams& params,
                                                        const Selection& sel,
                                                        bool with_gradient) const
{
    Evaluation ev;
    ev.histogram = histogram(params, sel);
    ev.value = nmi(ev.histogram);
    if (!with_gradient || ev.value.entropy_joint <= 0.0) return ev;

    // d nmi / d h_ab, with the total mass varying along with the cell.
    const JointHistogram& h = ev.histogram;
    const SimilarityValue& v = ev.value;
    const double total = h.total_weight;
    const int b = h.bins;
    std::vector<double> dcell(h.table.size(), 0.0);
    const double hj = v.entropy_joint;
    const double num = v.entropy_ref + v.entropy_mov;
    for (int a = 0; a < b; ++a) {
        const double pa = h.ref_marginal[static_cast<std::size_t>(a)] / total;
        if (pa <= 0.0) continue;
        for (int m = 0; m < b; ++m) {
            const double cell = h(a, m);
            if (cell <= 0.0) continue;
            const double pm = h.mov_marginal[static_cast<std::size_t>(m)] / total;
            const double pab = cell / total;
            const double d_ref = (-v.entropy_ref - std::log(pa)) / total;
            const double d_mov = (-v.entropy_mov - std::log(pm)) / total;
            const double d_joint = (-hj - std::log(pab)) / total;
            dcell[static_cast<std::size_t>(a) * b + m] = (d_ref + d_mov) / hj - num * d_joint / (hj * hj);
        }
    }
    ev.gradient = differentiate(params, sel, dcell);
    return ev;
}

Mat6 SimilarityMetric::gn_hessian(const VectorField& mov_grad, const RigidParams& params,
                                  const Selection& sel, double weight) const
{
    if (sel.empty()) throw InvalidArgument("empty selection");
    const Grid& gg = mov_grad.grid();
    const RigidMap map(params, settings_.center);
    Mat6 h = Mat6::Zero();
    std::size_t used = 0;
    for (std::size_t idx : sel.indices) {
        const Vec3 x = sample_point(idx, sel.draw_seed).first;
        Vec3 grad;
        if (!mov_grad.interpolate(gg.continuous_index(map(x)), grad)) continue;
        const Vec6 g = map.jacobian(x).transpose() * grad;
        h.noalias() += weight * g * g.transpose();
        ++used;
    }
    if (used == 0) throw NoOverlapError("zero in-bounds mass");
    return 0.5 * (h + h.transpose());
}

JointHistogram joint_histogram(const Volume& ref, const Volume& mov, const RigidParams& params,
                               const Selection& sel, const SimilaritySettings& settings)
{
    return SimilarityMetric(ref, mov, settings).histogram(params, sel);
}

Vec6 nmi_gradient(const Volume& ref, const Volume& mov, const RigidParams& params,
                  const Selection& sel, const SimilaritySettings& settings)
{
    return SimilarityMetric(ref, mov, settings).evaluate(params, sel, true).gradient;
}

Mat6 gn_hessian(const Volume& ref, const Volume& mov, const VectorField& mov_grad,
                const RigidParams& params, const Selection& sel,
                const SimilaritySettings& settings, double weight)
{
    return SimilarityMetric(ref, mov, settings).gn_hessian(mov_grad, params, sel, weight);
}

std::vector<Vec6> intensity_jacobians(const VectorField& mov_grad, const RigidParams& params,
                                      const std::vector<Vec3>& points, const Vec3& center,
                                      std::vector<bool>* inside)
{
    const RigidMap map(params, center);
    const Grid& gg = mov_grad.grid();
    std::vector<Vec6> out(points.size(), Vec6::Zero());
    if (inside) inside->assign(points.size(), false);
    for (std::size_t i = 0; i < points.size(); ++i) {
        Vec3 grad;
        if (!mov_grad.interpolate(gg.continuous_index(map(points[i])), grad)) continue;
        out[i] = map.jacobian(points[i]).transpose() * grad;
        if (inside) (*inside)[i] = true;
    }
    return out;
}

}  // namespace vspf
