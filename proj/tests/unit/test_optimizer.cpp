#include "support.hpp"

#include "vspf/optimizer.hpp"

#include <doctest.h>

using namespace vspf;

namespace {

SimilaritySettings settings_for(const Volume& ref, const Volume& mov, double jitter)
{
    auto s = default_similarity_settings(ref, mov, 32, ref.grid().center());
    s.sample_jitter = jitter;
    return s;
}

}  // namespace

TEST_CASE("trust region step")
{
    Mat6 b = Mat6::Identity();
    b(1, 1) = 4.0;
    Vec6 g;
    g << 1, 2, 0, 0, 0, 0.5;
    // Newton step fits inside a large radius.
    const Vec6 newton = trust_region_step(b, g, 10.0);
    CHECK((b * newton - g).norm() < 1e-12);
    // Otherwise the step lands on the boundary.
    const Vec6 clipped = trust_region_step(b, g, 0.3);
    CHECK(clipped.norm() == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(clipped.dot(g) > 0.0);
    // Zero curvature still gives an ascent step of radius length.
    const Vec6 flat = trust_region_step(Mat6::Zero(), g, 0.5);
    CHECK(flat.norm() == doctest::Approx(0.5).epsilon(1e-9));
    CHECK((flat.normalized() - g.normalized()).norm() < 1e-9);
}

TEST_CASE("self-alignment is a fixed point")
{
    const Volume ref = testing::small_phantom(24, 3);
    const VectorField grad = spatial_gradient(gaussian_smooth(ref, 1.0));
    const SamplingField field = urs_field(ref.size(), 0.05 * ref.size());
    OptimizerConfig cfg;
    cfg.max_iters = 15;
    const ScaleResult r = optimize_scale(ref, ref, grad, field, RigidParams{}, cfg, 5,
                                         settings_for(ref, ref, 0.0), SelectionMode::PerIteration);
    const double rho = ref.grid().bounding_radius();
    Vec6 scaled = r.theta.as_vector();
    scaled.tail<3>() *= rho;
    CHECK(scaled.norm() <= cfg.convergence_tol);
    CHECK(r.iterations_run >= 1);
}

TEST_CASE("recovers a 3 mm shift with a dense field")
{
    PhantomSpec spec;
    spec.size = 32;
    const TrainingPair pair = make_phantom_pair(spec, 17, RigidParams{Vec3(3, 0, 0), Vec3::Zero()});
    const VectorField grad = spatial_gradient(gaussian_smooth(pair.mov, 1.0));
    const SamplingField dense = urs_field(pair.ref.size(), static_cast<double>(pair.ref.size()));
    const auto s = settings_for(pair.ref, pair.mov, 1.0);
    OptimizerConfig cfg;
    const ScaleResult r = optimize_scale(pair.ref, pair.mov, grad, dense, RigidParams{}, cfg, 11, s,
                                         SelectionMode::PerIteration);
    CHECK(std::abs(r.theta.t.x() - 3.0) < 0.2);
    CHECK(r.accepted_steps > 0);
    CHECK(r.nmi_trace.size() == static_cast<std::size_t>(r.iterations_run));

    SUBCASE("bit-identical on repeat")
    {
        const ScaleResult again = optimize_scale(pair.ref, pair.mov, grad, dense, RigidParams{}, cfg, 11, s,
                                                 SelectionMode::PerIteration);
        CHECK(again.theta == r.theta);
        CHECK(again.final_hessian == r.final_hessian);
        CHECK(again.nmi_trace == r.nmi_trace);
        CHECK(again.selections_used == r.selections_used);
    }
}

TEST_CASE("fixed selection reuses one draw per scale")
{
    const Volume ref = testing::small_phantom(24, 5);
    const VectorField grad = spatial_gradient(ref);
    const SamplingField field = urs_field(ref.size(), 500);
    OptimizerConfig cfg;
    cfg.max_iters = 6;
    const RigidParams start{Vec3(0.7, 0, 0), Vec3::Zero()};
    const ScaleResult fixed = optimize_scale(ref, ref, grad, field, start, cfg, 3,
                                             settings_for(ref, ref, 0.0), SelectionMode::FixedPerScale);
    for (auto s : fixed.selections_used) CHECK(s == fixed.selections_used.front());
    const ScaleResult per = optimize_scale(ref, ref, grad, field, start, cfg, 3,
                                           settings_for(ref, ref, 0.0), SelectionMode::PerIteration);
    CHECK(per.selections_used.front() != per.selections_used.back());
}

TEST_CASE("repeated empty selections abort")
{
    const Volume ref = testing::small_phantom(16, 5);
    SamplingField none;
    none.p.assign(ref.size(), 0.0);
    CHECK_THROWS_AS(optimize_scale(ref, ref, spatial_gradient(ref), none, RigidParams{}, OptimizerConfig{}, 1,
                                   settings_for(ref, ref, 0.0), SelectionMode::PerIteration),
                    Error);
}

TEST_CASE("config validation")
{
    OptimizerConfig c;
    c.shrink_threshold = 0.9;
    CHECK_THROWS_AS(validate(c), InvalidArgument);
    c = {};
    c.min_radius = 0.0;
    CHECK_THROWS_AS(validate(c), InvalidArgument);
    c = {};
    c.max_iters = -1;
    CHECK_THROWS_AS(validate(c), InvalidArgument);
    CHECK_NOTHROW(validate(OptimizerConfig{}));
}
