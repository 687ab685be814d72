#include "support.hpp"

#include "vspf/json_io.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>

using namespace vspf;

TEST_CASE("registration config round-trips")
{
    RegistrationConfig c;
    c.sampler = SamplerKind::GmsUrs;
    c.sampling_rate = 0.003;
    c.seed = 123456789012345ULL;
    c.beta = {{1, 0.25}, {2, 0.75}};
    c.optimizer[1].max_iters = 7;
    const Json j = to_json(c);
    const RegistrationConfig back = registration_config_from_json(j);
    CHECK(to_json(back) == j);
    CHECK(back.seed == c.seed);
    CHECK(back.beta == c.beta);
    CHECK(optimizer_for_level(back, 1).max_iters == 7);
    CHECK(j["sampler"] == "gms_urs");
}

TEST_CASE("partial configs override only what they name")
{
    const RegistrationConfig c = registration_config_from_json(Json::parse(R"({"sampling_rate": 0.05})"));
    CHECK(c.sampling_rate == 0.05);
    CHECK(c.levels == RegistrationConfig{}.levels);
    CHECK_THROWS_AS(registration_config_from_json(Json::parse(R"({"sampling_rat": 0.05})")), InvalidArgument);
    CHECK_THROWS_AS(registration_config_from_json(Json::parse(R"({"sampling_rate": -1})")), InvalidArgument);
    CHECK_THROWS_AS(registration_config_from_json(Json::parse(R"({"sampler": "magic"})")), InvalidArgument);
}

TEST_CASE("experiment config requires seeds and embeds phantom and registration")
{
    CHECK_THROWS_AS(experiment_config_from_json(Json::parse(R"({"samplers": ["urs"]})")), InvalidArgument);
    const ExperimentConfig c = experiment_config_from_json(Json::parse(
        R"({"samplers": ["urs", "gm"], "rates": [0.01], "seeds": [4, 5],
            "phantom": {"size": 32}, "registration": {"bins": 16}})"));
    CHECK(c.seeds == std::vector<std::uint64_t>{4, 5});
    CHECK(c.phantom.size == 32);
    CHECK(c.registration.bins == 16);
    CHECK(experiment_config_from_json(to_json(c)).seeds == c.seeds);
}

TEST_CASE("phantom spec round-trips")
{
    PhantomSpec s;
    s.noise_sigma = 2.5;
    s.remap = {{0, 5}, {1000, 900}};
    const PhantomSpec back = phantom_spec_from_json(to_json(s));
    CHECK(back.noise_sigma == 2.5);
    CHECK(back.remap == s.remap);
}

TEST_CASE("learned schedule round-trips with non-finite curve points")
{
    LearnedSchedule s;
    s.parameter = LearnedParameter::PHigh;
    s.sampling_rate = 0.01;
    s.levels = 2;
    s.entries[2] = LearnedEntry{2, 0.24, {{0.01, std::numeric_limits<double>::infinity()}, {0.24, 3.5}}};
    s.entries[1] = LearnedEntry{1, 0.7, {{0.7, 1.25}}};
    const Json j = to_json(s);
    CHECK(j["etre_curves"]["2"][0][1].is_null());
    const LearnedSchedule back = learned_schedule_from_json(j);
    CHECK(back.entries.at(2).value == 0.24);
    CHECK(std::isinf(back.entries.at(2).curve[0].second));
    CHECK(back.entries.at(1).curve == s.entries[1].curve);
}

TEST_CASE("training pairs save and load")
{
    const auto dir = testing::scratch_dir("pair");
    PhantomSpec spec;
    spec.size = 16;
    const TrainingPair p = make_phantom_pair(spec, 12);
    save_training_pair(p, dir / "p");
    const TrainingPair back = load_training_pair(dir / "p" / "pair.json");
    CHECK(back.ref == p.ref);
    CHECK(back.mov == p.mov);
    CHECK(back.gold == p.gold);
    CHECK(back.voi_points == p.voi_points);
}

TEST_CASE("malformed json is an I/O error")
{
    const auto dir = testing::scratch_dir("badjson");
    std::ofstream(dir / "x.json") << "{ nope";
    CHECK_THROWS_AS(read_json_file(dir / "x.json"), IoError);
    CHECK_THROWS_AS(read_json_file(dir / "missing.json"), IoError);
}
