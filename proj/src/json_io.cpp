#include "vspf/json_io.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace vspf {

namespace fs = std::filesystem;

namespace {

void check_keys(const Json& j, const std::set<std::string>& allowed, const char* what)
{
    if (!j.is_object()) throw InvalidArgument(std::string(what) + " must be a JSON object");
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw InvalidArgument(std::string("unknown key '") + key + "' in " + what);
}

// Non-finite values have no JSON form; they are written as null.
Json number(double v)
{
    return std::isfinite(v) ? Json(v) : Json(nullptr);
}

double get_number(const Json& j)
{
    if (j.is_null()) return std::numeric_limits<double>::infinity();
    return j.get<double>();
}

Json vec3(const Vec3& v)
{
    return Json::array({v.x(), v.y(), v.z()});
}

Vec3 vec3_from(const Json& j)
{
    if (!j.is_array() || j.size() != 3) throw InvalidArgument("expected a 3-vector");
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

std::map<int, double> level_map(const Json& j)
{
    if (!j.is_object()) throw InvalidArgument("per-level values must be an object keyed by level");
    std::map<int, double> out;
    for (const auto& [key, value] : j.items()) out[std::stoi(key)] = value.get<double>();
    return out;
}

Json level_json(const std::map<int, double>& m)
{
    Json j = Json::object();
    for (const auto& [level, v] : m) j[std::to_string(level)] = v;
    return j;
}

Json mat6(const Mat6& m)
{
    Json rows = Json::array();
    for (int r = 0; r < 6; ++r) {
        Json row = Json::array();
        for (int c = 0; c < 6; ++c) row.push_back(number(m(r, c)));
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

Json to_json(const RigidParams& p)
{
    Json j = Json::array();
    for (double v : p.as_array()) j.push_back(number(v));
    return j;
}

RigidParams rigid_params_from_json(const Json& j)
{
    if (!j.is_array() || j.size() != 6) throw InvalidArgument("rigid parameters must be [tx,ty,tz,rx,ry,rz]");
    std::array<double, 6> a{};
    for (std::size_t i = 0; i < 6; ++i) a[i] = j[i].get<double>();
    return RigidParams::from_array(a);
}

Json to_json(const OptimizerConfig& cfg)
{
    Json j;
    j["max_iters"] = cfg.max_iters;
    j["initial_radius"] = cfg.initial_radius;
    j["min_radius"] = cfg.min_radius;
    j["max_radius"] = cfg.max_radius;
    j["shrink_threshold"] = cfg.shrink_threshold;
    j["grow_threshold"] = cfg.grow_threshold;
    if (cfg.parameter_scales) {
        Json s = Json::array();
        for (int k = 0; k < 6; ++k) s.push_back((*cfg.parameter_scales)[k]);
        j["parameter_scales"] = s;
    } else {
        j["parameter_scales"] = nullptr;
    }
    j["convergence_tol"] = cfg.convergence_tol;
    j["tail_average"] = cfg.tail_average;
    return j;
}

OptimizerConfig optimizer_config_from_json(const Json& j, OptimizerConfig c)
{
    check_keys(j, {"max_iters", "initial_radius", "min_radius", "max_radius", "shrink_threshold",
                   "grow_threshold", "parameter_scales", "convergence_tol", "tail_average"},
               "optimizer config");
    if (j.contains("max_iters")) c.max_iters = j["max_iters"].get<int>();
    if (j.contains("initial_radius")) c.initial_radius = j["initial_radius"].get<double>();
    if (j.contains("min_radius")) c.min_radius = j["min_radius"].get<double>();
    if (j.contains("max_radius")) c.max_radius = j["max_radius"].get<double>();
    if (j.contains("shrink_threshold")) c.shrink_threshold = j["shrink_threshold"].get<double>();
    if (j.contains("grow_threshold")) c.grow_threshold = j["grow_threshold"].get<double>();
    if (j.contains("parameter_scales")) {
        const Json& s = j["parameter_scales"];
        if (s.is_null()) {
            c.parameter_scales.reset();
        } else {
            if (!s.is_array() || s.size() != 6) throw InvalidArgument("parameter_scales must have 6 entries");
            Vec6 v;
            for (int k = 0; k < 6; ++k) v[k] = s[static_cast<std::size_t>(k)].get<double>();
            c.parameter_scales = v;
        }
    }
    if (j.contains("convergence_tol")) c.convergence_tol = j["convergence_tol"].get<double>();
    if (j.contains("tail_average")) c.tail_average = j["tail_average"].get<int>();
    validate(c);
    return c;
}

Json to_json(const RegistrationConfig& cfg)
{
    Json j;
    j["levels"] = cfg.levels;
    j["sampler"] = to_string(cfg.sampler);
    j["sampling_rate"] = cfg.sampling_rate;
    j["bins"] = cfg.bins;
    j["seed"] = cfg.seed;
    j["sigma_xi2"] = cfg.sigma_xi2;
    j["voxel_cost"] = cfg.voxel_cost;
    j["gradient_sigma_voxels"] = cfg.gradient_sigma_voxels;
    j["sample_jitter"] = cfg.sample_jitter;
    j["p_high"] = level_json(cfg.p_high);
    j["beta"] = level_json(cfg.beta);
    Json opt = Json::object();
    for (int level = cfg.levels; level >= 1; --level)
        opt[std::to_string(level)] = to_json(optimizer_for_level(cfg, level));
    j["optimizer"] = opt;
    j["stop_level"] = cfg.stop_level;
    j["pilot_min"] = cfg.pilot_min;
    j["pilot_factor"] = cfg.pilot_factor;
    j["record_timing"] = cfg.record_timing;
    return j;
}

RegistrationConfig registration_config_from_json(const Json& j, RegistrationConfig c)
{
    check_keys(j, {"levels", "sampler", "sampling_rate", "bins", "seed", "sigma_xi2", "voxel_cost",
                   "gradient_sigma_voxels", "sample_jitter", "p_high", "beta", "optimizer",
                   "stop_level", "pilot_min", "pilot_factor", "record_timing"},
               "registration config");
    if (j.contains("levels")) c.levels = j["levels"].get<int>();
    if (j.contains("sampler")) c.sampler = sampler_from_string(j["sampler"].get<std::string>());
    if (j.contains("sampling_rate")) c.sampling_rate = j["sampling_rate"].get<double>();
    if (j.contains("bins")) c.bins = j["bins"].get<int>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("sigma_xi2")) c.sigma_xi2 = j["sigma_xi2"].get<double>();
    if (j.contains("voxel_cost")) c.voxel_cost = j["voxel_cost"].get<double>();
    if (j.contains("gradient_sigma_voxels")) c.gradient_sigma_voxels = j["gradient_sigma_voxels"].get<double>();
    if (j.contains("sample_jitter")) c.sample_jitter = j["sample_jitter"].get<double>();
    if (j.contains("p_high")) c.p_high = level_map(j["p_high"]);
    if (j.contains("beta")) c.beta = level_map(j["beta"]);
    if (j.contains("optimizer")) {
        const Json& o = j["optimizer"];
        if (!o.is_object()) throw InvalidArgument("optimizer must be an object keyed by level");
        for (const auto& [key, value] : o.items()) {
            const int level = std::stoi(key);
            c.optimizer[level] = optimizer_config_from_json(value, optimizer_for_level(c, level));
        }
    }
    if (j.contains("stop_level")) c.stop_level = j["stop_level"].get<int>();
    if (j.contains("pilot_min")) c.pilot_min = j["pilot_min"].get<std::size_t>();
    if (j.contains("pilot_factor")) c.pilot_factor = j["pilot_factor"].get<double>();
    if (j.contains("record_timing")) c.record_timing = j["record_timing"].get<bool>();
    validate(c);
    return c;
}

Json to_json(const RegistrationResult& r)
{
    Json j;
    j["theta"] = to_json(r.theta);
    j["center"] = vec3(r.center);
    Json levels = Json::array();
    for (const auto& l : r.levels) {
        Json e;
        e["level"] = l.level;
        e["voxels"] = l.voxels;
        e["expected_selection"] = l.expected_selection;
        e["p_high"] = l.p_high;
        e["lambda_star"] = number(l.lambda_star);
        e["theta"] = to_json(l.scale.theta);
        e["iterations"] = l.scale.iterations_run;
        e["accepted_steps"] = l.scale.accepted_steps;
        e["final_radius"] = l.scale.final_radius;
        Json trace = Json::array();
        for (double v : l.scale.nmi_trace) trace.push_back(number(v));
        e["nmi_trace"] = trace;
        e["final_hessian"] = mat6(l.scale.final_hessian);
        levels.push_back(e);
    }
    j["levels"] = levels;
    j["wall_time_s"] = r.wall_time_s;
    return j;
}

Json to_json(const PhantomSpec& s)
{
    Json j;
    j["size"] = s.size;
    j["spacing"] = s.spacing;
    j["min_structures"] = s.min_structures;
    j["max_structures"] = s.max_structures;
    j["smoothing_mm"] = s.smoothing_mm;
    j["noise_sigma"] = s.noise_sigma;
    j["max_translation"] = s.max_translation;
    j["max_rotation"] = s.max_rotation;
    j["voi_count"] = s.voi_count;
    Json remap = Json::array();
    for (const auto& [x, y] : s.remap) remap.push_back(Json::array({x, y}));
    j["remap"] = remap;
    return j;
}

PhantomSpec phantom_spec_from_json(const Json& j, PhantomSpec s)
{
    check_keys(j, {"size", "spacing", "min_structures", "max_structures", "smoothing_mm",
                   "noise_sigma", "max_translation", "max_rotation", "voi_count", "remap"},
               "phantom spec");
    if (j.contains("size")) s.size = j["size"].get<int>();
    if (j.contains("spacing")) s.spacing = j["spacing"].get<double>();
    if (j.contains("min_structures")) s.min_structures = j["min_structures"].get<int>();
    if (j.contains("max_structures")) s.max_structures = j["max_structures"].get<int>();
    if (j.contains("smoothing_mm")) s.smoothing_mm = j["smoothing_mm"].get<double>();
    if (j.contains("noise_sigma")) s.noise_sigma = j["noise_sigma"].get<double>();
    if (j.contains("max_translation")) s.max_translation = j["max_translation"].get<double>();
    if (j.contains("max_rotation")) s.max_rotation = j["max_rotation"].get<double>();
    if (j.contains("voi_count")) s.voi_count = j["voi_count"].get<int>();
    if (j.contains("remap")) {
        s.remap.clear();
        for (const auto& knot : j["remap"]) {
            if (!knot.is_array() || knot.size() != 2) throw InvalidArgument("remap knots are [in, out] pairs");
            s.remap.emplace_back(knot[0].get<double>(), knot[1].get<double>());
        }
    }
    validate(s);
    return s;
}

Json to_json(const ExperimentConfig& c)
{
    Json j;
    j["samplers"] = c.samplers;
    j["rates"] = c.rates;
    j["pairs"] = c.pairs;
    j["seeds"] = c.seeds;
    j["phantom_seed"] = c.phantom_seed;
    j["phantom"] = to_json(c.phantom);
    j["registration"] = to_json(c.registration);
    j["failure_threshold_mm"] = c.failure_threshold_mm;
    j["jobs"] = c.jobs;
    return j;
}

ExperimentConfig experiment_config_from_json(const Json& j, ExperimentConfig c)
{
    check_keys(j, {"samplers", "rates", "pairs", "seeds", "phantom_seed", "phantom", "registration",
                   "failure_threshold_mm", "jobs"},
               "experiment config");
    if (!j.contains("seeds")) throw InvalidArgument("experiment config must list its seeds");
    if (j.contains("samplers")) c.samplers = j["samplers"].get<std::vector<std::string>>();
    if (j.contains("rates")) c.rates = j["rates"].get<std::vector<double>>();
    if (j.contains("pairs")) c.pairs = j["pairs"].get<int>();
    c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("phantom_seed")) c.phantom_seed = j["phantom_seed"].get<std::uint64_t>();
    if (j.contains("phantom")) c.phantom = phantom_spec_from_json(j["phantom"], c.phantom);
    if (j.contains("registration"))
        c.registration = registration_config_from_json(j["registration"], c.registration);
    if (j.contains("failure_threshold_mm")) c.failure_threshold_mm = j["failure_threshold_mm"].get<double>();
    if (j.contains("jobs")) c.jobs = j["jobs"].get<int>();
    validate(c);
    return c;
}

Json to_json(const ExperimentReport& r)
{
    Json j;
    j["config"] = to_json(r.config);
    Json summary = Json::array();
    for (const auto& row : r.summary) {
        Json e;
        e["sampler"] = row.sampler;
        e["rate"] = row.rate;
        e["total_runs"] = row.runs;
        e["failure_count"] = row.failures;
        e["failure_rate"] = row.failure_rate;
        e["mtre_mm"] = number(row.mtre_mm);
        e["mean_time_s"] = row.mean_time_s;
        summary.push_back(e);
    }
    j["summary"] = summary;
    Json runs = Json::array();
    for (const auto& run : r.runs) {
        Json e;
        e["sampler"] = run.sampler;
        e["rate"] = run.rate;
        e["pair_id"] = run.pair_id;
        e["seed"] = run.seed;
        e["failed"] = run.failed;
        if (!run.error.empty()) e["error"] = run.error;
        Json tres = Json::array();
        for (double t : run.tre_mm) tres.push_back(number(t));
        e["tre_mm"] = tres;
        e["max_tre_mm"] = number(run.max_tre_mm);
        e["mean_tre_mm"] = number(run.mean_tre_mm);
        e["wall_time_s"] = run.wall_time_s;
        e["estimate"] = to_json(run.estimate);
        runs.push_back(e);
    }
    j["runs"] = runs;
    return j;
}

Json to_json(const LearnedSchedule& s)
{
    Json j;
    j["parameter"] = to_string(s.parameter);
    j["sampling_rate"] = s.sampling_rate;
    j["levels"] = s.levels;
    Json values = Json::object();
    Json curves = Json::object();
    for (const auto& [level, e] : s.entries) {
        values[std::to_string(level)] = e.value;
        Json curve = Json::array();
        for (const auto& [cand, q] : e.curve) curve.push_back(Json::array({cand, number(q)}));
        curves[std::to_string(level)] = curve;
    }
    j["values"] = values;
    j["etre_curves"] = curves;
    return j;
}

LearnedSchedule learned_schedule_from_json(const Json& j)
{
    check_keys(j, {"parameter", "sampling_rate", "levels", "values", "etre_curves"}, "learned schedule");
    LearnedSchedule s;
    s.parameter = learned_parameter_from_string(j.at("parameter").get<std::string>());
    s.sampling_rate = j.value("sampling_rate", 0.0);
    s.levels = j.value("levels", 0);
    for (const auto& [key, value] : j.at("values").items()) {
        const int level = std::stoi(key);
        LearnedEntry& e = s.entries[level];
        e.level = level;
        e.value = value.get<double>();
        if (!(e.value >= 0.0 && e.value <= 1.0)) throw InvalidArgument("learned values must lie in [0, 1]");
    }
    if (j.contains("etre_curves"))
        for (const auto& [key, curve] : j["etre_curves"].items()) {
            LearnedEntry& e = s.entries[std::stoi(key)];
            for (const auto& pt : curve) e.curve.emplace_back(pt[0].get<double>(), get_number(pt[1]));
        }
    return s;
}

void save_training_pair(const TrainingPair& pair, const fs::path& dir)
{
    fs::create_directories(dir);
    save_volume(pair.ref, dir / "ref.mhd");
    save_volume(pair.mov, dir / "mov.mhd");
    Json j;
    j["ref"] = "ref.mhd";
    j["mov"] = "mov.mhd";
    j["gold"] = to_json(pair.gold);
    j["center"] = vec3(pair.center());
    Json pts = Json::array();
    for (const auto& p : pair.voi_points) pts.push_back(vec3(p));
    j["voi_points"] = pts;
    write_json_file(j, dir / "pair.json");
}

TrainingPair load_training_pair(const fs::path& pair_json)
{
    const Json j = read_json_file(pair_json);
    check_keys(j, {"ref", "mov", "gold", "center", "voi_points"}, "training pair");
    const fs::path base = pair_json.parent_path();
    auto resolve = [&](const std::string& p) {
        const fs::path path(p);
        return path.is_absolute() ? path : base / path;
    };
    TrainingPair pair;
    pair.ref = load_volume(resolve(j.at("ref").get<std::string>()));
    pair.mov = load_volume(resolve(j.at("mov").get<std::string>()));
    pair.gold = rigid_params_from_json(j.at("gold"));
    for (const auto& p : j.at("voi_points")) pair.voi_points.push_back(vec3_from(p));
    validate(pair);
    return pair;
}

Json read_json_file(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void write_json_file(const Json& j, const fs::path& path)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace vspf
