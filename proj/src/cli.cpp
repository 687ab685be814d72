#include "vspf/cli.hpp"

#include "vspf/json_io.hpp"
#include "vspf/similarity.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <optional>

namespace vspf {

namespace fs = std::filesystem;

namespace {

// Raised for bad input discovered after parsing; maps to exit code 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RegistrationOverrides {
    std::optional<std::string> sampler;
    std::optional<double> rate;
    std::optional<std::uint64_t> seed;
    std::optional<int> levels;
    std::optional<int> bins;
    std::optional<int> stop_level;
    bool timing = false;

    void add_to(CLI::App* app)
    {
        app->add_option("--sampler", sampler, "sampler name (vspf_heuristic, urs, gms, ...)");
        app->add_option("--rate", rate, "sampling rate, fraction of full-resolution voxels");
        app->add_option("--seed", seed, "random seed");
        app->add_option("--levels", levels, "pyramid levels");
        app->add_option("--bins", bins, "histogram bins");
        app->add_option("--stop-level", stop_level, "finest level to process");
        app->add_flag("--timing", timing, "record wall time (makes output time-dependent)");
    }

    void apply(RegistrationConfig& cfg) const
    {
        if (sampler) cfg.sampler = sampler_from_string(*sampler);
        if (rate) cfg.sampling_rate = *rate;
        if (seed) cfg.seed = *seed;
        if (levels) cfg.levels = *levels;
        if (bins) cfg.bins = *bins;
        if (stop_level) cfg.stop_level = *stop_level;
        if (timing) cfg.record_timing = true;
        validate(cfg);
    }
};

RegistrationConfig load_registration_config(const std::string& path)
{
    if (path.empty()) return {};
    return registration_config_from_json(read_json_file(path));
}

void print_config(std::ostream& out, const Json& j)
{
    out << j.dump(2) << '\n';
}

std::ofstream open_out(const fs::path& path)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    return f;
}

void write_trace_csv(const RegistrationResult& r, const fs::path& path)
{
    std::ofstream f = open_out(path);
    f << "level,iteration,nmi\n";
    char buf[64];
    for (const auto& l : r.levels)
        for (std::size_t i = 0; i < l.scale.nmi_trace.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.10g", l.scale.nmi_trace[i]);
            f << l.level << ',' << i + 1 << ',' << buf << '\n';
        }
}

int cmd_register(const std::string& ref_path, const std::string& mov_path,
                 const std::string& config_path, const std::string& out_path,
                 const RegistrationOverrides& ov, const std::string& pair_path,
                 const std::string& hist_path, const std::string& trace_path, std::ostream& out)
{
    RegistrationConfig cfg = load_registration_config(config_path);
    ov.apply(cfg);
    print_config(out, to_json(cfg));

    const Volume ref = load_volume(ref_path);
    const Volume mov = load_volume(mov_path);
    const RegistrationResult result = register_volumes(ref, mov, cfg);

    Json j = to_json(result);
    if (!pair_path.empty()) {
        const TrainingPair pair = load_training_pair(pair_path);
        const auto t = tre(pair.gold, result.theta, pair.voi_points, result.center);
        Json tres = Json::array();
        for (double v : t) tres.push_back(v);
        j["tre_mm"] = tres;
        j["max_tre_mm"] = *std::max_element(t.begin(), t.end());
    }
    j["config"] = to_json(cfg);
    write_json_file(j, out_path);

    if (!hist_path.empty()) {
        // Full-resolution histogram at the final estimate, all voxels.
        const SimilaritySettings s = default_similarity_settings(ref, mov, cfg.bins, result.center);
        std::ofstream f = open_out(hist_path);
        joint_histogram(ref, mov, result.theta, full_selection(ref.grid()), s).write_csv(f);
    }
    if (!trace_path.empty()) write_trace_csv(result, trace_path);

    char buf[160];
    const auto& t = result.theta;
    std::snprintf(buf, sizeof buf, "theta: %.6f %.6f %.6f %.6f %.6f %.6f\n", t.t.x(), t.t.y(),
                  t.t.z(), t.r.x(), t.r.y(), t.r.z());
    out << buf;
    if (j.contains("max_tre_mm")) {
        std::snprintf(buf, sizeof buf, "max TRE: %.4f mm\n", j["max_tre_mm"].get<double>());
        out << buf;
    }
    return 0;
}

std::vector<TrainingPair> load_manifest(const fs::path& manifest)
{
    const Json j = read_json_file(manifest);
    const Json& list = j.is_object() ? j.at("pairs") : j;
    if (!list.is_array() || list.empty()) throw UsageError("manifest must list at least one pair.json");
    std::vector<TrainingPair> pairs;
    for (const auto& entry : list) {
        fs::path p(entry.get<std::string>());
        if (p.is_relative()) p = manifest.parent_path() / p;
        if (!fs::exists(p)) throw UsageError("pair file does not exist: " + p.string());
        pairs.push_back(load_training_pair(p));
    }
    return pairs;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Rigid volume registration with uncertainty-driven voxel sampling", "vspfreg"};
    app.require_subcommand(1);
    app.allow_extras(false);

    std::string ref_path, mov_path, config_path, out_path, out_dir, pair_path, hist_path, trace_path;
    std::string manifest, param, spec_path;
    RegistrationOverrides ov;
    std::optional<int> jobs, trials, level, pairs_override;
    std::optional<double> grid_step;
    std::uint64_t phantom_seed = 0;

    auto* reg = app.add_subcommand("register", "register a moving volume to a reference");
    reg->add_option("--ref", ref_path, "reference volume (.mhd)")->required()->check(CLI::ExistingFile);
    reg->add_option("--mov", mov_path, "moving volume (.mhd)")->required()->check(CLI::ExistingFile);
    reg->add_option("--config", config_path, "registration config JSON")->check(CLI::ExistingFile);
    reg->add_option("--out", out_path, "result JSON")->required();
    reg->add_option("--pair", pair_path, "pair.json with gold transform; adds TRE to the result")
        ->check(CLI::ExistingFile);
    reg->add_option("--dump-histogram", hist_path, "CSV of the final joint histogram");
    reg->add_option("--dump-trace", trace_path, "CSV of the per-iteration NMI trace");
    ov.add_to(reg);

    auto* learn = app.add_subcommand("learn", "learn a per-level P_h or beta schedule");
    learn->add_option("--pairs-manifest", manifest, "JSON list of pair.json files")
        ->required()
        ->check(CLI::ExistingFile);
    learn->add_option("--param", param, "parameter to learn")
        ->required()
        ->check(CLI::IsMember({"ph", "beta"}));
    learn->add_option("--config", config_path, "base registration config JSON")->check(CLI::ExistingFile);
    learn->add_option("--out", out_path, "schedule JSON")->required();
    learn->add_option("--trials", trials, "Monte-Carlo trials per pair");
    learn->add_option("--grid-step", grid_step, "candidate grid step");
    learn->add_option("--jobs", jobs, "worker threads");
    ov.add_to(learn);

    auto* bench = app.add_subcommand("bench", "run a phantom benchmark sweep");
    bench->add_option("--config", config_path, "experiment config JSON")->required()->check(CLI::ExistingFile);
    bench->add_option("--out-dir", out_dir, "output directory")->required();
    bench->add_option("--jobs", jobs, "worker threads");
    bench->add_option("--pairs", pairs_override, "number of phantom pairs");

    auto* exp = app.add_subcommand("vspf-export", "write the sampling probability field of one level");
    exp->add_option("--ref", ref_path, "reference volume (.mhd)")->required()->check(CLI::ExistingFile);
    exp->add_option("--mov", mov_path, "moving volume (.mhd)")->required()->check(CLI::ExistingFile);
    exp->add_option("--config", config_path, "registration config JSON")->check(CLI::ExistingFile);
    exp->add_option("--level", level, "pyramid level, 1 = finest")->required();
    exp->add_option("--out", out_path, "probability volume (.mhd)")->required();
    ov.add_to(exp);

    auto* ph = app.add_subcommand("phantom", "generate a synthetic training pair");
    ph->add_option("--spec", spec_path, "phantom spec JSON")->check(CLI::ExistingFile);
    ph->add_option("--seed", phantom_seed, "phantom seed")->required();
    ph->add_option("--out-dir", out_dir, "output directory")->required();

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(std::move(rev));
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err) == 0 ? 0 : 1;
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err) == 0 ? 0 : 1;
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 1;
    }

    try {
        if (reg->parsed())
            return cmd_register(ref_path, mov_path, config_path, out_path, ov, pair_path, hist_path,
                                trace_path, out);

        if (learn->parsed()) {
            RegistrationConfig cfg = load_registration_config(config_path);
            ov.apply(cfg);
            LearningOptions opts;
            if (trials) opts.trials = *trials;
            if (grid_step) opts.grid_step = *grid_step;
            if (jobs) opts.jobs = *jobs;
            Json resolved = to_json(cfg);
            resolved["learning"] = {{"param", param}, {"trials", opts.trials},
                                    {"grid_step", opts.grid_step}, {"jobs", opts.jobs}};
            print_config(out, resolved);
            const auto pairs = load_manifest(manifest);
            const LearnedSchedule sched =
                learn_schedule(pairs, learned_parameter_from_string(param), cfg, opts);
            write_json_file(to_json(sched), out_path);
            for (const auto& [lvl, e] : sched.entries) {
                char buf[96];
                std::snprintf(buf, sizeof buf, "level %d: %s = %.2f\n", lvl, param.c_str(), e.value);
                out << buf;
            }
            return 0;
        }

        if (bench->parsed()) {
            ExperimentConfig cfg = experiment_config_from_json(read_json_file(config_path));
            if (jobs) cfg.jobs = *jobs;
            if (pairs_override) cfg.pairs = *pairs_override;
            validate(cfg);
            print_config(out, to_json(cfg));
            const ExperimentReport report = run_experiment(cfg);
            const fs::path dir(out_dir);
            fs::create_directories(dir);
            {
                std::ofstream f = open_out(dir / "runs.csv");
                write_runs_csv(report, f);
            }
            {
                std::ofstream f = open_out(dir / "summary.csv");
                write_summary_csv(report, f);
            }
            write_json_file(to_json(report), dir / "report.json");
            write_summary_csv(report, out);
            return 0;
        }

        if (exp->parsed()) {
            RegistrationConfig cfg = load_registration_config(config_path);
            ov.apply(cfg);
            if (*level < 1 || *level > cfg.levels)
                throw UsageError("--level must lie in [1, " + std::to_string(cfg.levels) + "]");
            print_config(out, to_json(cfg));
            const Volume ref = load_volume(ref_path);
            const Volume mov = load_volume(mov_path);
            const SamplingField field = sampling_field_at_level(ref, mov, cfg, *level);
            const Pyramid pyr = build_pyramid(ref, cfg.levels);
            save_volume_float(field_to_volume(field, pyr.level(*level).grid()), out_path);
            char buf[128];
            std::snprintf(buf, sizeof buf, "level %d: %zu voxels, expected selection %.3f\n", *level,
                          field.size(), field.expected_count());
            out << buf;
            return 0;
        }

        if (ph->parsed()) {
            PhantomSpec spec;
            if (!spec_path.empty()) spec = phantom_spec_from_json(read_json_file(spec_path));
            Json resolved = to_json(spec);
            resolved["seed"] = phantom_seed;
            print_config(out, resolved);
            save_training_pair(make_phantom_pair(spec, phantom_seed), out_dir);
            return 0;
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}

}  // namespace vspf
