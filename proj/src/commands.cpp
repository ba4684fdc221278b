#include "biaslab/commands.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "biaslab/assumptions.hpp"
#include "biaslab/errors.hpp"
#include "biaslab/io.hpp"
#include "biaslab/montecarlo.hpp"
#include "biaslab/random.hpp"
#include "biaslab/theory.hpp"

namespace biaslab::cli {

namespace fs = std::filesystem;
using io::json;
using linalg::Index;
using linalg::Vector;

std::uint64_t default_seed()
{
    const char* env = std::getenv("BIASLAB_SEED");
    if (env == nullptr || *env == '\0') {
        return 0;
    }
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') {
        return 0;
    }
    return v;
}

namespace {

constexpr const char* kManifestName = "manifest.json";

std::string utc_now()
{
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string percent(double fraction)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * fraction);
    return buf;
}

/// Collects output files and writes manifest.json last.
class OutputDir {
public:
    explicit OutputDir(std::string dir) : dir_(std::move(dir))
    {
        if (!dir_.empty()) {
            std::error_code ec;
            fs::create_directories(dir_, ec);
            if (ec) {
                throw SchemaError("cannot create output directory '" + dir_ + "': " + ec.message());
            }
        }
    }

    bool enabled() const { return !dir_.empty(); }

    void write_json(const std::string& name, json j)
    {
        j["manifest"] = kManifestName;
        io::write_json_file(path(name), j);
        files_.push_back(name);
    }

    template <class Writer>
    void write_text(const std::string& name, Writer&& writer)
    {
        std::ofstream out(path(name));
        if (!out) {
            throw SchemaError("cannot write '" + path(name) + "'");
        }
        writer(out);
        files_.push_back(name);
    }

    void write_manifest(const std::string& command, const json& config, std::uint64_t seed,
                        double seconds)
    {
        json m = {{"command", command},
                  {"config", config},
                  {"seed", seed},
                  {"version", kVersion},
                  {"wall_clock_utc", utc_now()},
                  {"elapsed_seconds", seconds},
                  {"outputs", files_}};
        io::write_json_file(path(kManifestName), m);
    }

private:
    std::string path(const std::string& name) const { return (fs::path(dir_) / name).string(); }

    std::string dir_;
    std::vector<std::string> files_;
};

class Stopwatch {
public:
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Maps library errors to exit codes.
template <class Body>
int guarded(std::ostream& err, Body&& body)
{
    try {
        return body();
    } catch (const NotPositiveDefinite& e) {
        err << "error: " << e.what() << " (offending submatrix: " << e.what_matrix() << ")\n";
        return kExitInput;
    } catch (const SchemaError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const UnknownPollutant& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const PreconditionViolated& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

panel::SynthConfig build_synth_config(const SynthOptions& opt)
{
    panel::SynthConfig cfg;
    if (!opt.config_path.empty()) {
        cfg = io::synth_config_from_json(io::read_json_file(opt.config_path));
    }
    if (opt.proxy_error) {
        cfg.proxy_error = panel::parse_proxy_error(*opt.proxy_error);
    }
    if (opt.pollutants) {
        cfg.pollutants.clear();
        for (const auto& key : split(*opt.pollutants, ',')) {
            cfg.pollutants.push_back(panel::parse_pollutant(key));
        }
    }
    if (opt.n_units) {
        cfg.n_units = *opt.n_units;
    }
    if (opt.n_years) {
        cfg.n_years = *opt.n_years;
    }
    cfg.validate();
    return cfg;
}

/// Synthetic data draws its own stream so it never shares substreams with
/// the bootstrap.
std::uint64_t data_seed(std::uint64_t seed)
{
    return splitmix64(seed ^ 0xda7a5eedULL);
}

} // namespace

std::vector<std::pair<panel::Pollutant, panel::Pollutant>> parse_combo_spec(const std::string& spec)
{
    std::vector<std::pair<panel::Pollutant, panel::Pollutant>> out;
    if (spec.empty() || spec == "all") {
        return out;
    }
    for (const auto& item : split(spec, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
            throw PreconditionViolated("combo '" + item + "' must be MAIN:CONTROL");
        }
        const auto main = panel::parse_pollutant(item.substr(0, colon));
        const auto control = panel::parse_pollutant(item.substr(colon + 1));
        if (main == control) {
            throw PreconditionViolated("combo '" + item + "': main and control must differ");
        }
        out.emplace_back(main, control);
    }
    return out;
}

int cmd_analyze(const AnalyzeOptions& opt, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const Stopwatch clock;
        const io::AnalyzeInput in = io::parse_analyze_input(io::read_json_file(opt.input));
        in.blocks.validate();
        const bias::BiasReport report =
            in.cume ? bias::analyze_cume(in.blocks.A, in.blocks.B, in.blocks.D, *in.cume, in.beta)
                    : bias::analyze(in.blocks, in.beta);
        Vector pollutant_beta(static_cast<Index>(in.layout.pollutant_indices.size()));
        const Vector stacked = in.beta.stacked();
        for (std::size_t i = 0; i < in.layout.pollutant_indices.size(); ++i) {
            pollutant_beta[static_cast<Index>(i)] = stacked[in.layout.pollutant_indices[i]];
        }
        const auto profile =
            assumptions::evaluate_profile(in.blocks.cov_zx(), pollutant_beta, in.layout);

        json result = {{"input", fs::path(opt.input).filename().string()},
                       {"p", in.blocks.p()},
                       {"d", in.blocks.d()},
                       {"report", io::to_json(report)},
                       {"assumption_profile", io::to_json(profile)}};
        OutputDir dir(opt.out_dir);
        if (dir.enabled()) {
            dir.write_json("report.json", result);
            dir.write_manifest("analyze", {{"input", opt.input}}, 0, clock.seconds());
        }
        out << result.dump(2) << '\n';
        return kExitOk;
    });
}

int cmd_simulate(const SimulateOptions& opt, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const Stopwatch clock;
        montecarlo::SimConfig cfg;
        cfg.seed = default_seed();
        if (!opt.config_path.empty()) {
            cfg = io::sim_config_from_json(io::read_json_file(opt.config_path), cfg);
        }
        if (opt.trials) {
            cfg.n_trials = *opt.trials;
        }
        if (opt.seed) {
            cfg.seed = *opt.seed;
        }
        cfg.threads = opt.threads;
        cfg.validate();

        const montecarlo::SimTally tally = montecarlo::run_experiment(cfg);
        out << montecarlo::format_table(tally);

        OutputDir dir(opt.out_dir);
        if (dir.enabled()) {
            dir.write_json("simulate.json", {{"config", io::to_json(cfg)}, {"tally", io::to_json(tally)}});
            dir.write_text("simulate.csv", [&](std::ostream& f) { io::write_tally_csv(f, tally); });
            json echo = io::to_json(cfg);
            echo["threads"] = cfg.threads;
            dir.write_manifest("simulate", echo, cfg.seed, clock.seconds());
        }
        return kExitOk;
    });
}

int cmd_theory_check(const TheoryCheckOptions& opt, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const Stopwatch clock;
        theory::TheoryConfig cfg;
        cfg.n_instances = opt.n_instances;
        cfg.seed = opt.seed.value_or(default_seed());
        if (opt.inject_fault == "flip_omega_sign") {
            cfg.flip_omega_sign = true;
        } else if (!opt.inject_fault.empty()) {
            throw PreconditionViolated("unknown fault '" + opt.inject_fault + "'");
        }
        const theory::TheoryReport report = theory::run_theory_battery(cfg);

        json props = json::array();
        for (const auto& p : report.properties) {
            out << (p.failed == 0 ? "PASS " : "FAIL ") << p.name << " (" << p.checked
                << " checked, " << p.failed << " failed)";
            if (p.failed > 0) {
                out << ": " << p.first_failure;
            }
            out << '\n';
            props.push_back({{"name", p.name},
                             {"checked", p.checked},
                             {"failed", p.failed},
                             {"first_failure", p.first_failure}});
        }
        const json result = {{"n_instances", report.n_instances},
                             {"seed", report.seed},
                             {"fault", opt.inject_fault},
                             {"passed", report.passed()},
                             {"failures", report.failed_properties()},
                             {"properties", std::move(props)}};
        OutputDir dir(opt.out_dir);
        if (dir.enabled()) {
            dir.write_json("theory.json", result);
            dir.write_manifest("theory-check",
                               {{"n_instances", cfg.n_instances}, {"fault", opt.inject_fault}},
                               cfg.seed, clock.seconds());
        }
        if (!report.passed()) {
            for (const auto& name : report.failed_properties()) {
                err << "violated property: " << name << '\n';
            }
            return kExitFailure;
        }
        return kExitOk;
    });
}

int cmd_validate_panel(const ValidatePanelOptions& opt, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const Stopwatch clock;
        const std::uint64_t seed = opt.seed.value_or(default_seed());
        if (opt.synthetic == !opt.data_path.empty()) {
            throw PreconditionViolated("give exactly one of --data or --synthetic");
        }
        const auto pairs = parse_combo_spec(opt.combos);

        panel::PanelDataset data;
        json synthetic = nullptr;
        json echo = {{"combos", opt.combos},
                     {"crops", opt.crops},
                     {"bootstrap", opt.bootstrap},
                     {"threads", opt.threads},
                     {"exclude_control", opt.exclude_control},
                     {"identity_resample", opt.identity_resample}};
        if (opt.synthetic) {
            const panel::SynthConfig cfg = build_synth_config(opt.synth);
            panel::SynthPanel synth = panel::synth_panel(cfg, data_seed(seed));
            synthetic = io::synth_manifest(cfg, data_seed(seed), synth);
            data = std::move(synth.data);
            echo["synthetic"] = io::to_json(cfg);
        } else {
            data = panel::read_panel_csv_file(opt.data_path);
            echo["data"] = opt.data_path;
        }

        std::vector<std::string> crops = opt.crops.empty() ? data.crops() : split(opt.crops, ',');
        std::vector<panel::Combo> combos;
        if (pairs.empty()) {
            std::vector<panel::Pollutant> present;
            for (auto p : panel::kAllPollutants) {
                const auto k = static_cast<std::size_t>(p);
                for (const auto& r : data.rows) {
                    if (r.monitor[k]) {
                        present.push_back(p);
                        break;
                    }
                }
            }
            combos = panel::all_combos(present, crops);
        } else {
            for (const auto& crop : crops) {
                for (const auto& [m, c] : pairs) {
                    combos.push_back({m, c, crop});
                }
            }
        }
        if (combos.empty()) {
            throw SchemaError("no (main, control, crop) combinations to run");
        }

        panel::BootstrapConfig bcfg;
        bcfg.n_reps = opt.bootstrap;
        bcfg.seed = seed;
        bcfg.threads = opt.threads;
        bcfg.identity_resample = opt.identity_resample;
        if (!opt.exclude_control.empty() && opt.exclude_control != "none") {
            std::set<panel::Pollutant> excluded;
            for (const auto& key : split(opt.exclude_control, ',')) {
                excluded.insert(panel::parse_pollutant(key));
            }
            bcfg.subset = [excluded](const panel::Combo& c) { return !excluded.count(c.control); };
        }
        const panel::BootstrapSummary summary = panel::cluster_bootstrap(data, combos, bcfg);

        for (const auto& c : summary.failed_combos) {
            err << "warning: combo " << panel::pollutant_key(c.main) << ":"
                << panel::pollutant_key(c.control) << " (" << c.crop
                << ") has insufficient data and was skipped\n";
        }
        auto print = [&](const char* label, const panel::SummaryStats& s,
                         const std::array<double, panel::kSummaryStats>& ns) {
            out << label << " (" << s.n_combos << " combos)\n";
            for (std::size_t k = 0; k < panel::kSummaryStats; ++k) {
                out << "  " << panel::summary_stat_name(k) << " = "
                    << io::format_double(panel::summary_stat_value(s, k))
                    << "  not supporting: " << percent(ns[k]) << "\n";
            }
        };
        print("all combos", summary.point_all, summary.not_supporting_all);
        print("subset", summary.point_subset, summary.not_supporting_subset);

        OutputDir dir(opt.out_dir);
        if (dir.enabled()) {
            json result = io::to_json(summary);
            result["seed"] = seed;
            result["synthetic"] = synthetic;
            dir.write_json("validation.json", std::move(result));
            dir.write_text("replicates.csv",
                           [&](std::ostream& f) { io::write_replicates_csv(f, summary); });
            dir.write_manifest("validate-panel", echo, seed, clock.seconds());
        }
        return kExitOk;
    });
}

int cmd_synth_panel(const SynthPanelOptions& opt, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const Stopwatch clock;
        if (opt.out_dir.empty()) {
            throw PreconditionViolated("synth-panel needs --out-dir");
        }
        const std::uint64_t seed = opt.seed.value_or(default_seed());
        const panel::SynthConfig cfg = build_synth_config(opt.synth);
        const panel::SynthPanel synth = panel::synth_panel(cfg, seed);

        OutputDir dir(opt.out_dir);
        dir.write_text("panel.csv", [&](std::ostream& f) { panel::write_panel_csv(f, synth.data); });
        dir.write_json("panel_manifest.json", io::synth_manifest(cfg, seed, synth));
        dir.write_manifest("synth-panel", io::to_json(cfg), seed, clock.seconds());
        out << "wrote " << synth.data.rows.size() << " rows\n";
        return kExitOk;
    });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Omitted-variable and measurement-error bias toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    AnalyzeOptions analyze;
    auto* a = app.add_subcommand("analyze", "Biases for a covariance-block JSON file");
    a->add_option("input", analyze.input, "Blocks and coefficients JSON")->required();
    a->add_option("--out-dir", analyze.out_dir, "Write report.json and manifest.json here");

    SimulateOptions simulate;
    auto* s = app.add_subcommand("simulate", "Monte Carlo study of bias directions");
    s->add_option("--config", simulate.config_path, "SimConfig JSON");
    s->add_option("--trials", simulate.trials, "Number of trials");
    s->add_option("--seed", simulate.seed, "Seed (default BIASLAB_SEED or 0)");
    s->add_option("--threads", simulate.threads, "Worker threads")->check(CLI::PositiveNumber);
    s->add_option("--out-dir", simulate.out_dir, "Write JSON, CSV and manifest here");

    TheoryCheckOptions theory_opt;
    auto* t = app.add_subcommand("theory-check", "Property battery on random instances");
    t->add_option("--instances", theory_opt.n_instances, "Number of random instances");
    t->add_option("--seed", theory_opt.seed, "Seed (default BIASLAB_SEED or 0)");
    t->add_option("--inject-fault", theory_opt.inject_fault, "Test hook: flip_omega_sign");
    t->add_option("--out-dir", theory_opt.out_dir, "Write theory.json and manifest here");

    auto add_synth = [](CLI::App* cmd, SynthOptions& so) {
        cmd->add_option("--synth-config", so.config_path, "SynthConfig JSON");
        cmd->add_option("--proxy-error", so.proxy_error, "none, classical or berkson");
        cmd->add_option("--pollutants", so.pollutants, "Comma-separated pollutant keys");
        cmd->add_option("--units", so.n_units, "Number of units");
        cmd->add_option("--years", so.n_years, "Number of years");
    };

    ValidatePanelOptions validate;
    auto* v = app.add_subcommand("validate-panel", "Three-regression bias estimates with bootstrap");
    auto* data_opt = v->add_option("--data", validate.data_path, "Panel CSV");
    auto* synth_flag = v->add_flag("--synthetic", validate.synthetic, "Use a synthetic panel");
    data_opt->excludes(synth_flag);
    add_synth(v, validate.synth);
    v->add_option("--combos", validate.combos, "all or MAIN:CONTROL,...")
        ->check([](const std::string& spec) {
            try {
                parse_combo_spec(spec);
            } catch (const Error& e) {
                return std::string(e.what());
            }
            return std::string();
        });
    v->add_option("--crops", validate.crops, "Comma-separated crops (default all)");
    v->add_option("--bootstrap", validate.bootstrap, "Bootstrap replicates")
        ->check(CLI::PositiveNumber);
    v->add_option("--seed", validate.seed, "Seed (default BIASLAB_SEED or 0)");
    v->add_option("--threads", validate.threads, "Worker threads")->check(CLI::PositiveNumber);
    v->add_option("--exclude-control", validate.exclude_control,
                  "Controls left out of the subset summary (default CO; 'none')");
    v->add_flag("--identity-resample", validate.identity_resample,
                "Test hook: every replicate reuses the original units");
    v->add_option("--out-dir", validate.out_dir, "Write JSON, CSV and manifest here");

    SynthPanelOptions synth;
    auto* sp = app.add_subcommand("synth-panel", "Write a synthetic panel CSV and manifest");
    add_synth(sp, synth.synth);
    sp->add_option("--seed", synth.seed, "Seed (default BIASLAB_SEED or 0)");
    sp->add_option("--out-dir", synth.out_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    }

    if (a->parsed()) {
        return cmd_analyze(analyze, out, err);
    }
    if (s->parsed()) {
        return cmd_simulate(simulate, out, err);
    }
    if (t->parsed()) {
        return cmd_theory_check(theory_opt, out, err);
    }
    if (v->parsed()) {
        return cmd_validate_panel(validate, out, err);
    }
    return cmd_synth_panel(synth, out, err);
}

} // namespace biaslab::cli
