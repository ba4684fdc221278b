#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "biaslab/commands.hpp"
#include "biaslab/errors.hpp"

namespace fs = std::filesystem;
using namespace biaslab;
using json = nlohmann::json;

namespace {

struct Result {
    int code = 0;
    std::string out;
    std::string err;
};

Result run_cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "biaslab");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string fixture(const std::string& name)
{
    return std::string(BIASLAB_FIXTURES) + "/" + name;
}

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("biaslab_test_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const fs::path& p)
{
    return json::parse(slurp(p));
}

} // namespace

TEST_CASE("analyze on the correlated classical error fixture")
{
    const fs::path dir = scratch("case5");
    const Result r = run_cli({"analyze", fixture("case5.json"), "--out-dir", dir.string()});
    REQUIRE(r.code == cli::kExitOk);
    const json report = read_json(dir / "report.json")["report"];
    CHECK(std::abs(report["ovb"][0].get<double>()) <= 1e-12);
    CHECK(std::abs(report["meb_Z"][0].get<double>() - 0.0257) <= 5e-4);
    CHECK(read_json(dir / "report.json")["manifest"] == "manifest.json");
    const json manifest = read_json(dir / "manifest.json");
    CHECK(manifest["command"] == "analyze");
    CHECK(manifest.contains("elapsed_seconds"));
    CHECK(manifest["outputs"][0] == "report.json");
}

TEST_CASE("analyze on the Berkson fixture reports zero MEB")
{
    const fs::path dir = scratch("berkson");
    REQUIRE(run_cli({"analyze", fixture("berkson.json"), "--out-dir", dir.string()}).code == 0);
    const json doc = read_json(dir / "report.json");
    for (const auto& v : doc["report"]["meb_full"]) {
        CHECK(std::abs(v.get<double>()) <= 1e-10);
    }
    CHECK(doc.contains("assumption_profile"));
}

TEST_CASE("analyze with the CUME shorthand includes the decomposition")
{
    const fs::path dir = scratch("cume");
    REQUIRE(run_cli({"analyze", fixture("cume.json"), "--out-dir", dir.string()}).code == 0);
    const json report = read_json(dir / "report.json")["report"];
    REQUIRE(report.contains("omega"));
    CHECK(report["omega"].size() == 3);
    CHECK(report["attenuation_terms"].size() == 3);
}

TEST_CASE("analyze input errors exit 2")
{
    const Result malformed = run_cli({"analyze", fixture("malformed.json")});
    CHECK(malformed.code == cli::kExitInput);
    CHECK_FALSE(malformed.err.empty());

    const Result not_pd = run_cli({"analyze", fixture("not_pd.json")});
    CHECK(not_pd.code == cli::kExitInput);
    CHECK(not_pd.err.find("positive definite") != std::string::npos);

    CHECK(run_cli({"analyze", fixture("missing.json")}).code == cli::kExitInput);
    CHECK(run_cli({"no-such-command"}).code == cli::kExitInput);
}

TEST_CASE("simulate is deterministic")
{
    const fs::path a = scratch("sim_a");
    const fs::path b = scratch("sim_b");
    REQUIRE(run_cli({"simulate", "--trials", "1000", "--seed", "7", "--out-dir", a.string()}).code == 0);
    REQUIRE(run_cli({"simulate", "--trials", "1000", "--seed", "7", "--threads", "3", "--out-dir",
                     b.string()})
                .code == 0);
    CHECK(slurp(a / "simulate.json") == slurp(b / "simulate.json"));
    CHECK(slurp(a / "simulate.csv") == slurp(b / "simulate.csv"));
    const json tally = read_json(a / "simulate.json");
    CHECK(tally["tally"]["n_completed"] == 1000);
    CHECK(tally["config"]["seed"] == 7);
}

TEST_CASE("simulate with zero trials")
{
    const fs::path dir = scratch("sim_zero");
    const Result r = run_cli({"simulate", "--trials", "0", "--out-dir", dir.string()});
    CHECK(r.code == 0);
    CHECK(read_json(dir / "simulate.json")["tally"]["n_completed"] == 0);
}

TEST_CASE("theory-check")
{
    CHECK(run_cli({"theory-check", "--instances", "50"}).code == cli::kExitOk);

    const Result empty = run_cli({"theory-check", "--instances", "0"});
    CHECK(empty.code == cli::kExitOk);

    const fs::path dir = scratch("theory_fault");
    const Result fault = run_cli({"theory-check", "--instances", "20", "--inject-fault",
                                  "flip_omega_sign", "--out-dir", dir.string()});
    CHECK(fault.code == cli::kExitFailure);
    CHECK(fault.out.find("omega_diagonal_bounds") != std::string::npos);
    const json report = read_json(dir / "theory.json");
    bool named = false;
    for (const auto& f : report["failures"]) {
        named = named || f == "omega_diagonal_bounds";
    }
    CHECK(named);

    CHECK(run_cli({"theory-check", "--inject-fault", "bogus"}).code == cli::kExitInput);
}

TEST_CASE("validate-panel argument checks")
{
    CHECK(run_cli({"validate-panel", "--synthetic", "--combos", "O3:O3"}).code == cli::kExitInput);
    CHECK(run_cli({"validate-panel", "--synthetic", "--combos", "O3:NH3"}).code == cli::kExitInput);
    CHECK(run_cli({"validate-panel"}).code == cli::kExitInput);
    CHECK_THROWS_AS(cli::parse_combo_spec("PM25:PM2.5"), PreconditionViolated);
    const auto pairs = cli::parse_combo_spec("O3:PM25,CO:NO2");
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[1].first == panel::Pollutant::kCO);
    CHECK(cli::parse_combo_spec("all").empty());
}

TEST_CASE("validate-panel on a small synthetic panel")
{
    const fs::path a = scratch("panel_a");
    const fs::path b = scratch("panel_b");
    const std::vector<std::string> args = {"validate-panel", "--synthetic", "--units", "40",
                                           "--years", "10", "--combos", "O3:PM25,NO2:SO2",
                                           "--bootstrap", "5", "--seed", "3"};
    auto with_dir = [&](const fs::path& d, const std::string& threads) {
        auto v = args;
        v.insert(v.end(), {"--threads", threads, "--out-dir", d.string()});
        return v;
    };
    REQUIRE(run_cli(with_dir(a, "1")).code == 0);
    REQUIRE(run_cli(with_dir(b, "2")).code == 0);
    CHECK(slurp(a / "validation.json") == slurp(b / "validation.json"));
    CHECK(slurp(a / "replicates.csv") == slurp(b / "replicates.csv"));
    const json v = read_json(a / "validation.json");
    CHECK(v["validation_results"].size() == 4);
    CHECK(v["bootstrap"]["n_reps"] == 5);
}

TEST_CASE("identity bootstrap via the CLI equals point estimates")
{
    const fs::path dir = scratch("panel_identity");
    REQUIRE(run_cli({"validate-panel", "--synthetic", "--units", "30", "--years", "8", "--combos",
                     "O3:PM25", "--bootstrap", "1", "--identity-resample", "--out-dir", dir.string()})
                .code == 0);
    const json v = read_json(dir / "validation.json");
    const json& point = v["point_estimate"]["all"];
    const json& stats = v["bootstrap"]["all"];
    for (const char* key : {"mean_bias_ovb_who", "mean_bias_meb_who", "mean_tstat_diff_ovb"}) {
        CHECK(stats[key]["replicates"][0] == point[key]);
    }
}

TEST_CASE("synth-panel writes a CSV that validate-panel reads")
{
    const fs::path dir = scratch("synth");
    REQUIRE(run_cli({"synth-panel", "--units", "20", "--years", "6", "--seed", "4", "--out-dir",
                     dir.string()})
                .code == 0);
    CHECK(fs::exists(dir / "panel.csv"));
    const json manifest = read_json(dir / "panel_manifest.json");
    CHECK(manifest.contains("true_beta_per_ug_m3"));

    const fs::path out = scratch("synth_validate");
    const Result r = run_cli({"validate-panel", "--data", (dir / "panel.csv").string(), "--combos",
                              "O3:CO", "--bootstrap", "2", "--out-dir", out.string()});
    CHECK(r.code == 0);
    CHECK(read_json(out / "validation.json")["validation_results"].size() == 2);
}

TEST_CASE("default seed from the environment")
{
    setenv("BIASLAB_SEED", "1234", 1);
    CHECK(cli::default_seed() == 1234);
    setenv("BIASLAB_SEED", "junk", 1);
    CHECK(cli::default_seed() == 0);
    unsetenv("BIASLAB_SEED");
    CHECK(cli::default_seed() == 0);
}
