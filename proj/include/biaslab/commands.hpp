#pragma once

// Command implementations behind the biaslab executable.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "biaslab/panel.hpp"

namespace biaslab::cli {

inline constexpr const char* kVersion = "0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInput = 2;

/// BIASLAB_SEED when set to an unsigned integer, else 0.
std::uint64_t default_seed();

struct AnalyzeOptions {
    std::string input;
    std::string out_dir;
};

struct SimulateOptions {
    std::string config_path;
    std::optional<std::uint64_t> trials;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    std::string out_dir;
};

struct TheoryCheckOptions {
    std::size_t n_instances = 200;
    std::optional<std::uint64_t> seed;
    std::string inject_fault;
    std::string out_dir;
};

struct SynthOptions {
    std::string config_path;
    std::optional<std::string> proxy_error;
    std::optional<std::string> pollutants;
    std::optional<std::size_t> n_units;
    std::optional<std::size_t> n_years;
};

struct ValidatePanelOptions {
    std::string data_path;
    bool synthetic = false;
    SynthOptions synth;
    std::string combos = "all";
    std::string crops;
    std::size_t bootstrap = 200;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    std::string exclude_control = "CO";
    /// Test hook: replicates reuse the original units.
    bool identity_resample = false;
    std::string out_dir;
};

struct SynthPanelOptions {
    SynthOptions synth;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
};

/// Each command prints a human summary to `out`, diagnostics to `err`, and
/// returns an exit code. Result files are byte-identical across reruns; the
/// wall clock goes only into manifest.json.
int cmd_analyze(const AnalyzeOptions& opt, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateOptions& opt, std::ostream& out, std::ostream& err);
int cmd_theory_check(const TheoryCheckOptions& opt, std::ostream& out, std::ostream& err);
int cmd_validate_panel(const ValidatePanelOptions& opt, std::ostream& out, std::ostream& err);
int cmd_synth_panel(const SynthPanelOptions& opt, std::ostream& out, std::ostream& err);

/// "all" or comma-separated MAIN:CONTROL pairs. Throws PreconditionViolated
/// when main equals control, UnknownPollutant on bad keys.
std::vector<std::pair<panel::Pollutant, panel::Pollutant>> parse_combo_spec(const std::string& spec);

/// Parses argv and dispatches to a command.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace biaslab::cli
