#pragma once

// JSON and CSV encodings of library inputs and results.

#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "biaslab/assumptions.hpp"
#include "biaslab/bias.hpp"
#include "biaslab/montecarlo.hpp"
#include "biaslab/panel.hpp"

namespace biaslab::io {

using json = nlohmann::json;

/// Input of the analyze command. Either full blocks
///   {"A","B","C","D","F","G","beta_Z","beta_X"}
/// or classical uncorrelated error
///   {"A","B","D","cume_error","beta_Z","beta_X"}.
/// Optional "pollutant_indices" (into Cov(Z,X)) and "measured_pollutant"
/// (index within Z) select the pollutant set for the assumption profile;
/// by default the pollutants are X.
struct AnalyzeInput {
    bias::CovarianceBlocks blocks;
    bias::CoefficientVector beta;
    std::optional<bias::CumeError> cume;
    assumptions::PollutantLayout layout;
};

/// Throws SchemaError on structural problems.
AnalyzeInput parse_analyze_input(const json& j);

json to_json(const linalg::Vector& v);
json to_json(const linalg::RectMatrix& m);
json to_json(const linalg::SymMatrix& m);
json to_json(const bias::BiasReport& report);
json to_json(const assumptions::AssumptionProfile& profile);

json to_json(const montecarlo::SimConfig& config);
/// Throws SchemaError. Missing keys keep their defaults.
montecarlo::SimConfig sim_config_from_json(const json& j, montecarlo::SimConfig base = {});
json to_json(const montecarlo::SimTally& tally);
/// One row per stratum x phenomenon and one per bin x phenomenon.
void write_tally_csv(std::ostream& out, const montecarlo::SimTally& tally);

json to_json(const panel::RegressionFit& fit);
json to_json(const panel::Combo& combo);
json to_json(const panel::TripleResult& result);
json to_json(const panel::SummaryStats& stats);
json to_json(const panel::BootstrapSummary& summary);
/// Replicate index, subset flag and the six statistics per row.
void write_replicates_csv(std::ostream& out, const panel::BootstrapSummary& summary);

json to_json(const panel::SynthConfig& config);
panel::SynthConfig synth_config_from_json(const json& j, panel::SynthConfig base = {});
/// Ground truth of a synthetic panel: true β, generator covariance, scales
/// and units.
json synth_manifest(const panel::SynthConfig& config, std::uint64_t seed,
                    const panel::SynthPanel& synth);

/// %.17g.
std::string format_double(double v);

/// Reads and parses a JSON file; throws SchemaError.
json read_json_file(const std::string& path);
/// Writes `j` with two-space indentation and a trailing newline.
void write_json_file(const std::string& path, const json& j);

} // namespace biaslab::io
