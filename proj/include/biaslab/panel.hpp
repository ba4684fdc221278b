#pragma once

// Fixed-effects panel regressions and the three-regression bias validation
// scheme with a unit-level cluster bootstrap.

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "biaslab/linalg.hpp"

namespace biaslab::panel {

using linalg::SymMatrix;
using linalg::Vector;

enum class Pollutant { kCO = 0, kNO2, kO3, kPM10, kPM25, kSO2 };
inline constexpr std::size_t kPollutants = 6;
inline constexpr std::size_t kWeather = 4;
inline constexpr std::array<Pollutant, kPollutants> kAllPollutants = {
    Pollutant::kCO, Pollutant::kNO2, Pollutant::kO3, Pollutant::kPM10, Pollutant::kPM25,
    Pollutant::kSO2};

/// Column key: CO, NO2, O3, PM10, PM25, SO2.
std::string_view pollutant_key(Pollutant p);
/// Case-insensitive; accepts "PM2.5" for PM25. Throws UnknownPollutant.
Pollutant parse_pollutant(std::string_view key);

/// WHO daily guideline in μg/m³.
double who_divisor(Pollutant p);
Vector who_rescale(const Vector& values, Pollutant p);
Vector who_rescale(const Vector& values, std::string_view key);

struct PanelRow {
    std::string unit_id;
    int year = 0;
    std::string crop;
    std::optional<double> yield;
    std::array<std::optional<double>, kPollutants> monitor{};
    std::array<std::optional<double>, kPollutants> proxy{};
    std::array<double, kWeather> weather{};
};

struct PanelDataset {
    std::vector<PanelRow> rows;

    /// (unit, year, crop) unique and yields positive. Throws SchemaError.
    void validate() const;
    /// Sorted distinct crop keys.
    std::vector<std::string> crops() const;
};

/// Header: unit_id,year,crop,yield,mon_<key>x6,prox_<key>x6,w1..w4.
/// Empty cell means missing. Throws SchemaError.
PanelDataset read_panel_csv(std::istream& in);
PanelDataset read_panel_csv_file(const std::string& path);
void write_panel_csv(std::ostream& out, const PanelDataset& data);

struct Regressor {
    enum class Kind { kMonitor, kProxy, kWeather };
    Kind kind = Kind::kMonitor;
    std::size_t index = 0;

    static Regressor monitor(Pollutant p) { return {Kind::kMonitor, static_cast<std::size_t>(p)}; }
    static Regressor proxy(Pollutant p) { return {Kind::kProxy, static_cast<std::size_t>(p)}; }
    static Regressor weather(std::size_t i) { return {Kind::kWeather, i}; }
    std::string name() const;
};

struct FeFormula {
    std::string crop;
    std::vector<Regressor> regressors;
    bool include_trend = true;
};

struct RegressionFit {
    std::string name;
    double coefficient = 0.0;
    double std_error = 0.0;
    double t_stat = 0.0;
    std::size_t n_obs = 0;
    std::size_t n_units = 0;
};

/// Unit fixed effects by within-unit demeaning, then OLS. Rows missing the
/// crop's yield or any regressor are dropped, as are units left with fewer
/// than two rows. Classical SEs with n_obs − k − n_units degrees of freedom.
/// One fit per regressor, followed by "trend" when included.
std::vector<RegressionFit> fe_ols(const PanelDataset& data, const FeFormula& formula);

struct Combo {
    Pollutant main = Pollutant::kO3;
    Pollutant control = Pollutant::kPM25;
    std::string crop;
};

struct TripleResult {
    Combo combo;
    RegressionFit gt;
    RegressionFit om;
    RegressionFit me;
    double ovb_hat = 0.0;
    double meb_hat = 0.0;
};

/// Ground truth, omitted-control and proxy-control fits of the main
/// pollutant's coefficient on the rows where both monitors and the crop yield
/// are present. Throws PreconditionViolated when main == control.
TripleResult run_triple(const PanelDataset& data, const Combo& combo);

/// Every ordered (main, control) pair of distinct pollutants for each crop.
std::vector<Combo> all_combos(const std::vector<Pollutant>& pollutants,
                              const std::vector<std::string>& crops);

struct SummaryStats {
    std::size_t n_combos = 0;
    std::size_t count_negative_ovb = 0;
    std::size_t count_negative_meb = 0;
    double mean_tstat_diff_ovb = 0.0;
    double mean_tstat_diff_meb = 0.0;
    /// Bias in log-yield per WHO-guideline unit of the main pollutant.
    double mean_bias_ovb_who = 0.0;
    double mean_bias_meb_who = 0.0;
};

inline constexpr std::size_t kSummaryStats = 6;
const char* summary_stat_name(std::size_t stat);
/// Statistic by index, in the order of the fields above.
double summary_stat_value(const SummaryStats& s, std::size_t stat);

using ComboFilter = std::function<bool(const Combo&)>;

SummaryStats summarize(const std::vector<TripleResult>& results, const ComboFilter& keep = {});

/// Fraction of replicates not supporting a negative bias: for counts, count
/// <= n_combos / 2; otherwise value >= 0.
double fraction_not_supporting(const std::vector<SummaryStats>& replicates, std::size_t stat);

struct BootstrapConfig {
    std::size_t n_reps = 1000;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    /// Combos kept in the subset summaries.
    ComboFilter subset;
    /// Test hook: every replicate reuses the original units.
    bool identity_resample = false;
};

struct BootstrapSummary {
    std::vector<TripleResult> point;
    std::vector<Combo> failed_combos;
    SummaryStats point_all;
    SummaryStats point_subset;
    std::vector<SummaryStats> replicates_all;
    std::vector<SummaryStats> replicates_subset;
    /// Combo fits that failed inside replicates and were skipped.
    std::uint64_t skipped_fits = 0;
    std::array<double, kSummaryStats> not_supporting_all{};
    std::array<double, kSummaryStats> not_supporting_subset{};
};

/// Resamples units with replacement; a unit drawn twice enters as two
/// distinct pseudo-units. Replicate r uses RNG substream (seed, r).
BootstrapSummary cluster_bootstrap(const PanelDataset& data, const std::vector<Combo>& combos,
                                   const BootstrapConfig& config);

enum class ProxyError { kNone, kClassical, kBerkson };
const char* proxy_error_name(ProxyError e);
ProxyError parse_proxy_error(std::string_view name);

struct SynthConfig {
    std::size_t n_units = 200;
    std::size_t n_years = 18;
    int first_year = 2000;
    std::vector<std::string> crops = {"corn", "soybean"};
    /// Pollutants present in the panel; absent ones are left empty.
    std::vector<Pollutant> pollutants = {kAllPollutants.begin(), kAllPollutants.end()};
    std::array<double, kPollutants> level = {600.0, 20.0, 80.0, 30.0, 10.0, 8.0};
    /// Within-unit standard deviation, μg/m³.
    std::array<double, kPollutants> within_sd = {400.0, 8.0, 15.0, 10.0, 4.0, 5.0};
    double within_corr = 0.4;
    double unit_sd_factor = 1.0;
    /// True coefficients per WHO-guideline unit.
    std::array<double, kPollutants> beta_who = {-0.1, -0.1, -0.1, -0.1, -0.1, -0.1};
    std::array<double, kWeather> gamma = {0.05, -0.03, 0.02, -0.04};
    double trend = 0.01;
    double unit_effect_sd = 0.3;
    double noise_sd = 0.02;
    ProxyError proxy_error = ProxyError::kClassical;
    /// Error variance as a fraction of the within-unit variance.
    double error_ratio = 0.5;
    double monitor_missing = 0.1;
    double yield_missing = 0.02;

    void validate() const;
    /// β per μg/m³.
    double beta(Pollutant p) const { return beta_who[static_cast<std::size_t>(p)] / who_divisor(p); }
};

struct SynthPanel {
    PanelDataset data;
    /// Within-unit covariance of the present pollutants' concentrations.
    SymMatrix within_cov;
    /// Error variances a_k (classical: W = X + E; Berkson: X = W + E).
    Vector error_var;
};

SynthPanel synth_panel(const SynthConfig& config, std::uint64_t seed);

} // namespace biaslab::panel
