#pragma once

// Monte Carlo study of bias directions over random covariance structures of
// (Z, X, W) generated from a Berkson–classical mixture error model.

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "biaslab/assumptions.hpp"
#include "biaslab/bias.hpp"
#include "biaslab/random.hpp"

namespace biaslab::montecarlo {

using linalg::Index;
using linalg::SymMatrix;
using linalg::Vector;

struct SimConfig {
    std::uint64_t n_trials = 100000;
    std::uint64_t seed = 0;
    Index p = 5;
    Index d = 5;
    double wishart_err_scale = 1.0 / 3.0;
    double wishart_err_dof = 10.0;
    double latent_dof = 10.0;
    double latent_offdiag = 0.2;
    double gamma_shape = 1.4;
    double gamma_rate = 1.6;
    Index n_null_pollutants = 2;
    int max_retries = 100;
    /// Count Z^(p) among the pollutants when averaging pairwise correlations.
    bool include_measured_pollutant_in_rho_bar = true;
    unsigned threads = 1;

    /// Throws PreconditionViolated on an invalid configuration.
    void validate() const;
};

/// Wishart(scale, dof) draw by Bartlett decomposition.
SymMatrix sample_wishart(const SymMatrix& scale, double dof, Rng& rng);

/// β_Z: standard normal for the p − 1 non-pollutant controls and
/// −Gamma(shape, rate) for Z^(p). β_X: −Gamma draws, last n_null zero.
bias::CoefficientVector sample_coefficients(const SimConfig& config, Rng& rng);

struct Structure {
    bias::CovarianceBlocks blocks;
    SymMatrix cov_zx;
};

/// Latent-plus-error covariance of (Z, X, W): X = L_X + U_b, W = L_X + U_c.
/// Redraws up to max_retries times when a required block is not PD, then
/// throws GenerationFailed.
Structure generate_structure(const SimConfig& config, Rng& rng);

/// Scale matrix of the latent Wishart: identity over the p − 1 controls and
/// an equicorrelation block over the d + 1 pollutants.
SymMatrix latent_scale(const SimConfig& config);

inline constexpr std::size_t kPhenomena = 5;
inline constexpr std::size_t kBins = 8;
inline constexpr std::size_t kRSquaredBins = 20;

enum class Stratum : std::size_t {
    kAll = 0,
    kPairwisePcPlus = 1,
    kWeakPartialPcPlus = 2,
    kPairwisePartialPcPlus = 3,
};
inline constexpr std::size_t kStrata = 4;

const char* stratum_name(Stratum s);
const char* phenomenon_name(std::size_t phenomenon);
/// Human-readable interval label, e.g. "(0.4,0.5]".
std::string bin_label(std::size_t bin);

/// ρ̄ < −0.1 → 0; six width-0.1 bins (−0.1, 0], …, (0.4, 0.5] → 1..6; > 0.5 → 7.
std::size_t rho_bin(double rho_bar);

struct TrialOutcome {
    /// Strict versions: value < −tol (|ovb| > |meb| for phenomenon 5).
    std::array<bool, kPhenomena> phen{};
    /// Weak versions: value <= tol (|ovb| >= |meb| for phenomenon 5).
    std::array<bool, kPhenomena> phen_weak{};
    double avg_rho = 0.0;
    bool pairwise_pc_plus = false;
    bool weak_partial_pc_plus = false;
    bool pairwise_partial_pc_plus = false;
    Vector r_squared;
    /// Measured-pollutant OVB, kept for the sign check under Weak Partial PC+.
    double ovb_measured = 0.0;
};

/// Evaluates one trial from its own RNG substream. Returns nullopt when the
/// structure could not be generated.
std::optional<TrialOutcome> run_trial(const SimConfig& config, std::uint64_t trial_index);

/// Evaluates phenomena and assumptions on a given structure and coefficients.
TrialOutcome evaluate_trial(const SimConfig& config, const Structure& structure,
                            const bias::CoefficientVector& beta);

struct PhenomenonCounts {
    std::uint64_t n = 0;
    std::array<std::uint64_t, kPhenomena> strict{};
    std::array<std::uint64_t, kPhenomena> weak{};

    double frequency(std::size_t phenomenon) const;
    /// sqrt(p̂(1 − p̂)/n) for the strict frequency.
    double standard_error(std::size_t phenomenon) const;

    void add(const TrialOutcome& outcome);
    void merge(const PhenomenonCounts& other);
    friend bool operator==(const PhenomenonCounts&, const PhenomenonCounts&) = default;
};

struct SimTally {
    std::uint64_t n_requested = 0;
    std::uint64_t n_completed = 0;
    std::uint64_t generation_failures = 0;
    /// Weak Partial PC+ trials with measured-pollutant OVB > tol.
    std::uint64_t weak_partial_violations = 0;
    std::array<PhenomenonCounts, kStrata> strata{};
    std::array<PhenomenonCounts, kBins> bins{};
    std::array<std::uint64_t, kRSquaredBins> r_squared_hist{};

    const PhenomenonCounts& stratum(Stratum s) const
    {
        return strata[static_cast<std::size_t>(s)];
    }
    double prevalence(Stratum s) const;

    void add(const TrialOutcome& outcome);
    void merge(const SimTally& other);
    friend bool operator==(const SimTally&, const SimTally&) = default;
};

SimTally run_experiment(const SimConfig& config);

/// Frequencies by stratum as a fixed-width text table.
std::string format_table(const SimTally& tally);

} // namespace biaslab::montecarlo
