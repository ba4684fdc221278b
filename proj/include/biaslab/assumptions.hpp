#pragma once

// Population-level predicates for the sign assumptions on pollutant
// coefficients and pollutant (partial) correlations.

#include <optional>
#include <span>
#include <vector>

#include "biaslab/linalg.hpp"

namespace biaslab::assumptions {

using linalg::Index;
using linalg::SymMatrix;
using linalg::Vector;

/// No Benefit: every pollutant coefficient <= kSignTolerance.
bool check_no_benefit(const Vector& beta_pollutants);

/// Pairwise PC+: Cov(Z,X)[i][j] > kSignTolerance for every distinct pair in
/// `pollutant_indices`.
bool check_pairwise_pc_plus(const SymMatrix& cov_zx, std::span<const Index> pollutant_indices);

/// Partial correlation of Z^(k) and X^(j) given the other p − 1 entries of Z,
/// one value per j. `cov_zx` is the (p+d) covariance of (Z, X).
std::vector<double> weak_partial_correlations(const SymMatrix& cov_zx, Index p, Index k);

/// Weak Partial PC+ for the measured pollutant Z^(k): all values above are
/// > kSignTolerance.
bool check_weak_partial_pc_plus(const SymMatrix& cov_zx, Index p, Index k);

/// Pairwise Partial PC+ over explicit pollutant indices, conditioning on all
/// remaining entries of (Z, X).
bool check_pairwise_partial_pc_plus(const SymMatrix& cov_zx,
                                    std::span<const Index> pollutant_indices);

/// Pairwise Partial PC+ with the pollutant block taken as X, i.e. indices
/// p .. p+d−1.
bool check_pairwise_partial_pc_plus(const SymMatrix& cov_zx, Index p);

/// Mean correlation over all distinct pairs in `indices`.
double average_pairwise_correlation(const SymMatrix& cov, std::span<const Index> indices);

struct AssumptionProfile {
    bool no_benefit = false;
    bool pairwise_pc_plus = false;
    bool weak_partial_pc_plus = false;
    bool pairwise_partial_pc_plus = false;
    double avg_pairwise_pollutant_corr = 0.0;
};

struct PollutantLayout {
    Index p = 0;
    /// Pollutants among (Z, X) by index into Cov(Z,X).
    std::vector<Index> pollutant_indices;
    /// Index within Z of the perfectly measured pollutant, if any (Weak
    /// Partial PC+ is false when absent).
    std::optional<Index> measured_pollutant;
};

/// Pollutants are X plus, when `measured` is set, Z^(measured).
PollutantLayout default_layout(Index p, Index d, std::optional<Index> measured);

AssumptionProfile evaluate_profile(const SymMatrix& cov_zx, const Vector& beta_pollutants,
                                   const PollutantLayout& layout);

} // namespace biaslab::assumptions
