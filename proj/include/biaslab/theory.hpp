#pragma once

// Random-instance generators and a battery of checks for the sign and
// limit results on OVB and MEB.

#include <cstdint>
#include <string>
#include <vector>

#include "biaslab/bias.hpp"
#include "biaslab/random.hpp"

namespace biaslab::theory {

using linalg::Index;
using linalg::RectMatrix;
using linalg::SymMatrix;
using linalg::Vector;

/// 0.5·I + M Mᵀ/n with M standard normal, so eigenvalues are >= 0.5.
SymMatrix random_pd(Index n, Rng& rng);

/// Blocks of a random PD (p+2d) covariance of (Z, X, W).
bias::CovarianceBlocks random_blocks(Index p, Index d, Rng& rng);

/// X = W + E with E independent of (Z, W): B = C, F = G, D = G + Cov(E).
bias::CovarianceBlocks random_berkson_blocks(Index p, Index d, Rng& rng);

/// Symmetric, strictly diagonally dominant Z-matrix.
SymMatrix random_m_matrix(Index n, Rng& rng);

/// Cov(Z,X) whose precision has a strictly negative X-block off-diagonal, so
/// every pollutant pair has positive partial correlation given the rest.
SymMatrix random_pppc_cov(Index p, Index d, Rng& rng);

struct PropertyResult {
    std::string name;
    std::size_t checked = 0;
    std::size_t failed = 0;
    std::string first_failure;
};

struct TheoryConfig {
    std::size_t n_instances = 200;
    std::uint64_t seed = 0;
    /// Test hook: negate Ω before the Omega sign checks.
    bool flip_omega_sign = false;
};

struct TheoryReport {
    std::size_t n_instances = 0;
    std::uint64_t seed = 0;
    std::vector<PropertyResult> properties;

    bool passed() const;
    std::vector<std::string> failed_properties() const;
};

/// Property names, in report order.
const std::vector<std::string>& property_names();

TheoryReport run_theory_battery(const TheoryConfig& config);

} // namespace biaslab::theory
