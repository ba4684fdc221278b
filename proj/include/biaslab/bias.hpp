#pragma once

// Asymptotic omitted-variable and measurement-error biases of OLS
// coefficients when error-prone covariates X are omitted or replaced by
// proxies W.

#include <optional>

#include "biaslab/linalg.hpp"

namespace biaslab::bias {

using linalg::Index;
using linalg::RectMatrix;
using linalg::SymMatrix;
using linalg::Vector;

/// Joint covariance of (Z, X, W) split into blocks
///
///     Cov([Z; X; W]) = [ A   B   C ]
///                      [ Bᵀ  D   F ]
///                      [ Cᵀ  Fᵀ  G ]
///
/// with Z ∈ R^p measured without error, X ∈ R^d the true error-prone
/// covariates and W ∈ R^d their proxies.
struct CovarianceBlocks {
    SymMatrix A;  // Cov(Z)
    RectMatrix B; // Cov(Z, X), p x d
    RectMatrix C; // Cov(Z, W), p x d
    SymMatrix D;  // Cov(X)
    RectMatrix F; // Cov(X, W), d x d
    SymMatrix G;  // Cov(W)

    Index p() const noexcept { return A.dim(); }
    Index d() const noexcept { return D.dim(); }

    /// Throws DimensionMismatch on inconsistent shapes.
    void check_shapes() const;
    /// Shapes plus positive definiteness of Cov(Z,X) and Cov(Z,W); the
    /// NotPositiveDefinite error names the failing submatrix.
    void validate() const;

    SymMatrix cov_zx() const;
    SymMatrix cov_zw() const;
    /// Full (p+2d) x (p+2d) matrix.
    SymMatrix assembled() const;
};

struct CoefficientVector {
    Vector beta_Z;
    Vector beta_X;

    Vector stacked() const;
};

/// Classical, uncorrelated measurement error: W = X + E with
/// Cov(E) = diag(a), a >= 0.
struct CumeError {
    Vector a;

    void validate(Index d) const;
    SymMatrix covariance() const { return SymMatrix::diagonal(a); }
};

/// Ω = (Σ_E + D − Bᵀ A⁻¹ B)⁻¹ and the split of the X-block MEB into an
/// attenuation term −Ω_jj a_j β_j and an additive cross term.
struct OmegaDecomposition {
    SymMatrix omega;
    Vector attenuation;
    Vector additive;
};

struct BiasReport {
    Vector ovb;      // length p
    Vector meb_full; // length p + d
    Vector meb_Z;    // length p, from its own closed form
    std::optional<OmegaDecomposition> cume;
};

/// A⁻¹ B β_X.
Vector ovb(const CovarianceBlocks& blocks, const CoefficientVector& beta);

/// Σ_M⁻¹ Σ_{M,E} β with Σ_M = Cov(Z,W) and Σ_{M,E} = [0 B−C; 0 Fᵀ−G].
Vector meb_full(const CovarianceBlocks& blocks, const CoefficientVector& beta);

/// (A − C G⁻¹ Cᵀ)⁻¹ (B − C G⁻¹ Fᵀ) β_X.
Vector meb_z(const CovarianceBlocks& blocks, const CoefficientVector& beta);

CovarianceBlocks cume_blocks(const SymMatrix& A, const RectMatrix& B, const SymMatrix& D,
                             const CumeError& err);

OmegaDecomposition omega_and_decomposition(const SymMatrix& A, const RectMatrix& B,
                                           const SymMatrix& D, const CumeError& err,
                                           const Vector& beta_X);

BiasReport analyze(const CovarianceBlocks& blocks, const CoefficientVector& beta);
/// As above on cume_blocks(A, B, D, err), with the Ω decomposition filled in.
BiasReport analyze_cume(const SymMatrix& A, const RectMatrix& B, const SymMatrix& D,
                        const CumeError& err, const CoefficientVector& beta);

enum class Sign { kNegative, kZero, kPositive };

/// Negative below −kSignTolerance, zero within the band, positive above.
Sign classify(double value) noexcept;

// ---------------------------------------------------------------------------
// Analytic OVB-versus-MEB comparison cases.

/// d = 1 with no partial correlation between W and Z given X:
/// meb_Z = ϱ · ovb with
/// ϱ = (1 − ρ²)(1 + q / (σ_X²/ρ² − q)), q = Bᵀ A⁻¹ B.
/// Throws PreconditionViolated unless σ_X² > q.
double case2_rho_factor(const SymMatrix& A, const Vector& B, double sigma_X, double rho_XW);

/// Blocks for the setting above: C = (σ_W ρ/σ_X) B, F = σ_X σ_W ρ, G = σ_W².
CovarianceBlocks case2_blocks(const SymMatrix& A, const Vector& B, double sigma_X,
                              double sigma_W, double rho_XW);

struct Case3Report {
    double ovb = 0.0;
    double meb = 0.0;
    /// ρ_XW > |ρ_ZW| > 0, sign(ρ_ZW) = sign(ρ_ZX) and |ρ_ZX| >= |ρ_ZW|.
    bool dominance_guaranteed = false;
};

/// p = d = 1 closed forms. Throws NotPositiveDefinite if the implied 3x3
/// correlation matrix of (Z, X, W) is not PD.
Case3Report case3_scalar_report(double sigma_Z, double sigma_X, double sigma_W, double rho_ZX,
                                double rho_ZW, double rho_XW, double beta_X);

/// Builds the p = d = 1 blocks used by case3_scalar_report.
CovarianceBlocks case3_blocks(double sigma_Z, double sigma_X, double sigma_W, double rho_ZX,
                              double rho_ZW, double rho_XW);

struct ClassicalLimit {
    Vector meb_Z;
    Vector ovb;
};

/// meb_Z and ovb under classical error with Σ_E = scale · I.
ClassicalLimit classical_limit_check(const SymMatrix& A, const RectMatrix& B,
                                     const SymMatrix& D, const Vector& beta_X, double scale);

struct ScalarBiases {
    double ovb = 0.0;
    double meb = 0.0;
};

/// W = X + κZ with p = d = 1, where meb = −κ β_X regardless of (A, B, D).
ScalarBiases case6_counterexample(double kappa, double A, double B, double D, double beta_X);

} // namespace biaslab::bias
