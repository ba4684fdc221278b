#pragma once

// Dense symmetric-matrix primitives for the small (<= ~20) dimensions used
// throughout the library.

#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace biaslab::linalg {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using RectMatrix = Eigen::MatrixXd;

/// Cholesky pivots at or below this fraction of the largest diagonal entry
/// are treated as a failure of positive definiteness.
inline constexpr double kPdTolerance = 1e-10;

/// Band around zero used by every sign predicate in the library.
inline constexpr double kSignTolerance = 1e-12;

/// Dense symmetric matrix. Entries are exactly symmetric at all times.
/// A default-constructed SymMatrix is empty (dim 0) and exists only so the
/// type can live in aggregates; every factory produces dim >= 1.
class SymMatrix {
public:
    SymMatrix() = default;

    /// Throws NotSymmetric unless `m` is square and exactly symmetric.
    explicit SymMatrix(Eigen::MatrixXd m);

    /// (m + mᵀ)/2, for products that are symmetric only up to rounding.
    static SymMatrix symmetrized(const Eigen::MatrixXd& m);
    static SymMatrix identity(Index n);
    static SymMatrix diagonal(const Vector& diag);
    static SymMatrix equicorrelation(Index n, double rho);

    Index dim() const noexcept { return m_.rows(); }
    double operator()(Index i, Index j) const { return m_(i, j); }
    const Eigen::MatrixXd& dense() const noexcept { return m_; }

    /// Principal submatrix on a contiguous index range.
    SymMatrix block(Index start, Index size) const;
    /// Principal submatrix on an arbitrary ordered index set.
    SymMatrix principal(std::span<const Index> indices) const;

    SymMatrix operator+(const SymMatrix& rhs) const;
    SymMatrix operator-(const SymMatrix& rhs) const;
    SymMatrix scaled(double factor) const;

    friend bool operator==(const SymMatrix& a, const SymMatrix& b) { return a.m_ == b.m_; }

private:
    struct Unchecked {};
    SymMatrix(Eigen::MatrixXd m, Unchecked) : m_(std::move(m)) {}

    Eigen::MatrixXd m_;
};

/// Largest absolute entry.
double max_abs(const Eigen::MatrixXd& m);

/// Lower Cholesky factor L with m = L Lᵀ. `name` labels the matrix in the
/// NotPositiveDefinite error.
Eigen::MatrixXd cholesky_lower(const SymMatrix& m, std::string_view name = "matrix");

bool is_positive_definite(const SymMatrix& m);

SymMatrix cholesky_inverse(const SymMatrix& m, std::string_view name = "matrix");

/// Solves m x = rhs through the Cholesky factor.
RectMatrix cholesky_solve(const SymMatrix& m, const RectMatrix& rhs,
                          std::string_view name = "matrix");
Vector cholesky_solve(const SymMatrix& m, const Vector& rhs, std::string_view name = "matrix");

/// With full = [[A, B], [Bᵀ, D]] and A of size `split`, returns D − Bᵀ A⁻¹ B.
SymMatrix schur_complement(const SymMatrix& full, Index split);

/// Partial correlation of variables i and j given all remaining variables,
/// −P_ij / sqrt(P_ii P_jj) with P the precision matrix.
double partial_correlation(const SymMatrix& full, Index i, Index j);

/// Same quantity read off an already-inverted precision matrix.
double partial_correlation_from_precision(const SymMatrix& precision, Index i, Index j);

/// Rescales a covariance matrix to unit diagonal.
SymMatrix correlation_from_covariance(const SymMatrix& cov);

/// All off-diagonal entries <= kSignTolerance.
bool is_z_matrix(const SymMatrix& m);

/// Z-matrix with all eigenvalues positive; for symmetric input this is a
/// Cholesky success test.
bool is_m_matrix(const SymMatrix& m);

} // namespace biaslab::linalg
