#include "biaslab/linalg.hpp"

#include <cmath>
#include <string>

#include "biaslab/errors.hpp"

namespace biaslab::linalg {

namespace {

Eigen::MatrixXd symmetric_part(const Eigen::MatrixXd& m)
{
    // a + b == b + a in IEEE arithmetic, so the result is exactly symmetric.
    return (m + m.transpose()) * 0.5;
}

void check_index(const SymMatrix& m, Index i)
{
    if (i < 0 || i >= m.dim()) {
        throw IndexOutOfRange("index " + std::to_string(i) + " outside matrix of dim " +
                              std::to_string(m.dim()));
    }
}

} // namespace

SymMatrix::SymMatrix(Eigen::MatrixXd m) : m_(std::move(m))
{
    if (m_.rows() != m_.cols()) {
        throw NotSymmetric("matrix is " + std::to_string(m_.rows()) + "x" +
                           std::to_string(m_.cols()) + ", expected square");
    }
    for (Index j = 0; j < m_.cols(); ++j) {
        for (Index i = j + 1; i < m_.rows(); ++i) {
            if (m_(i, j) != m_(j, i)) {
                throw NotSymmetric("entries (" + std::to_string(i) + "," + std::to_string(j) +
                                   ") and transpose differ");
            }
        }
    }
}

SymMatrix SymMatrix::symmetrized(const Eigen::MatrixXd& m)
{
    if (m.rows() != m.cols()) {
        throw DimensionMismatch("cannot symmetrize a non-square matrix");
    }
    return SymMatrix(symmetric_part(m), Unchecked{});
}

SymMatrix SymMatrix::identity(Index n)
{
    return SymMatrix(Eigen::MatrixXd::Identity(n, n), Unchecked{});
}

SymMatrix SymMatrix::diagonal(const Vector& diag)
{
    return SymMatrix(Eigen::MatrixXd(diag.asDiagonal()), Unchecked{});
}

SymMatrix SymMatrix::equicorrelation(Index n, double rho)
{
    Eigen::MatrixXd m = Eigen::MatrixXd::Constant(n, n, rho);
    m.diagonal().setOnes();
    return SymMatrix(std::move(m), Unchecked{});
}

SymMatrix SymMatrix::block(Index start, Index size) const
{
    if (start < 0 || size < 0 || start + size > dim()) {
        throw IndexOutOfRange("principal block out of range");
    }
    return SymMatrix(m_.block(start, start, size, size), Unchecked{});
}

SymMatrix SymMatrix::principal(std::span<const Index> indices) const
{
    const auto n = static_cast<Index>(indices.size());
    Eigen::MatrixXd out(n, n);
    for (Index a = 0; a < n; ++a) {
        check_index(*this, indices[a]);
        for (Index b = 0; b < n; ++b) {
            out(a, b) = m_(indices[a], indices[b]);
        }
    }
    return SymMatrix(std::move(out), Unchecked{});
}

SymMatrix SymMatrix::operator+(const SymMatrix& rhs) const
{
    if (rhs.dim() != dim()) {
        throw DimensionMismatch("SymMatrix sum of different dimensions");
    }
    return SymMatrix(m_ + rhs.m_, Unchecked{});
}

SymMatrix SymMatrix::operator-(const SymMatrix& rhs) const
{
    if (rhs.dim() != dim()) {
        throw DimensionMismatch("SymMatrix difference of different dimensions");
    }
    return SymMatrix(m_ - rhs.m_, Unchecked{});
}

SymMatrix SymMatrix::scaled(double factor) const
{
    return SymMatrix(m_ * factor, Unchecked{});
}

double max_abs(const Eigen::MatrixXd& m)
{
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

Eigen::MatrixXd cholesky_lower(const SymMatrix& m, std::string_view name)
{
    const Index n = m.dim();
    if (n == 0) {
        throw NotPositiveDefinite(std::string(name), "empty matrix");
    }
    const auto& a = m.dense();
    const double threshold = kPdTolerance * a.diagonal().maxCoeff();
    if (!(a.diagonal().maxCoeff() > 0.0)) {
        throw NotPositiveDefinite(std::string(name), "nonpositive diagonal");
    }

    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    for (Index j = 0; j < n; ++j) {
        double pivot = a(j, j);
        for (Index k = 0; k < j; ++k) {
            pivot -= l(j, k) * l(j, k);
        }
        if (!(pivot > threshold)) {
            throw NotPositiveDefinite(std::string(name),
                                      "pivot " + std::to_string(j) + " = " + std::to_string(pivot));
        }
        const double ljj = std::sqrt(pivot);
        l(j, j) = ljj;
        for (Index i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (Index k = 0; k < j; ++k) {
                s -= l(i, k) * l(j, k);
            }
            l(i, j) = s / ljj;
        }
    }
    return l;
}

bool is_positive_definite(const SymMatrix& m)
{
    try {
        (void)cholesky_lower(m);
        return true;
    } catch (const NotPositiveDefinite&) {
        return false;
    }
}

SymMatrix cholesky_inverse(const SymMatrix& m, std::string_view name)
{
    const Eigen::MatrixXd l = cholesky_lower(m, name);
    const Index n = m.dim();
    const Eigen::MatrixXd l_inv =
        l.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n));
    return SymMatrix::symmetrized(l_inv.transpose() * l_inv);
}

RectMatrix cholesky_solve(const SymMatrix& m, const RectMatrix& rhs, std::string_view name)
{
    if (rhs.rows() != m.dim()) {
        throw DimensionMismatch("cholesky_solve: right-hand side has " +
                                std::to_string(rhs.rows()) + " rows, matrix dim " +
                                std::to_string(m.dim()));
    }
    const Eigen::MatrixXd l = cholesky_lower(m, name);
    const Eigen::MatrixXd y = l.triangularView<Eigen::Lower>().solve(rhs);
    return l.transpose().triangularView<Eigen::Upper>().solve(y);
}

Vector cholesky_solve(const SymMatrix& m, const Vector& rhs, std::string_view name)
{
    return cholesky_solve(m, RectMatrix(rhs), name).col(0);
}

SymMatrix schur_complement(const SymMatrix& full, Index split)
{
    const Index n = full.dim();
    if (split < 1 || split >= n) {
        throw IndexOutOfRange("schur_complement split " + std::to_string(split) +
                              " must lie in [1, " + std::to_string(n - 1) + "]");
    }
    const auto& m = full.dense();
    const SymMatrix a = full.block(0, split);
    const RectMatrix b = m.topRightCorner(split, n - split);
    const RectMatrix a_inv_b = cholesky_solve(a, b, "leading block");
    return SymMatrix::symmetrized(m.bottomRightCorner(n - split, n - split) -
                                  b.transpose() * a_inv_b);
}

double partial_correlation_from_precision(const SymMatrix& precision, Index i, Index j)
{
    check_index(precision, i);
    check_index(precision, j);
    if (i == j) {
        throw PreconditionViolated("partial correlation needs two distinct variables");
    }
    return -precision(i, j) / std::sqrt(precision(i, i) * precision(j, j));
}

double partial_correlation(const SymMatrix& full, Index i, Index j)
{
    check_index(full, i);
    check_index(full, j);
    return partial_correlation_from_precision(cholesky_inverse(full), i, j);
}

SymMatrix correlation_from_covariance(const SymMatrix& cov)
{
    const Vector inv_sd = cov.dense().diagonal().cwiseSqrt().cwiseInverse();
    return SymMatrix::symmetrized(inv_sd.asDiagonal() * cov.dense() * inv_sd.asDiagonal());
}

bool is_z_matrix(const SymMatrix& m)
{
    for (Index j = 0; j < m.dim(); ++j) {
        for (Index i = 0; i < m.dim(); ++i) {
            if (i != j && m(i, j) > kSignTolerance) {
                return false;
            }
        }
    }
    return true;
}

bool is_m_matrix(const SymMatrix& m)
{
    return is_z_matrix(m) && is_positive_definite(m);
}

} // namespace biaslab::linalg
