#include "biaslab/bias.hpp"

#include <cmath>
#include <string>

#include "biaslab/errors.hpp"

namespace biaslab::bias {

namespace {

std::string shape(const Eigen::MatrixXd& m)
{
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_shape(const Eigen::MatrixXd& m, Index rows, Index cols, const char* name)
{
    if (m.rows() != rows || m.cols() != cols) {
        throw DimensionMismatch(std::string(name) + " is " + shape(m) + ", expected " +
                                std::to_string(rows) + "x" + std::to_string(cols));
    }
}

void require_beta(const CovarianceBlocks& blocks, const CoefficientVector& beta)
{
    if (beta.beta_Z.size() != blocks.p() || beta.beta_X.size() != blocks.d()) {
        throw DimensionMismatch("coefficient lengths (" + std::to_string(beta.beta_Z.size()) +
                                ", " + std::to_string(beta.beta_X.size()) +
                                ") do not match blocks (p=" + std::to_string(blocks.p()) +
                                ", d=" + std::to_string(blocks.d()) + ")");
    }
}

SymMatrix assemble_2x2(const SymMatrix& top, const RectMatrix& off, const SymMatrix& bottom)
{
    const Index n1 = top.dim();
    const Index n2 = bottom.dim();
    Eigen::MatrixXd m(n1 + n2, n1 + n2);
    m.topLeftCorner(n1, n1) = top.dense();
    m.topRightCorner(n1, n2) = off;
    m.bottomLeftCorner(n2, n1) = off.transpose();
    m.bottomRightCorner(n2, n2) = bottom.dense();
    return SymMatrix(std::move(m));
}

} // namespace

void CovarianceBlocks::check_shapes() const
{
    const Index np = p();
    const Index nd = d();
    if (np < 1 || nd < 1) {
        throw DimensionMismatch("blocks need p >= 1 and d >= 1");
    }
    require_shape(B, np, nd, "B");
    require_shape(C, np, nd, "C");
    require_shape(F, nd, nd, "F");
    require_shape(G.dense(), nd, nd, "G");
}

void CovarianceBlocks::validate() const
{
    check_shapes();
    (void)linalg::cholesky_lower(cov_zx(), "Cov(Z,X)");
    (void)linalg::cholesky_lower(cov_zw(), "Cov(Z,W)");
}

SymMatrix CovarianceBlocks::cov_zx() const { return assemble_2x2(A, B, D); }

SymMatrix CovarianceBlocks::cov_zw() const { return assemble_2x2(A, C, G); }

SymMatrix CovarianceBlocks::assembled() const
{
    check_shapes();
    const Index np = p();
    const Index nd = d();
    Eigen::MatrixXd m(np + 2 * nd, np + 2 * nd);
    m.block(0, 0, np, np) = A.dense();
    m.block(0, np, np, nd) = B;
    m.block(0, np + nd, np, nd) = C;
    m.block(np, 0, nd, np) = B.transpose();
    m.block(np, np, nd, nd) = D.dense();
    m.block(np, np + nd, nd, nd) = F;
    m.block(np + nd, 0, nd, np) = C.transpose();
    m.block(np + nd, np, nd, nd) = F.transpose();
    m.block(np + nd, np + nd, nd, nd) = G.dense();
    return SymMatrix(std::move(m));
}

Vector CoefficientVector::stacked() const
{
    Vector out(beta_Z.size() + beta_X.size());
    out << beta_Z, beta_X;
    return out;
}

void CumeError::validate(Index d) const
{
    if (a.size() != d) {
        throw DimensionMismatch("CUME error has " + std::to_string(a.size()) +
                                " variances, expected " + std::to_string(d));
    }
    for (Index j = 0; j < a.size(); ++j) {
        if (!(a[j] >= 0.0)) {
            throw PreconditionViolated("CUME error variance a[" + std::to_string(j) +
                                       "] is negative");
        }
    }
}

Vector ovb(const CovarianceBlocks& blocks, const CoefficientVector& beta)
{
    blocks.check_shapes();
    require_beta(blocks, beta);
    return linalg::cholesky_solve(blocks.A, Vector(blocks.B * beta.beta_X), "A");
}

Vector meb_full(const CovarianceBlocks& blocks, const CoefficientVector& beta)
{
    blocks.check_shapes();
    require_beta(blocks, beta);
    const Index np = blocks.p();
    const Index nd = blocks.d();
    // Σ_{M,E} β; its first p columns are zero so only β_X enters.
    Vector rhs(np + nd);
    rhs.head(np) = (blocks.B - blocks.C) * beta.beta_X;
    rhs.tail(nd) = (blocks.F.transpose() - blocks.G.dense()) * beta.beta_X;
    return linalg::cholesky_solve(blocks.cov_zw(), rhs, "Cov(Z,W)");
}

Vector meb_z(const CovarianceBlocks& blocks, const CoefficientVector& beta)
{
    blocks.check_shapes();
    require_beta(blocks, beta);
    const RectMatrix g_inv_ct = linalg::cholesky_solve(blocks.G, RectMatrix(blocks.C.transpose()), "G");
    const RectMatrix g_inv_ft = linalg::cholesky_solve(blocks.G, RectMatrix(blocks.F.transpose()), "G");
    const SymMatrix lhs = SymMatrix::symmetrized(blocks.A.dense() - blocks.C * g_inv_ct);
    const Vector rhs = (blocks.B - blocks.C * g_inv_ft) * beta.beta_X;
    return linalg::cholesky_solve(lhs, rhs, "A - C G^-1 C^T");
}

CovarianceBlocks cume_blocks(const SymMatrix& A, const RectMatrix& B, const SymMatrix& D,
                             const CumeError& err)
{
    err.validate(D.dim());
    CovarianceBlocks blocks{A, B, B, D, D.dense(), D + err.covariance()};
    blocks.check_shapes();
    (void)linalg::cholesky_lower(blocks.cov_zx(), "Cov(Z,X)");
    return blocks;
}

OmegaDecomposition omega_and_decomposition(const SymMatrix& A, const RectMatrix& B,
                                           const SymMatrix& D, const CumeError& err,
                                           const Vector& beta_X)
{
    err.validate(D.dim());
    if (beta_X.size() != D.dim()) {
        throw DimensionMismatch("beta_X length does not match d");
    }
    const CovarianceBlocks blocks = cume_blocks(A, B, D, err);
    const SymMatrix schur = linalg::schur_complement(blocks.cov_zx(), A.dim());
    const SymMatrix omega = linalg::cholesky_inverse(err.covariance() + schur, "Sigma_E + D - B^T A^-1 B");

    const Index nd = D.dim();
    Vector attenuation(nd);
    Vector additive(nd);
    for (Index j = 0; j < nd; ++j) {
        attenuation[j] = -omega(j, j) * err.a[j] * beta_X[j];
        double cross = 0.0;
        for (Index k = 0; k < nd; ++k) {
            if (k != j) {
                cross -= omega(j, k) * err.a[k] * beta_X[k];
            }
        }
        additive[j] = cross;
    }
    return {omega, attenuation, additive};
}

BiasReport analyze(const CovarianceBlocks& blocks, const CoefficientVector& beta)
{
    blocks.validate();
    return {ovb(blocks, beta), meb_full(blocks, beta), meb_z(blocks, beta), std::nullopt};
}

BiasReport analyze_cume(const SymMatrix& A, const RectMatrix& B, const SymMatrix& D,
                        const CumeError& err, const CoefficientVector& beta)
{
    BiasReport report = analyze(cume_blocks(A, B, D, err), beta);
    report.cume = omega_and_decomposition(A, B, D, err, beta.beta_X);
    return report;
}

Sign classify(double value) noexcept
{
    if (value < -linalg::kSignTolerance) {
        return Sign::kNegative;
    }
    if (value > linalg::kSignTolerance) {
        return Sign::kPositive;
    }
    return Sign::kZero;
}

double case2_rho_factor(const SymMatrix& A, const Vector& B, double sigma_X, double rho_XW)
{
    if (B.size() != A.dim()) {
        throw DimensionMismatch("case2_rho_factor: B must have length p");
    }
    if (!(std::abs(rho_XW) <= 1.0)) {
        throw PreconditionViolated("case2_rho_factor: |rho_XW| must be <= 1");
    }
    const double q = B.dot(linalg::cholesky_solve(A, B, "A"));
    const double var_x = sigma_X * sigma_X;
    if (!(var_x > q)) {
        throw PreconditionViolated("case2_rho_factor: sigma_X^2 must exceed B^T A^-1 B");
    }
    if (rho_XW == 0.0) {
        return 1.0;
    }
    const double r2 = rho_XW * rho_XW;
    return (1.0 - r2) * (1.0 + q / (var_x / r2 - q));
}

CovarianceBlocks case2_blocks(const SymMatrix& A, const Vector& B, double sigma_X,
                              double sigma_W, double rho_XW)
{
    const RectMatrix b = B;
    const RectMatrix c = (sigma_W * rho_XW / sigma_X) * b;
    CovarianceBlocks blocks{A,
                            b,
                            c,
                            SymMatrix(Eigen::MatrixXd::Constant(1, 1, sigma_X * sigma_X)),
                            Eigen::MatrixXd::Constant(1, 1, sigma_X * sigma_W * rho_XW),
                            SymMatrix(Eigen::MatrixXd::Constant(1, 1, sigma_W * sigma_W))};
    blocks.check_shapes();
    return blocks;
}

CovarianceBlocks case3_blocks(double sigma_Z, double sigma_X, double sigma_W, double rho_ZX,
                              double rho_ZW, double rho_XW)
{
    auto scalar = [](double v) { return SymMatrix(Eigen::MatrixXd::Constant(1, 1, v)); };
    return {scalar(sigma_Z * sigma_Z),
            Eigen::MatrixXd::Constant(1, 1, rho_ZX * sigma_Z * sigma_X),
            Eigen::MatrixXd::Constant(1, 1, rho_ZW * sigma_Z * sigma_W),
            scalar(sigma_X * sigma_X),
            Eigen::MatrixXd::Constant(1, 1, rho_XW * sigma_X * sigma_W),
            scalar(sigma_W * sigma_W)};
}

// σ_W cancels from both closed forms; it is accepted for symmetry with case3_blocks.
Case3Report case3_scalar_report(double sigma_Z, double sigma_X, double /*sigma_W*/, double rho_ZX,
                                double rho_ZW, double rho_XW, double beta_X)
{
    Eigen::Matrix3d corr;
    corr << 1.0, rho_ZX, rho_ZW, rho_ZX, 1.0, rho_XW, rho_ZW, rho_XW, 1.0;
    (void)linalg::cholesky_lower(SymMatrix(Eigen::MatrixXd(corr)), "Corr(Z,X,W)");

    Case3Report report;
    report.ovb = beta_X * sigma_X * rho_ZX / sigma_Z;
    report.meb = beta_X * sigma_X * (rho_ZX - rho_ZW * rho_XW) / (sigma_Z * (1.0 - rho_ZW * rho_ZW));
    const bool same_sign = (rho_ZW > 0.0 && rho_ZX > 0.0) || (rho_ZW < 0.0 && rho_ZX < 0.0);
    report.dominance_guaranteed = rho_XW > std::abs(rho_ZW) && std::abs(rho_ZW) > 0.0 &&
                                  same_sign && std::abs(rho_ZX) >= std::abs(rho_ZW);
    return report;
}

ClassicalLimit classical_limit_check(const SymMatrix& A, const RectMatrix& B,
                                     const SymMatrix& D, const Vector& beta_X, double scale)
{
    if (!(scale >= 0.0)) {
        throw PreconditionViolated("classical limit: scale must be nonnegative");
    }
    const CovarianceBlocks blocks =
        cume_blocks(A, B, D, CumeError{Vector::Constant(D.dim(), scale)});
    const CoefficientVector beta{Vector::Zero(A.dim()), beta_X};
    return {meb_z(blocks, beta), ovb(blocks, beta)};
}

ScalarBiases case6_counterexample(double kappa, double A, double B, double D, double beta_X)
{
    auto scalar = [](double v) { return SymMatrix(Eigen::MatrixXd::Constant(1, 1, v)); };
    auto rect = [](double v) { return RectMatrix(Eigen::MatrixXd::Constant(1, 1, v)); };
    const CovarianceBlocks blocks{scalar(A),
                                  rect(B),
                                  rect(B + kappa * A),
                                  scalar(D),
                                  rect(D + kappa * B),
                                  scalar(D + 2.0 * kappa * B + kappa * kappa * A)};
    (void)linalg::cholesky_lower(blocks.cov_zx(), "Cov(Z,X)");
    const CoefficientVector beta{Vector::Zero(1), Vector::Constant(1, beta_X)};
    return {ovb(blocks, beta)[0], meb_z(blocks, beta)[0]};
}

} // namespace biaslab::bias
