#pragma once

// Independent reference computations used to freeze expected values. None of
// these call into biaslab's linear algebra.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// Inverse by Gauss-Jordan elimination with partial pivoting.
inline Eigen::MatrixXd gauss_inverse(const Eigen::MatrixXd& m)
{
    const auto n = static_cast<std::size_t>(m.rows());
    std::vector<std::vector<double>> a(n, std::vector<double>(2 * n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            a[i][j] = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
        a[i][n + i] = 1.0;
    }
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) {
                piv = r;
            }
        }
        std::swap(a[col], a[piv]);
        const double d = a[col][col];
        for (double& v : a[col]) {
            v /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r != col) {
                const double f = a[r][col];
                for (std::size_t c = 0; c < 2 * n; ++c) {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    Eigen::MatrixXd inv(m.rows(), m.cols());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            inv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a[i][n + j];
        }
    }
    return inv;
}

/// Random symmetric PD matrix with eigenvalues bounded below by `floor`.
inline Eigen::MatrixXd random_spd(Eigen::Index n, std::mt19937_64& gen, double floor = 0.3)
{
    std::normal_distribution<double> nd;
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            g(i, j) = nd(gen);
        }
    }
    Eigen::MatrixXd s = g * g.transpose() / static_cast<double>(n);
    s.diagonal().array() += floor;
    return 0.5 * (s + s.transpose());
}

/// OLS of y on [1, X] by normal equations; returns slopes only.
inline Eigen::VectorXd ols_slopes(const Eigen::MatrixXd& X, const Eigen::VectorXd& y)
{
    Eigen::MatrixXd design(X.rows(), X.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(X.cols()) = X;
    const Eigen::VectorXd coef =
        (design.transpose() * design).ldlt().solve(design.transpose() * y);
    return coef.tail(X.cols());
}

struct Drift {
    Eigen::VectorXd omitted;  // regress Y on Z, minus β_Z
    Eigen::VectorXd proxied;  // regress Y on (Z, W), minus β
};

/// Simulates N draws of (Z, X, W) ~ N(0, cov) with Y = β_Zᵀ Z + β_Xᵀ X + ε,
/// ε ~ N(0, 1) independent, and returns the empirical coefficient drifts.
inline Drift simulate_ols_drift(const Eigen::MatrixXd& cov, Eigen::Index p, Eigen::Index d,
                                const Eigen::VectorXd& beta_z, const Eigen::VectorXd& beta_x,
                                std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    const Eigen::MatrixXd L = cov.llt().matrixL();
    const auto N = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd draws(N, p + 2 * d);
    Eigen::VectorXd y(N);
    Eigen::VectorXd u(p + 2 * d);
    for (Eigen::Index i = 0; i < N; ++i) {
        for (Eigen::Index k = 0; k < u.size(); ++k) {
            u[k] = nd(gen);
        }
        const Eigen::VectorXd v = L * u;
        draws.row(i) = v.transpose();
        y[i] = beta_z.dot(v.head(p)) + beta_x.dot(v.segment(p, d)) + nd(gen);
    }
    Drift out;
    out.omitted = ols_slopes(draws.leftCols(p), y) - beta_z;
    Eigen::MatrixXd zw(N, p + d);
    zw.leftCols(p) = draws.leftCols(p);
    zw.rightCols(d) = draws.rightCols(d);
    Eigen::VectorXd beta(p + d);
    beta << beta_z, beta_x;
    out.proxied = ols_slopes(zw, y) - beta;
    return out;
}

/// OLS of y on [X, unit dummies] (no intercept); returns the X slopes and
/// their classical standard errors.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> dummy_ols(const Eigen::MatrixXd& X,
                                                             const Eigen::VectorXd& y,
                                                             const std::vector<int>& unit,
                                                             int n_units)
{
    const Eigen::Index n = X.rows();
    const Eigen::Index k = X.cols();
    Eigen::MatrixXd design = Eigen::MatrixXd::Zero(n, k + n_units);
    design.leftCols(k) = X;
    for (Eigen::Index i = 0; i < n; ++i) {
        design(i, k + unit[static_cast<std::size_t>(i)]) = 1.0;
    }
    const Eigen::MatrixXd xtx = design.transpose() * design;
    const Eigen::VectorXd coef = xtx.fullPivLu().solve(design.transpose() * y);
    const Eigen::VectorXd resid = y - design * coef;
    const double s2 = resid.squaredNorm() / static_cast<double>(n - k - n_units);
    const Eigen::MatrixXd inv = xtx.inverse();
    Eigen::VectorXd se(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        se[j] = std::sqrt(s2 * inv(j, j));
    }
    return {coef.head(k), se};
}

} // namespace oracle
