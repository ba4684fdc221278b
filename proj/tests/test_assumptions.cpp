#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <vector>

#include "biaslab/assumptions.hpp"
#include "biaslab/bias.hpp"
#include "biaslab/errors.hpp"
#include "biaslab/montecarlo.hpp"
#include "biaslab/theory.hpp"
#include "oracles.hpp"

using namespace biaslab;
using namespace biaslab::assumptions;

namespace {

Vector vec(std::initializer_list<double> values)
{
    Vector v(static_cast<Index>(values.size()));
    Index j = 0;
    for (double x : values) {
        v[j++] = x;
    }
    return v;
}

std::vector<Index> range(Index from, Index to)
{
    std::vector<Index> out;
    for (Index i = from; i < to; ++i) {
        out.push_back(i);
    }
    return out;
}

} // namespace

TEST_CASE("No Benefit")
{
    CHECK(check_no_benefit(vec({-1.2, 0.0, -0.3})));
    CHECK_FALSE(check_no_benefit(vec({0.1, -1.0})));
    CHECK(check_no_benefit(Vector::Zero(4)));
}

TEST_CASE("Pairwise PC+")
{
    const auto all = range(0, 4);
    CHECK(check_pairwise_pc_plus(SymMatrix::equicorrelation(4, 0.2), all));

    Eigen::MatrixXd m = SymMatrix::equicorrelation(4, 0.2).dense();
    m(1, 3) = m(3, 1) = -0.01;
    CHECK_FALSE(check_pairwise_pc_plus(SymMatrix(m), all));
    // The negative pair is outside this pollutant set.
    const std::vector<Index> subset = {0, 1, 2};
    CHECK(check_pairwise_pc_plus(SymMatrix(m), subset));

    CHECK_FALSE(check_pairwise_pc_plus(SymMatrix::identity(4), all));
    const std::vector<Index> bad = {0, 4};
    CHECK_THROWS_AS(check_pairwise_pc_plus(SymMatrix::identity(4), bad), IndexOutOfRange);
}

TEST_CASE("Weak Partial PC+")
{
    // Block-diagonal Z versus X.
    Eigen::MatrixXd block = Eigen::MatrixXd::Identity(4, 4);
    block(0, 1) = block(1, 0) = 0.3;
    block(2, 3) = block(3, 2) = 0.4;
    CHECK_FALSE(check_weak_partial_pc_plus(SymMatrix(block), 2, 1));

    // p = 1 reduces to marginal signs.
    Eigen::MatrixXd m(3, 3);
    m << 1, 0.2, 0.3, 0.2, 1, 0.1, 0.3, 0.1, 1;
    CHECK(check_weak_partial_pc_plus(SymMatrix(m), 1, 0));
    m(0, 2) = m(2, 0) = -0.05;
    CHECK_FALSE(check_weak_partial_pc_plus(SymMatrix(m), 1, 0));

    CHECK_THROWS_AS(check_weak_partial_pc_plus(SymMatrix::identity(3), 1, 1), IndexOutOfRange);

    Eigen::MatrixXd singular = Eigen::MatrixXd::Ones(3, 3);
    CHECK_THROWS_AS(check_weak_partial_pc_plus(SymMatrix(singular), 2, 1), NotPositiveDefinite);
}

TEST_CASE("Weak Partial PC+ values match a regression oracle")
{
    // Partial correlation of Z_k and X_j given the other Z entries, from the
    // residual covariance of the (Z_k, X_j) pair after projecting out Z_{-k}.
    std::mt19937_64 gen(31);
    for (int t = 0; t < 100; ++t) {
        const Index p = 2 + static_cast<Index>(gen() % 3);
        const Index d = 1 + static_cast<Index>(gen() % 3);
        const Eigen::MatrixXd cov = oracle::random_spd(p + d, gen);
        const Index k = static_cast<Index>(gen() % static_cast<std::uint64_t>(p));
        const auto got = weak_partial_correlations(SymMatrix(cov), p, k);
        std::vector<Index> rest;
        for (Index i = 0; i < p; ++i) {
            if (i != k) {
                rest.push_back(i);
            }
        }
        Eigen::MatrixXd s_rr(rest.size(), rest.size());
        for (std::size_t a = 0; a < rest.size(); ++a) {
            for (std::size_t b = 0; b < rest.size(); ++b) {
                s_rr(static_cast<Index>(a), static_cast<Index>(b)) = cov(rest[a], rest[b]);
            }
        }
        const Eigen::MatrixXd s_rr_inv = oracle::gauss_inverse(s_rr);
        for (Index j = 0; j < d; ++j) {
            const std::array<Index, 2> pair = {k, p + j};
            Eigen::MatrixXd s_pp(2, 2);
            Eigen::MatrixXd s_pr(2, static_cast<Index>(rest.size()));
            for (Index a = 0; a < 2; ++a) {
                for (Index b = 0; b < 2; ++b) {
                    s_pp(a, b) = cov(pair[static_cast<std::size_t>(a)], pair[static_cast<std::size_t>(b)]);
                }
                for (std::size_t b = 0; b < rest.size(); ++b) {
                    s_pr(a, static_cast<Index>(b)) = cov(pair[static_cast<std::size_t>(a)], rest[b]);
                }
            }
            const Eigen::MatrixXd r = s_pp - s_pr * s_rr_inv * s_pr.transpose();
            const double expected = r(0, 1) / std::sqrt(r(0, 0) * r(1, 1));
            CHECK(got[static_cast<std::size_t>(j)] == doctest::Approx(expected).epsilon(1e-10));
        }
    }
}

TEST_CASE("Pairwise Partial PC+")
{
    Eigen::MatrixXd two(2, 2);
    two << 1, 0.4, 0.4, 1;
    CHECK(check_pairwise_partial_pc_plus(SymMatrix(two), 0));

    // Equicorrelation 0.5: each partial correlation is 0.5 / 1.5 = 1/3.
    const SymMatrix eq = SymMatrix::equicorrelation(3, 0.5);
    CHECK(check_pairwise_partial_pc_plus(eq, 0));
    CHECK(linalg::partial_correlation(eq, 0, 2) == doctest::Approx(1.0 / 3.0).epsilon(1e-13));

    // Precision with one positive off-diagonal: its partial correlation is
    // negative, yet every marginal covariance of the inverse is positive.
    Eigen::MatrixXd prec(3, 3);
    prec << 1.0, -0.45, 0.05, -0.45, 1.0, -0.45, 0.05, -0.45, 1.0;
    const Eigen::MatrixXd cov = oracle::gauss_inverse(prec);
    const SymMatrix s = SymMatrix::symmetrized(cov);
    CHECK(cov(0, 1) > 0.0);
    CHECK(cov(0, 2) > 0.0);
    CHECK(cov(1, 2) > 0.0);
    const auto all = range(0, 3);
    CHECK(check_pairwise_pc_plus(s, all));
    CHECK_FALSE(check_pairwise_partial_pc_plus(s, 0));

    Eigen::MatrixXd singular = Eigen::MatrixXd::Ones(3, 3);
    CHECK_THROWS_AS(check_pairwise_partial_pc_plus(SymMatrix(singular), 0), NotPositiveDefinite);
}

TEST_CASE("Pairwise Partial PC+ implies an M-matrix precision block")
{
    Rng rng(55);
    int checked = 0;
    for (int t = 0; t < 300; ++t) {
        const Index p = 1 + static_cast<Index>(t % 3);
        const Index d = 2 + static_cast<Index>(t % 4);
        const SymMatrix cov = theory::random_pppc_cov(p, d, rng);
        REQUIRE(check_pairwise_partial_pc_plus(cov, p));
        const SymMatrix prec = linalg::cholesky_inverse(cov);
        CHECK(linalg::is_m_matrix(prec.block(p, d)));
        ++checked;
    }
    CHECK(checked == 300);
}

TEST_CASE("average pairwise correlation")
{
    const auto all = range(0, 4);
    CHECK(average_pairwise_correlation(SymMatrix::equicorrelation(4, 0.3), all) ==
          doctest::Approx(0.3));
    Eigen::MatrixXd m(3, 3);
    m << 4, 1, 0, 1, 9, -3, 0, -3, 1;
    const auto three = range(0, 3);
    // Correlations 1/6, 0, −1.
    CHECK(average_pairwise_correlation(SymMatrix(m), three) ==
          doctest::Approx((1.0 / 6.0 - 1.0) / 3.0));
}

TEST_CASE("profile over generated instances")
{
    // Under Weak Partial PC+ with No Benefit, the measured pollutant's
    // omitted-variable bias is never positive; and Pairwise Partial PC+ is
    // rarer than Pairwise PC+.
    montecarlo::SimConfig cfg;
    int weak = 0;
    int pc = 0;
    int pppc = 0;
    for (std::uint64_t t = 0; t < 3000; ++t) {
        Rng rng = Rng::substream(123, t);
        const auto s = montecarlo::generate_structure(cfg, rng);
        const auto beta = montecarlo::sample_coefficients(cfg, rng);
        const Index p = cfg.p;
        const auto layout = default_layout(p, cfg.d, p - 1);
        Vector pollutant_beta(cfg.d + 1);
        pollutant_beta << beta.beta_Z[p - 1], beta.beta_X;
        const AssumptionProfile prof = evaluate_profile(s.cov_zx, pollutant_beta, layout);
        CHECK(prof.no_benefit);
        CHECK(prof.avg_pairwise_pollutant_corr >= -1.0);
        CHECK(prof.avg_pairwise_pollutant_corr <= 1.0);
        if (prof.weak_partial_pc_plus) {
            ++weak;
            CHECK(bias::ovb(s.blocks, beta)[p - 1] <= linalg::kSignTolerance);
        }
        pc += prof.pairwise_pc_plus ? 1 : 0;
        pppc += prof.pairwise_partial_pc_plus ? 1 : 0;
    }
    CHECK(weak > 0);
    CHECK(pppc <= pc);
}

TEST_CASE("default layout")
{
    const auto with = default_layout(3, 2, 2);
    CHECK(with.pollutant_indices == std::vector<Index>{2, 3, 4});
    const auto without = default_layout(3, 2, std::nullopt);
    CHECK(without.pollutant_indices == std::vector<Index>{3, 4});
    CHECK_FALSE(evaluate_profile(SymMatrix::equicorrelation(5, 0.3), Vector::Zero(2), without)
                    .weak_partial_pc_plus);
}
