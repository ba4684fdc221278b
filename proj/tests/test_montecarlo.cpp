#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>

#include "biaslab/errors.hpp"
#include "biaslab/montecarlo.hpp"

using namespace biaslab;
using namespace biaslab::montecarlo;

namespace {

SimConfig small_config(std::uint64_t trials, std::uint64_t seed)
{
    SimConfig cfg;
    cfg.n_trials = trials;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST_CASE("Wishart mean is dof times scale")
{
    Rng rng(1);
    const SymMatrix scale = SymMatrix::identity(3);
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(3, 3);
    const int n = 50000;
    for (int i = 0; i < n; ++i) {
        sum += sample_wishart(scale, 10.0, rng).dense();
    }
    const Eigen::MatrixXd mean = sum / n;
    CHECK(linalg::max_abs(mean - 10.0 * Eigen::MatrixXd::Identity(3, 3)) < 0.15);

    // Non-identity scale: mean dof·S.
    Eigen::MatrixXd s(2, 2);
    s << 2.0, 0.6, 0.6, 1.0;
    Eigen::MatrixXd sum2 = Eigen::MatrixXd::Zero(2, 2);
    for (int i = 0; i < n; ++i) {
        sum2 += sample_wishart(SymMatrix(s), 4.0, rng).dense();
    }
    CHECK(linalg::max_abs(sum2 / n - 4.0 * s) < 0.1);
}

TEST_CASE("Wishart at dof = dim is PD and draws are reproducible")
{
    Rng rng(2);
    for (int i = 0; i < 2000; ++i) {
        CHECK(linalg::is_positive_definite(sample_wishart(SymMatrix::identity(2), 2.0, rng)));
    }
    Rng a(3);
    Rng b(3);
    CHECK(sample_wishart(SymMatrix::identity(4), 6.0, a) == sample_wishart(SymMatrix::identity(4), 6.0, b));

    Rng c(4);
    CHECK_THROWS_AS(sample_wishart(SymMatrix::identity(4), 3.0, c), PreconditionViolated);
    Eigen::MatrixXd bad(2, 2);
    bad << 1.0, 2.0, 2.0, 1.0;
    CHECK_THROWS_AS(sample_wishart(SymMatrix(bad), 5.0, c), NotPositiveDefinite);
}

TEST_CASE("coefficient draws")
{
    const SimConfig cfg;
    Rng rng(5);
    double sum = 0.0;
    std::size_t count = 0;
    const int n = 100000;
    for (int i = 0; i < n / 4; ++i) {
        const auto beta = sample_coefficients(cfg, rng);
        REQUIRE(beta.beta_Z.size() == cfg.p);
        REQUIRE(beta.beta_X.size() == cfg.d);
        CHECK(beta.beta_X[3] == 0.0);
        CHECK(beta.beta_X[4] == 0.0);
        CHECK(beta.beta_Z[cfg.p - 1] <= 0.0);
        sum += -beta.beta_Z[cfg.p - 1];
        ++count;
        for (Index j = 0; j < 3; ++j) {
            CHECK(beta.beta_X[j] <= 0.0);
            sum += -beta.beta_X[j];
            ++count;
        }
    }
    CHECK(count == static_cast<std::size_t>(n));
    CHECK(std::abs(sum / static_cast<double>(count) - 1.4 / 1.6) < 0.01);
}

TEST_CASE("latent scale")
{
    const SymMatrix v = latent_scale(SimConfig{});
    CHECK(v.dim() == 10);
    CHECK(v(0, 0) == 1.0);
    CHECK(v(0, 1) == 0.0);
    CHECK(v(3, 4) == 0.0);
    CHECK(v(4, 4) == doctest::Approx(1.0));
    CHECK(v(4, 9) == doctest::Approx(0.2));
    CHECK(v(5, 6) == doctest::Approx(0.2));
}

TEST_CASE("generated structures")
{
    const SimConfig cfg;
    const Index p = cfg.p;
    const Index d = cfg.d;
    int non_diagonal = 0;
    for (std::uint64_t t = 0; t < 500; ++t) {
        Rng rng = Rng::substream(9, t);
        const Structure s = generate_structure(cfg, rng);
        const SymMatrix full = s.blocks.assembled();
        REQUIRE(full.dim() == p + 2 * d);
        CHECK(full.dense() == full.dense().transpose());
        CHECK(linalg::is_positive_definite(s.cov_zx));
        CHECK(linalg::is_positive_definite(s.blocks.cov_zw()));
        CHECK(s.blocks.B == s.blocks.C);

        // W − X = U_c − U_b, so its covariance G + D − F − Fᵀ is Σ_b + Σ_c,
        // and D − F, G − F recover the two Wishart components.
        const Eigen::MatrixXd sb = s.blocks.D.dense() - s.blocks.F;
        const Eigen::MatrixXd sc = s.blocks.G.dense() - s.blocks.F;
        CHECK(Eigen::MatrixXd(sb).llt().info() == Eigen::Success);
        CHECK(Eigen::MatrixXd(sc).llt().info() == Eigen::Success);
        const Eigen::MatrixXd err = s.blocks.G.dense() + s.blocks.D.dense() - s.blocks.F -
                                    s.blocks.F.transpose();
        CHECK(linalg::max_abs(err - sb - sc) < 1e-12);
        Eigen::MatrixXd off = err;
        off.diagonal().setZero();
        non_diagonal += off.cwiseAbs().maxCoeff() > 1e-8 ? 1 : 0;
    }
    CHECK(non_diagonal == 500);
}

TEST_CASE("R-squared between proxy and truth is mostly in the 0.3 to 0.85 range")
{
    const SimTally tally = run_experiment(small_config(4000, 17));
    const auto total = std::accumulate(tally.r_squared_hist.begin(), tally.r_squared_hist.end(),
                                       std::uint64_t{0});
    CHECK(total == 4000 * 5);
    // Histogram bins have width 0.05: bins 6..16 cover [0.3, 0.85).
    std::uint64_t inside = 0;
    for (std::size_t b = 6; b < 17; ++b) {
        inside += tally.r_squared_hist[b];
    }
    CHECK(static_cast<double>(inside) / static_cast<double>(total) > 0.9);
}

TEST_CASE("rho bins")
{
    CHECK(rho_bin(-0.5) == 0);
    CHECK(rho_bin(-0.1) == 0);
    CHECK(rho_bin(-0.05) == 1);
    CHECK(rho_bin(0.0) == 1);
    CHECK(rho_bin(0.01) == 2);
    CHECK(rho_bin(0.45) == 6);
    CHECK(rho_bin(0.5) == 6);
    CHECK(rho_bin(0.51) == 7);
    CHECK(bin_label(0) == "<-0.1");
    CHECK(bin_label(6) == "(0.4,0.5]");
    CHECK(bin_label(7) == ">0.5");
}

TEST_CASE("empty experiment")
{
    const SimTally t = run_experiment(small_config(0, 1));
    CHECK(t.n_completed == 0);
    CHECK(t.n_requested == 0);
    CHECK(t.stratum(Stratum::kAll).n == 0);
    CHECK(t.stratum(Stratum::kAll).frequency(0) == 0.0);
}

TEST_CASE("tally invariants")
{
    const SimTally t = run_experiment(small_config(3000, 21));
    CHECK(t.n_requested == 3000);
    CHECK(t.n_completed + t.generation_failures == 3000);
    CHECK(t.generation_failures * 1000 < 3000);
    std::uint64_t binned = 0;
    for (const auto& b : t.bins) {
        binned += b.n;
    }
    CHECK(binned == t.n_completed);
    CHECK(t.weak_partial_violations == 0);
    const auto& weak = t.stratum(Stratum::kWeakPartialPcPlus);
    CHECK(weak.n > 0);
    CHECK(weak.strict[0] == weak.n);
    CHECK(t.stratum(Stratum::kPairwisePartialPcPlus).n <= t.stratum(Stratum::kPairwisePcPlus).n);
    for (const auto& s : t.strata) {
        for (std::size_t k = 0; k < kPhenomena; ++k) {
            CHECK(s.strict[k] <= s.weak[k]);
            CHECK(s.weak[k] <= s.n);
            if (s.n > 0) {
                const double f = s.frequency(k);
                CHECK(s.standard_error(k) ==
                      doctest::Approx(std::sqrt(f * (1 - f) / static_cast<double>(s.n))));
            }
        }
    }
}

TEST_CASE("results do not depend on the worker count")
{
    SimConfig cfg = small_config(2500, 99);
    const SimTally one = run_experiment(cfg);
    cfg.threads = 3;
    const SimTally three = run_experiment(cfg);
    cfg.threads = 8;
    const SimTally eight = run_experiment(cfg);
    CHECK(one == three);
    CHECK(one == eight);

    cfg.seed = 100;
    CHECK_FALSE(run_experiment(cfg) == one);
}

TEST_CASE("merge is commutative and matches a single pass")
{
    const SimConfig cfg = small_config(600, 7);
    SimTally a;
    SimTally b;
    SimTally whole;
    for (std::uint64_t t = 0; t < cfg.n_trials; ++t) {
        const auto outcome = run_trial(cfg, t);
        REQUIRE(outcome.has_value());
        (t % 3 == 0 ? a : b).add(*outcome);
        whole.add(*outcome);
    }
    SimTally ab = a;
    ab.merge(b);
    SimTally ba = b;
    ba.merge(a);
    CHECK(ab == ba);
    CHECK(ab == whole);
}

TEST_CASE("trial outcome matches a direct evaluation")
{
    const SimConfig cfg;
    const Index p = cfg.p;
    const Index d = cfg.d;
    for (std::uint64_t t = 0; t < 200; ++t) {
        Rng rng = Rng::substream(cfg.seed, t);
        const Structure s = generate_structure(cfg, rng);
        const auto beta = sample_coefficients(cfg, rng);
        const TrialOutcome o = evaluate_trial(cfg, s, beta);
        const Vector ovb = bias::ovb(s.blocks, beta);
        const Vector meb = bias::meb_full(s.blocks, beta);
        const double tol = linalg::kSignTolerance;
        CHECK(o.phen[0] == (ovb[p - 1] < -tol));
        CHECK(o.phen[1] == (meb[p - 1] < -tol));
        CHECK(o.phen[2] == (meb[p + d - 1] < -tol));
        CHECK(o.phen[3] == (meb[p] < -tol));
        CHECK(o.phen[4] == (std::abs(ovb[p - 1]) > std::abs(meb[p - 1])));
        CHECK(o.ovb_measured == ovb[p - 1]);

        // ρ̄ over Z^(p) and the d columns of X: 15 pairs.
        const SymMatrix corr = linalg::correlation_from_covariance(s.cov_zx);
        double sum = 0.0;
        int pairs = 0;
        for (Index i = p - 1; i < p + d; ++i) {
            for (Index j = i + 1; j < p + d; ++j) {
                sum += corr(i, j);
                ++pairs;
            }
        }
        CHECK(pairs == 15);
        CHECK(o.avg_rho == doctest::Approx(sum / pairs).epsilon(1e-12));

        const auto opt = run_trial(cfg, t);
        REQUIRE(opt.has_value());
        CHECK(opt->phen == o.phen);
        CHECK(opt->avg_rho == o.avg_rho);
    }
}

TEST_CASE("configuration validation")
{
    SimConfig cfg;
    cfg.n_null_pollutants = cfg.d + 1;
    CHECK_THROWS_AS(cfg.validate(), PreconditionViolated);
    cfg = SimConfig{};
    cfg.gamma_shape = 0.0;
    CHECK_THROWS_AS(cfg.validate(), PreconditionViolated);
    cfg = SimConfig{};
    cfg.latent_dof = 5.0;
    CHECK_THROWS_AS(cfg.validate(), PreconditionViolated);
    CHECK_NOTHROW(SimConfig{}.validate());
}

TEST_CASE("text table lists every stratum and phenomenon")
{
    const std::string table = format_table(run_experiment(small_config(200, 3)));
    for (const char* label : {"All", "Pairwise PC+", "Weak Partial", "Pairwise Partial PC+",
                              "|OVB| > |MEB|", "200 completed"}) {
        CHECK(table.find(label) != std::string::npos);
    }
}
