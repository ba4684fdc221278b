#include "biaslab/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <sstream>
#include <vector>

#include "biaslab/errors.hpp"
#include "biaslab/parallel.hpp"

namespace biaslab::montecarlo {

void SimConfig::validate() const
{
    auto fail = [](const std::string& msg) { throw PreconditionViolated("SimConfig: " + msg); };
    if (p < 1 || d < 1) {
        fail("p and d must be >= 1");
    }
    if (n_null_pollutants < 0 || n_null_pollutants > d) {
        fail("n_null_pollutants must lie in [0, d]");
    }
    if (!(wishart_err_scale > 0.0)) {
        fail("wishart_err_scale must be positive");
    }
    if (!(wishart_err_dof >= static_cast<double>(d))) {
        fail("wishart_err_dof must be >= d");
    }
    if (!(latent_dof >= static_cast<double>(p + d))) {
        fail("latent_dof must be >= p + d");
    }
    if (!(gamma_shape > 0.0) || !(gamma_rate > 0.0)) {
        fail("gamma shape and rate must be positive");
    }
    if (max_retries < 1) {
        fail("max_retries must be >= 1");
    }
}

SymMatrix sample_wishart(const SymMatrix& scale, double dof, Rng& rng)
{
    const Index n = scale.dim();
    if (!(dof >= static_cast<double>(n))) {
        throw PreconditionViolated("Wishart dof must be >= dimension");
    }
    const Eigen::MatrixXd chol = linalg::cholesky_lower(scale, "Wishart scale");
    Eigen::MatrixXd bartlett = Eigen::MatrixXd::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        bartlett(i, i) = std::sqrt(rng.chi_square(dof - static_cast<double>(i)));
        for (Index j = 0; j < i; ++j) {
            bartlett(i, j) = rng.normal();
        }
    }
    const Eigen::MatrixXd factor = chol * bartlett;
    return SymMatrix::symmetrized(factor * factor.transpose());
}

bias::CoefficientVector sample_coefficients(const SimConfig& config, Rng& rng)
{
    bias::CoefficientVector beta{Vector::Zero(config.p), Vector::Zero(config.d)};
    for (Index k = 0; k + 1 < config.p; ++k) {
        beta.beta_Z[k] = rng.normal();
    }
    beta.beta_Z[config.p - 1] = -rng.gamma(config.gamma_shape, config.gamma_rate);
    for (Index j = 0; j < config.d - config.n_null_pollutants; ++j) {
        beta.beta_X[j] = -rng.gamma(config.gamma_shape, config.gamma_rate);
    }
    return beta;
}

SymMatrix latent_scale(const SimConfig& config)
{
    const Index n = config.p + config.d;
    const Index controls = config.p - 1;
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n, n);
    v.topLeftCorner(controls, controls).setIdentity();
    const Index k = n - controls;
    v.bottomRightCorner(k, k) = SymMatrix::equicorrelation(k, config.latent_offdiag).dense();
    return SymMatrix(std::move(v));
}

Structure generate_structure(const SimConfig& config, Rng& rng)
{
    const Index p = config.p;
    const Index d = config.d;
    const SymMatrix err_scale = SymMatrix::identity(d).scaled(config.wishart_err_scale);
    const SymMatrix v_mu = latent_scale(config);

    for (int attempt = 0; attempt < config.max_retries; ++attempt) {
        const SymMatrix sigma_b = sample_wishart(err_scale, config.wishart_err_dof, rng);
        const SymMatrix sigma_c = sample_wishart(err_scale, config.wishart_err_dof, rng);
        const SymMatrix sigma_l = sample_wishart(v_mu, config.latent_dof, rng);

        const SymMatrix latent_x = sigma_l.block(p, d);
        const linalg::RectMatrix cov_z_latent = sigma_l.dense().topRightCorner(p, d);
        bias::CovarianceBlocks blocks{sigma_l.block(0, p), cov_z_latent, cov_z_latent,
                                      latent_x + sigma_b,  latent_x.dense(), latent_x + sigma_c};
        SymMatrix cov_zx = blocks.cov_zx();
        if (linalg::is_positive_definite(cov_zx) && linalg::is_positive_definite(blocks.cov_zw())) {
            return {std::move(blocks), std::move(cov_zx)};
        }
    }
    throw GenerationFailed("no positive definite structure after " +
                           std::to_string(config.max_retries) + " attempts");
}

const char* stratum_name(Stratum s)
{
    switch (s) {
    case Stratum::kAll:
        return "all";
    case Stratum::kPairwisePcPlus:
        return "pairwise_pc_plus";
    case Stratum::kWeakPartialPcPlus:
        return "weak_partial_pc_plus";
    case Stratum::kPairwisePartialPcPlus:
        return "pairwise_partial_pc_plus";
    }
    return "?";
}

const char* phenomenon_name(std::size_t phenomenon)
{
    static constexpr const char* names[kPhenomena] = {
        "ovb_measured_negative",      // 1
        "meb_measured_negative",      // 2
        "meb_null_negative",          // 3
        "meb_nonnull_negative",       // 4
        "ovb_exceeds_meb_magnitude",  // 5
    };
    return phenomenon < kPhenomena ? names[phenomenon] : "?";
}

std::string bin_label(std::size_t bin)
{
    if (bin == 0) {
        return "<-0.1";
    }
    if (bin >= kBins - 1) {
        return ">0.5";
    }
    // Bounds in tenths keep the labels free of rounding artifacts.
    const int lo = static_cast<int>(bin) - 2;
    auto tenths = [](int t) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%s%d.%d", t < 0 ? "-" : "", std::abs(t) / 10, std::abs(t) % 10);
        return std::string(buf);
    };
    return "(" + tenths(lo) + "," + tenths(lo + 1) + "]";
}

std::size_t rho_bin(double rho_bar)
{
    if (rho_bar <= -0.1) {
        return 0;
    }
    if (rho_bar > 0.5) {
        return kBins - 1;
    }
    const double k = std::ceil((rho_bar + 0.1) / 0.1 - 1e-12);
    return static_cast<std::size_t>(std::clamp(k, 1.0, 6.0));
}

TrialOutcome evaluate_trial(const SimConfig& config, const Structure& structure,
                            const bias::CoefficientVector& beta)
{
    const Index p = config.p;
    const Index d = config.d;
    const double tol = linalg::kSignTolerance;
    const auto& blocks = structure.blocks;

    const Vector ovb = bias::ovb(blocks, beta);
    const Vector meb = bias::meb_full(blocks, beta);

    TrialOutcome out;
    const double ovb_m = ovb[p - 1];
    const double meb_m = meb[p - 1];
    const double meb_null = meb[p + d - 1];
    const double meb_nonnull = meb[p];
    out.phen = {ovb_m < -tol, meb_m < -tol, meb_null < -tol, meb_nonnull < -tol,
                std::abs(ovb_m) > std::abs(meb_m)};
    out.phen_weak = {ovb_m <= tol, meb_m <= tol, meb_null <= tol, meb_nonnull <= tol,
                     std::abs(ovb_m) >= std::abs(meb_m)};
    out.ovb_measured = ovb_m;

    const auto layout = assumptions::default_layout(p, d, p - 1);
    out.pairwise_pc_plus =
        assumptions::check_pairwise_pc_plus(structure.cov_zx, layout.pollutant_indices);
    out.weak_partial_pc_plus = assumptions::check_weak_partial_pc_plus(structure.cov_zx, p, p - 1);
    out.pairwise_partial_pc_plus =
        assumptions::check_pairwise_partial_pc_plus(structure.cov_zx, layout.pollutant_indices);
    if (config.include_measured_pollutant_in_rho_bar) {
        out.avg_rho =
            assumptions::average_pairwise_correlation(structure.cov_zx, layout.pollutant_indices);
    } else {
        const auto x_only = assumptions::default_layout(p, d, std::nullopt);
        out.avg_rho =
            assumptions::average_pairwise_correlation(structure.cov_zx, x_only.pollutant_indices);
    }

    out.r_squared.resize(d);
    for (Index j = 0; j < d; ++j) {
        const double f = blocks.F(j, j);
        out.r_squared[j] = f * f / (blocks.D(j, j) * blocks.G(j, j));
    }
    return out;
}

std::optional<TrialOutcome> run_trial(const SimConfig& config, std::uint64_t trial_index)
{
    Rng rng = Rng::substream(config.seed, trial_index);
    try {
        const Structure structure = generate_structure(config, rng);
        const bias::CoefficientVector beta = sample_coefficients(config, rng);
        return evaluate_trial(config, structure, beta);
    } catch (const GenerationFailed&) {
        return std::nullopt;
    } catch (const NotPositiveDefinite&) {
        return std::nullopt;
    }
}

double PhenomenonCounts::frequency(std::size_t phenomenon) const
{
    return n == 0 ? 0.0 : static_cast<double>(strict[phenomenon]) / static_cast<double>(n);
}

double PhenomenonCounts::standard_error(std::size_t phenomenon) const
{
    if (n == 0) {
        return 0.0;
    }
    const double f = frequency(phenomenon);
    return std::sqrt(f * (1.0 - f) / static_cast<double>(n));
}

void PhenomenonCounts::add(const TrialOutcome& outcome)
{
    ++n;
    for (std::size_t k = 0; k < kPhenomena; ++k) {
        strict[k] += outcome.phen[k] ? 1 : 0;
        weak[k] += outcome.phen_weak[k] ? 1 : 0;
    }
}

void PhenomenonCounts::merge(const PhenomenonCounts& other)
{
    n += other.n;
    for (std::size_t k = 0; k < kPhenomena; ++k) {
        strict[k] += other.strict[k];
        weak[k] += other.weak[k];
    }
}

double SimTally::prevalence(Stratum s) const
{
    return n_completed == 0 ? 0.0
                            : static_cast<double>(stratum(s).n) / static_cast<double>(n_completed);
}

void SimTally::add(const TrialOutcome& outcome)
{
    ++n_completed;
    strata[static_cast<std::size_t>(Stratum::kAll)].add(outcome);
    if (outcome.pairwise_pc_plus) {
        strata[static_cast<std::size_t>(Stratum::kPairwisePcPlus)].add(outcome);
    }
    if (outcome.weak_partial_pc_plus) {
        strata[static_cast<std::size_t>(Stratum::kWeakPartialPcPlus)].add(outcome);
        if (outcome.ovb_measured > linalg::kSignTolerance) {
            ++weak_partial_violations;
        }
    }
    if (outcome.pairwise_partial_pc_plus) {
        strata[static_cast<std::size_t>(Stratum::kPairwisePartialPcPlus)].add(outcome);
    }
    bins[rho_bin(outcome.avg_rho)].add(outcome);
    for (Index j = 0; j < outcome.r_squared.size(); ++j) {
        const double r2 = std::clamp(outcome.r_squared[j], 0.0, 1.0);
        const auto b = std::min<std::size_t>(static_cast<std::size_t>(r2 * kRSquaredBins),
                                             kRSquaredBins - 1);
        ++r_squared_hist[b];
    }
}

void SimTally::merge(const SimTally& other)
{
    n_requested += other.n_requested;
    n_completed += other.n_completed;
    generation_failures += other.generation_failures;
    weak_partial_violations += other.weak_partial_violations;
    for (std::size_t s = 0; s < kStrata; ++s) {
        strata[s].merge(other.strata[s]);
    }
    for (std::size_t b = 0; b < kBins; ++b) {
        bins[b].merge(other.bins[b]);
    }
    for (std::size_t b = 0; b < kRSquaredBins; ++b) {
        r_squared_hist[b] += other.r_squared_hist[b];
    }
}

SimTally run_experiment(const SimConfig& config)
{
    config.validate();
    const auto n = static_cast<std::size_t>(config.n_trials);
    std::vector<SimTally> partial(chunk_count(n, config.threads));
    parallel_chunks(n, config.threads, [&](std::size_t begin, std::size_t end, unsigned worker) {
        SimTally& local = partial[worker];
        for (std::size_t t = begin; t < end; ++t) {
            ++local.n_requested;
            if (auto outcome = run_trial(config, t)) {
                local.add(*outcome);
            } else {
                ++local.generation_failures;
            }
        }
    });
    SimTally total;
    for (const auto& part : partial) {
        total.merge(part);
    }
    return total;
}

std::string format_table(const SimTally& tally)
{
    static constexpr const char* labels[kPhenomena] = {
        "1  OVB < 0 (measured pollutant)",
        "2  MEB < 0 (measured pollutant)",
        "3  MEB < 0 (null pollutant)",
        "4  MEB < 0 (nonnull pollutant)",
        "5  |OVB| > |MEB|",
    };
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-34s %12s %14s %14s\n", "Phenomenon", "All", "Pairwise PC+",
                  "Weak Partial");
    os << line;
    const auto& all = tally.stratum(Stratum::kAll);
    const auto& pc = tally.stratum(Stratum::kPairwisePcPlus);
    const auto& wp = tally.stratum(Stratum::kWeakPartialPcPlus);
    for (std::size_t k = 0; k < kPhenomena; ++k) {
        std::snprintf(line, sizeof line, "%-34s %11.1f%% %13.1f%% %13.1f%%\n", labels[k],
                      100.0 * all.frequency(k), 100.0 * pc.frequency(k), 100.0 * wp.frequency(k));
        os << line;
    }
    std::snprintf(line, sizeof line,
                  "trials: %llu completed, %llu failed; Pairwise PC+ %llu, Weak Partial PC+ %llu, "
                  "Pairwise Partial PC+ %llu\n",
                  static_cast<unsigned long long>(tally.n_completed),
                  static_cast<unsigned long long>(tally.generation_failures),
                  static_cast<unsigned long long>(pc.n), static_cast<unsigned long long>(wp.n),
                  static_cast<unsigned long long>(
                      tally.stratum(Stratum::kPairwisePartialPcPlus).n));
    os << line;
    return os.str();
}

} // namespace biaslab::montecarlo
