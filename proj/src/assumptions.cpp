#include "biaslab/assumptions.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "biaslab/errors.hpp"

namespace biaslab::assumptions {

namespace {

void check_indices(const SymMatrix& m, std::span<const Index> indices)
{
    for (Index i : indices) {
        if (i < 0 || i >= m.dim()) {
            throw IndexOutOfRange("pollutant index " + std::to_string(i) +
                                  " outside covariance of dim " + std::to_string(m.dim()));
        }
    }
}

} // namespace

bool check_no_benefit(const Vector& beta_pollutants)
{
    return (beta_pollutants.array() <= linalg::kSignTolerance).all();
}

bool check_pairwise_pc_plus(const SymMatrix& cov_zx, std::span<const Index> pollutant_indices)
{
    check_indices(cov_zx, pollutant_indices);
    for (std::size_t a = 0; a < pollutant_indices.size(); ++a) {
        for (std::size_t b = a + 1; b < pollutant_indices.size(); ++b) {
            if (!(cov_zx(pollutant_indices[a], pollutant_indices[b]) > linalg::kSignTolerance)) {
                return false;
            }
        }
    }
    return true;
}

std::vector<double> weak_partial_correlations(const SymMatrix& cov_zx, Index p, Index k)
{
    if (p < 1 || p >= cov_zx.dim()) {
        throw IndexOutOfRange("weak partial PC+: p must lie in [1, dim)");
    }
    if (k < 0 || k >= p) {
        throw IndexOutOfRange("weak partial PC+: measured pollutant index outside Z");
    }
    const Index d = cov_zx.dim() - p;
    std::vector<Index> idx(static_cast<std::size_t>(p) + 1);
    std::iota(idx.begin(), idx.end() - 1, Index{0});
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(d));
    for (Index j = 0; j < d; ++j) {
        idx.back() = p + j;
        const SymMatrix sub = cov_zx.principal(idx);
        out.push_back(linalg::partial_correlation(sub, k, p));
    }
    return out;
}

bool check_weak_partial_pc_plus(const SymMatrix& cov_zx, Index p, Index k)
{
    for (double r : weak_partial_correlations(cov_zx, p, k)) {
        if (!(r > linalg::kSignTolerance)) {
            return false;
        }
    }
    return true;
}

bool check_pairwise_partial_pc_plus(const SymMatrix& cov_zx,
                                    std::span<const Index> pollutant_indices)
{
    check_indices(cov_zx, pollutant_indices);
    const SymMatrix precision = linalg::cholesky_inverse(cov_zx, "Cov(Z,X)");
    for (std::size_t a = 0; a < pollutant_indices.size(); ++a) {
        for (std::size_t b = a + 1; b < pollutant_indices.size(); ++b) {
            const double r = linalg::partial_correlation_from_precision(
                precision, pollutant_indices[a], pollutant_indices[b]);
            if (!(r > linalg::kSignTolerance)) {
                return false;
            }
        }
    }
    return true;
}

bool check_pairwise_partial_pc_plus(const SymMatrix& cov_zx, Index p)
{
    std::vector<Index> idx(static_cast<std::size_t>(cov_zx.dim() - p));
    std::iota(idx.begin(), idx.end(), p);
    return check_pairwise_partial_pc_plus(cov_zx, idx);
}

double average_pairwise_correlation(const SymMatrix& cov, std::span<const Index> indices)
{
    check_indices(cov, indices);
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < indices.size(); ++a) {
        for (std::size_t b = a + 1; b < indices.size(); ++b) {
            const Index i = indices[a];
            const Index j = indices[b];
            sum += cov(i, j) / std::sqrt(cov(i, i) * cov(j, j));
            ++pairs;
        }
    }
    return pairs == 0 ? 0.0 : sum / static_cast<double>(pairs);
}

PollutantLayout default_layout(Index p, Index d, std::optional<Index> measured)
{
    PollutantLayout layout;
    layout.p = p;
    layout.measured_pollutant = measured;
    if (measured) {
        layout.pollutant_indices.push_back(*measured);
    }
    for (Index j = 0; j < d; ++j) {
        layout.pollutant_indices.push_back(p + j);
    }
    return layout;
}

AssumptionProfile evaluate_profile(const SymMatrix& cov_zx, const Vector& beta_pollutants,
                                   const PollutantLayout& layout)
{
    AssumptionProfile profile;
    profile.no_benefit = check_no_benefit(beta_pollutants);
    profile.pairwise_pc_plus = check_pairwise_pc_plus(cov_zx, layout.pollutant_indices);
    profile.weak_partial_pc_plus =
        layout.measured_pollutant &&
        check_weak_partial_pc_plus(cov_zx, layout.p, *layout.measured_pollutant);
    profile.pairwise_partial_pc_plus =
        check_pairwise_partial_pc_plus(cov_zx, layout.pollutant_indices);
    profile.avg_pairwise_pollutant_corr =
        average_pairwise_correlation(cov_zx, layout.pollutant_indices);
    return profile;
}

} // namespace biaslab::assumptions
