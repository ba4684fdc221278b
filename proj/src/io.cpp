#include "biaslab/io.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include "biaslab/errors.hpp"

namespace biaslab::io {

using linalg::Index;
using linalg::RectMatrix;
using linalg::SymMatrix;
using linalg::Vector;

namespace {

const json& require(const json& j, const char* key)
{
    if (!j.is_object() || !j.contains(key)) {
        throw SchemaError(std::string("missing key '") + key + "'");
    }
    return j.at(key);
}

double number(const json& j, const std::string& where)
{
    if (!j.is_number()) {
        throw SchemaError(where + ": expected a number");
    }
    return j.get<double>();
}

Vector vector_from(const json& j, const std::string& where)
{
    if (!j.is_array()) {
        throw SchemaError(where + ": expected an array of numbers");
    }
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v[static_cast<Index>(i)] = number(j[i], where + "[" + std::to_string(i) + "]");
    }
    return v;
}

RectMatrix matrix_from(const json& j, const std::string& where)
{
    if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty()) {
        throw SchemaError(where + ": expected a nonempty array of rows");
    }
    const std::size_t cols = j[0].size();
    RectMatrix m(static_cast<Index>(j.size()), static_cast<Index>(cols));
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (!j[r].is_array() || j[r].size() != cols) {
            throw SchemaError(where + ": ragged row " + std::to_string(r));
        }
        for (std::size_t c = 0; c < cols; ++c) {
            m(static_cast<Index>(r), static_cast<Index>(c)) =
                number(j[r][c], where + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
        }
    }
    return m;
}

SymMatrix sym_from(const json& j, const std::string& where)
{
    RectMatrix m = matrix_from(j, where);
    if (m.rows() != m.cols()) {
        throw SchemaError(where + ": expected a square matrix");
    }
    try {
        return SymMatrix(std::move(m));
    } catch (const NotSymmetric&) {
        throw SchemaError(where + ": matrix is not symmetric");
    }
}

RectMatrix rect_field(const json& j, const char* key)
{
    return matrix_from(require(j, key), key);
}

SymMatrix sym_field(const json& j, const char* key)
{
    return sym_from(require(j, key), key);
}

template <class T>
T get_or(const json& j, const char* key, T fallback)
{
    if (!j.contains(key)) {
        return fallback;
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("key '") + key + "': " + e.what());
    }
}

} // namespace

AnalyzeInput parse_analyze_input(const json& j)
{
    if (!j.is_object()) {
        throw SchemaError("analyze input must be a JSON object");
    }
    AnalyzeInput in;
    const SymMatrix A = sym_field(j, "A");
    const RectMatrix B = rect_field(j, "B");
    const SymMatrix D = sym_field(j, "D");
    in.beta.beta_Z = vector_from(require(j, "beta_Z"), "beta_Z");
    in.beta.beta_X = vector_from(require(j, "beta_X"), "beta_X");

    if (j.contains("cume_error")) {
        in.cume = bias::CumeError{vector_from(j.at("cume_error"), "cume_error")};
        for (const char* key : {"C", "F", "G"}) {
            if (j.contains(key)) {
                throw SchemaError(std::string("key '") + key +
                                  "' is implied by cume_error and must be omitted");
            }
        }
        if (B.rows() != A.dim() || B.cols() != D.dim()) {
            throw SchemaError("B must be p x d");
        }
        try {
            in.cume->validate(D.dim());
        } catch (const Error& e) {
            throw SchemaError(std::string("cume_error: ") + e.what());
        }
        in.blocks = bias::cume_blocks(A, B, D, *in.cume);
    } else {
        in.blocks = {A, B, rect_field(j, "C"), D, rect_field(j, "F"), sym_field(j, "G")};
    }
    try {
        in.blocks.check_shapes();
    } catch (const DimensionMismatch& e) {
        throw SchemaError(e.what());
    }
    const Index p = in.blocks.p();
    const Index d = in.blocks.d();
    if (in.beta.beta_Z.size() != p || in.beta.beta_X.size() != d) {
        throw SchemaError("beta_Z must have length p and beta_X length d");
    }

    std::optional<Index> measured;
    if (j.contains("measured_pollutant")) {
        const auto k = get_or<long long>(j, "measured_pollutant", -1);
        if (k < 0 || k >= p) {
            throw SchemaError("measured_pollutant must index into Z");
        }
        measured = static_cast<Index>(k);
    }
    in.layout = assumptions::default_layout(p, d, measured);
    if (j.contains("pollutant_indices")) {
        const auto idx = get_or<std::vector<long long>>(j, "pollutant_indices", {});
        in.layout.pollutant_indices.clear();
        for (long long i : idx) {
            if (i < 0 || i >= p + d) {
                throw SchemaError("pollutant_indices entry outside Cov(Z,X)");
            }
            in.layout.pollutant_indices.push_back(static_cast<Index>(i));
        }
    }
    return in;
}

json to_json(const Vector& v)
{
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) {
        a.push_back(v[i]);
    }
    return a;
}

json to_json(const RectMatrix& m)
{
    json rows = json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Index c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

json to_json(const SymMatrix& m)
{
    return to_json(m.dense());
}

json to_json(const bias::BiasReport& report)
{
    json j = {{"ovb", to_json(report.ovb)},
              {"meb_full", to_json(report.meb_full)},
              {"meb_Z", to_json(report.meb_Z)}};
    if (report.cume) {
        j["omega"] = to_json(report.cume->omega);
        j["attenuation_terms"] = to_json(report.cume->attenuation);
        j["additive_terms"] = to_json(report.cume->additive);
    }
    json signs = json::object();
    auto sign_list = [](const Vector& v) {
        json a = json::array();
        for (Index i = 0; i < v.size(); ++i) {
            switch (bias::classify(v[i])) {
            case bias::Sign::kNegative:
                a.push_back("negative");
                break;
            case bias::Sign::kZero:
                a.push_back("zero");
                break;
            case bias::Sign::kPositive:
                a.push_back("positive");
                break;
            }
        }
        return a;
    };
    signs["ovb"] = sign_list(report.ovb);
    signs["meb_full"] = sign_list(report.meb_full);
    signs["sign_tolerance"] = linalg::kSignTolerance;
    j["signs"] = std::move(signs);
    return j;
}

json to_json(const assumptions::AssumptionProfile& profile)
{
    return {{"no_benefit", profile.no_benefit},
            {"pairwise_pc_plus", profile.pairwise_pc_plus},
            {"weak_partial_pc_plus", profile.weak_partial_pc_plus},
            {"pairwise_partial_pc_plus", profile.pairwise_partial_pc_plus},
            {"avg_pairwise_pollutant_corr", profile.avg_pairwise_pollutant_corr}};
}

json to_json(const montecarlo::SimConfig& c)
{
    return {{"n_trials", c.n_trials},
            {"seed", c.seed},
            {"p", c.p},
            {"d", c.d},
            {"wishart_err_scale", c.wishart_err_scale},
            {"wishart_err_dof", c.wishart_err_dof},
            {"latent_dof", c.latent_dof},
            {"latent_offdiag", c.latent_offdiag},
            {"gamma_shape", c.gamma_shape},
            {"gamma_rate", c.gamma_rate},
            {"n_null_pollutants", c.n_null_pollutants},
            {"max_retries", c.max_retries},
            {"include_measured_pollutant_in_rho_bar", c.include_measured_pollutant_in_rho_bar}};
}

montecarlo::SimConfig sim_config_from_json(const json& j, montecarlo::SimConfig c)
{
    if (!j.is_object()) {
        throw SchemaError("simulation config must be a JSON object");
    }
    c.n_trials = get_or(j, "n_trials", c.n_trials);
    c.seed = get_or(j, "seed", c.seed);
    c.p = get_or(j, "p", c.p);
    c.d = get_or(j, "d", c.d);
    c.wishart_err_scale = get_or(j, "wishart_err_scale", c.wishart_err_scale);
    c.wishart_err_dof = get_or(j, "wishart_err_dof", c.wishart_err_dof);
    c.latent_dof = get_or(j, "latent_dof", c.latent_dof);
    c.latent_offdiag = get_or(j, "latent_offdiag", c.latent_offdiag);
    c.gamma_shape = get_or(j, "gamma_shape", c.gamma_shape);
    c.gamma_rate = get_or(j, "gamma_rate", c.gamma_rate);
    c.n_null_pollutants = get_or(j, "n_null_pollutants", c.n_null_pollutants);
    c.max_retries = get_or(j, "max_retries", c.max_retries);
    c.include_measured_pollutant_in_rho_bar = get_or(
        j, "include_measured_pollutant_in_rho_bar", c.include_measured_pollutant_in_rho_bar);
    return c;
}

namespace {

json counts_json(const montecarlo::PhenomenonCounts& pc)
{
    json phen = json::array();
    for (std::size_t k = 0; k < montecarlo::kPhenomena; ++k) {
        phen.push_back({{"phenomenon", k + 1},
                        {"name", montecarlo::phenomenon_name(k)},
                        {"count_strict", pc.strict[k]},
                        {"count_weak", pc.weak[k]},
                        {"frequency", pc.frequency(k)},
                        {"std_error", pc.standard_error(k)}});
    }
    return {{"n", pc.n}, {"phenomena", std::move(phen)}};
}

} // namespace

json to_json(const montecarlo::SimTally& t)
{
    using montecarlo::Stratum;
    json strata = json::object();
    for (std::size_t s = 0; s < montecarlo::kStrata; ++s) {
        strata[montecarlo::stratum_name(static_cast<Stratum>(s))] = counts_json(t.strata[s]);
    }
    json bins = json::array();
    for (std::size_t b = 0; b < montecarlo::kBins; ++b) {
        json entry = counts_json(t.bins[b]);
        entry["bin"] = montecarlo::bin_label(b);
        bins.push_back(std::move(entry));
    }
    json hist = json::array();
    for (std::size_t b = 0; b < montecarlo::kRSquaredBins; ++b) {
        hist.push_back({{"lower", static_cast<double>(b) / montecarlo::kRSquaredBins},
                        {"upper", static_cast<double>(b + 1) / montecarlo::kRSquaredBins},
                        {"count", t.r_squared_hist[b]}});
    }
    return {{"n_requested", t.n_requested},
            {"n_completed", t.n_completed},
            {"generation_failures", t.generation_failures},
            {"weak_partial_ovb_sign_violations", t.weak_partial_violations},
            {"sign_tolerance", linalg::kSignTolerance},
            {"prevalence",
             {{"pairwise_pc_plus", t.prevalence(Stratum::kPairwisePcPlus)},
              {"weak_partial_pc_plus", t.prevalence(Stratum::kWeakPartialPcPlus)},
              {"pairwise_partial_pc_plus", t.prevalence(Stratum::kPairwisePartialPcPlus)}}},
            {"strata", std::move(strata)},
            {"rho_bar_bins", std::move(bins)},
            {"r_squared_histogram", std::move(hist)}};
}

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_tally_csv(std::ostream& out, const montecarlo::SimTally& t)
{
    out << "group,label,phenomenon,n,count_strict,count_weak,frequency,std_error\n";
    auto rows = [&](const char* group, const std::string& label,
                    const montecarlo::PhenomenonCounts& pc) {
        for (std::size_t k = 0; k < montecarlo::kPhenomena; ++k) {
            out << group << ',' << label << ',' << (k + 1) << ',' << pc.n << ',' << pc.strict[k]
                << ',' << pc.weak[k] << ',' << format_double(pc.frequency(k)) << ','
                << format_double(pc.standard_error(k)) << '\n';
        }
    };
    for (std::size_t s = 0; s < montecarlo::kStrata; ++s) {
        rows("stratum", montecarlo::stratum_name(static_cast<montecarlo::Stratum>(s)),
             t.strata[s]);
    }
    for (std::size_t b = 0; b < montecarlo::kBins; ++b) {
        rows("bin", montecarlo::bin_label(b), t.bins[b]);
    }
}

json to_json(const panel::RegressionFit& f)
{
    return {{"name", f.name},           {"coefficient", f.coefficient}, {"std_error", f.std_error},
            {"t_stat", f.t_stat},       {"n_obs", f.n_obs},             {"n_units", f.n_units}};
}

json to_json(const panel::Combo& c)
{
    return {{"main", panel::pollutant_key(c.main)},
            {"control", panel::pollutant_key(c.control)},
            {"crop", c.crop}};
}

json to_json(const panel::TripleResult& r)
{
    return {{"combo", to_json(r.combo)},       {"beta_gt", to_json(r.gt)},
            {"beta_om", to_json(r.om)},        {"beta_me", to_json(r.me)},
            {"ovb_hat", r.ovb_hat},            {"meb_hat", r.meb_hat},
            {"who_divisor", panel::who_divisor(r.combo.main)}};
}

json to_json(const panel::SummaryStats& s)
{
    return {{"n_combos", s.n_combos},
            {"count_negative_ovb", s.count_negative_ovb},
            {"count_negative_meb", s.count_negative_meb},
            {"mean_tstat_diff_ovb", s.mean_tstat_diff_ovb},
            {"mean_tstat_diff_meb", s.mean_tstat_diff_meb},
            {"mean_bias_ovb_who", s.mean_bias_ovb_who},
            {"mean_bias_meb_who", s.mean_bias_meb_who}};
}

json to_json(const panel::BootstrapSummary& s)
{
    json point = json::array();
    for (const auto& r : s.point) {
        point.push_back(to_json(r));
    }
    json failed = json::array();
    for (const auto& c : s.failed_combos) {
        failed.push_back(to_json(c));
    }
    auto dist = [](const std::vector<panel::SummaryStats>& reps,
                   const std::array<double, panel::kSummaryStats>& not_supporting) {
        json j = json::object();
        json n = json::array();
        for (const auto& r : reps) {
            n.push_back(r.n_combos);
        }
        j["n_combos"] = std::move(n);
        for (std::size_t k = 0; k < panel::kSummaryStats; ++k) {
            json values = json::array();
            for (const auto& r : reps) {
                values.push_back(panel::summary_stat_value(r, k));
            }
            j[panel::summary_stat_name(k)] = {{"replicates", std::move(values)},
                                              {"fraction_not_supporting", not_supporting[k]}};
        }
        return j;
    };
    return {{"validation_results", std::move(point)},
            {"failed_combos", std::move(failed)},
            {"point_estimate",
             {{"all", to_json(s.point_all)}, {"subset", to_json(s.point_subset)}}},
            {"bootstrap",
             {{"n_reps", s.replicates_all.size()},
              {"skipped_fits", s.skipped_fits},
              {"all", dist(s.replicates_all, s.not_supporting_all)},
              {"subset", dist(s.replicates_subset, s.not_supporting_subset)}}}};
}

void write_replicates_csv(std::ostream& out, const panel::BootstrapSummary& s)
{
    out << "replicate,set,n_combos";
    for (std::size_t k = 0; k < panel::kSummaryStats; ++k) {
        out << ',' << panel::summary_stat_name(k);
    }
    out << '\n';
    auto rows = [&](const char* set, const std::vector<panel::SummaryStats>& reps) {
        for (std::size_t r = 0; r < reps.size(); ++r) {
            out << r << ',' << set << ',' << reps[r].n_combos;
            for (std::size_t k = 0; k < panel::kSummaryStats; ++k) {
                out << ',' << format_double(panel::summary_stat_value(reps[r], k));
            }
            out << '\n';
        }
    };
    rows("all", s.replicates_all);
    rows("subset", s.replicates_subset);
}

json to_json(const panel::SynthConfig& c)
{
    json pollutants = json::array();
    for (auto p : c.pollutants) {
        pollutants.push_back(panel::pollutant_key(p));
    }
    auto keyed = [](const std::array<double, panel::kPollutants>& v) {
        json j = json::object();
        for (std::size_t k = 0; k < panel::kPollutants; ++k) {
            j[std::string(panel::pollutant_key(static_cast<panel::Pollutant>(k)))] = v[k];
        }
        return j;
    };
    return {{"n_units", c.n_units},
            {"n_years", c.n_years},
            {"first_year", c.first_year},
            {"crops", c.crops},
            {"pollutants", std::move(pollutants)},
            {"level", keyed(c.level)},
            {"within_sd", keyed(c.within_sd)},
            {"within_corr", c.within_corr},
            {"unit_sd_factor", c.unit_sd_factor},
            {"beta_who", keyed(c.beta_who)},
            {"gamma", c.gamma},
            {"trend", c.trend},
            {"unit_effect_sd", c.unit_effect_sd},
            {"noise_sd", c.noise_sd},
            {"proxy_error", panel::proxy_error_name(c.proxy_error)},
            {"error_ratio", c.error_ratio},
            {"monitor_missing", c.monitor_missing},
            {"yield_missing", c.yield_missing}};
}

panel::SynthConfig synth_config_from_json(const json& j, panel::SynthConfig c)
{
    if (!j.is_object()) {
        throw SchemaError("synthetic panel config must be a JSON object");
    }
    auto keyed = [&](const char* key, std::array<double, panel::kPollutants>& v) {
        if (!j.contains(key)) {
            return;
        }
        const json& m = j.at(key);
        if (!m.is_object()) {
            throw SchemaError(std::string("key '") + key + "' must map pollutant to number");
        }
        for (const auto& [name, value] : m.items()) {
            try {
                v[static_cast<std::size_t>(panel::parse_pollutant(name))] =
                    number(value, std::string(key) + "." + name);
            } catch (const UnknownPollutant& e) {
                throw SchemaError(e.what());
            }
        }
    };
    c.n_units = get_or(j, "n_units", c.n_units);
    c.n_years = get_or(j, "n_years", c.n_years);
    c.first_year = get_or(j, "first_year", c.first_year);
    c.crops = get_or(j, "crops", c.crops);
    if (j.contains("pollutants")) {
        c.pollutants.clear();
        for (const auto& name : get_or<std::vector<std::string>>(j, "pollutants", {})) {
            try {
                c.pollutants.push_back(panel::parse_pollutant(name));
            } catch (const UnknownPollutant& e) {
                throw SchemaError(e.what());
            }
        }
    }
    keyed("level", c.level);
    keyed("within_sd", c.within_sd);
    keyed("beta_who", c.beta_who);
    c.within_corr = get_or(j, "within_corr", c.within_corr);
    c.unit_sd_factor = get_or(j, "unit_sd_factor", c.unit_sd_factor);
    c.gamma = get_or(j, "gamma", c.gamma);
    c.trend = get_or(j, "trend", c.trend);
    c.unit_effect_sd = get_or(j, "unit_effect_sd", c.unit_effect_sd);
    c.noise_sd = get_or(j, "noise_sd", c.noise_sd);
    if (j.contains("proxy_error")) {
        try {
            c.proxy_error = panel::parse_proxy_error(get_or<std::string>(j, "proxy_error", ""));
        } catch (const PreconditionViolated& e) {
            throw SchemaError(e.what());
        }
    }
    c.error_ratio = get_or(j, "error_ratio", c.error_ratio);
    c.monitor_missing = get_or(j, "monitor_missing", c.monitor_missing);
    c.yield_missing = get_or(j, "yield_missing", c.yield_missing);
    return c;
}

json synth_manifest(const panel::SynthConfig& config, std::uint64_t seed,
                    const panel::SynthPanel& synth)
{
    json beta = json::object();
    json names = json::array();
    for (auto p : config.pollutants) {
        const std::string key(panel::pollutant_key(p));
        beta[key] = config.beta(p);
        names.push_back(key);
    }
    return {{"seed", seed},
            {"config", to_json(config)},
            {"true_beta_per_ug_m3", std::move(beta)},
            {"covariance_order", std::move(names)},
            {"within_unit_covariance", to_json(synth.within_cov)},
            {"error_variance", to_json(synth.error_var)},
            {"noise_sd", config.noise_sd},
            {"units",
             {{"concentration", "ug/m3"},
              {"outcome", "log yield"},
              {"ppb_to_ug_m3", json::object()}}}};
}

json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw SchemaError("cannot open '" + path + "'");
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError("'" + path + "' is not valid JSON: " + e.what());
    }
}

void write_json_file(const std::string& path, const json& j)
{
    std::ofstream out(path);
    if (!out) {
        throw SchemaError("cannot write '" + path + "'");
    }
    out << j.dump(2) << '\n';
}

} // namespace biaslab::io
