#include "biaslab/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include <Eigen/QR>

#include "biaslab/errors.hpp"
#include "biaslab/parallel.hpp"
#include "biaslab/random.hpp"

namespace biaslab::panel {

namespace {

constexpr std::array<std::string_view, kPollutants> kKeys = {"CO", "NO2", "O3", "PM10", "PM25",
                                                             "SO2"};
constexpr std::array<double, kPollutants> kWho = {4000.0, 25.0, 100.0, 45.0, 15.0, 40.0};

std::string upper(std::string_view s)
{
    std::string out(s);
    for (char& c : out) {
        if (c >= 'a' && c <= 'z') {
            c = static_cast<char>(c - 'a' + 'A');
        }
    }
    return out;
}

} // namespace

std::string_view pollutant_key(Pollutant p)
{
    return kKeys[static_cast<std::size_t>(p)];
}

Pollutant parse_pollutant(std::string_view key)
{
    std::string k = upper(key);
    if (k == "PM2.5" || k == "PM2_5") {
        k = "PM25";
    }
    for (std::size_t i = 0; i < kPollutants; ++i) {
        if (k == kKeys[i]) {
            return static_cast<Pollutant>(i);
        }
    }
    throw UnknownPollutant("unknown pollutant '" + std::string(key) + "'");
}

double who_divisor(Pollutant p)
{
    return kWho[static_cast<std::size_t>(p)];
}

Vector who_rescale(const Vector& values, Pollutant p)
{
    return values / who_divisor(p);
}

Vector who_rescale(const Vector& values, std::string_view key)
{
    return who_rescale(values, parse_pollutant(key));
}

// ---------------------------------------------------------------------------
// Dataset and CSV.

void PanelDataset::validate() const
{
    std::set<std::tuple<std::string, int, std::string>> seen;
    for (const auto& r : rows) {
        if (!seen.emplace(r.unit_id, r.year, r.crop).second) {
            throw SchemaError("duplicate row for unit '" + r.unit_id + "', year " +
                              std::to_string(r.year) + ", crop '" + r.crop + "'");
        }
        if (r.yield && !(*r.yield > 0.0)) {
            throw SchemaError("nonpositive yield for unit '" + r.unit_id + "', year " +
                              std::to_string(r.year));
        }
    }
}

std::vector<std::string> PanelDataset::crops() const
{
    std::set<std::string> s;
    for (const auto& r : rows) {
        s.insert(r.crop);
    }
    return {s.begin(), s.end()};
}

namespace {

std::vector<std::string> csv_header()
{
    std::vector<std::string> h = {"unit_id", "year", "crop", "yield"};
    for (auto k : kKeys) {
        h.push_back("mon_" + std::string(k));
    }
    for (auto k : kKeys) {
        h.push_back("prox_" + std::string(k));
    }
    for (std::size_t i = 1; i <= kWeather; ++i) {
        h.push_back("w" + std::to_string(i));
    }
    return h;
}

std::vector<std::string_view> split_line(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

double parse_double(std::string_view s, std::size_t line_no, std::string_view column)
{
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw SchemaError("line " + std::to_string(line_no) + ": column " + std::string(column) +
                          ": invalid number '" + std::string(s) + "'");
    }
    return v;
}

std::optional<double> parse_optional(std::string_view s, std::size_t line_no,
                                     std::string_view column)
{
    if (s.empty()) {
        return std::nullopt;
    }
    return parse_double(s, line_no, column);
}

void put_number(std::ostream& out, double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
}

void put_optional(std::ostream& out, const std::optional<double>& v)
{
    if (v) {
        put_number(out, *v);
    }
}

} // namespace

PanelDataset read_panel_csv(std::istream& in)
{
    const auto header = csv_header();
    std::string line;
    if (!std::getline(in, line)) {
        throw SchemaError("panel CSV is empty");
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    const auto cols = split_line(line);
    if (cols.size() != header.size() || !std::equal(cols.begin(), cols.end(), header.begin())) {
        throw SchemaError("panel CSV header mismatch; expected " + std::to_string(header.size()) +
                          " columns starting unit_id,year,crop,yield");
    }
    PanelDataset data;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto f = split_line(line);
        if (f.size() != header.size()) {
            throw SchemaError("line " + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " fields, got " +
                              std::to_string(f.size()));
        }
        PanelRow r;
        r.unit_id = std::string(f[0]);
        if (r.unit_id.empty()) {
            throw SchemaError("line " + std::to_string(line_no) + ": empty unit_id");
        }
        int year = 0;
        const auto [ptr, ec] = std::from_chars(f[1].data(), f[1].data() + f[1].size(), year);
        if (ec != std::errc() || ptr != f[1].data() + f[1].size()) {
            throw SchemaError("line " + std::to_string(line_no) + ": invalid year");
        }
        r.year = year;
        r.crop = std::string(f[2]);
        if (r.crop.empty()) {
            throw SchemaError("line " + std::to_string(line_no) + ": empty crop");
        }
        r.yield = parse_optional(f[3], line_no, header[3]);
        for (std::size_t k = 0; k < kPollutants; ++k) {
            r.monitor[k] = parse_optional(f[4 + k], line_no, header[4 + k]);
            r.proxy[k] = parse_optional(f[4 + kPollutants + k], line_no, header[4 + kPollutants + k]);
        }
        for (std::size_t w = 0; w < kWeather; ++w) {
            const std::size_t c = 4 + 2 * kPollutants + w;
            r.weather[w] = parse_double(f[c], line_no, header[c]);
        }
        data.rows.push_back(std::move(r));
    }
    data.validate();
    return data;
}

PanelDataset read_panel_csv_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw SchemaError("cannot open panel CSV '" + path + "'");
    }
    return read_panel_csv(in);
}

void write_panel_csv(std::ostream& out, const PanelDataset& data)
{
    const auto header = csv_header();
    for (std::size_t i = 0; i < header.size(); ++i) {
        out << (i ? "," : "") << header[i];
    }
    out << '\n';
    for (const auto& r : data.rows) {
        out << r.unit_id << ',' << r.year << ',' << r.crop << ',';
        put_optional(out, r.yield);
        for (const auto& v : r.monitor) {
            out << ',';
            put_optional(out, v);
        }
        for (const auto& v : r.proxy) {
            out << ',';
            put_optional(out, v);
        }
        for (double w : r.weather) {
            out << ',';
            put_number(out, w);
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Fixed-effects OLS.

std::string Regressor::name() const
{
    switch (kind) {
    case Kind::kMonitor:
        return "mon_" + std::string(kKeys.at(index));
    case Kind::kProxy:
        return "prox_" + std::string(kKeys.at(index));
    case Kind::kWeather:
        return "w" + std::to_string(index + 1);
    }
    return "?";
}

namespace {

std::optional<double> value_of(const PanelRow& r, const Regressor& reg)
{
    switch (reg.kind) {
    case Regressor::Kind::kMonitor:
        return r.monitor.at(reg.index);
    case Regressor::Kind::kProxy:
        return r.proxy.at(reg.index);
    case Regressor::Kind::kWeather:
        return r.weather.at(reg.index);
    }
    return std::nullopt;
}

struct RowRef {
    const PanelRow* row;
    std::size_t unit;
};

bool has_all(const PanelRow& r, const std::vector<Regressor>& regs)
{
    return std::all_of(regs.begin(), regs.end(),
                       [&](const Regressor& g) { return value_of(r, g).has_value(); });
}

/// Fits on rows that already carry every required value.
std::vector<RegressionFit> fit_within(std::vector<RowRef> refs, const std::vector<Regressor>& regs,
                                      bool include_trend)
{
    std::sort(refs.begin(), refs.end(), [](const RowRef& a, const RowRef& b) {
        return std::tie(a.unit, a.row->year) < std::tie(b.unit, b.row->year);
    });

    // Drop units with a single row; they carry no within-unit variation.
    std::vector<RowRef> kept;
    kept.reserve(refs.size());
    std::vector<std::pair<std::size_t, std::size_t>> groups;
    for (std::size_t i = 0; i < refs.size();) {
        std::size_t j = i;
        while (j < refs.size() && refs[j].unit == refs[i].unit) {
            ++j;
        }
        if (j - i >= 2) {
            groups.emplace_back(kept.size(), j - i);
            kept.insert(kept.end(), refs.begin() + static_cast<std::ptrdiff_t>(i),
                        refs.begin() + static_cast<std::ptrdiff_t>(j));
        }
        i = j;
    }

    const std::size_t k = regs.size() + (include_trend ? 1 : 0);
    const std::size_t n = kept.size();
    const std::size_t n_units = groups.size();
    if (n <= k + n_units) {
        throw InsufficientData("fixed-effects regression needs n_obs > k + n_units (n_obs=" +
                               std::to_string(n) + ", k=" + std::to_string(k) +
                               ", n_units=" + std::to_string(n_units) + ")");
    }

    int min_year = kept.front().row->year;
    for (const auto& r : kept) {
        min_year = std::min(min_year, r.row->year);
    }

    Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const PanelRow& r = *kept[i].row;
        const auto row = static_cast<Eigen::Index>(i);
        y[row] = std::log(*r.yield);
        for (std::size_t c = 0; c < regs.size(); ++c) {
            X(row, static_cast<Eigen::Index>(c)) = *value_of(r, regs[c]);
        }
        if (include_trend) {
            X(row, static_cast<Eigen::Index>(k - 1)) = static_cast<double>(r.year - min_year);
        }
    }
    for (const auto& [start, len] : groups) {
        const auto s = static_cast<Eigen::Index>(start);
        const auto l = static_cast<Eigen::Index>(len);
        y.segment(s, l).array() -= y.segment(s, l).mean();
        for (Eigen::Index c = 0; c < X.cols(); ++c) {
            X.col(c).segment(s, l).array() -= X.col(c).segment(s, l).mean();
        }
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < static_cast<Eigen::Index>(k)) {
        throw RankDeficient("demeaned design has rank " + std::to_string(qr.rank()) + " < " +
                            std::to_string(k));
    }
    const Eigen::VectorXd coef = qr.solve(y);
    const Eigen::VectorXd resid = y - X * coef;
    const double df = static_cast<double>(n - k - n_units);
    const double s2 = resid.squaredNorm() / df;
    const SymMatrix xtx = SymMatrix::symmetrized(X.transpose() * X);
    const SymMatrix inv = linalg::cholesky_inverse(xtx, "X'X");

    std::vector<RegressionFit> fits;
    fits.reserve(k);
    for (std::size_t c = 0; c < k; ++c) {
        RegressionFit f;
        f.name = c < regs.size() ? regs[c].name() : "trend";
        const auto ci = static_cast<Eigen::Index>(c);
        f.coefficient = coef[ci];
        f.std_error = std::sqrt(s2 * inv(ci, ci));
        f.t_stat = f.coefficient / f.std_error;
        f.n_obs = n;
        f.n_units = n_units;
        fits.push_back(std::move(f));
    }
    return fits;
}

/// Rows of the dataset with units indexed by sorted unit_id.
std::vector<RowRef> dataset_refs(const PanelDataset& data)
{
    std::map<std::string, std::size_t> ids;
    for (const auto& r : data.rows) {
        ids.emplace(r.unit_id, 0);
    }
    std::size_t next = 0;
    for (auto& [id, idx] : ids) {
        idx = next++;
    }
    std::vector<RowRef> refs;
    refs.reserve(data.rows.size());
    for (const auto& r : data.rows) {
        refs.push_back({&r, ids.at(r.unit_id)});
    }
    return refs;
}

std::vector<Regressor> weather_regressors()
{
    std::vector<Regressor> w;
    for (std::size_t i = 0; i < kWeather; ++i) {
        w.push_back(Regressor::weather(i));
    }
    return w;
}

TripleResult triple_on(const std::vector<RowRef>& all, const Combo& combo)
{
    if (combo.main == combo.control) {
        throw PreconditionViolated("main and control pollutant must differ");
    }
    const auto m = static_cast<std::size_t>(combo.main);
    const auto c = static_cast<std::size_t>(combo.control);
    std::vector<RowRef> rows;
    for (const auto& ref : all) {
        const PanelRow& r = *ref.row;
        if (r.crop == combo.crop && r.yield && r.monitor[m] && r.monitor[c]) {
            if (!r.proxy[c]) {
                throw InsufficientData("proxy for " + std::string(kKeys[c]) +
                                       " missing on a row with monitor coverage");
            }
            rows.push_back(ref);
        }
    }
    const auto weather = weather_regressors();
    auto with = [&](std::initializer_list<Regressor> head) {
        std::vector<Regressor> regs(head);
        regs.insert(regs.end(), weather.begin(), weather.end());
        return regs;
    };

    TripleResult out;
    out.combo = combo;
    out.gt = fit_within(rows, with({Regressor::monitor(combo.main), Regressor::monitor(combo.control)}),
                        true)
                 .front();
    out.om = fit_within(rows, with({Regressor::monitor(combo.main)}), true).front();
    out.me = fit_within(rows, with({Regressor::monitor(combo.main), Regressor::proxy(combo.control)}),
                        true)
                 .front();
    out.ovb_hat = out.om.coefficient - out.gt.coefficient;
    out.meb_hat = out.me.coefficient - out.gt.coefficient;
    return out;
}

} // namespace

std::vector<RegressionFit> fe_ols(const PanelDataset& data, const FeFormula& formula)
{
    if (formula.regressors.empty() && !formula.include_trend) {
        throw PreconditionViolated("fe_ols needs at least one regressor");
    }
    std::vector<RowRef> rows;
    for (const auto& ref : dataset_refs(data)) {
        const PanelRow& r = *ref.row;
        if (r.crop == formula.crop && r.yield && has_all(r, formula.regressors)) {
            rows.push_back(ref);
        }
    }
    return fit_within(std::move(rows), formula.regressors, formula.include_trend);
}

TripleResult run_triple(const PanelDataset& data, const Combo& combo)
{
    return triple_on(dataset_refs(data), combo);
}

std::vector<Combo> all_combos(const std::vector<Pollutant>& pollutants,
                              const std::vector<std::string>& crops)
{
    std::vector<Combo> out;
    for (const auto& crop : crops) {
        for (Pollutant m : pollutants) {
            for (Pollutant c : pollutants) {
                if (m != c) {
                    out.push_back({m, c, crop});
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Summaries and bootstrap.

const char* summary_stat_name(std::size_t stat)
{
    static constexpr const char* names[kSummaryStats] = {
        "count_negative_ovb",  "count_negative_meb", "mean_tstat_diff_ovb",
        "mean_tstat_diff_meb", "mean_bias_ovb_who",  "mean_bias_meb_who"};
    return stat < kSummaryStats ? names[stat] : "?";
}

double summary_stat_value(const SummaryStats& s, std::size_t stat)
{
    switch (stat) {
    case 0:
        return static_cast<double>(s.count_negative_ovb);
    case 1:
        return static_cast<double>(s.count_negative_meb);
    case 2:
        return s.mean_tstat_diff_ovb;
    case 3:
        return s.mean_tstat_diff_meb;
    case 4:
        return s.mean_bias_ovb_who;
    case 5:
        return s.mean_bias_meb_who;
    default:
        throw IndexOutOfRange("summary statistic index");
    }
}

SummaryStats summarize(const std::vector<TripleResult>& results, const ComboFilter& keep)
{
    SummaryStats s;
    for (const auto& r : results) {
        if (keep && !keep(r.combo)) {
            continue;
        }
        ++s.n_combos;
        s.count_negative_ovb += r.ovb_hat < 0.0 ? 1 : 0;
        s.count_negative_meb += r.meb_hat < 0.0 ? 1 : 0;
        s.mean_tstat_diff_ovb += r.om.t_stat - r.gt.t_stat;
        s.mean_tstat_diff_meb += r.me.t_stat - r.gt.t_stat;
        const double who = who_divisor(r.combo.main);
        s.mean_bias_ovb_who += r.ovb_hat * who;
        s.mean_bias_meb_who += r.meb_hat * who;
    }
    if (s.n_combos > 0) {
        const double n = static_cast<double>(s.n_combos);
        s.mean_tstat_diff_ovb /= n;
        s.mean_tstat_diff_meb /= n;
        s.mean_bias_ovb_who /= n;
        s.mean_bias_meb_who /= n;
    }
    return s;
}

double fraction_not_supporting(const std::vector<SummaryStats>& replicates, std::size_t stat)
{
    if (replicates.empty()) {
        return 0.0;
    }
    std::size_t count = 0;
    for (const auto& s : replicates) {
        const double v = summary_stat_value(s, stat);
        const bool not_supporting =
            stat < 2 ? 2.0 * v <= static_cast<double>(s.n_combos) : v >= 0.0;
        count += not_supporting ? 1 : 0;
    }
    return static_cast<double>(count) / static_cast<double>(replicates.size());
}

BootstrapSummary cluster_bootstrap(const PanelDataset& data, const std::vector<Combo>& combos,
                                   const BootstrapConfig& config)
{
    if (config.n_reps < 1) {
        throw PreconditionViolated("bootstrap needs n_reps >= 1");
    }
    for (const auto& c : combos) {
        if (c.main == c.control) {
            throw PreconditionViolated("main and control pollutant must differ");
        }
    }

    const std::vector<RowRef> base = dataset_refs(data);
    std::size_t n_units = 0;
    for (const auto& r : base) {
        n_units = std::max(n_units, r.unit + 1);
    }
    std::vector<std::vector<const PanelRow*>> by_unit(n_units);
    for (const auto& r : base) {
        by_unit[r.unit].push_back(r.row);
    }

    BootstrapSummary out;
    for (const auto& combo : combos) {
        try {
            out.point.push_back(triple_on(base, combo));
        } catch (const InsufficientData&) {
            out.failed_combos.push_back(combo);
        } catch (const RankDeficient&) {
            out.failed_combos.push_back(combo);
        }
    }
    out.point_all = summarize(out.point);
    out.point_subset = summarize(out.point, config.subset);

    out.replicates_all.resize(config.n_reps);
    out.replicates_subset.resize(config.n_reps);
    std::vector<std::uint64_t> skipped(config.n_reps, 0);
    parallel_chunks(config.n_reps, config.threads, [&](std::size_t begin, std::size_t end, unsigned) {
        for (std::size_t rep = begin; rep < end; ++rep) {
            Rng rng = Rng::substream(config.seed, rep);
            std::vector<RowRef> refs;
            refs.reserve(base.size());
            for (std::size_t slot = 0; slot < n_units; ++slot) {
                const std::size_t u = config.identity_resample ? slot : rng.below(n_units);
                for (const PanelRow* row : by_unit[u]) {
                    refs.push_back({row, slot});
                }
            }
            std::vector<TripleResult> results;
            results.reserve(combos.size());
            for (const auto& combo : combos) {
                try {
                    results.push_back(triple_on(refs, combo));
                } catch (const InsufficientData&) {
                    ++skipped[rep];
                } catch (const RankDeficient&) {
                    ++skipped[rep];
                }
            }
            out.replicates_all[rep] = summarize(results);
            out.replicates_subset[rep] = summarize(results, config.subset);
        }
    });
    for (auto s : skipped) {
        out.skipped_fits += s;
    }
    for (std::size_t k = 0; k < kSummaryStats; ++k) {
        out.not_supporting_all[k] = fraction_not_supporting(out.replicates_all, k);
        out.not_supporting_subset[k] = fraction_not_supporting(out.replicates_subset, k);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic panels.

const char* proxy_error_name(ProxyError e)
{
    switch (e) {
    case ProxyError::kNone:
        return "none";
    case ProxyError::kClassical:
        return "classical";
    case ProxyError::kBerkson:
        return "berkson";
    }
    return "?";
}

ProxyError parse_proxy_error(std::string_view name)
{
    for (ProxyError e : {ProxyError::kNone, ProxyError::kClassical, ProxyError::kBerkson}) {
        if (name == proxy_error_name(e)) {
            return e;
        }
    }
    throw PreconditionViolated("unknown proxy error model '" + std::string(name) + "'");
}

void SynthConfig::validate() const
{
    auto fail = [](const std::string& msg) { throw PreconditionViolated("SynthConfig: " + msg); };
    if (n_units < 2 || n_years < 3) {
        fail("need n_units >= 2 and n_years >= 3");
    }
    if (crops.empty()) {
        fail("need at least one crop");
    }
    if (pollutants.size() < 2) {
        fail("need at least two pollutants");
    }
    std::set<Pollutant> distinct(pollutants.begin(), pollutants.end());
    if (distinct.size() != pollutants.size()) {
        fail("duplicate pollutant");
    }
    for (double sd : within_sd) {
        if (!(sd > 0.0)) {
            fail("within_sd must be positive");
        }
    }
    for (double b : beta_who) {
        if (!(b <= 0.0)) {
            fail("pollutant coefficients must be nonpositive");
        }
    }
    if (!(noise_sd >= 0.0) || !(error_ratio >= 0.0) || !(unit_sd_factor >= 0.0) ||
        !(unit_effect_sd >= 0.0)) {
        fail("scales must be nonnegative");
    }
    if (!(monitor_missing >= 0.0 && monitor_missing < 1.0) ||
        !(yield_missing >= 0.0 && yield_missing < 1.0)) {
        fail("missing rates must lie in [0, 1)");
    }
}

SynthPanel synth_panel(const SynthConfig& config, std::uint64_t seed)
{
    config.validate();
    const auto m = static_cast<Eigen::Index>(config.pollutants.size());
    Eigen::MatrixXd base(m, m);
    Vector a(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto pi = static_cast<std::size_t>(config.pollutants[static_cast<std::size_t>(i)]);
        a[i] = config.error_ratio * config.within_sd[pi] * config.within_sd[pi];
        for (Eigen::Index j = 0; j < m; ++j) {
            const auto pj = static_cast<std::size_t>(config.pollutants[static_cast<std::size_t>(j)]);
            base(i, j) = config.within_sd[pi] * config.within_sd[pj] *
                         (i == j ? 1.0 : config.within_corr);
        }
    }
    const SymMatrix base_cov(base);
    Eigen::MatrixXd chol;
    try {
        chol = linalg::cholesky_lower(base_cov, "pollutant covariance");
    } catch (const NotPositiveDefinite& e) {
        throw GenerationFailed(e.what());
    }

    SynthPanel out;
    out.error_var = config.proxy_error == ProxyError::kNone ? Vector::Zero(m) : a;
    out.within_cov = config.proxy_error == ProxyError::kBerkson
                         ? base_cov + SymMatrix::diagonal(a)
                         : base_cov;

    const int width = static_cast<int>(std::to_string(config.n_units).size());
    for (std::size_t unit = 0; unit < config.n_units; ++unit) {
        Rng rng = Rng::substream(seed, unit);
        char id[32];
        std::snprintf(id, sizeof id, "U%0*zu", width, unit + 1);

        Vector unit_mean(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto pi = static_cast<std::size_t>(config.pollutants[static_cast<std::size_t>(i)]);
            unit_mean[i] = config.level[pi] + config.unit_sd_factor * config.within_sd[pi] * rng.normal();
        }
        std::vector<double> crop_effect(config.crops.size());
        for (auto& c : crop_effect) {
            c = config.unit_effect_sd * rng.normal();
        }

        for (std::size_t t = 0; t < config.n_years; ++t) {
            Vector z(m);
            for (Eigen::Index i = 0; i < m; ++i) {
                z[i] = rng.normal();
            }
            const Vector common = chol * z;
            Vector err(m);
            for (Eigen::Index i = 0; i < m; ++i) {
                err[i] = std::sqrt(out.error_var[i]) * rng.normal();
            }
            Vector x = unit_mean + common;
            Vector w = x;
            if (config.proxy_error == ProxyError::kClassical) {
                w += err;
            } else if (config.proxy_error == ProxyError::kBerkson) {
                x += err;
            }
            std::array<double, kWeather> weather{};
            for (double& v : weather) {
                v = rng.normal();
            }
            std::vector<bool> observed(static_cast<std::size_t>(m));
            for (Eigen::Index i = 0; i < m; ++i) {
                observed[static_cast<std::size_t>(i)] = rng.uniform() >= config.monitor_missing;
            }

            double signal = config.trend * static_cast<double>(t);
            for (Eigen::Index i = 0; i < m; ++i) {
                signal += config.beta(config.pollutants[static_cast<std::size_t>(i)]) * x[i];
            }
            for (std::size_t q = 0; q < kWeather; ++q) {
                signal += config.gamma[q] * weather[q];
            }

            for (std::size_t c = 0; c < config.crops.size(); ++c) {
                PanelRow row;
                row.unit_id = id;
                row.year = config.first_year + static_cast<int>(t);
                row.crop = config.crops[c];
                row.weather = weather;
                for (Eigen::Index i = 0; i < m; ++i) {
                    const auto pi =
                        static_cast<std::size_t>(config.pollutants[static_cast<std::size_t>(i)]);
                    if (observed[static_cast<std::size_t>(i)]) {
                        row.monitor[pi] = x[i];
                    }
                    row.proxy[pi] = w[i];
                }
                const double log_yield = 5.0 - 0.5 * static_cast<double>(c) + crop_effect[c] +
                                         signal + config.noise_sd * rng.normal();
                if (rng.uniform() >= config.yield_missing) {
                    row.yield = std::exp(log_yield);
                }
                out.data.rows.push_back(std::move(row));
            }
        }
    }
    return out;
}

} // namespace biaslab::panel
