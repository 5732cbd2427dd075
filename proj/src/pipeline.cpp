#include "mevmix/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>

#include "json.hpp"

#include "mevmix/errors.hpp"

namespace mevmix {

namespace {

std::string trimmed(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

bool is_missing(const std::string& cell) {
    if (cell.empty()) return true;
    std::string low;
    low.reserve(cell.size());
    for (char c : cell) low.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return low == "na" || low == "nan" || low == "n/a" || low == "null";
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

} // namespace

LoadResult load_csv(const std::string& path, const std::vector<std::string>& columns) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw LoadError("'" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::vector<std::string> header = split_fields(line);
    for (std::string& h : header) h = trimmed(h);

    std::vector<Eigen::Index> keep;
    std::vector<std::string> names;
    if (columns.empty()) {
        keep.resize(header.size());
        std::iota(keep.begin(), keep.end(), Eigen::Index{0});
        names = header;
    } else {
        for (const std::string& want : columns) {
            const auto it = std::find(header.begin(), header.end(), want);
            if (it == header.end())
                throw UsageError("column '" + want + "' not found in '" + path + "'");
            keep.push_back(it - header.begin());
            names.push_back(want);
        }
    }

    std::vector<Eigen::VectorXd> rows;
    Eigen::Index n_dropped = 0;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trimmed(line).empty()) continue;
        const std::vector<std::string> fields = split_fields(line);
        if (fields.size() != header.size())
            throw LoadError("'" + path + "' line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, found " +
                            std::to_string(fields.size()));

        Eigen::VectorXd row(static_cast<Eigen::Index>(keep.size()));
        bool missing = false;
        for (std::size_t k = 0; k < keep.size(); ++k) {
            const std::string cell = trimmed(fields[static_cast<std::size_t>(keep[k])]);
            if (is_missing(cell)) {
                missing = true;
                break;
            }
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end != cell.c_str() + cell.size())
                throw LoadError("'" + path + "' line " + std::to_string(line_no) + ", column '" +
                                names[k] + "': cannot parse '" + cell + "'");
            row(static_cast<Eigen::Index>(k)) = v;
        }
        if (missing) {
            ++n_dropped;
            continue;
        }
        rows.push_back(std::move(row));
    }

    if (rows.empty()) throw UsageError("'" + path + "' holds no complete data rows");

    Eigen::MatrixXd values(static_cast<Eigen::Index>(rows.size()),
                           static_cast<Eigen::Index>(keep.size()));
    for (Eigen::Index i = 0; i < values.rows(); ++i) values.row(i) = rows[static_cast<std::size_t>(i)];
    return LoadResult{Dataset(std::move(values), std::move(names)), n_dropped};
}

DetrendModel detrend(const Dataset& data, const Eigen::VectorXd& day_index) {
    if (day_index.size() != data.n())
        throw UsageError("day index length must match the number of rows");
    const Eigen::Index n = data.n();
    if (n - 1 < 10) throw UsageError("detrending needs at least 11 rows");

    const Eigen::Index d = data.d();
    const Eigen::Index m = n - 1;
    DetrendModel model;
    model.coefficients.resize(4, d);
    model.residuals.resize(m, d);
    model.names = data.names;

    Eigen::MatrixXd design(m, 4);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double t = day_index(i + 1);
        design(i, 0) = 1.0;
        design(i, 1) = std::sin(2.0 * M_PI * t / 365.0);
        design(i, 2) = std::cos(2.0 * M_PI * t / 365.0);
    }
    for (Eigen::Index j = 0; j < d; ++j) {
        design.col(3) = data.values.col(j).head(m);
        const Eigen::VectorXd y = data.values.col(j).tail(m);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
        if (qr.rank() < 4)
            throw RankDeficiencyError("seasonal-lag design is rank deficient for column '" +
                                      data.names[static_cast<std::size_t>(j)] + "'");
        const Eigen::VectorXd beta = qr.solve(y);
        model.coefficients.col(j) = beta;
        model.residuals.col(j) = design * beta - y;  // negated residuals
    }
    model.fitted = true;
    return model;
}

Eigen::MatrixXd residual_acf(const Eigen::MatrixXd& residuals, int max_lag) {
    if (max_lag < 0) throw UsageError("max_lag must be nonnegative");
    if (residuals.rows() <= max_lag)
        throw UsageError("max_lag must be smaller than the number of rows");

    const Eigen::Index n = residuals.rows();
    Eigen::MatrixXd acf(max_lag + 1, residuals.cols());
    for (Eigen::Index j = 0; j < residuals.cols(); ++j) {
        const Eigen::VectorXd x =
            (residuals.col(j).array() - residuals.col(j).mean()).matrix();
        const double c0 = x.squaredNorm() / static_cast<double>(n);
        for (int k = 0; k <= max_lag; ++k) {
            const double ck =
                x.head(n - k).dot(x.tail(n - k)) / static_cast<double>(n);
            acf(k, j) = c0 > 0.0 ? ck / c0 : std::numeric_limits<double>::quiet_NaN();
        }
    }
    return acf;
}

namespace {

double quantile_sorted(const std::vector<double>& s, double p) {
    if (s.empty()) throw UsageError("quantile of an empty vector");
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError("quantile level must lie in [0, 1]");
    const double h = p * static_cast<double>(s.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= s.size()) return s.back();
    return s[lo] + (h - static_cast<double>(lo)) * (s[lo + 1] - s[lo]);
}

std::vector<double> sorted_of(const Eigen::VectorXd& col) {
    std::vector<double> s(col.data(), col.data() + col.size());
    std::sort(s.begin(), s.end());
    return s;
}

} // namespace

double sample_quantile(const Eigen::VectorXd& col, double p) {
    return quantile_sorted(sorted_of(col), p);
}

PriorSpec default_prior(const Dataset& data) {
    if (data.n() < 2) throw UsageError("prior construction needs at least 2 rows");
    const Eigen::Index d = data.d();
    PriorSpec prior;
    prior.mean_loc = Eigen::VectorXd::Zero(d);
    prior.mean_scale = Eigen::VectorXd::Constant(d, 50.0);
    prior.sd_upper = Eigen::VectorXd::Constant(d, 50.0);
    prior.thresh_loc.resize(d);
    prior.thresh_lo.resize(d);
    prior.thresh_hi.resize(d);
    prior.thresh_scale = Eigen::VectorXd::Constant(d, 10.0);
    for (Eigen::Index j = 0; j < d; ++j) {
        prior.thresh_loc(j) = sample_quantile(data.values.col(j), 0.90);
        prior.thresh_lo(j) = sample_quantile(data.values.col(j), 0.80);
        prior.thresh_hi(j) = sample_quantile(data.values.col(j), 0.99);
    }
    prior.validate();
    return prior;
}

namespace {

// Derived diagonal entries of the correlation factor: each column j >= 2 of
// the factor gets U_j_j = sqrt(1 - sum of its squared free entries) appended
// after those entries (U_1_1 is identically 1 and skipped).
std::vector<std::string> extended_names(Eigen::Index d) {
    const ParamLayout layout = ParamLayout::for_dim(d);
    const std::vector<std::string>& base = layout.names();
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(layout.n_params() + d - 1));
    std::size_t k = 0;
    for (; k < static_cast<std::size_t>(2 * d); ++k) out.push_back(base[k]);
    for (Eigen::Index j = 2; j <= d; ++j) {
        for (Eigen::Index i = 1; i < j; ++i) out.push_back(base[k++]);
        out.push_back("U_" + std::to_string(j) + "_" + std::to_string(j));
    }
    for (; k < static_cast<std::size_t>(layout.n_params()); ++k) out.push_back(base[k]);
    return out;
}

Eigen::MatrixXd extend_draws(const Eigen::MatrixXd& draws, Eigen::Index d) {
    Eigen::MatrixXd out(draws.rows(), draws.cols() + d - 1);
    out.leftCols(2 * d) = draws.leftCols(2 * d);
    Eigen::Index src = 2 * d;
    Eigen::Index dst = 2 * d;
    for (Eigen::Index j = 2; j <= d; ++j) {
        Eigen::ArrayXd sumsq = Eigen::ArrayXd::Zero(draws.rows());
        for (Eigen::Index i = 1; i < j; ++i) {
            out.col(dst++) = draws.col(src);
            sumsq += draws.col(src).array().square();
            ++src;
        }
        out.col(dst++) = (1.0 - sumsq).max(0.0).sqrt().matrix();
    }
    const Eigen::Index rest = draws.cols() - src;
    out.rightCols(rest) = draws.rightCols(rest);
    return out;
}

std::vector<ChainStore> extend_chains(const std::vector<ChainStore>& chains,
                                      Eigen::Index d) {
    std::vector<ChainStore> out;
    out.reserve(chains.size());
    const std::vector<std::string> names = extended_names(d);
    for (const ChainStore& c : chains) {
        ChainStore e = c;
        e.draws = extend_draws(c.draws, d);
        e.param_names = names;
        out.push_back(std::move(e));
    }
    return out;
}

Eigen::Index dim_from_names(const std::vector<std::string>& names) {
    Eigen::Index d = 0;
    for (const std::string& n : names)
        if (n.rfind("mu_", 0) == 0) ++d;
    if (d == 0) throw UsageError("cannot infer the model dimension from parameter names");
    return d;
}

double quantile_of(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    return quantile_sorted(v, p);
}

std::uint64_t derived_seed(std::uint64_t seed, int replication) {
    std::uint64_t s = seed ^ 0x9d2c5680u;
    splitmix64_next(s);
    s ^= static_cast<std::uint64_t>(replication) + 1;
    return splitmix64_next(s);
}

} // namespace

std::vector<ParamSummary> summarize_chains(const std::vector<ChainStore>& chains) {
    if (chains.empty()) throw UsageError("no chains to summarize");
    for (const ChainStore& c : chains)
        if (c.draws.rows() == 0 || c.draws.cols() != chains[0].draws.cols())
            throw UsageError("chains must hold stored draws of equal width");

    const Eigen::Index d = dim_from_names(chains[0].param_names);
    const std::vector<ChainStore> ext = extend_chains(chains, d);
    const Eigen::Index p = ext[0].draws.cols();

    Eigen::Index total = 0;
    for (const ChainStore& c : ext) total += c.draws.rows();
    Eigen::MatrixXd pooled(total, p);
    Eigen::Index at = 0;
    for (const ChainStore& c : ext) {
        pooled.middleRows(at, c.draws.rows()) = c.draws;
        at += c.draws.rows();
    }

    std::vector<ParamSummary> out;
    out.reserve(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) {
        ParamSummary s;
        s.name = ext[0].param_names[static_cast<std::size_t>(j)];
        s.mean = pooled.col(j).mean();
        s.lower = sample_quantile(pooled.col(j), 0.025);
        s.upper = sample_quantile(pooled.col(j), 0.975);
        s.rhat = gelman_rubin(ext, j);
        s.ess = 0.0;
        for (const ChainStore& c : ext) s.ess += effective_sample_size(c, j);
        out.push_back(std::move(s));
    }
    return out;
}

RunReport run_scenario(const ScenarioSpec& spec, std::uint64_t seed) {
    spec.sampler.validate();
    if (spec.n_points < 20) throw UsageError("scenario needs at least 20 points per data set");
    if (spec.n_replications < 1) throw UsageError("scenario needs at least one replication");

    const Eigen::Index d = spec.true_params.dim();
    if (spec.prior) {
        spec.prior->validate();
        if (spec.prior->dim() != d)
            throw UsageError("scenario prior dimension does not match the true parameters");
    }
    const ParamLayout layout = ParamLayout::for_dim(d);
    const std::vector<std::string> names = extended_names(d);
    const Eigen::Index p = static_cast<Eigen::Index>(names.size());

    RunReport report;
    report.name = spec.name;
    report.param_names = names;
    report.truth =
        extend_draws(layout.pack(spec.true_params).transpose(), d).row(0).transpose();

    Eigen::VectorXd sum_mean = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd sum_len = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd covered = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd sum_rhat = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd sum_ess = Eigen::VectorXd::Zero(p);
    double sum_accept = 0.0;
    int n_ok = 0;
    int n_failed = 0;

    for (int r = 0; r < spec.n_replications; ++r) {
        RngStream data_rng(seed, 3, static_cast<std::uint64_t>(r));
        std::vector<ChainStore> chains;
        try {
            const Dataset data = simulate_model(spec.true_params, spec.n_points, data_rng);
            const PriorSpec prior = spec.prior ? *spec.prior : default_prior(data);
            SamplerConfig cfg = spec.sampler;
            cfg.seed = derived_seed(seed, r);
            chains = run_chains(data, prior, cfg);
        } catch (const Error&) {
            ++n_failed;
            continue;
        }

        const std::vector<ParamSummary> summary = summarize_chains(chains);
        for (Eigen::Index j = 0; j < p; ++j) {
            const ParamSummary& s = summary[static_cast<std::size_t>(j)];
            sum_mean(j) += s.mean;
            sum_len(j) += s.upper - s.lower;
            if (report.truth(j) >= s.lower && report.truth(j) <= s.upper) covered(j) += 1.0;
            sum_rhat(j) += s.rhat;
            sum_ess(j) += s.ess;
        }
        double acc = 0.0;
        for (const ChainStore& c : chains) acc += c.accept_rate.mean();
        sum_accept += acc / static_cast<double>(chains.size());
        ++n_ok;
    }

    if (n_ok == 0)
        throw NumericPathologyError("every scenario replication failed to fit");

    const double nn = static_cast<double>(n_ok);
    report.mean_posterior_mean = sum_mean / nn;
    report.mean_ci_length = sum_len / nn;
    report.coverage = covered / nn;
    report.mean_rhat = sum_rhat / nn;
    report.mean_ess = sum_ess / nn;
    report.mean_accept = sum_accept / nn;
    report.n_replications = n_ok;
    report.n_failed = n_failed;
    return report;
}

namespace {

Eigen::MatrixXd pool_draws(const std::vector<ChainStore>& chains) {
    Eigen::Index total = 0;
    for (const ChainStore& c : chains) total += c.draws.rows();
    if (total == 0) throw UsageError("chains hold no stored draws");
    Eigen::MatrixXd pooled(total, chains[0].draws.cols());
    Eigen::Index at = 0;
    for (const ChainStore& c : chains) {
        pooled.middleRows(at, c.draws.rows()) = c.draws;
        at += c.draws.rows();
    }
    return pooled;
}

ModelParams unpack_row(const ParamLayout& layout, const Eigen::MatrixXd& pooled,
                       Eigen::Index row) {
    std::optional<ModelParams> params = layout.unpack(pooled.row(row).transpose());
    if (!params)
        throw NumericPathologyError("a stored draw does not decode to valid parameters");
    return *params;
}

} // namespace

std::vector<Dataset> posterior_predictive(const std::vector<ChainStore>& chains,
                                          int n_rep, int n_points, RngStream& rng) {
    if (chains.empty()) throw UsageError("no chains to draw from");
    if (n_rep < 1 || n_points < 1)
        throw UsageError("replication and point counts must be positive");

    const ParamLayout layout = ParamLayout::for_dim(dim_from_names(chains[0].param_names));
    const Eigen::MatrixXd pooled = pool_draws(chains);

    std::vector<Dataset> out;
    out.reserve(static_cast<std::size_t>(n_rep));
    for (int r = 0; r < n_rep; ++r) {
        const Eigen::Index row =
            static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(pooled.rows())));
        out.push_back(simulate_model(unpack_row(layout, pooled, row), n_points, rng));
    }
    return out;
}

void write_data_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write '" + path + "'");
    for (Eigen::Index j = 0; j < data.d(); ++j)
        out << (j ? "," : "") << data.names[static_cast<std::size_t>(j)];
    out << "\n";
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        for (Eigen::Index j = 0; j < data.d(); ++j)
            out << (j ? "," : "") << fmt(data.values(i, j));
        out << "\n";
    }
}

void write_chains_csv(const std::vector<ChainStore>& chains,
                      const std::vector<std::string>& param_names,
                      const std::string& path) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write '" + path + "'");
    out << "chain,iter,logpost";
    for (const std::string& n : param_names) out << "," << n;
    out << "\n";
    for (std::size_t c = 0; c < chains.size(); ++c) {
        const ChainStore& chain = chains[c];
        for (Eigen::Index i = 0; i < chain.draws.rows(); ++i) {
            out << c + 1 << "," << i + 1 << "," << fmt(chain.logpost(i));
            for (Eigen::Index j = 0; j < chain.draws.cols(); ++j)
                out << "," << fmt(chain.draws(i, j));
            out << "\n";
        }
    }
}

std::vector<ChainStore> read_chains_csv(const std::string& path,
                                        std::vector<std::string>& param_names) {
    const LoadResult loaded = load_csv(path);
    if (loaded.data.d() < 4 || loaded.data.names[0] != "chain" ||
        loaded.data.names[1] != "iter" || loaded.data.names[2] != "logpost")
        throw LoadError("'" + path + "' is not a chain file");

    param_names.assign(loaded.data.names.begin() + 3, loaded.data.names.end());
    const Eigen::MatrixXd& v = loaded.data.values;
    const Eigen::Index p = v.cols() - 3;

    std::map<long, std::vector<Eigen::Index>> by_chain;
    for (Eigen::Index i = 0; i < v.rows(); ++i)
        by_chain[static_cast<long>(v(i, 0))].push_back(i);

    std::vector<ChainStore> chains;
    for (const auto& [id, rows] : by_chain) {
        ChainStore chain;
        chain.param_names = param_names;
        chain.draws.resize(static_cast<Eigen::Index>(rows.size()), p);
        chain.logpost.resize(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t k = 0; k < rows.size(); ++k) {
            chain.logpost(static_cast<Eigen::Index>(k)) = v(rows[k], 2);
            chain.draws.row(static_cast<Eigen::Index>(k)) = v.row(rows[k]).tail(p);
        }
        chain.accept_rate = Eigen::VectorXd::Zero(p);
        chains.push_back(std::move(chain));
    }
    return chains;
}

void write_scenario(const RunReport& report, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);

    std::ofstream csv(out_dir + "/scenario.csv");
    if (!csv) throw LoadError("cannot write '" + out_dir + "/scenario.csv'");
    csv << "param,truth,mean_posterior_mean,mean_ci_length,coverage,mean_rhat,mean_ess\n";
    for (std::size_t j = 0; j < report.param_names.size(); ++j) {
        const Eigen::Index i = static_cast<Eigen::Index>(j);
        csv << report.param_names[j] << "," << fmt(report.truth(i)) << ","
            << fmt(report.mean_posterior_mean(i)) << "," << fmt(report.mean_ci_length(i))
            << "," << fmt(report.coverage(i)) << "," << fmt(report.mean_rhat(i)) << ","
            << fmt(report.mean_ess(i)) << "\n";
    }

    nlohmann::ordered_json doc;
    doc["schema_version"] = 1;
    doc["name"] = report.name;
    doc["n_replications"] = report.n_replications;
    doc["n_failed"] = report.n_failed;
    doc["mean_accept"] = report.mean_accept;
    doc["parameters"] = nlohmann::ordered_json::array();
    for (std::size_t j = 0; j < report.param_names.size(); ++j) {
        const Eigen::Index i = static_cast<Eigen::Index>(j);
        doc["parameters"].push_back({{"name", report.param_names[j]},
                                     {"truth", report.truth(i)},
                                     {"mean_posterior_mean", report.mean_posterior_mean(i)},
                                     {"mean_ci_length", report.mean_ci_length(i)},
                                     {"coverage", report.coverage(i)},
                                     {"mean_rhat", report.mean_rhat(i)},
                                     {"mean_ess", report.mean_ess(i)}});
    }
    std::ofstream js(out_dir + "/scenario.json");
    if (!js) throw LoadError("cannot write '" + out_dir + "/scenario.json'");
    js << doc.dump(2) << "\n";
}

namespace {

struct CurveAccum {
    Eigen::VectorXd grid;                       // requested levels
    std::vector<std::vector<double>> values;    // per level, across replicates

    explicit CurveAccum(const Eigen::VectorXd& g) : grid(g), values(g.size()) {}

    void add(const DependenceCurve& curve) {
        Eigen::Index at = 0;
        for (Eigen::Index k = 0; k < curve.r_grid.size(); ++k) {
            while (at < grid.size() && grid(at) < curve.r_grid(k)) ++at;
            if (at < grid.size() && grid(at) == curve.r_grid(k))
                values[static_cast<std::size_t>(at)].push_back(curve.values(k));
        }
    }
};

void write_dependence_csv(const std::string& path, const Eigen::VectorXd& grid,
                          const DependenceCurve& chi_obs, const CurveAccum& chi_rep,
                          const DependenceCurve& chibar_obs, const CurveAccum& chibar_rep) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write '" + path + "'");
    out << "metric,r,observed,rep_mean,rep_lower,rep_upper,n_reps\n";
    const auto emit = [&](const char* metric, const DependenceCurve& obs,
                          const CurveAccum& rep) {
        for (Eigen::Index k = 0; k < obs.r_grid.size(); ++k) {
            Eigen::Index g = 0;
            while (g < grid.size() && grid(g) != obs.r_grid(k)) ++g;
            const std::vector<double>& vals = rep.values[static_cast<std::size_t>(g)];
            out << metric << "," << fmt(obs.r_grid(k)) << "," << fmt(obs.values(k)) << ",";
            if (vals.empty()) {
                out << "nan,nan,nan,0\n";
            } else {
                const double mean =
                    std::accumulate(vals.begin(), vals.end(), 0.0) /
                    static_cast<double>(vals.size());
                out << fmt(mean) << "," << fmt(quantile_of(vals, 0.025)) << ","
                    << fmt(quantile_of(vals, 0.975)) << "," << vals.size() << "\n";
            }
        }
    };
    emit("chi", chi_obs, chi_rep);
    emit("chibar", chibar_obs, chibar_rep);
}

} // namespace

TauSummary write_ppc_files(const Dataset& data, const std::vector<ChainStore>& chains,
                           int n_rep, std::uint64_t seed, const std::string& out_dir) {
    if (data.d() != 2)
        throw UsageError("predictive dependence checks cover the bivariate model");
    if (n_rep < 1) throw UsageError("need at least one predictive replication");
    if (chains.empty()) throw UsageError("no chains to draw from");

    const ParamLayout layout = ParamLayout::for_dim(data.d());
    const Eigen::MatrixXd pooled = pool_draws(chains);
    std::filesystem::create_directories(out_dir);

    // Predictive replication summaries, streamed one replicate at a time.
    Eigen::VectorXd grid(10);
    grid << 0.80, 0.85, 0.90, 0.925, 0.95, 0.96, 0.97, 0.98, 0.99, 0.995;
    const DependenceCurve chi_obs = chi_empirical(data.values, grid);
    const DependenceCurve chibar_obs = chibar_empirical(data.values, grid);
    CurveAccum chi_rep(grid), chibar_rep(grid);

    const int n_q = 100;  // percentile grid 0.00 .. 0.99
    std::vector<std::vector<std::vector<double>>> qq_rep(
        static_cast<std::size_t>(data.d()),
        std::vector<std::vector<double>>(n_q));
    std::vector<double> tau_rep;
    tau_rep.reserve(static_cast<std::size_t>(n_rep));

    RngStream ppc_rng(seed, 4);
    for (int r = 0; r < n_rep; ++r) {
        const Eigen::Index row = static_cast<Eigen::Index>(
            ppc_rng.below(static_cast<std::uint64_t>(pooled.rows())));
        const Dataset rep = simulate_model(unpack_row(layout, pooled, row),
                                           static_cast<int>(data.n()), ppc_rng);
        chi_rep.add(chi_empirical(rep.values, grid));
        chibar_rep.add(chibar_empirical(rep.values, grid));
        tau_rep.push_back(kendall_tau(rep.values));
        for (Eigen::Index j = 0; j < data.d(); ++j) {
            const std::vector<double> s = sorted_of(rep.values.col(j));
            for (int k = 0; k < n_q; ++k)
                qq_rep[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)].push_back(
                    quantile_sorted(s, k / 100.0));
        }
    }

    write_dependence_csv(out_dir + "/dependence.csv", grid, chi_obs, chi_rep,
                         chibar_obs, chibar_rep);

    {
        std::ofstream out(out_dir + "/qq.csv");
        if (!out) throw LoadError("cannot write '" + out_dir + "/qq.csv'");
        out << "site,p,observed,rep_mean,rep_lower,rep_upper\n";
        for (Eigen::Index j = 0; j < data.d(); ++j) {
            const std::vector<double> s = sorted_of(data.values.col(j));
            for (int k = 0; k < n_q; ++k) {
                const std::vector<double>& vals =
                    qq_rep[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
                const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) /
                                    static_cast<double>(vals.size());
                out << data.names[static_cast<std::size_t>(j)] << "," << fmt(k / 100.0)
                    << "," << fmt(quantile_sorted(s, k / 100.0)) << "," << fmt(mean) << ","
                    << fmt(quantile_of(vals, 0.025)) << "," << fmt(quantile_of(vals, 0.975))
                    << "\n";
            }
        }
    }

    return TauSummary{kendall_tau(data.values),
                      std::accumulate(tau_rep.begin(), tau_rep.end(), 0.0) /
                          static_cast<double>(tau_rep.size()),
                      quantile_of(tau_rep, 0.025), quantile_of(tau_rep, 0.975)};
}

ScoreTable write_score_file(const Dataset& data, const std::vector<ChainStore>& chains,
                            int ensemble_size, std::uint64_t seed,
                            const std::string& out_dir) {
    if (ensemble_size < 2) throw UsageError("scoring needs at least two ensemble members");
    if (chains.empty()) throw UsageError("no chains to draw from");

    const ParamLayout layout = ParamLayout::for_dim(dim_from_names(chains[0].param_names));
    const Eigen::MatrixXd pooled = pool_draws(chains);

    // The fitted model's predictive ensemble against a moment-matched
    // Gaussian baseline, under the plain and tail-weighted scores.
    const Eigen::VectorXd data_mean = data.values.colwise().mean().transpose();
    const Eigen::MatrixXd centered = data.values.rowwise() - data_mean.transpose();
    const Eigen::MatrixXd data_cov =
        centered.transpose() * centered / static_cast<double>(data.n());
    const MvnParams gauss_fit = MvnParams::from_moments(data_mean, data_cov);

    Eigen::MatrixXd mix_ens(ensemble_size, data.d());
    {
        RngStream rng(seed, 5);
        for (Eigen::Index m = 0; m < mix_ens.rows();) {
            const Eigen::Index row = static_cast<Eigen::Index>(
                rng.below(static_cast<std::uint64_t>(pooled.rows())));
            try {
                mix_ens.row(m) =
                    simulate_model(unpack_row(layout, pooled, row), 1, rng).values.row(0);
                ++m;
            } catch (const DegenerateConfigError&) {
                // a badly placed posterior draw; pick another
            }
        }
    }
    Eigen::MatrixXd gauss_ens(ensemble_size, data.d());
    {
        RngStream rng(seed, 6);
        const Eigen::MatrixXd scale = gauss_fit.scale_factor();
        for (Eigen::Index m = 0; m < gauss_ens.rows(); ++m) {
            Eigen::VectorXd z(data.d());
            for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = rng.normal();
            gauss_ens.row(m) = (data_mean + scale.transpose() * z).transpose();
        }
    }

    Eigen::VectorXd q90(data.d());
    for (Eigen::Index j = 0; j < data.d(); ++j)
        q90(j) = sample_quantile(data.values.col(j), 0.90);
    const std::vector<WeightScheme> schemes = {
        WeightScheme::hard_quantile(q90, "w1"),
        WeightScheme::gaussian_cdf(gauss_fit, "w2")};
    const ScoreTable scores = score_table(
        {{"mixture", mix_ens}, {"gaussian", gauss_ens}}, data.values, schemes);

    std::filesystem::create_directories(out_dir);
    std::ofstream out(out_dir + "/score.csv");
    if (!out) throw LoadError("cannot write '" + out_dir + "/score.csv'");
    out << "model";
    for (const std::string& c : scores.columns) out << "," << c;
    for (const std::string& c : scores.columns) out << ",n_" << c;
    out << "\n";
    for (std::size_t m = 0; m < scores.models.size(); ++m) {
        const Eigen::Index i = static_cast<Eigen::Index>(m);
        out << scores.models[m];
        for (Eigen::Index c = 0; c < scores.means.cols(); ++c)
            out << "," << fmt(scores.means(i, c));
        for (Eigen::Index c = 0; c < scores.n_valid.cols(); ++c)
            out << "," << scores.n_valid(i, c);
        out << "\n";
    }
    return scores;
}

void write_report(const Dataset& data, const ReportOptions& options,
                  std::uint64_t seed, const std::string& out_dir) {
    if (data.d() != 2)
        throw UsageError("the report writer covers the bivariate model");
    if (data.n() < 20) throw UsageError("too few rows to fit and check the model");
    if (options.ppc_replications < 1)
        throw UsageError("need at least one predictive replication");
    if (options.ensemble_size < 2)
        throw UsageError("scoring needs at least two ensemble members");

    const PriorSpec prior = options.prior ? *options.prior : default_prior(data);
    prior.validate();
    SamplerConfig cfg = options.sampler;
    cfg.seed = seed;
    cfg.validate();

    const std::vector<ChainStore> chains = run_chains(data, prior, cfg);
    const std::vector<ParamSummary> summary = summarize_chains(chains);

    std::filesystem::create_directories(out_dir);
    write_chains_csv(chains, chains[0].param_names, out_dir + "/chains.csv");
    const TauSummary tau =
        write_ppc_files(data, chains, options.ppc_replications, seed, out_dir);
    write_score_file(data, chains, options.ensemble_size, seed, out_dir);

    nlohmann::ordered_json doc;
    doc["schema_version"] = 1;
    doc["seed"] = seed;
    doc["data"] = {{"n", data.n()}, {"sites", data.names}};
    doc["sampler"] = {
        {"algorithm",
         cfg.algorithm == Algorithm::RandomWalk ? "random_walk" : "factor_slice"},
        {"n_iter", cfg.n_iter},
        {"burn_in", cfg.burn_in},
        {"thin", cfg.thin},
        {"n_chains", cfg.n_chains},
        {"adapt_interval", cfg.effective_adapt_interval()},
        {"target_accept", cfg.target_accept},
        {"initial_scale", cfg.initial_scale}};
    doc["ppc_replications"] = options.ppc_replications;
    doc["ensemble_size"] = options.ensemble_size;
    doc["prior"] = {
        {"delta", prior.delta},
        {"mean_loc", std::vector<double>(prior.mean_loc.data(),
                                         prior.mean_loc.data() + prior.mean_loc.size())},
        {"mean_scale",
         std::vector<double>(prior.mean_scale.data(),
                             prior.mean_scale.data() + prior.mean_scale.size())},
        {"sd_upper", std::vector<double>(prior.sd_upper.data(),
                                         prior.sd_upper.data() + prior.sd_upper.size())},
        {"thresh_loc",
         std::vector<double>(prior.thresh_loc.data(),
                             prior.thresh_loc.data() + prior.thresh_loc.size())},
        {"thresh_scale",
         std::vector<double>(prior.thresh_scale.data(),
                             prior.thresh_scale.data() + prior.thresh_scale.size())},
        {"thresh_lo", std::vector<double>(prior.thresh_lo.data(),
                                          prior.thresh_lo.data() + prior.thresh_lo.size())},
        {"thresh_hi", std::vector<double>(prior.thresh_hi.data(),
                                          prior.thresh_hi.data() + prior.thresh_hi.size())},
        {"a_upper", prior.a_upper},
        {"sigma_upper", prior.sigma_upper},
        {"gamma_lo", prior.gamma_lo},
        {"gamma_hi", prior.gamma_hi},
        {"finite_expectation", prior.finite_expectation}};
    doc["parameters"] = nlohmann::ordered_json::array();
    for (const ParamSummary& s : summary)
        doc["parameters"].push_back({{"name", s.name},
                                     {"mean", s.mean},
                                     {"lower", s.lower},
                                     {"upper", s.upper},
                                     {"rhat", s.rhat},
                                     {"ess", s.ess}});
    std::vector<bool> warnings;
    for (const ChainStore& c : chains) warnings.push_back(c.mixing_warning);
    doc["mixing_warnings"] = warnings;
    doc["tau"] = {{"observed", tau.observed},
                  {"rep_mean", tau.rep_mean},
                  {"rep_lower", tau.rep_lower},
                  {"rep_upper", tau.rep_upper}};

    std::ofstream js(out_dir + "/summary.json");
    if (!js) throw LoadError("cannot write '" + out_dir + "/summary.json'");
    js << doc.dump(2) << "\n";
}

} // namespace mevmix
