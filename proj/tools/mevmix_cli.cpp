#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mevmix/pipeline.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw mevmix::LoadError("cannot open config '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw mevmix::LoadError("config '" + path + "': " + std::string(e.what()));
    }
}

json load_config_or_empty(const std::string& path) {
    return path.empty() ? json::object() : load_config(path);
}

Eigen::VectorXd vec_field(const json& j, const std::string& key) {
    if (!j.contains(key)) throw mevmix::UsageError("config is missing '" + key + "'");
    const json& a = j.at(key);
    if (!a.is_array() || a.empty())
        throw mevmix::UsageError("config entry '" + key + "' must be a non-empty array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
    return v;
}

mevmix::SamplerConfig sampler_from(const json& cfg) {
    mevmix::SamplerConfig s;
    if (!cfg.contains("sampler")) return s;
    const json& j = cfg.at("sampler");
    if (j.contains("algorithm")) {
        const std::string alg = j.at("algorithm").get<std::string>();
        if (alg == "random_walk") {
            s.algorithm = mevmix::Algorithm::RandomWalk;
        } else if (alg == "factor_slice") {
            s.algorithm = mevmix::Algorithm::FactorSlice;
        } else {
            throw mevmix::UsageError("unknown sampler algorithm '" + alg + "'");
        }
    }
    if (j.contains("n_iter")) s.n_iter = j.at("n_iter").get<int>();
    if (j.contains("burn_in")) s.burn_in = j.at("burn_in").get<int>();
    if (j.contains("thin")) s.thin = j.at("thin").get<int>();
    if (j.contains("n_chains")) s.n_chains = j.at("n_chains").get<int>();
    if (j.contains("adapt_interval")) s.adapt_interval = j.at("adapt_interval").get<int>();
    if (j.contains("target_accept")) s.target_accept = j.at("target_accept").get<double>();
    if (j.contains("initial_scale")) s.initial_scale = j.at("initial_scale").get<double>();
    return s;
}

mevmix::ModelParams params_from(const json& cfg) {
    if (!cfg.contains("true_params"))
        throw mevmix::UsageError("config is missing 'true_params'");
    const json& j = cfg.at("true_params");
    const Eigen::VectorXd mu = vec_field(j, "mu");
    const Eigen::VectorXd s = vec_field(j, "s");
    const Eigen::VectorXd u = vec_field(j, "u");
    const Eigen::VectorXd a = vec_field(j, "a");
    const Eigen::VectorXd sigma = vec_field(j, "sigma");
    const Eigen::VectorXd gamma = vec_field(j, "gamma");
    const Eigen::Index d = mu.size();

    Eigen::VectorXd free = Eigen::VectorXd::Zero(mevmix::CholCorr::n_free(d));
    if (j.contains("corr_free")) free = vec_field(j, "corr_free");
    const std::optional<mevmix::CholCorr> corr = mevmix::CholCorr::from_free(free, d);
    if (!corr)
        throw mevmix::UsageError("'corr_free' does not describe a valid correlation factor");
    return mevmix::ModelParams(mevmix::MvnParams(mu, s, *corr), u,
                               mevmix::TailParams(a, sigma, gamma));
}

std::optional<mevmix::PriorSpec> prior_from(const json& cfg) {
    if (!cfg.contains("prior")) return std::nullopt;
    const json& j = cfg.at("prior");
    mevmix::PriorSpec p;
    p.mean_loc = vec_field(j, "mean_loc");
    p.mean_scale = vec_field(j, "mean_scale");
    p.sd_upper = vec_field(j, "sd_upper");
    p.thresh_loc = vec_field(j, "thresh_loc");
    p.thresh_scale = vec_field(j, "thresh_scale");
    p.thresh_lo = vec_field(j, "thresh_lo");
    p.thresh_hi = vec_field(j, "thresh_hi");
    if (j.contains("delta")) p.delta = j.at("delta").get<double>();
    if (j.contains("a_upper")) p.a_upper = j.at("a_upper").get<double>();
    if (j.contains("sigma_upper")) p.sigma_upper = j.at("sigma_upper").get<double>();
    if (j.contains("gamma_lo")) p.gamma_lo = j.at("gamma_lo").get<double>();
    if (j.contains("gamma_hi")) p.gamma_hi = j.at("gamma_hi").get<double>();
    if (j.contains("finite_expectation"))
        p.finite_expectation = j.at("finite_expectation").get<bool>();
    p.validate();
    return p;
}

std::vector<std::string> sites_from(const json& cfg) {
    std::vector<std::string> sites;
    if (cfg.contains("sites"))
        for (const json& s : cfg.at("sites")) sites.push_back(s.get<std::string>());
    return sites;
}

mevmix::Dataset load_data(const std::string& path, const json& cfg) {
    const mevmix::LoadResult r = mevmix::load_csv(path, sites_from(cfg));
    if (r.n_dropped > 0)
        std::fprintf(stderr, "note: dropped %ld rows with missing values\n",
                     static_cast<long>(r.n_dropped));
    return r.data;
}

std::vector<mevmix::ChainStore> load_chains(const std::string& path) {
    std::vector<std::string> names;
    return mevmix::read_chains_csv(path, names);
}

void print_summaries(const std::vector<mevmix::ParamSummary>& summaries) {
    std::printf("%-10s %12s %12s %12s %8s %10s\n", "param", "mean", "2.5%", "97.5%",
                "rhat", "ess");
    for (const mevmix::ParamSummary& s : summaries)
        std::printf("%-10s %12.5g %12.5g %12.5g %8.3f %10.1f\n", s.name.c_str(), s.mean,
                    s.lower, s.upper, s.rhat, s.ess);
}

void cmd_simulate(const std::string& config_path, std::uint64_t seed,
                  const std::string& out_dir) {
    const json cfg = load_config(config_path);
    const mevmix::ModelParams truth = params_from(cfg);
    const int n_points = cfg.value("n_points", 2000);
    mevmix::RngStream rng(seed, 7);
    const mevmix::Dataset data = mevmix::simulate_model(truth, n_points, rng);
    fs::create_directories(out_dir);
    mevmix::write_data_csv(data, out_dir + "/data.csv");
    std::printf("wrote %s/data.csv (%ld rows, %ld sites)\n", out_dir.c_str(),
                static_cast<long>(data.n()), static_cast<long>(data.d()));
}

void cmd_fit(const std::string& config_path, const std::string& data_path,
             std::uint64_t seed, const std::string& out_dir) {
    const json cfg = load_config_or_empty(config_path);
    const mevmix::Dataset data = load_data(data_path, cfg);
    mevmix::SamplerConfig sc = sampler_from(cfg);
    sc.seed = seed;
    const std::optional<mevmix::PriorSpec> explicit_prior = prior_from(cfg);
    const mevmix::PriorSpec prior =
        explicit_prior ? *explicit_prior : mevmix::default_prior(data);

    const std::vector<mevmix::ChainStore> chains = mevmix::run_chains(data, prior, sc);
    fs::create_directories(out_dir);
    mevmix::write_chains_csv(chains, chains[0].param_names, out_dir + "/chains.csv");

    print_summaries(mevmix::summarize_chains(chains));
    for (std::size_t c = 0; c < chains.size(); ++c)
        if (chains[c].mixing_warning)
            std::fprintf(stderr, "warning: chain %zu shows poor mixing\n", c + 1);
    std::printf("wrote %s/chains.csv\n", out_dir.c_str());
}

void cmd_scenario(const std::string& config_path, std::uint64_t seed,
                  const std::string& out_dir, bool full_scale) {
    const json cfg = load_config(config_path);
    mevmix::ScenarioSpec spec{.name = "scenario",
                              .true_params = params_from(cfg),
                              .n_points = 2000,
                              .n_replications = 50,
                              .sampler = sampler_from(cfg),
                              .prior = prior_from(cfg)};
    if (cfg.contains("scenario")) {
        const json& j = cfg.at("scenario");
        if (j.contains("name")) spec.name = j.at("name").get<std::string>();
        if (j.contains("n_points")) spec.n_points = j.at("n_points").get<int>();
        if (j.contains("n_replications"))
            spec.n_replications = j.at("n_replications").get<int>();
    }
    if (full_scale) spec.n_replications = 1000;

    const mevmix::RunReport report = mevmix::run_scenario(spec, seed);
    mevmix::write_scenario(report, out_dir);
    std::printf("scenario '%s': %d replications ok, %d failed\n", report.name.c_str(),
                report.n_replications, report.n_failed);
    std::printf("coverage %.3f .. %.3f across %zu parameters\n",
                report.coverage.minCoeff(), report.coverage.maxCoeff(),
                report.param_names.size());
    std::printf("wrote %s/scenario.csv and %s/scenario.json\n", out_dir.c_str(),
                out_dir.c_str());
}

void cmd_ppc(const std::string& config_path, const std::string& data_path,
             const std::string& chains_path, std::uint64_t seed,
             const std::string& out_dir) {
    const json cfg = load_config_or_empty(config_path);
    const mevmix::Dataset data = load_data(data_path, cfg);
    const int n_rep =
        cfg.contains("ppc") ? cfg.at("ppc").value("n_rep", 3000) : 3000;
    const mevmix::TauSummary tau =
        mevmix::write_ppc_files(data, load_chains(chains_path), n_rep, seed, out_dir);
    std::printf("kendall tau observed %.4f, replicated %.4f [%.4f, %.4f]\n",
                tau.observed, tau.rep_mean, tau.rep_lower, tau.rep_upper);
    std::printf("wrote %s/dependence.csv and %s/qq.csv\n", out_dir.c_str(),
                out_dir.c_str());
}

void cmd_score(const std::string& config_path, const std::string& data_path,
               const std::string& chains_path, std::uint64_t seed,
               const std::string& out_dir) {
    const json cfg = load_config_or_empty(config_path);
    const mevmix::Dataset data = load_data(data_path, cfg);
    const int ensemble_size =
        cfg.contains("score") ? cfg.at("score").value("ensemble_size", 500) : 500;
    const mevmix::ScoreTable table = mevmix::write_score_file(
        data, load_chains(chains_path), ensemble_size, seed, out_dir);

    std::printf("%-10s", "model");
    for (const std::string& c : table.columns) std::printf(" %12s", c.c_str());
    std::printf("\n");
    for (std::size_t m = 0; m < table.models.size(); ++m) {
        std::printf("%-10s", table.models[m].c_str());
        for (Eigen::Index c = 0; c < table.means.cols(); ++c)
            std::printf(" %12.5g", table.means(static_cast<Eigen::Index>(m), c));
        std::printf("\n");
    }
    std::printf("wrote %s/score.csv\n", out_dir.c_str());
}

void cmd_detrend(const std::string& config_path, const std::string& data_path,
                 const std::string& out_dir) {
    const json cfg = load_config_or_empty(config_path);
    const mevmix::LoadResult loaded = mevmix::load_csv(data_path);
    if (loaded.n_dropped > 0)
        std::fprintf(stderr, "note: dropped %ld rows with missing values\n",
                     static_cast<long>(loaded.n_dropped));

    const std::string day_column = cfg.value("day_column", std::string());
    Eigen::VectorXd day;
    std::vector<std::string> value_names = sites_from(cfg);
    if (!day_column.empty()) {
        const auto it = std::find(loaded.data.names.begin(), loaded.data.names.end(),
                                  day_column);
        if (it == loaded.data.names.end())
            throw mevmix::UsageError("day column '" + day_column + "' not found");
        day = loaded.data.values.col(it - loaded.data.names.begin());
        if (value_names.empty())
            for (const std::string& n : loaded.data.names)
                if (n != day_column) value_names.push_back(n);
    } else {
        day = Eigen::VectorXd::LinSpaced(loaded.data.n(), 1.0,
                                         static_cast<double>(loaded.data.n()));
        if (value_names.empty()) value_names = loaded.data.names;
    }

    Eigen::MatrixXd values(loaded.data.n(), static_cast<Eigen::Index>(value_names.size()));
    for (std::size_t k = 0; k < value_names.size(); ++k) {
        const auto it = std::find(loaded.data.names.begin(), loaded.data.names.end(),
                                  value_names[k]);
        if (it == loaded.data.names.end())
            throw mevmix::UsageError("column '" + value_names[k] + "' not found");
        values.col(static_cast<Eigen::Index>(k)) =
            loaded.data.values.col(it - loaded.data.names.begin());
    }

    const mevmix::Dataset data(values, value_names);
    const mevmix::DetrendModel model = mevmix::detrend(data, day);
    fs::create_directories(out_dir);
    mevmix::write_data_csv(mevmix::Dataset(model.residuals, model.names),
                           out_dir + "/residuals.csv");

    const int max_lag = std::min<int>(
        cfg.contains("detrend") ? cfg.at("detrend").value("max_lag", 30) : 30,
        static_cast<int>(model.residuals.rows()) - 1);
    const Eigen::MatrixXd acf = mevmix::residual_acf(model.residuals, max_lag);
    {
        std::ofstream out(out_dir + "/acf.csv");
        out << "lag";
        for (const std::string& n : model.names) out << "," << n;
        out << "\n";
        char buf[40];
        for (Eigen::Index k = 0; k < acf.rows(); ++k) {
            out << k;
            for (Eigen::Index j = 0; j < acf.cols(); ++j) {
                std::snprintf(buf, sizeof(buf), "%.17g", acf(k, j));
                out << "," << buf;
            }
            out << "\n";
        }
    }
    {
        std::ofstream out(out_dir + "/coefficients.csv");
        out << "term";
        for (const std::string& n : model.names) out << "," << n;
        out << "\n";
        const char* terms[] = {"intercept", "sin", "cos", "lag1"};
        char buf[40];
        for (int t = 0; t < 4; ++t) {
            out << terms[t];
            for (Eigen::Index j = 0; j < model.coefficients.cols(); ++j) {
                std::snprintf(buf, sizeof(buf), "%.17g", model.coefficients(t, j));
                out << "," << buf;
            }
            out << "\n";
        }
    }
    std::printf("wrote %s/residuals.csv, %s/acf.csv and %s/coefficients.csv\n",
                out_dir.c_str(), out_dir.c_str(), out_dir.c_str());
}

void cmd_report(const std::string& config_path, const std::string& data_path,
                std::uint64_t seed, const std::string& out_dir) {
    const json cfg = load_config_or_empty(config_path);
    const mevmix::Dataset data = load_data(data_path, cfg);
    mevmix::ReportOptions opts;
    opts.sampler = sampler_from(cfg);
    opts.prior = prior_from(cfg);
    if (cfg.contains("ppc")) opts.ppc_replications = cfg.at("ppc").value("n_rep", 3000);
    if (cfg.contains("score"))
        opts.ensemble_size = cfg.at("score").value("ensemble_size", 500);
    mevmix::write_report(data, opts, seed, out_dir);
    std::printf(
        "wrote %s/{summary.json, chains.csv, dependence.csv, qq.csv, score.csv}\n",
        out_dir.c_str());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bulk-and-tail extremes toolkit: simulation, fitting, checking"};
    app.require_subcommand(1);

    std::string config_path, data_path, chains_path;
    std::string out_dir = "out";
    std::uint64_t seed = 1;
    bool full_scale = false;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", seed, "Master seed; fixes every output byte");
        sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
    };

    CLI::App* sim = app.add_subcommand(
        "simulate", "Draw a synthetic data set from configured true parameters");
    sim->add_option("--config", config_path, "JSON configuration file")->required();
    add_common(sim);
    sim->callback([&] { cmd_simulate(config_path, seed, out_dir); });

    CLI::App* fit = app.add_subcommand("fit", "Fit the model and save the chains");
    fit->add_option("--config", config_path, "JSON configuration file");
    fit->add_option("--data", data_path, "Input CSV with a header row")->required();
    add_common(fit);
    fit->callback([&] { cmd_fit(config_path, data_path, seed, out_dir); });

    CLI::App* scen = app.add_subcommand(
        "scenario", "Replicate a synthetic recovery study and tabulate coverage");
    scen->add_option("--config", config_path, "JSON configuration file")->required();
    scen->add_flag("--full-scale", full_scale,
                   "Run 1000 replications instead of the default 50");
    add_common(scen);
    scen->callback([&] { cmd_scenario(config_path, seed, out_dir, full_scale); });

    CLI::App* ppc = app.add_subcommand(
        "ppc", "Posterior predictive checks: quantile and dependence bands");
    ppc->add_option("--config", config_path, "JSON configuration file");
    ppc->add_option("--data", data_path, "Input CSV with a header row")->required();
    ppc->add_option("--chains", chains_path, "Chain CSV written by fit")->required();
    add_common(ppc);
    ppc->callback([&] { cmd_ppc(config_path, data_path, chains_path, seed, out_dir); });

    CLI::App* score = app.add_subcommand(
        "score", "Score the predictive ensemble against a Gaussian baseline");
    score->add_option("--config", config_path, "JSON configuration file");
    score->add_option("--data", data_path, "Input CSV with a header row")->required();
    score->add_option("--chains", chains_path, "Chain CSV written by fit")->required();
    add_common(score);
    score->callback(
        [&] { cmd_score(config_path, data_path, chains_path, seed, out_dir); });

    CLI::App* det = app.add_subcommand(
        "detrend", "Remove seasonal and lag-1 structure, keep negated residuals");
    det->add_option("--config", config_path, "JSON configuration file");
    det->add_option("--data", data_path, "Input CSV with a header row")->required();
    add_common(det);
    det->callback([&] { cmd_detrend(config_path, data_path, out_dir); });

    CLI::App* rep = app.add_subcommand(
        "report", "Fit, check and score in one pass; writes the five report files");
    rep->add_option("--config", config_path, "JSON configuration file");
    rep->add_option("--data", data_path, "Input CSV with a header row")->required();
    add_common(rep);
    rep->callback([&] { cmd_report(config_path, data_path, seed, out_dir); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const mevmix::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
