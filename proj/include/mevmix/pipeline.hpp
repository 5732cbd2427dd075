#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mevmix/dependence.hpp"
#include "mevmix/inference.hpp"
#include "mevmix/model.hpp"
#include "mevmix/scoring.hpp"

namespace mevmix {

/// A parsed data file plus how many rows were removed for missing values.
struct LoadResult {
    Dataset data;
    Eigen::Index n_dropped = 0;
};

/// Reads a comma-separated file with a header row.  Cells that are empty or
/// spelled na/nan (any case) count as missing and drop the whole row; any
/// other unparseable cell raises LoadError naming the row and column.  When
/// columns is non-empty only those named columns are kept, in that order.
LoadResult load_csv(const std::string& path,
                    const std::vector<std::string>& columns = {});

/// Per-site seasonal-plus-lag regression fit.  For day index t the design is
/// 1, sin(2 pi t / 365), cos(2 pi t / 365) and the previous day's value, so
/// the first row is consumed as the lag and residuals have length n - 1.
/// The residuals stored here are negated, ready for a model of extreme lows
/// fitted as highs.
struct DetrendModel {
    Eigen::MatrixXd coefficients;  // 4 x d, rows beta0..beta3
    Eigen::MatrixXd residuals;     // (n - 1) x d, negative regression residuals
    std::vector<std::string> names;
    bool fitted = false;
};

DetrendModel detrend(const Dataset& data, const Eigen::VectorXd& day_index);

/// Autocorrelation of each residual column for lags 0..max_lag, ready to
/// dump as a stationarity diagnostic.
Eigen::MatrixXd residual_acf(const Eigen::MatrixXd& residuals, int max_lag);

/// Linear-interpolation sample quantile of one column.
double sample_quantile(const Eigen::VectorXd& col, double p);

/// The reference prior configuration: flat-ish bulk and tail boxes, with
/// the threshold prior anchored at per-margin empirical percentiles (center
/// at the 90th, support from the 80th to the 99th, spread 10).
PriorSpec default_prior(const Dataset& data);

/// One synthetic-recovery experiment: truth, data size, replication count
/// and the sampler settings shared by every replication.
struct ScenarioSpec {
    std::string name;
    ModelParams true_params;
    int n_points = 2000;
    int n_replications = 50;
    SamplerConfig sampler;

    /// Fixed prior applied to every replication; when absent the reference
    /// prior is rebuilt from each replication's own simulated data.
    std::optional<PriorSpec> prior;
};

/// Per-parameter posterior summary for one fitted dataset.
struct ParamSummary {
    std::string name;
    double mean = 0.0;
    double lower = 0.0;   // central 95% interval
    double upper = 0.0;
    double rhat = 0.0;
    double ess = 0.0;
};

/// Summaries over the stored draws of all chains, including the derived
/// second diagonal entry of the correlation factor for d = 2.
std::vector<ParamSummary> summarize_chains(const std::vector<ChainStore>& chains);

/// Aggregated recovery report over scenario replications.
struct RunReport {
    std::string name;
    std::vector<std::string> param_names;
    Eigen::VectorXd truth;
    Eigen::VectorXd mean_posterior_mean;
    Eigen::VectorXd mean_ci_length;
    Eigen::VectorXd coverage;   // fraction of replications whose CI covers truth
    Eigen::VectorXd mean_rhat;
    Eigen::VectorXd mean_ess;
    double mean_accept = 0.0;
    int n_replications = 0;     // successful replications
    int n_failed = 0;
};

RunReport run_scenario(const ScenarioSpec& spec, std::uint64_t seed);

/// Posterior predictive replication: each replicate picks one stored draw
/// uniformly from the pooled chains and simulates a fresh dataset from it.
std::vector<Dataset> posterior_predictive(const std::vector<ChainStore>& chains,
                                          int n_rep, int n_points, RngStream& rng);

/// Settings for the end-to-end report writer.
struct ReportOptions {
    SamplerConfig sampler;
    int ppc_replications = 3000;
    int ensemble_size = 500;              // predictive members behind the score table
    std::optional<PriorSpec> prior;       // absent: derived from the data percentiles
};

/// Observed Kendall correlation next to its predictive replication band.
struct TauSummary {
    double observed = 0.0;
    double rep_mean = 0.0;
    double rep_lower = 0.0;
    double rep_upper = 0.0;
};

/// Streams n_rep predictive replications of the fitted bivariate model and
/// writes dependence.csv (tail dependence curves with replication bands) and
/// qq.csv (marginal quantile bands) into out_dir.
TauSummary write_ppc_files(const Dataset& data, const std::vector<ChainStore>& chains,
                           int n_rep, std::uint64_t seed, const std::string& out_dir);

/// Scores a posterior predictive ensemble against a moment-matched Gaussian
/// baseline on the observed rows and writes score.csv into out_dir.
ScoreTable write_score_file(const Dataset& data, const std::vector<ChainStore>& chains,
                            int ensemble_size, std::uint64_t seed,
                            const std::string& out_dir);

/// Fits the model and writes the five report files into out_dir:
/// summary.json, chains.csv, dependence.csv, qq.csv and score.csv.  Output
/// bytes are a pure function of the data, options and seed.
void write_report(const Dataset& data, const ReportOptions& options,
                  std::uint64_t seed, const std::string& out_dir);

/// Writes a scenario recovery report as scenario.csv and scenario.json.
void write_scenario(const RunReport& report, const std::string& out_dir);

/// Serialization helpers shared by the report writer and the command line
/// tool.  All floating point values print with round-trip precision.
void write_data_csv(const Dataset& data, const std::string& path);
void write_chains_csv(const std::vector<ChainStore>& chains,
                      const std::vector<std::string>& param_names,
                      const std::string& path);
std::vector<ChainStore> read_chains_csv(const std::string& path,
                                        std::vector<std::string>& param_names);

} // namespace mevmix
