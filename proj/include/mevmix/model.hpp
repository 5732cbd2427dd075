#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mevmix/mgpd.hpp"
#include "mevmix/rng.hpp"
#include "mevmix/stats.hpp"

namespace mevmix {

/// A rectangular data set: one observation per row, one site per column.
struct Dataset {
    Eigen::MatrixXd values;
    std::vector<std::string> names;

    Dataset() = default;
    Dataset(Eigen::MatrixXd values_in, std::vector<std::string> names_in);

    Eigen::Index n() const { return values.rows(); }
    Eigen::Index d() const { return values.cols(); }
};

/// Full parameter set of the bulk-and-tail mixture: Gaussian bulk below the
/// threshold vector u, multivariate generalized Pareto excesses above it.
struct ModelParams {
    MvnParams bulk;
    Eigen::VectorXd u;
    TailParams tail;

    ModelParams(MvnParams bulk_in, Eigen::VectorXd u_in, TailParams tail_in);

    Eigen::Index dim() const { return u.size(); }
};

/// Prior hyperparameters.  Bulk means are normal, bulk standard deviations
/// uniform on (0, sd_upper), the correlation factor follows a shape-delta
/// LKJ law, thresholds are per-site truncated normals on [lo, hi], and the
/// tail parameters have independent uniform box priors.
struct PriorSpec {
    double delta = 1.3;

    Eigen::VectorXd mean_loc;      // normal prior centers for bulk means
    Eigen::VectorXd mean_scale;    // normal prior sds for bulk means
    Eigen::VectorXd sd_upper;      // upper bounds for bulk sds

    Eigen::VectorXd thresh_loc;    // truncated normal centers
    Eigen::VectorXd thresh_scale;  // truncated normal sds
    Eigen::VectorXd thresh_lo;     // truncation bounds
    Eigen::VectorXd thresh_hi;

    double a_upper = 50.0;
    double gamma_lo = -1.0;
    double gamma_hi = 1.0;
    double sigma_upper = 50.0;

    /// When set, requires gamma_i + 1 / a_i >= 0 for every site, which keeps
    /// the fitted tail mean finite.
    bool finite_expectation = false;

    Eigen::Index dim() const { return mean_loc.size(); }
    void validate() const;
};

/// Index split of a data set into bulk rows (all sites at or below u) and
/// tail rows (at least one exceedance).
struct Partition {
    std::vector<Eigen::Index> bulk_rows;
    std::vector<Eigen::Index> tail_rows;

    Eigen::Index n_tail() const { return static_cast<Eigen::Index>(tail_rows.size()); }
};

/// Splits rows by the componentwise comparison with u.  Ties count as bulk.
Partition make_partition(const Eigen::MatrixXd& values, const Eigen::VectorXd& u);

/// Log density of one observation under the mixture: the Gaussian bulk
/// density below u, and the tail mass 1 - F_bulk(u) times the exceedance
/// density above.  Returns -inf outside the tail support.
double mixture_logdensity(const Eigen::VectorXd& x, const ModelParams& params);

/// Log likelihood of the data set under the mixture.
double log_likelihood(const Dataset& data, const ModelParams& params);

/// Log prior density (unnormalized) of the parameters.
double log_prior(const ModelParams& params, const PriorSpec& prior);

/// log_likelihood + log_prior.
double log_posterior(const Dataset& data, const ModelParams& params,
                     const PriorSpec& prior);

/// Draws n observations from the mixture.  Bulk points are sampled by
/// rejection from the Gaussian restricted below u; tail points are u plus a
/// generalized Pareto excess.  Throws DegenerateConfigError when the bulk
/// region has probability below 1e-3, which would make rejection sampling
/// useless and signals a badly placed threshold.
Dataset simulate_model(const ModelParams& params, int n, RngStream& rng);

} // namespace mevmix
