#pragma once

#include <Eigen/Dense>

#include "mevmix/errors.hpp"
#include "mevmix/rng.hpp"

namespace mevmix {

/// Parameters of the multivariate generalized Pareto tail family built from
/// independent reverse-exponential generator variables U_i = -a_i E_i:
/// per-coordinate generator scales a > 0, and marginal scale sigma > 0 and
/// shape gamma linking the standardized scale to the observation scale.
struct TailParams {
    Eigen::VectorXd a;
    Eigen::VectorXd sigma;
    Eigen::VectorXd gamma;

    TailParams(Eigen::VectorXd a_in, Eigen::VectorXd sigma_in, Eigen::VectorXd gamma_in);

    Eigen::Index dim() const { return a.size(); }
};

/// E[exp(max U)] for the reverse-exponential generator: with s = sum 1/a_i
/// this is s / (1 + s), the normalizing constant of the standardized density.
double exp_max_u(const Eigen::VectorXd& a);

/// Log density of the standardized multivariate generalized Pareto vector at
/// z.  The support is {max z > 0}; outside it the function returns -inf.
double std_logdensity(const Eigen::VectorXd& z, const Eigen::VectorXd& a);

/// Componentwise map from the observation scale to the standardized scale,
/// z_j = log(1 + gamma_j x_j / sigma_j) / gamma_j, with the gamma -> 0 limit
/// x_j / sigma_j taken smoothly.  Throws SupportError when any component has
/// 1 + gamma_j x_j / sigma_j <= 0.
Eigen::VectorXd to_std(const Eigen::VectorXd& x, const TailParams& params);

/// Inverse of to_std: x_j = sigma_j (exp(gamma_j z_j) - 1) / gamma_j.
Eigen::VectorXd from_std(const Eigen::VectorXd& z, const TailParams& params);

/// True when x lies in the support of the observation-scale density:
/// max(x) > 0 and 1 + gamma_j x_j / sigma_j > 0 for every j.
bool in_support(const Eigen::VectorXd& x, const TailParams& params);

/// Log density of the observation-scale exceedance vector at x.  Returns
/// -inf off the support instead of throwing, so samplers can treat invalid
/// proposals as zero-density points.
double obs_logdensity(const Eigen::VectorXd& x, const TailParams& params);

/// Draws n observation-scale vectors, one per row.  Uses the constructive
/// representation Z = E 1 + U - max(U) with E standard exponential, which
/// makes max(Z) exactly unit exponential on the standardized scale.
Eigen::MatrixXd simulate(const TailParams& params, int n, RngStream& rng);

/// Draws n standardized vectors, one per row.
Eigen::MatrixXd simulate_std(const Eigen::VectorXd& a, int n, RngStream& rng);

/// Limiting upper tail-dependence coefficient chi of a bivariate pair with
/// generator scales a = (a_1, a_2).
double theoretical_chi(const Eigen::VectorXd& a);

} // namespace mevmix
