#pragma once

#include <Eigen/Dense>
#include <optional>

#include "mevmix/errors.hpp"

namespace mevmix {

/// Correlation matrix represented by its upper-triangular Cholesky-style
/// factor U with unit-norm columns, so that C = U^T U has unit diagonal.
/// The free entries are the strictly upper-triangular elements of U; the
/// diagonal is determined by the unit-norm constraint.
class CholCorr {
public:
    /// Wraps an explicit factor.  The matrix must be square, upper
    /// triangular with positive diagonal, and have unit-norm columns.
    explicit CholCorr(Eigen::MatrixXd upper_factor);

    /// Identity correlation of the given dimension.
    static CholCorr identity(Eigen::Index dim);

    /// Builds a factor from the strictly upper-triangular entries listed
    /// column by column (column 2 first).  Returns nullopt if any column's
    /// off-diagonal norm reaches 1, which would make the diagonal entry
    /// vanish or turn imaginary.
    static std::optional<CholCorr> from_free(const Eigen::VectorXd& free_entries,
                                             Eigen::Index dim);

    /// Factors a symmetric positive definite correlation matrix.
    static CholCorr from_correlation(const Eigen::MatrixXd& corr);

    Eigen::Index dim() const { return u_.rows(); }

    /// The factor U with C = U^T U.
    const Eigen::MatrixXd& upper_factor() const { return u_; }

    /// The correlation matrix C = U^T U.
    Eigen::MatrixXd correlation() const { return u_.transpose() * u_; }

    /// log det C = 2 sum_j log U_jj.
    double log_det() const;

    /// Strictly upper-triangular entries, column by column.
    Eigen::VectorXd free_entries() const;

    /// Number of free entries for a given dimension: d (d - 1) / 2.
    static Eigen::Index n_free(Eigen::Index dim) { return dim * (dim - 1) / 2; }

private:
    Eigen::MatrixXd u_;
};

/// Mean vector, marginal standard deviations and correlation factor of a
/// multivariate normal distribution.  Covariance is diag(sd) C diag(sd).
struct MvnParams {
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;
    CholCorr corr;

    MvnParams(Eigen::VectorXd mean_in, Eigen::VectorXd sd_in, CholCorr corr_in);

    Eigen::Index dim() const { return mean.size(); }

    Eigen::MatrixXd covariance() const;

    /// Upper-triangular A = U diag(sd) with covariance = A^T A.
    Eigen::MatrixXd scale_factor() const;

    /// Builds parameters from a mean vector and a covariance matrix.
    static MvnParams from_moments(const Eigen::VectorXd& mean,
                                  const Eigen::MatrixXd& cov);
};

/// Standard normal log density.
double normal_logpdf(double z);

/// Standard normal density.
double normal_pdf(double z);

/// Standard normal CDF, accurate over the full double range.
double normal_cdf(double z);

/// Inverse standard normal CDF (Wichura's PPND16 rational approximation,
/// relative error below 1e-15 over (0, 1)).
double normal_quantile(double p);

/// Log density of the multivariate normal at x.
double mvn_logpdf(const Eigen::VectorXd& x, const MvnParams& params);

/// Log densities of the multivariate normal at every row of x.
Eigen::VectorXd mvn_logpdf_rows(const Eigen::MatrixXd& x, const MvnParams& params);

/// P(X <= x) for the multivariate normal.  Exact closed forms are used for
/// d = 1 and d = 2 (the bivariate case via Genz's quadrature scheme, with
/// absolute error around 1e-14); higher dimensions fall back to a
/// deterministic randomized-lattice rule with a fixed internal seed.
double mvn_cdf(const Eigen::VectorXd& x, const MvnParams& params);

struct QmcResult {
    double value = 0.0;
    double error_estimate = 0.0;
};

/// Quasi Monte Carlo orthant probability for d >= 3 via sequential
/// conditioning on a randomized rank-1 lattice.  Deterministic for fixed
/// inputs; the error estimate is three standard errors across shifts.
QmcResult mvn_cdf_qmc(const Eigen::VectorXd& x, const MvnParams& params,
                      int n_shifts = 12, int n_points = 8192);

/// Standardized bivariate normal P(X <= h, Y <= k) with correlation rho.
double bvn_cdf(double h, double k, double rho);

/// Log density of a normal(mean, sd) truncated to [lo, hi].  Returns -inf
/// outside the interval.  Requires sd > 0 and lo < hi.
double truncnorm_logpdf(double x, double mean, double sd, double lo, double hi);

/// Generalized Pareto survival function (1 + gamma x / sigma)^(-1/gamma)
/// for x >= 0, with the exponential limit taken smoothly as gamma -> 0 and
/// values clipped to 0 beyond the finite endpoint when gamma < 0.
double gpd_sf(double x, double sigma, double gamma);

/// Unnormalized log density of the shape-delta LKJ correlation prior
/// expressed on the factor U, including the Jacobian of the map U -> C:
/// sum_j (d - j + 2 delta - 2) log U_jj with columns numbered from 1.
double lkj_chol_logdensity(const CholCorr& corr, double delta);

} // namespace mevmix
