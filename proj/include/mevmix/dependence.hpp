#pragma once

#include <Eigen/Dense>

#include "mevmix/errors.hpp"

namespace mevmix {

/// Empirical dependence summary evaluated on a grid of probability levels.
/// Requested grid points that cannot be estimated from the sample (too deep
/// in the tail, or an empty joint-exceedance set) are dropped, so r_grid
/// holds the feasible subset of the requested levels.
struct DependenceCurve {
    Eigen::VectorXd r_grid;  // strictly increasing, inside (0, 1)
    Eigen::VectorXd values;
    Eigen::Index n_used = 0;  // sample size behind the estimates
};

/// Empirical tail dependence coefficient on pseudo-observations: the
/// fraction of rows whose ranks both exceed level r, relative to 1 - r.
/// chi(r) = #(both ranks/(n+1) > r) / (n (1 - r)), clipped to [0, 1].
/// Grid points with r >= 1 - 1/n are dropped as insufficient-tail levels.
DependenceCurve chi_empirical(const Eigen::MatrixXd& data,
                              const Eigen::VectorXd& r_grid);

/// Complementary coefficient 2 log P(rank > r) / log P(both ranks > r) - 1,
/// estimated from the same pseudo-observations.  Distinguishes strength of
/// dependence within the asymptotically dependent class.  Grid points whose
/// joint exceedance count falls below 5 are dropped.
DependenceCurve chibar_empirical(const Eigen::MatrixXd& data,
                                 const Eigen::VectorXd& r_grid);

/// Kendall rank correlation with tie adjustment (the tau-b form), computed
/// by sorting and inversion counting in O(n log n).  Returns NaN when a
/// column has no variation, which leaves the coefficient undefined.
double kendall_tau(const Eigen::MatrixXd& data);

} // namespace mevmix
