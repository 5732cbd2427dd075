#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mevmix/model.hpp"
#include "mevmix/rng.hpp"

namespace mevmix {

enum class Algorithm { RandomWalk, FactorSlice };

/// MCMC run configuration shared by both samplers.
struct SamplerConfig {
    int n_iter = 30000;
    int burn_in = 20000;
    int thin = 10;
    int n_chains = 3;
    Algorithm algorithm = Algorithm::RandomWalk;

    /// Adaptation cadence during burn-in; 0 picks a per-algorithm default
    /// (50 for the random walk, 200 for the factor slice sampler).
    int adapt_interval = 0;
    double target_accept = 0.44;
    double initial_scale = 0.1;
    std::uint64_t seed = 1;

    int effective_adapt_interval() const {
        if (adapt_interval > 0) return adapt_interval;
        return algorithm == Algorithm::RandomWalk ? 50 : 200;
    }
    int n_stored() const { return (n_iter - burn_in) / thin; }
    void validate() const;
};

/// Stored output of one chain: thinned post-burn-in draws of the flattened
/// parameter vector, their log posterior values, and bookkeeping about
/// acceptance and adaptation.
struct ChainStore {
    Eigen::MatrixXd draws;          // n_stored x n_params
    Eigen::VectorXd logpost;        // n_stored
    std::vector<std::string> param_names;
    Eigen::VectorXd accept_rate;    // per parameter, post burn-in (1 for slices)
    Eigen::MatrixXd scale_trace;    // adaptation rounds x n_params
    bool mixing_warning = false;
};

/// Fixed flattening of ModelParams into one vector: bulk means, bulk sds,
/// free correlation entries, thresholds, then tail a, sigma, gamma.
class ParamLayout {
public:
    enum class Block { Bulk, Threshold, Tail };

    static ParamLayout for_dim(Eigen::Index d);

    Eigen::Index dim() const { return d_; }
    Eigen::Index n_params() const { return static_cast<Eigen::Index>(names_.size()); }
    const std::vector<std::string>& names() const { return names_; }
    Block block(Eigen::Index param_index) const { return blocks_[static_cast<std::size_t>(param_index)]; }

    Eigen::VectorXd pack(const ModelParams& params) const;

    /// Rebuilds structured parameters; nullopt when the vector encodes an
    /// invalid point (nonpositive scale, infeasible correlation entries).
    std::optional<ModelParams> unpack(const Eigen::VectorXd& x) const;

private:
    explicit ParamLayout(Eigen::Index d);
    Eigen::Index d_ = 0;
    std::vector<std::string> names_;
    std::vector<Block> blocks_;
};

/// Deterministic starting point: thresholds at the 90th percentiles, bulk
/// moments from the sub-threshold rows, unit generator scales, mildly heavy
/// shapes, scales from the marginal exceedance spread.  Retries with
/// seed-derived jitter when the first guess has zero posterior density.
ModelParams init_params(const Dataset& data, const PriorSpec& prior, std::uint64_t seed);

/// Coordinate-updatable log target.  propose() evaluates the density with
/// one coordinate changed; accept() commits the pending proposal.
class CoordTarget {
public:
    virtual ~CoordTarget() = default;
    virtual const Eigen::VectorXd& x() const = 0;
    virtual double lp() const = 0;
    virtual double propose(Eigen::Index c, double value) = 0;
    virtual void accept() = 0;
};

/// Adapts a plain log-density function to the coordinate interface.
class FunctionTarget : public CoordTarget {
public:
    FunctionTarget(std::function<double(const Eigen::VectorXd&)> logpdf, Eigen::VectorXd x0);
    const Eigen::VectorXd& x() const override { return x_; }
    double lp() const override { return lp_; }
    double propose(Eigen::Index c, double value) override;
    void accept() override;

private:
    std::function<double(const Eigen::VectorXd&)> f_;
    Eigen::VectorXd x_;
    double lp_;
    Eigen::Index pending_coord_ = -1;
    double pending_value_ = 0.0;
    double pending_lp_ = 0.0;
};

/// Incrementally evaluated log posterior of the mixture model.  Caches the
/// per-row bulk log densities, the bulk/tail partition, the tail sum and the
/// threshold survival mass, and recomputes only the pieces a coordinate
/// update touches.
class CachedPosterior : public CoordTarget {
public:
    CachedPosterior(const Dataset& data, const PriorSpec& prior,
                    const ParamLayout& layout, Eigen::VectorXd x0);

    const Eigen::VectorXd& x() const override { return x_; }
    double lp() const override { return lp_; }
    double propose(Eigen::Index c, double value) override;
    void accept() override;

    /// Full from-scratch evaluation at the current point (for testing the
    /// incremental bookkeeping).
    double full_lp() const;

private:
    struct Caches {
        Eigen::VectorXd bulk_lpdf;            // per data row
        std::vector<Eigen::Index> tail_rows;
        double sum_bulk = 0.0;
        double sum_tail = 0.0;
        double log_surv = 0.0;
        double lprior = 0.0;
    };
    double assemble(const Caches& c) const;
    static double tail_sum(const Eigen::MatrixXd& values,
                           const std::vector<Eigen::Index>& rows,
                           const Eigen::VectorXd& u, const TailParams& tail);

    const Dataset& data_;
    const PriorSpec& prior_;
    const ParamLayout& layout_;
    Eigen::VectorXd x_;
    std::optional<ModelParams> params_;
    Caches cur_;
    double lp_;

    Eigen::Index pending_coord_ = -1;
    double pending_value_ = 0.0;
    std::optional<ModelParams> pending_params_;
    Caches pending_;
    bool pending_valid_ = false;
};

/// One random-walk Metropolis sweep: a Gaussian proposal per coordinate,
/// accepted or rejected independently.  accepts[c] is incremented on
/// acceptance; attempts is implicit (one per coordinate per sweep).
void rwmh_sweep(CoordTarget& target, const Eigen::VectorXd& scales, RngStream& rng,
                Eigen::VectorXi& accepts);

/// Robbins-Monro update of per-coordinate proposal scales toward a target
/// acceptance rate; round counts adaptation rounds from 1 and damps the
/// step like 1/sqrt(round).
Eigen::VectorXd adapt_scales(const Eigen::VectorXd& scales,
                             const Eigen::VectorXd& accept_rates, int round,
                             double target);

struct SliceCounters {
    long expansions = 0;
    long contractions = 0;
    long steps = 0;
};

/// Univariate slice sampling update of x along direction dir (stepping out
/// then shrinkage).  Throws NumericPathologyError if the shrinkage loop
/// fails to terminate.
void slice_along(const std::function<double(const Eigen::VectorXd&)>& logpdf,
                 Eigen::VectorXd& x, double& lp, const Eigen::VectorXd& dir,
                 double width, RngStream& rng, SliceCounters& counters);

/// One factor slice sweep: a slice update along every column of basis.
void afss_sweep(const std::function<double(const Eigen::VectorXd&)>& logpdf,
                Eigen::VectorXd& x, double& lp, const Eigen::MatrixXd& basis,
                const Eigen::VectorXd& widths, RngStream& rng,
                std::vector<SliceCounters>& counters);

/// Adapts the slice basis and widths.  When history holds at least 50 rows
/// the basis becomes the eigenvectors of its covariance with widths set
/// from the eigenvalues; otherwise (or on a singular covariance) the
/// previous basis is kept and widths are tuned from the bracketing effort:
/// factors whose expansion plus contraction count leaves [2, 8] have their
/// width scaled by clamp(2^(mean expansions - mean contractions), 0.5, 2).
void afss_adapt(const Eigen::MatrixXd& history, Eigen::MatrixXd& basis,
                Eigen::VectorXd& widths, std::vector<SliceCounters>& counters);

/// Runs n_chains independent chains of the configured sampler on the model
/// posterior.  Chain c uses the deterministic stream (seed, chain index),
/// so results are reproducible and independent of scheduling.
std::vector<ChainStore> run_chains(const Dataset& data, const PriorSpec& prior,
                                   const SamplerConfig& config);

/// Split-half potential scale reduction factor for one parameter across
/// chains.  Identical chains give sqrt((L - 1) / L) with L the split
/// length; +inf signals between-sequence variance with no within variance.
double gelman_rubin(const std::vector<ChainStore>& chains, Eigen::Index param_index);

/// Effective sample size of one scalar series by Geyer's initial monotone
/// sequence estimator.  A constant series returns 0.
double effective_sample_size(const Eigen::VectorXd& series);
double effective_sample_size(const ChainStore& chain, Eigen::Index param_index);

} // namespace mevmix
