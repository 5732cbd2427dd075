#include "mevmix/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mevmix {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double column_quantile(const Eigen::VectorXd& col, double q) {
    std::vector<double> v(col.data(), col.data() + col.size());
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return (1.0 - w) * v[lo] + w * v[hi];
}

std::vector<Eigen::Index> tail_rows_of(const Eigen::MatrixXd& values,
                                       const Eigen::VectorXd& u) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        if ((values.row(i).transpose().array() > u.array()).any()) rows.push_back(i);
    }
    return rows;
}
} // namespace

void SamplerConfig::validate() const {
    if (n_iter <= 0 || burn_in < 0 || burn_in >= n_iter) {
        throw UsageError("sampler needs 0 <= burn_in < n_iter");
    }
    if (thin < 1) throw UsageError("thinning must be at least 1");
    if (n_iter - burn_in < thin) throw UsageError("no draws would be stored");
    if (n_chains < 1) throw UsageError("need at least one chain");
    if (!(target_accept > 0.0 && target_accept < 1.0)) {
        throw UsageError("target acceptance must lie in (0, 1)");
    }
    if (!(initial_scale > 0.0)) throw UsageError("initial scale must be positive");
}

ParamLayout::ParamLayout(Eigen::Index d) : d_(d) {
    auto push = [this](const std::string& base, Eigen::Index i, Block b) {
        names_.push_back(base + "_" + std::to_string(i + 1));
        blocks_.push_back(b);
    };
    for (Eigen::Index i = 0; i < d; ++i) push("mu", i, Block::Bulk);
    for (Eigen::Index i = 0; i < d; ++i) push("s", i, Block::Bulk);
    for (Eigen::Index j = 1; j < d; ++j) {
        for (Eigen::Index i = 0; i < j; ++i) {
            names_.push_back("U_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
            blocks_.push_back(Block::Bulk);
        }
    }
    for (Eigen::Index i = 0; i < d; ++i) push("u", i, Block::Threshold);
    for (Eigen::Index i = 0; i < d; ++i) push("a", i, Block::Tail);
    for (Eigen::Index i = 0; i < d; ++i) push("sigma", i, Block::Tail);
    for (Eigen::Index i = 0; i < d; ++i) push("gamma", i, Block::Tail);
}

ParamLayout ParamLayout::for_dim(Eigen::Index d) {
    if (d < 1) throw UsageError("dimension must be at least 1");
    return ParamLayout(d);
}

Eigen::VectorXd ParamLayout::pack(const ModelParams& params) const {
    if (params.dim() != d_) throw UsageError("parameter dimension mismatch");
    Eigen::VectorXd x(n_params());
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < d_; ++i) x(k++) = params.bulk.mean(i);
    for (Eigen::Index i = 0; i < d_; ++i) x(k++) = params.bulk.sd(i);
    const Eigen::VectorXd free = params.bulk.corr.free_entries();
    for (Eigen::Index i = 0; i < free.size(); ++i) x(k++) = free(i);
    for (Eigen::Index i = 0; i < d_; ++i) x(k++) = params.u(i);
    for (Eigen::Index i = 0; i < d_; ++i) x(k++) = params.tail.a(i);
    for (Eigen::Index i = 0; i < d_; ++i) x(k++) = params.tail.sigma(i);
    for (Eigen::Index i = 0; i < d_; ++i) x(k++) = params.tail.gamma(i);
    return x;
}

std::optional<ModelParams> ParamLayout::unpack(const Eigen::VectorXd& x) const {
    if (x.size() != n_params()) throw UsageError("parameter vector length mismatch");
    Eigen::Index k = 0;
    Eigen::VectorXd mean(d_), sd(d_);
    for (Eigen::Index i = 0; i < d_; ++i) mean(i) = x(k++);
    for (Eigen::Index i = 0; i < d_; ++i) sd(i) = x(k++);
    if (!(sd.array() > 0.0).all()) return std::nullopt;
    Eigen::VectorXd free(CholCorr::n_free(d_));
    for (Eigen::Index i = 0; i < free.size(); ++i) free(i) = x(k++);
    auto corr = CholCorr::from_free(free, d_);
    if (!corr) return std::nullopt;
    Eigen::VectorXd u(d_), a(d_), sigma(d_), gamma(d_);
    for (Eigen::Index i = 0; i < d_; ++i) u(i) = x(k++);
    for (Eigen::Index i = 0; i < d_; ++i) a(i) = x(k++);
    for (Eigen::Index i = 0; i < d_; ++i) sigma(i) = x(k++);
    for (Eigen::Index i = 0; i < d_; ++i) gamma(i) = x(k++);
    if (!(a.array() > 0.0).all() || !(sigma.array() > 0.0).all()) return std::nullopt;
    return ModelParams(MvnParams(std::move(mean), std::move(sd), std::move(*corr)),
                       std::move(u), TailParams(std::move(a), std::move(sigma),
                                                std::move(gamma)));
}

ModelParams init_params(const Dataset& data, const PriorSpec& prior,
                        std::uint64_t seed) {
    prior.validate();
    const Eigen::Index d = data.d();
    if (prior.dim() != d) throw UsageError("prior dimension mismatch");
    if (data.n() < 20) {
        throw InitializationError("need at least 20 observations to initialize");
    }

    Eigen::VectorXd u(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        const double span = prior.thresh_hi(j) - prior.thresh_lo(j);
        u(j) = std::clamp(column_quantile(data.values.col(j), 0.9),
                          prior.thresh_lo(j) + 1e-6 * span,
                          prior.thresh_hi(j) - 1e-6 * span);
    }

    const Partition part = make_partition(data.values, u);
    if (static_cast<Eigen::Index>(part.bulk_rows.size()) < 5) {
        throw InitializationError("too few sub-threshold rows to set bulk moments");
    }
    Eigen::MatrixXd bulk_pts(part.bulk_rows.size(), d);
    for (std::size_t i = 0; i < part.bulk_rows.size(); ++i) {
        bulk_pts.row(static_cast<Eigen::Index>(i)) = data.values.row(part.bulk_rows[i]);
    }
    Eigen::VectorXd mu = bulk_pts.colwise().mean().transpose();
    Eigen::MatrixXd centered = bulk_pts.rowwise() - mu.transpose();
    Eigen::MatrixXd cov = centered.transpose() * centered /
                          static_cast<double>(bulk_pts.rows() - 1);
    Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
    if (!(sd.array() > 1e-12).all()) {
        throw InitializationError("a column has zero variance below the threshold");
    }
    for (Eigen::Index j = 0; j < d; ++j) sd(j) = std::min(sd(j), 0.95 * prior.sd_upper(j));

    Eigen::MatrixXd corr = sd.cwiseInverse().asDiagonal() * cov *
                           sd.cwiseInverse().asDiagonal();
    corr.diagonal().setOnes();
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            if (i != j) corr(i, j) = std::clamp(corr(i, j), -0.99, 0.99);
        }
    }
    std::optional<CholCorr> chol;
    for (int shrink = 0; shrink < 7 && !chol; ++shrink) {
        try {
            chol = CholCorr::from_correlation(corr);
        } catch (const UsageError&) {
            corr = 0.5 * corr + 0.5 * Eigen::MatrixXd::Identity(d, d);
        }
    }
    if (!chol) chol = CholCorr::identity(d);

    const double gamma_mid = 0.5 * (prior.gamma_lo + prior.gamma_hi);
    double gamma0 = (prior.gamma_lo < 0.1 && 0.1 < prior.gamma_hi) ? 0.1 : gamma_mid;
    Eigen::VectorXd sigma0(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        std::vector<double> exc;
        for (Eigen::Index i = 0; i < data.n(); ++i) {
            const double e = data.values(i, j) - u(j);
            if (e > 0.0) exc.push_back(e);
        }
        double s0 = 1.0;
        if (exc.size() >= 5) {
            const double m = std::accumulate(exc.begin(), exc.end(), 0.0) /
                             static_cast<double>(exc.size());
            double v = 0.0;
            for (double e : exc) v += (e - m) * (e - m);
            v /= static_cast<double>(exc.size() - 1);
            if (v > 1e-12) s0 = std::sqrt(v);
        }
        sigma0(j) = std::clamp(s0, 1e-3, 0.95 * prior.sigma_upper);
    }

    RngStream jitter(seed, 2);
    Eigen::VectorXd gamma = Eigen::VectorXd::Constant(d, gamma0);
    Eigen::VectorXd a = Eigen::VectorXd::Constant(d, std::min(1.0, 0.95 * prior.a_upper));
    Eigen::VectorXd sigma = sigma0;
    for (int attempt = 0; attempt < 50; ++attempt) {
        ModelParams candidate(MvnParams(mu, sd, *chol), u, TailParams(a, sigma, gamma));
        if (std::isfinite(log_posterior(data, candidate, prior))) return candidate;
        // Widen the tail and pull shapes toward zero; nudge the thresholds
        // upward so fewer deep-negative excess components appear.
        for (Eigen::Index j = 0; j < d; ++j) {
            sigma(j) = std::min(sigma(j) * 1.5, 0.95 * prior.sigma_upper);
            gamma(j) *= 0.5;
            const double room = prior.thresh_hi(j) - u(j);
            u(j) += 0.1 * room * jitter.uniform();
        }
    }
    throw InitializationError("could not find a starting point with finite posterior");
}

FunctionTarget::FunctionTarget(std::function<double(const Eigen::VectorXd&)> logpdf,
                               Eigen::VectorXd x0)
    : f_(std::move(logpdf)), x_(std::move(x0)), lp_(f_(x_)) {
    if (!std::isfinite(lp_)) {
        throw UsageError("starting point has non-finite log density");
    }
}

double FunctionTarget::propose(Eigen::Index c, double value) {
    pending_coord_ = c;
    pending_value_ = value;
    Eigen::VectorXd xp = x_;
    xp(c) = value;
    pending_lp_ = f_(xp);
    return pending_lp_;
}

void FunctionTarget::accept() {
    x_(pending_coord_) = pending_value_;
    lp_ = pending_lp_;
}

CachedPosterior::CachedPosterior(const Dataset& data, const PriorSpec& prior,
                                 const ParamLayout& layout, Eigen::VectorXd x0)
    : data_(data), prior_(prior), layout_(layout), x_(std::move(x0)) {
    params_ = layout_.unpack(x_);
    if (!params_) throw UsageError("starting point is not a valid parameter vector");
    cur_.bulk_lpdf = mvn_logpdf_rows(data_.values, params_->bulk);
    cur_.tail_rows = tail_rows_of(data_.values, params_->u);
    double st = 0.0;
    for (Eigen::Index r : cur_.tail_rows) st += cur_.bulk_lpdf(r);
    cur_.sum_bulk = cur_.bulk_lpdf.sum() - st;
    cur_.sum_tail = tail_sum(data_.values, cur_.tail_rows, params_->u, params_->tail);
    const double mass = mvn_cdf(params_->u, params_->bulk);
    cur_.log_surv = mass < 1.0 ? std::log1p(-mass) : -kInf;
    cur_.lprior = log_prior(*params_, prior_);
    lp_ = assemble(cur_);
    if (!std::isfinite(lp_)) {
        throw UsageError("starting point has non-finite log posterior");
    }
}

double CachedPosterior::assemble(const Caches& c) const {
    if (c.lprior == -kInf) return -kInf;
    double out = c.lprior + c.sum_bulk;
    const auto n_tail = static_cast<double>(c.tail_rows.size());
    if (!c.tail_rows.empty()) {
        if (c.sum_tail == -kInf || c.log_surv == -kInf) return -kInf;
        out += c.sum_tail + n_tail * c.log_surv;
    }
    return out;
}

double CachedPosterior::tail_sum(const Eigen::MatrixXd& values,
                                 const std::vector<Eigen::Index>& rows,
                                 const Eigen::VectorXd& u, const TailParams& tail) {
    double out = 0.0;
    for (Eigen::Index r : rows) {
        out += obs_logdensity(values.row(r).transpose() - u, tail);
        if (out == -kInf) return -kInf;
    }
    return out;
}

double CachedPosterior::propose(Eigen::Index c, double value) {
    pending_valid_ = false;
    pending_coord_ = c;
    pending_value_ = value;

    Eigen::VectorXd xp = x_;
    xp(c) = value;
    pending_params_ = layout_.unpack(xp);
    if (!pending_params_) return -kInf;
    pending_ = Caches{};
    pending_.lprior = log_prior(*pending_params_, prior_);
    if (pending_.lprior == -kInf) return -kInf;

    switch (layout_.block(c)) {
        case ParamLayout::Block::Bulk: {
            pending_.bulk_lpdf = mvn_logpdf_rows(data_.values, pending_params_->bulk);
            pending_.tail_rows = cur_.tail_rows;
            double st = 0.0;
            for (Eigen::Index r : pending_.tail_rows) st += pending_.bulk_lpdf(r);
            pending_.sum_bulk = pending_.bulk_lpdf.sum() - st;
            pending_.sum_tail = cur_.sum_tail;
            const double mass = mvn_cdf(pending_params_->u, pending_params_->bulk);
            pending_.log_surv = mass < 1.0 ? std::log1p(-mass) : -kInf;
            break;
        }
        case ParamLayout::Block::Threshold: {
            pending_.bulk_lpdf = cur_.bulk_lpdf;
            pending_.tail_rows = tail_rows_of(data_.values, pending_params_->u);
            double st = 0.0;
            for (Eigen::Index r : pending_.tail_rows) st += pending_.bulk_lpdf(r);
            pending_.sum_bulk = pending_.bulk_lpdf.sum() - st;
            pending_.sum_tail = tail_sum(data_.values, pending_.tail_rows,
                                         pending_params_->u, pending_params_->tail);
            const double mass = mvn_cdf(pending_params_->u, pending_params_->bulk);
            pending_.log_surv = mass < 1.0 ? std::log1p(-mass) : -kInf;
            break;
        }
        case ParamLayout::Block::Tail: {
            pending_.bulk_lpdf = cur_.bulk_lpdf;
            pending_.tail_rows = cur_.tail_rows;
            pending_.sum_bulk = cur_.sum_bulk;
            pending_.sum_tail = tail_sum(data_.values, pending_.tail_rows,
                                         pending_params_->u, pending_params_->tail);
            pending_.log_surv = cur_.log_surv;
            break;
        }
    }
    pending_valid_ = true;
    return assemble(pending_);
}

void CachedPosterior::accept() {
    if (!pending_valid_) throw UsageError("no valid pending proposal to accept");
    x_(pending_coord_) = pending_value_;
    params_ = std::move(pending_params_);
    lp_ = assemble(pending_);
    cur_ = std::move(pending_);
    pending_valid_ = false;
}

double CachedPosterior::full_lp() const {
    return log_posterior(data_, *params_, prior_);
}

void rwmh_sweep(CoordTarget& target, const Eigen::VectorXd& scales, RngStream& rng,
                Eigen::VectorXi& accepts) {
    const Eigen::Index p = target.x().size();
    if (scales.size() != p || accepts.size() != p) {
        throw UsageError("scale or counter length mismatch");
    }
    for (Eigen::Index c = 0; c < p; ++c) {
        const double step = scales(c) * rng.normal();
        const double lp_new = target.propose(c, target.x()(c) + step);
        // The uniform is always consumed so the stream position does not
        // depend on the acceptance pattern.
        const double logu = std::log(rng.uniform());
        if (logu < lp_new - target.lp()) {
            target.accept();
            accepts(c) += 1;
        }
    }
}

Eigen::VectorXd adapt_scales(const Eigen::VectorXd& scales,
                             const Eigen::VectorXd& accept_rates, int round,
                             double target) {
    if (scales.size() != accept_rates.size()) throw UsageError("length mismatch");
    if (round < 1) throw UsageError("adaptation rounds count from 1");
    Eigen::VectorXd out = scales;
    const double step = 1.0 / std::sqrt(static_cast<double>(round));
    for (Eigen::Index c = 0; c < out.size(); ++c) {
        out(c) = std::clamp(out(c) * std::exp(step * (accept_rates(c) - target)),
                            1e-8, 1e8);
    }
    return out;
}

void slice_along(const std::function<double(const Eigen::VectorXd&)>& logpdf,
                 Eigen::VectorXd& x, double& lp, const Eigen::VectorXd& dir,
                 double width, RngStream& rng, SliceCounters& counters) {
    if (!(width > 0.0)) throw UsageError("slice width must be positive");
    if (!std::isfinite(lp)) throw UsageError("slice start has non-finite density");
    const double log_y = lp - rng.exponential();
    double lo = -width * rng.uniform();
    double hi = lo + width;
    int guard = 0;
    while (logpdf(x + lo * dir) > log_y) {
        lo -= width;
        ++counters.expansions;
        if (++guard > 200) {
            throw NumericPathologyError("slice expansion failed to bracket the level set");
        }
    }
    guard = 0;
    while (logpdf(x + hi * dir) > log_y) {
        hi += width;
        ++counters.expansions;
        if (++guard > 200) {
            throw NumericPathologyError("slice expansion failed to bracket the level set");
        }
    }
    for (int shrink = 0; shrink < 1000; ++shrink) {
        const double t = lo + (hi - lo) * rng.uniform();
        Eigen::VectorXd xp = x + t * dir;
        const double lpn = logpdf(xp);
        if (lpn > log_y) {
            x = std::move(xp);
            lp = lpn;
            ++counters.steps;
            return;
        }
        ++counters.contractions;
        if (t < 0.0) {
            lo = t;
        } else {
            hi = t;
        }
    }
    throw NumericPathologyError("slice shrinkage did not terminate");
}

void afss_sweep(const std::function<double(const Eigen::VectorXd&)>& logpdf,
                Eigen::VectorXd& x, double& lp, const Eigen::MatrixXd& basis,
                const Eigen::VectorXd& widths, RngStream& rng,
                std::vector<SliceCounters>& counters) {
    const Eigen::Index p = x.size();
    if (basis.rows() != p || basis.cols() != p || widths.size() != p ||
        static_cast<Eigen::Index>(counters.size()) != p) {
        throw UsageError("basis, width or counter shape mismatch");
    }
    for (Eigen::Index k = 0; k < p; ++k) {
        slice_along(logpdf, x, lp, basis.col(k), widths(k), rng,
                    counters[static_cast<std::size_t>(k)]);
    }
}

void afss_adapt(const Eigen::MatrixXd& history, Eigen::MatrixXd& basis,
                Eigen::VectorXd& widths, std::vector<SliceCounters>& counters) {
    const Eigen::Index p = basis.rows();
    if (widths.size() != p || static_cast<Eigen::Index>(counters.size()) != p) {
        throw UsageError("basis, width or counter shape mismatch");
    }
    bool refreshed = false;
    if (history.rows() >= 50 && history.cols() == p) {
        const Eigen::VectorXd mean = history.colwise().mean().transpose();
        const Eigen::MatrixXd centered = history.rowwise() - mean.transpose();
        const Eigen::MatrixXd cov = centered.transpose() * centered /
                                    static_cast<double>(history.rows() - 1);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
        if (es.info() == Eigen::Success) {
            const Eigen::VectorXd ev = es.eigenvalues();
            const double top = ev.maxCoeff();
            if (std::isfinite(top) && top > 0.0 && ev.minCoeff() > 1e-12 * top) {
                basis = es.eigenvectors();
                for (Eigen::Index k = 0; k < p; ++k) {
                    widths(k) = 2.0 * std::sqrt(std::max(ev(k), 1e-16));
                }
                refreshed = true;
            }
        }
    }
    if (!refreshed) {
        // Tune widths from the bracketing effort: aim for a combined
        // expansion and contraction count between 2 and 8 per update.
        for (Eigen::Index k = 0; k < p; ++k) {
            SliceCounters& c = counters[static_cast<std::size_t>(k)];
            if (c.steps == 0) continue;
            const double me = static_cast<double>(c.expansions) / c.steps;
            const double mc = static_cast<double>(c.contractions) / c.steps;
            if (me + mc < 2.0 || me + mc > 8.0) {
                const double factor = std::clamp(std::exp2(me - mc), 0.5, 2.0);
                widths(k) = std::clamp(widths(k) * factor, 1e-8, 1e8);
            }
        }
    }
    for (auto& c : counters) c = SliceCounters{};
}

namespace {

ChainStore run_rwmh_chain(const Dataset& data, const PriorSpec& prior,
                          const ParamLayout& layout, const Eigen::VectorXd& x0,
                          const SamplerConfig& cfg, RngStream& rng) {
    CachedPosterior target(data, prior, layout, x0);
    const Eigen::Index p = layout.n_params();
    Eigen::VectorXd scales = Eigen::VectorXd::Constant(p, cfg.initial_scale);
    const int interval = cfg.effective_adapt_interval();

    ChainStore store;
    store.param_names = layout.names();
    store.draws.resize(cfg.n_stored(), p);
    store.logpost.resize(cfg.n_stored());
    std::vector<Eigen::VectorXd> trace;

    Eigen::VectorXi window_accepts = Eigen::VectorXi::Zero(p);
    Eigen::VectorXi post_accepts = Eigen::VectorXi::Zero(p);
    int window_sweeps = 0;
    int post_sweeps = 0;
    int round = 0;
    int stored = 0;

    for (int iter = 0; iter < cfg.n_iter; ++iter) {
        const bool warm = iter < cfg.burn_in;
        Eigen::VectorXi& counter = warm ? window_accepts : post_accepts;
        rwmh_sweep(target, scales, rng, counter);
        if (warm) {
            ++window_sweeps;
            if (window_sweeps == interval) {
                const Eigen::VectorXd rates =
                    window_accepts.cast<double>() / static_cast<double>(window_sweeps);
                scales = adapt_scales(scales, rates, ++round, cfg.target_accept);
                trace.push_back(scales);
                window_accepts.setZero();
                window_sweeps = 0;
            }
        } else {
            ++post_sweeps;
            const int t = iter - cfg.burn_in + 1;
            if (t % cfg.thin == 0 && stored < cfg.n_stored()) {
                store.draws.row(stored) = target.x().transpose();
                store.logpost(stored) = target.lp();
                ++stored;
            }
        }
    }

    store.accept_rate = post_sweeps > 0
                            ? (post_accepts.cast<double>() / post_sweeps).eval()
                            : Eigen::VectorXd::Zero(p).eval();
    store.scale_trace.resize(static_cast<Eigen::Index>(trace.size()), p);
    for (std::size_t r = 0; r < trace.size(); ++r) {
        store.scale_trace.row(static_cast<Eigen::Index>(r)) = trace[r].transpose();
    }
    store.mixing_warning = post_sweeps > 50 && (post_accepts.array() == 0).any();
    return store;
}

ChainStore run_afss_chain(const Dataset& data, const PriorSpec& prior,
                          const ParamLayout& layout, const Eigen::VectorXd& x0,
                          const SamplerConfig& cfg, RngStream& rng) {
    auto logpdf = [&](const Eigen::VectorXd& v) -> double {
        auto params = layout.unpack(v);
        if (!params) return -kInf;
        return log_posterior(data, *params, prior);
    };
    const Eigen::Index p = layout.n_params();
    Eigen::VectorXd x = x0;
    double lp = logpdf(x);
    if (!std::isfinite(lp)) {
        throw UsageError("starting point has non-finite log posterior");
    }
    Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(p, p);
    Eigen::VectorXd widths = Eigen::VectorXd::Constant(p, cfg.initial_scale);
    std::vector<SliceCounters> counters(static_cast<std::size_t>(p));
    const int interval = cfg.effective_adapt_interval();

    ChainStore store;
    store.param_names = layout.names();
    store.draws.resize(cfg.n_stored(), p);
    store.logpost.resize(cfg.n_stored());
    std::vector<Eigen::VectorXd> trace;

    Eigen::MatrixXd history(cfg.burn_in, p);
    int stored = 0;
    for (int iter = 0; iter < cfg.n_iter; ++iter) {
        afss_sweep(logpdf, x, lp, basis, widths, rng, counters);
        if (iter < cfg.burn_in) {
            history.row(iter) = x.transpose();
            if ((iter + 1) % interval == 0) {
                // Adapt from the most recent half of the accumulated
                // history, which forgets the initialization transient.
                const int have = iter + 1;
                const int use = have / 2;
                afss_adapt(history.middleRows(have - use, use), basis, widths, counters);
                trace.push_back(widths);
            }
        } else {
            const int t = iter - cfg.burn_in + 1;
            if (t % cfg.thin == 0 && stored < cfg.n_stored()) {
                store.draws.row(stored) = x.transpose();
                store.logpost(stored) = lp;
                ++stored;
            }
        }
    }

    store.accept_rate = Eigen::VectorXd::Ones(p);
    store.scale_trace.resize(static_cast<Eigen::Index>(trace.size()), p);
    for (std::size_t r = 0; r < trace.size(); ++r) {
        store.scale_trace.row(static_cast<Eigen::Index>(r)) = trace[r].transpose();
    }
    bool all_same = store.draws.rows() > 1;
    for (Eigen::Index r = 1; all_same && r < store.draws.rows(); ++r) {
        all_same = (store.draws.row(r).array() == store.draws.row(0).array()).all();
    }
    store.mixing_warning = store.draws.rows() > 1 && all_same;
    return store;
}

} // namespace

std::vector<ChainStore> run_chains(const Dataset& data, const PriorSpec& prior,
                                   const SamplerConfig& config) {
    config.validate();
    const ParamLayout layout = ParamLayout::for_dim(data.d());
    const ModelParams init = init_params(data, prior, config.seed);
    const Eigen::VectorXd x0 = layout.pack(init);

    std::vector<ChainStore> chains;
    chains.reserve(static_cast<std::size_t>(config.n_chains));
    for (int c = 0; c < config.n_chains; ++c) {
        RngStream rng(config.seed, 1, static_cast<std::uint64_t>(c));
        if (config.algorithm == Algorithm::RandomWalk) {
            chains.push_back(run_rwmh_chain(data, prior, layout, x0, config, rng));
        } else {
            chains.push_back(run_afss_chain(data, prior, layout, x0, config, rng));
        }
    }
    return chains;
}

double gelman_rubin(const std::vector<ChainStore>& chains, Eigen::Index param_index) {
    if (chains.empty()) throw UsageError("need at least one chain");
    std::vector<Eigen::VectorXd> seqs;
    for (const ChainStore& ch : chains) {
        if (param_index < 0 || param_index >= ch.draws.cols()) {
            throw UsageError("parameter index out of range");
        }
        const Eigen::Index n = ch.draws.rows();
        if (n < 4) throw UsageError("need at least 4 stored draws per chain");
        const Eigen::Index half = n / 2;
        seqs.push_back(ch.draws.col(param_index).head(half));
        seqs.push_back(ch.draws.col(param_index).tail(half));
    }
    const double len = static_cast<double>(seqs.front().size());
    const double m = static_cast<double>(seqs.size());
    double w = 0.0;
    Eigen::VectorXd means(seqs.size());
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        const double mu = seqs[i].mean();
        means(static_cast<Eigen::Index>(i)) = mu;
        w += (seqs[i].array() - mu).square().sum() / (len - 1.0);
    }
    w /= m;
    const double grand = means.mean();
    const double b = len * (means.array() - grand).square().sum() / (m - 1.0);
    if (w <= 0.0) return b <= 0.0 ? 1.0 : kInf;
    const double var_plus = (len - 1.0) / len * w + b / len;
    return std::sqrt(var_plus / w);
}

double effective_sample_size(const Eigen::VectorXd& series) {
    const Eigen::Index n = series.size();
    if (n < 4) throw UsageError("need at least 4 draws");
    const double mean = series.mean();
    Eigen::VectorXd centered = (series.array() - mean).matrix();
    const double c0 = centered.squaredNorm() / static_cast<double>(n);
    if (c0 <= 0.0) return 0.0;

    auto acov = [&](Eigen::Index k) {
        double s = 0.0;
        for (Eigen::Index i = 0; i + k < n; ++i) s += centered(i) * centered(i + k);
        return s / static_cast<double>(n);
    };

    // Geyer initial monotone sequence over pairs of autocorrelations.
    double sum_pairs = 0.0;
    double prev = kInf;
    for (Eigen::Index m = 0; 2 * m + 1 < n; ++m) {
        double pair = (acov(2 * m) + acov(2 * m + 1)) / c0;
        if (pair <= 0.0) break;
        pair = std::min(pair, prev);
        sum_pairs += pair;
        prev = pair;
    }
    // tau >= 2/3 caps the reported gain of antithetic chains at 1.5 n.
    const double tau = std::max(2.0 * sum_pairs - 1.0, 2.0 / 3.0);
    return static_cast<double>(n) / tau;
}

double effective_sample_size(const ChainStore& chain, Eigen::Index param_index) {
    if (param_index < 0 || param_index >= chain.draws.cols()) {
        throw UsageError("parameter index out of range");
    }
    return effective_sample_size(chain.draws.col(param_index));
}

} // namespace mevmix
