#include "mevmix/model.hpp"

#include <cmath>
#include <limits>

namespace mevmix {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinBulkMass = 1e-3;
} // namespace

Dataset::Dataset(Eigen::MatrixXd values_in, std::vector<std::string> names_in)
    : values(std::move(values_in)), names(std::move(names_in)) {
    if (values.cols() == 0) throw UsageError("data set needs at least one column");
    if (names.empty()) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            names.push_back("site_" + std::to_string(j + 1));
        }
    }
    if (static_cast<Eigen::Index>(names.size()) != values.cols()) {
        throw UsageError("column name count does not match the data");
    }
}

ModelParams::ModelParams(MvnParams bulk_in, Eigen::VectorXd u_in, TailParams tail_in)
    : bulk(std::move(bulk_in)), u(std::move(u_in)), tail(std::move(tail_in)) {
    if (bulk.dim() != u.size() || tail.dim() != u.size()) {
        throw UsageError("bulk, threshold and tail dimensions disagree");
    }
}

void PriorSpec::validate() const {
    const Eigen::Index d = dim();
    if (d == 0) throw UsageError("prior dimension must be positive");
    auto need = [d](const Eigen::VectorXd& v, const char* what) {
        if (v.size() != d) {
            throw UsageError(std::string("prior field has wrong dimension: ") + what);
        }
    };
    need(mean_scale, "mean_scale");
    need(sd_upper, "sd_upper");
    need(thresh_loc, "thresh_loc");
    need(thresh_scale, "thresh_scale");
    need(thresh_lo, "thresh_lo");
    need(thresh_hi, "thresh_hi");
    if (!(delta > 0.0)) throw UsageError("correlation concentration must be positive");
    if (!(mean_scale.array() > 0.0).all()) throw UsageError("mean prior scales must be positive");
    if (!(sd_upper.array() > 0.0).all()) throw UsageError("sd upper bounds must be positive");
    if (!(thresh_scale.array() > 0.0).all()) throw UsageError("threshold prior scales must be positive");
    if (!(thresh_lo.array() < thresh_hi.array()).all()) {
        throw UsageError("threshold truncation needs lo < hi");
    }
    if (!(a_upper > 0.0) || !(sigma_upper > 0.0)) {
        throw UsageError("tail box bounds must be positive");
    }
    if (!(gamma_lo < gamma_hi)) throw UsageError("shape box needs gamma_lo < gamma_hi");
}

Partition make_partition(const Eigen::MatrixXd& values, const Eigen::VectorXd& u) {
    if (values.cols() != u.size()) throw UsageError("threshold dimension mismatch");
    Partition out;
    out.bulk_rows.reserve(static_cast<std::size_t>(values.rows()));
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        if ((values.row(i).transpose().array() <= u.array()).all()) {
            out.bulk_rows.push_back(i);
        } else {
            out.tail_rows.push_back(i);
        }
    }
    return out;
}

double mixture_logdensity(const Eigen::VectorXd& x, const ModelParams& params) {
    if (x.size() != params.dim()) throw UsageError("point dimension mismatch");
    if ((x.array() <= params.u.array()).all()) {
        return mvn_logpdf(x, params.bulk);
    }
    const double bulk_mass = mvn_cdf(params.u, params.bulk);
    if (!(bulk_mass < 1.0)) return -kInf;
    return std::log1p(-bulk_mass) + obs_logdensity(x - params.u, params.tail);
}

double log_likelihood(const Dataset& data, const ModelParams& params) {
    if (data.d() != params.dim()) throw UsageError("data dimension mismatch");
    const Partition part = make_partition(data.values, params.u);
    double out = 0.0;
    if (!part.bulk_rows.empty()) {
        Eigen::MatrixXd bulk_pts(part.bulk_rows.size(), data.d());
        for (std::size_t i = 0; i < part.bulk_rows.size(); ++i) {
            bulk_pts.row(static_cast<Eigen::Index>(i)) = data.values.row(part.bulk_rows[i]);
        }
        out += mvn_logpdf_rows(bulk_pts, params.bulk).sum();
    }
    for (Eigen::Index row : part.tail_rows) {
        out += obs_logdensity(data.values.row(row).transpose() - params.u, params.tail);
        if (out == -kInf) return -kInf;
    }
    if (part.n_tail() > 0) {
        const double bulk_mass = mvn_cdf(params.u, params.bulk);
        if (!(bulk_mass < 1.0)) return -kInf;
        out += static_cast<double>(part.n_tail()) * std::log1p(-bulk_mass);
    }
    return out;
}

double log_prior(const ModelParams& params, const PriorSpec& prior) {
    prior.validate();
    const Eigen::Index d = params.dim();
    if (prior.dim() != d) throw UsageError("prior dimension mismatch");
    double out = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
        const double z = (params.bulk.mean(i) - prior.mean_loc(i)) / prior.mean_scale(i);
        out += normal_logpdf(z) - std::log(prior.mean_scale(i));
        if (!(params.bulk.sd(i) > 0.0 && params.bulk.sd(i) < prior.sd_upper(i))) return -kInf;
        out -= std::log(prior.sd_upper(i));
        out += truncnorm_logpdf(params.u(i), prior.thresh_loc(i), prior.thresh_scale(i),
                                prior.thresh_lo(i), prior.thresh_hi(i));
        if (out == -kInf) return -kInf;
        if (!(params.tail.a(i) > 0.0 && params.tail.a(i) < prior.a_upper)) return -kInf;
        out -= std::log(prior.a_upper);
        if (!(params.tail.gamma(i) > prior.gamma_lo && params.tail.gamma(i) < prior.gamma_hi)) {
            return -kInf;
        }
        out -= std::log(prior.gamma_hi - prior.gamma_lo);
        if (!(params.tail.sigma(i) > 0.0 && params.tail.sigma(i) < prior.sigma_upper)) return -kInf;
        out -= std::log(prior.sigma_upper);
        if (prior.finite_expectation &&
            params.tail.gamma(i) + 1.0 / params.tail.a(i) < 0.0) {
            return -kInf;
        }
    }
    out += lkj_chol_logdensity(params.bulk.corr, prior.delta);
    return out;
}

double log_posterior(const Dataset& data, const ModelParams& params,
                     const PriorSpec& prior) {
    const double lp = log_prior(params, prior);
    if (lp == -kInf) return -kInf;
    return lp + log_likelihood(data, params);
}

Dataset simulate_model(const ModelParams& params, int n, RngStream& rng) {
    if (n < 1) throw UsageError("sample size must be positive");
    const Eigen::Index d = params.dim();
    const double bulk_mass = mvn_cdf(params.u, params.bulk);
    if (bulk_mass < kMinBulkMass) {
        throw DegenerateConfigError(
            "bulk region mass below 1e-3; threshold placement leaves no bulk");
    }
    const Eigen::MatrixXd a_t = params.bulk.scale_factor().transpose();
    Eigen::MatrixXd out(n, d);
    Eigen::VectorXd xi(d);
    for (int i = 0; i < n; ++i) {
        if (rng.uniform() < bulk_mass) {
            // Rejection sampling from the Gaussian restricted below u.
            long trials = 0;
            for (;;) {
                if (++trials > 1000000) {
                    throw NumericPathologyError("bulk rejection sampling stalled");
                }
                for (Eigen::Index j = 0; j < d; ++j) xi(j) = rng.normal();
                Eigen::VectorXd x = params.bulk.mean + a_t * xi;
                if ((x.array() <= params.u.array()).all()) {
                    out.row(i) = x.transpose();
                    break;
                }
            }
        } else {
            Eigen::MatrixXd exc = simulate(params.tail, 1, rng);
            out.row(i) = (params.u + exc.row(0).transpose()).transpose();
        }
    }
    return Dataset(std::move(out), {});
}

} // namespace mevmix
