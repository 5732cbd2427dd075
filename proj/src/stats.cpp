#include "mevmix/stats.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "mevmix/rng.hpp"

namespace mevmix {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_factor(const Eigen::MatrixXd& u) {
    if (u.rows() == 0 || u.rows() != u.cols()) {
        throw UsageError("correlation factor must be square and non-empty");
    }
    const Eigen::Index d = u.rows();
    for (Eigen::Index j = 0; j < d; ++j) {
        if (!(u(j, j) > 0.0)) {
            throw UsageError("correlation factor needs a positive diagonal");
        }
        for (Eigen::Index i = j + 1; i < d; ++i) {
            if (u(i, j) != 0.0) {
                throw UsageError("correlation factor must be upper triangular");
            }
        }
        const double norm2 = u.col(j).squaredNorm();
        if (std::abs(norm2 - 1.0) > 1e-8) {
            std::ostringstream msg;
            msg << "correlation factor column " << (j + 1)
                << " has norm^2 " << norm2 << ", expected 1";
            throw UsageError(msg.str());
        }
    }
}

} // namespace

CholCorr::CholCorr(Eigen::MatrixXd upper_factor) : u_(std::move(upper_factor)) {
    check_factor(u_);
}

CholCorr CholCorr::identity(Eigen::Index dim) {
    if (dim < 1) throw UsageError("dimension must be at least 1");
    return CholCorr(Eigen::MatrixXd::Identity(dim, dim));
}

std::optional<CholCorr> CholCorr::from_free(const Eigen::VectorXd& free_entries,
                                            Eigen::Index dim) {
    if (dim < 1) throw UsageError("dimension must be at least 1");
    if (free_entries.size() != n_free(dim)) {
        throw UsageError("wrong number of free correlation entries");
    }
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::Index k = 0;
    u(0, 0) = 1.0;
    for (Eigen::Index j = 1; j < dim; ++j) {
        double sumsq = 0.0;
        for (Eigen::Index i = 0; i < j; ++i) {
            u(i, j) = free_entries(k++);
            sumsq += u(i, j) * u(i, j);
        }
        const double rest = 1.0 - sumsq;
        if (!(rest > 0.0)) return std::nullopt;
        u(j, j) = std::sqrt(rest);
    }
    return CholCorr(std::move(u));
}

CholCorr CholCorr::from_correlation(const Eigen::MatrixXd& corr) {
    if (corr.rows() != corr.cols() || corr.rows() == 0) {
        throw UsageError("correlation matrix must be square and non-empty");
    }
    for (Eigen::Index i = 0; i < corr.rows(); ++i) {
        if (std::abs(corr(i, i) - 1.0) > 1e-10) {
            throw UsageError("correlation matrix needs a unit diagonal");
        }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(corr);
    if (llt.info() != Eigen::Success) {
        throw UsageError("correlation matrix is not positive definite");
    }
    // C = L L^T with L lower triangular, so U = L^T satisfies C = U^T U.
    Eigen::MatrixXd u = llt.matrixL().transpose();
    // Guard against round-off in the row norms before validation.
    for (Eigen::Index j = 0; j < u.cols(); ++j) u.col(j).normalize();
    return CholCorr(std::move(u));
}

double CholCorr::log_det() const {
    return 2.0 * u_.diagonal().array().log().sum();
}

Eigen::VectorXd CholCorr::free_entries() const {
    const Eigen::Index d = dim();
    Eigen::VectorXd out(n_free(d));
    Eigen::Index k = 0;
    for (Eigen::Index j = 1; j < d; ++j) {
        for (Eigen::Index i = 0; i < j; ++i) out(k++) = u_(i, j);
    }
    return out;
}

MvnParams::MvnParams(Eigen::VectorXd mean_in, Eigen::VectorXd sd_in, CholCorr corr_in)
    : mean(std::move(mean_in)), sd(std::move(sd_in)), corr(std::move(corr_in)) {
    if (mean.size() != sd.size() || mean.size() != corr.dim()) {
        throw UsageError("mean, sd and correlation dimensions disagree");
    }
    if (!(sd.array() > 0.0).all()) {
        throw UsageError("standard deviations must be positive");
    }
}

Eigen::MatrixXd MvnParams::covariance() const {
    return sd.asDiagonal() * corr.correlation() * sd.asDiagonal();
}

Eigen::MatrixXd MvnParams::scale_factor() const {
    return corr.upper_factor() * sd.asDiagonal();
}

MvnParams MvnParams::from_moments(const Eigen::VectorXd& mean,
                                  const Eigen::MatrixXd& cov) {
    if (cov.rows() != cov.cols() || cov.rows() != mean.size()) {
        throw UsageError("mean and covariance dimensions disagree");
    }
    Eigen::VectorXd sd = cov.diagonal().array().sqrt();
    if (!(sd.array() > 0.0).all()) {
        throw UsageError("covariance needs positive diagonal entries");
    }
    Eigen::MatrixXd corr = sd.cwiseInverse().asDiagonal() * cov * sd.cwiseInverse().asDiagonal();
    corr.diagonal().setOnes();
    corr = 0.5 * (corr + corr.transpose()).eval();
    return MvnParams(mean, sd, CholCorr::from_correlation(corr));
}

double normal_logpdf(double z) { return -0.5 * kLog2Pi - 0.5 * z * z; }

double normal_pdf(double z) { return std::exp(normal_logpdf(z)); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

namespace {

/// log P(Z > t) for a standard normal, accurate for all t.  Uses erfc up to
/// the point where it underflows, then a continued fraction for the Mills
/// ratio.
double log_normal_sf(double t) {
    if (t < 37.0) {
        return std::log(0.5 * std::erfc(t * M_SQRT1_2));
    }
    // Mills ratio continued fraction: R(t) = 1/(t + 1/(t + 2/(t + ...))).
    double cf = 0.0;
    for (int k = 60; k >= 1; --k) cf = k / (t + cf);
    return normal_logpdf(t) - std::log(t + cf);
}

double log_diff_exp(double la, double lb) {
    // log(exp(la) - exp(lb)) for la > lb.
    return la + std::log1p(-std::exp(lb - la));
}

} // namespace

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw UsageError("normal quantile needs p strictly inside (0, 1)");
    }
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                  6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
              1.3314166789178437745e2) * r + 3.3871328727963666080e0);
        const double den =
            (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                  3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
              4.2313330701600911252e1) * r + 1.0);
        return q * num / den;
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double value;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
              4.63033784615654529590e0) * r + 1.42343711074968357734e0);
        const double den =
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
              2.05319162663775882187e0) * r + 1.0);
        value = num / den;
    } else {
        r -= 5.0;
        const double num =
            (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
              5.46378491116411436990e0) * r + 6.65790464350110377720e0);
        const double den =
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
        value = num / den;
    }
    return (q < 0.0) ? -value : value;
}

double mvn_logpdf(const Eigen::VectorXd& x, const MvnParams& params) {
    if (x.size() != params.dim()) throw UsageError("point dimension mismatch");
    const Eigen::MatrixXd a = params.scale_factor();
    Eigen::VectorXd w = a.transpose().triangularView<Eigen::Lower>().solve(x - params.mean);
    const double log_det_half = a.diagonal().array().log().sum();
    return -0.5 * params.dim() * kLog2Pi - log_det_half - 0.5 * w.squaredNorm();
}

Eigen::VectorXd mvn_logpdf_rows(const Eigen::MatrixXd& x, const MvnParams& params) {
    if (x.cols() != params.dim()) throw UsageError("point dimension mismatch");
    const Eigen::MatrixXd a = params.scale_factor();
    Eigen::MatrixXd centered = (x.rowwise() - params.mean.transpose()).transpose();
    a.transpose().triangularView<Eigen::Lower>().solveInPlace(centered);
    const double log_det_half = a.diagonal().array().log().sum();
    const double c = -0.5 * params.dim() * kLog2Pi - log_det_half;
    return (-0.5 * centered.colwise().squaredNorm().array() + c).matrix().transpose();
}

namespace {

// Gauss-Legendre nodes and weights used by the bivariate normal quadrature;
// only the negative half of each rule is stored, the loop mirrors it.
constexpr double kGlW6[3] = {0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
constexpr double kGlX6[3] = {-0.9324695142031522, -0.6612093864662647, -0.2386191860831970};
constexpr double kGlW12[6] = {0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                              0.2031674267230659, 0.2334925365383547, 0.2491470458134029};
constexpr double kGlX12[6] = {-0.9815606342467191, -0.9041172563704750, -0.7699026741943050,
                              -0.5873179542866171, -0.3678314989981802, -0.1252334085114692};
constexpr double kGlW20[10] = {0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                               0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
                               0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
                               0.1527533871307259};
constexpr double kGlX20[10] = {-0.9931285991850949, -0.9639719272779138, -0.9122344282513259,
                               -0.8391169718222188, -0.7463319064601508, -0.6360536807265150,
                               -0.5108670019508271, -0.3737060887154196, -0.2277858511416451,
                               -0.07652652113349733};

// P(X > dh, Y > dk) for a standardized bivariate normal pair with
// correlation r, following Genz's quadrature scheme: a Gauss-Legendre rule
// on a trigonometric substitution for moderate |r|, and an expansion around
// the comonotone limit for |r| > 0.925.
double bvn_upper(double dh, double dk, double r) {
    const double* w;
    const double* xn;
    int lg;
    const double ar = std::abs(r);
    if (ar < 0.3) {
        w = kGlW6; xn = kGlX6; lg = 3;
    } else if (ar < 0.75) {
        w = kGlW12; xn = kGlX12; lg = 6;
    } else {
        w = kGlW20; xn = kGlX20; lg = 10;
    }
    double h = dh;
    double k = dk;
    double hk = h * k;
    double bvn = 0.0;
    const double two_pi = 2.0 * M_PI;
    if (ar < 0.925) {
        if (ar > 0.0) {
            const double hs = 0.5 * (h * h + k * k);
            const double asr = std::asin(r);
            for (int i = 0; i < lg; ++i) {
                for (int is = -1; is <= 1; is += 2) {
                    const double sn = std::sin(asr * (is * xn[i] + 1.0) * 0.5);
                    bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
                }
            }
            bvn *= asr / (2.0 * two_pi);
        }
        return bvn + normal_cdf(-h) * normal_cdf(-k);
    }
    if (r < 0.0) {
        k = -k;
        hk = -hk;
    }
    if (ar < 1.0) {
        const double as = (1.0 - r) * (1.0 + r);
        double a = std::sqrt(as);
        const double bs = (h - k) * (h - k);
        const double c = (4.0 - hk) / 8.0;
        const double d = (12.0 - hk) / 16.0;
        double asr = -(bs / as + hk) / 2.0;
        if (asr > -100.0) {
            bvn = a * std::exp(asr) *
                  (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
        }
        if (-hk < 100.0) {
            const double b = std::sqrt(bs);
            bvn -= std::exp(-hk / 2.0) * std::sqrt(two_pi) * normal_cdf(-b / a) * b *
                   (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a *= 0.5;
        for (int i = 0; i < lg; ++i) {
            for (int is = -1; is <= 1; is += 2) {
                const double xs_ = a * (is * xn[i] + 1.0);
                const double xs = xs_ * xs_;
                const double rs = std::sqrt(1.0 - xs);
                asr = -(bs / xs + hk) / 2.0;
                if (asr > -100.0) {
                    bvn += a * w[i] * std::exp(asr) *
                           (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs -
                            (1.0 + c * xs * (1.0 + d * xs)));
                }
            }
        }
        bvn = -bvn / two_pi;
    }
    if (r > 0.0) {
        return bvn + normal_cdf(-std::max(h, k));
    }
    bvn = -bvn;
    if (k > h) bvn += normal_cdf(k) - normal_cdf(h);
    return bvn;
}

} // namespace

double bvn_cdf(double h, double k, double rho) {
    if (!(rho >= -1.0 && rho <= 1.0)) {
        throw UsageError("correlation must lie in [-1, 1]");
    }
    if (std::isnan(h) || std::isnan(k)) {
        throw UsageError("bivariate normal bounds must not be NaN");
    }
    if (h == -kInf || k == -kInf) return 0.0;
    if (h == kInf) return normal_cdf(k);
    if (k == kInf) return normal_cdf(h);
    const double v = bvn_upper(-h, -k, rho);
    return std::min(1.0, std::max(0.0, v));
}

QmcResult mvn_cdf_qmc(const Eigen::VectorXd& x, const MvnParams& params,
                      int n_shifts, int n_points) {
    const Eigen::Index d = params.dim();
    if (x.size() != d) throw UsageError("point dimension mismatch");
    if (n_shifts < 2 || n_points < 16) {
        throw UsageError("lattice rule needs at least 2 shifts and 16 points");
    }
    // Lower-triangular factor of the correlation matrix.
    const Eigen::MatrixXd l = params.corr.upper_factor().transpose();
    Eigen::VectorXd b(d);
    for (Eigen::Index i = 0; i < d; ++i) b(i) = (x(i) - params.mean(i)) / params.sd(i);

    // Richtmyer generators: square roots of the first primes.
    std::vector<double> gen(static_cast<std::size_t>(d));
    {
        std::vector<int> primes;
        for (int cand = 2; static_cast<Eigen::Index>(primes.size()) < d; ++cand) {
            bool is_prime = true;
            for (int p : primes) {
                if (p * p > cand) break;
                if (cand % p == 0) { is_prime = false; break; }
            }
            if (is_prime) primes.push_back(cand);
        }
        for (Eigen::Index i = 0; i < d; ++i) {
            double s = std::sqrt(static_cast<double>(primes[static_cast<std::size_t>(i)]));
            gen[static_cast<std::size_t>(i)] = s - std::floor(s);
        }
    }

    RngStream shift_rng(0x51ac3u, 17, static_cast<std::uint64_t>(d));
    const double eps = 1e-15;
    double mean_of_means = 0.0;
    double m2 = 0.0;
    Eigen::VectorXd y(d);
    for (int s = 0; s < n_shifts; ++s) {
        Eigen::VectorXd shift(d);
        for (Eigen::Index i = 0; i < d; ++i) shift(i) = shift_rng.uniform();
        double total = 0.0;
        for (int kpt = 1; kpt <= n_points; ++kpt) {
            double f = 1.0;
            for (Eigen::Index i = 0; i < d && f > 0.0; ++i) {
                double t = b(i);
                for (Eigen::Index j = 0; j < i; ++j) t -= l(i, j) * y(j);
                const double e = normal_cdf(t / l(i, i));
                if (i + 1 < d) {
                    double u = kpt * gen[static_cast<std::size_t>(i)] + shift(i);
                    u -= std::floor(u);
                    // Symmetrize the lattice point (baker's transform).
                    u = std::abs(2.0 * u - 1.0);
                    const double z = std::min(std::max(e * u, eps), 1.0 - eps);
                    y(i) = normal_quantile(z);
                }
                f *= e;
            }
            total += (f - total) / kpt;
        }
        const double delta = total - mean_of_means;
        mean_of_means += delta / (s + 1);
        m2 += delta * (total - mean_of_means);
    }
    QmcResult out;
    out.value = std::min(1.0, std::max(0.0, mean_of_means));
    const double var = m2 / (n_shifts - 1.0);
    out.error_estimate = 3.0 * std::sqrt(var / n_shifts);
    return out;
}

double mvn_cdf(const Eigen::VectorXd& x, const MvnParams& params) {
    const Eigen::Index d = params.dim();
    if (x.size() != d) throw UsageError("point dimension mismatch");
    if (d == 1) {
        return normal_cdf((x(0) - params.mean(0)) / params.sd(0));
    }
    if (d == 2) {
        const double h = (x(0) - params.mean(0)) / params.sd(0);
        const double k = (x(1) - params.mean(1)) / params.sd(1);
        const double rho = params.corr.correlation()(0, 1);
        return bvn_cdf(h, k, rho);
    }
    return mvn_cdf_qmc(x, params).value;
}

double truncnorm_logpdf(double x, double mean, double sd, double lo, double hi) {
    if (!(sd > 0.0)) throw UsageError("truncated normal needs sd > 0");
    if (!(lo < hi)) throw UsageError("truncated normal needs lo < hi");
    if (x < lo || x > hi) return -kInf;
    const double za = (lo - mean) / sd;
    const double zb = (hi - mean) / sd;
    double log_mass;
    if (za >= 0.0) {
        log_mass = log_diff_exp(log_normal_sf(za), log_normal_sf(zb));
    } else if (zb <= 0.0) {
        log_mass = log_diff_exp(log_normal_sf(-zb), log_normal_sf(-za));
    } else {
        log_mass = std::log(normal_cdf(zb) - normal_cdf(za));
    }
    const double z = (x - mean) / sd;
    return normal_logpdf(z) - std::log(sd) - log_mass;
}

double gpd_sf(double x, double sigma, double gamma) {
    if (!(sigma > 0.0)) throw UsageError("generalized Pareto needs sigma > 0");
    if (!(x >= 0.0)) throw UsageError("generalized Pareto survival needs x >= 0");
    const double t = x / sigma;
    if (std::abs(gamma) < 1e-8) {
        // Second-order expansion in gamma keeps the gamma -> 0 limit smooth.
        return std::exp(-t + 0.5 * gamma * t * t);
    }
    if (1.0 + gamma * t <= 0.0) return 0.0;
    return std::exp(-std::log1p(gamma * t) / gamma);
}

double lkj_chol_logdensity(const CholCorr& corr, double delta) {
    if (!(delta > 0.0)) throw UsageError("concentration must be positive");
    const Eigen::Index d = corr.dim();
    const Eigen::MatrixXd& u = corr.upper_factor();
    double out = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
        // Column j + 1 in 1-based numbering: exponent d - j - 1 + 2 delta - 2
        // combines the density (det C)^(delta - 1) with the Jacobian of the
        // factor parametrization.
        const double expo = static_cast<double>(d - j - 1) + 2.0 * delta - 2.0;
        out += expo * std::log(u(j, j));
    }
    return out;
}

} // namespace mevmix
