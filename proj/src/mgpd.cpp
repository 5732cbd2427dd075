#include "mevmix/mgpd.hpp"

#include <cmath>
#include <limits>

namespace mevmix {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kGammaTiny = 1e-8;

double log1p_scaled(double g, double t) {
    // log(1 + g t) / g with a series for small g.
    if (std::abs(g) < kGammaTiny) {
        return t * (1.0 - 0.5 * g * t + g * g * t * t / 3.0);
    }
    return std::log1p(g * t) / g;
}

double expm1_scaled(double g, double z) {
    // (exp(g z) - 1) / g with a series for small g.
    if (std::abs(g) < kGammaTiny) {
        return z * (1.0 + 0.5 * g * z + g * g * z * z / 6.0);
    }
    return std::expm1(g * z) / g;
}
} // namespace

TailParams::TailParams(Eigen::VectorXd a_in, Eigen::VectorXd sigma_in,
                       Eigen::VectorXd gamma_in)
    : a(std::move(a_in)), sigma(std::move(sigma_in)), gamma(std::move(gamma_in)) {
    if (a.size() == 0 || a.size() != sigma.size() || a.size() != gamma.size()) {
        throw UsageError("tail parameter vectors must share a positive dimension");
    }
    if (!(a.array() > 0.0).all()) throw UsageError("generator scales must be positive");
    if (!(sigma.array() > 0.0).all()) throw UsageError("tail scales must be positive");
}

double exp_max_u(const Eigen::VectorXd& a) {
    if (a.size() == 0 || !(a.array() > 0.0).all()) {
        throw UsageError("generator scales must be positive");
    }
    const double s = a.cwiseInverse().sum();
    return s / (1.0 + s);
}

double std_logdensity(const Eigen::VectorXd& z, const Eigen::VectorXd& a) {
    if (z.size() != a.size()) throw UsageError("point dimension mismatch");
    if (!(a.array() > 0.0).all()) throw UsageError("generator scales must be positive");
    const double m = z.maxCoeff();
    if (!(m > 0.0)) return -kInf;
    const double s = a.cwiseInverse().sum();
    // -max(z) (1 + s) - log E[exp max U] + sum_i (z_i / a_i - log a_i) - log(1 + s)
    // with E[exp max U] = s / (1 + s); the two constants collapse to -log s.
    double out = -m * (1.0 + s) - std::log(s);
    out += (z.array() / a.array() - a.array().log()).sum();
    return out;
}

Eigen::VectorXd to_std(const Eigen::VectorXd& x, const TailParams& params) {
    if (x.size() != params.dim()) throw UsageError("point dimension mismatch");
    Eigen::VectorXd z(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double t = x(j) / params.sigma(j);
        if (1.0 + params.gamma(j) * t <= 0.0) {
            throw SupportError("point outside the tail support");
        }
        z(j) = log1p_scaled(params.gamma(j), t);
    }
    return z;
}

Eigen::VectorXd from_std(const Eigen::VectorXd& z, const TailParams& params) {
    if (z.size() != params.dim()) throw UsageError("point dimension mismatch");
    Eigen::VectorXd x(z.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) {
        x(j) = params.sigma(j) * expm1_scaled(params.gamma(j), z(j));
    }
    return x;
}

bool in_support(const Eigen::VectorXd& x, const TailParams& params) {
    if (x.size() != params.dim()) throw UsageError("point dimension mismatch");
    if (!(x.maxCoeff() > 0.0)) return false;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        if (1.0 + params.gamma(j) * x(j) / params.sigma(j) <= 0.0) return false;
    }
    return true;
}

double obs_logdensity(const Eigen::VectorXd& x, const TailParams& params) {
    if (!in_support(x, params)) return -kInf;
    Eigen::VectorXd z(x.size());
    double log_jac = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double t = x(j) / params.sigma(j);
        z(j) = log1p_scaled(params.gamma(j), t);
        // dz_j/dx_j = 1 / (sigma_j + gamma_j x_j)
        log_jac -= std::log(params.sigma(j) + params.gamma(j) * x(j));
    }
    return std_logdensity(z, params.a) + log_jac;
}

Eigen::MatrixXd simulate_std(const Eigen::VectorXd& a, int n, RngStream& rng) {
    if (a.size() == 0 || !(a.array() > 0.0).all()) {
        throw UsageError("generator scales must be positive");
    }
    if (n < 1) throw UsageError("sample size must be positive");
    const Eigen::Index d = a.size();
    Eigen::MatrixXd z(n, d);
    Eigen::VectorXd u(d);
    for (int i = 0; i < n; ++i) {
        const double e = rng.exponential();
        for (Eigen::Index j = 0; j < d; ++j) u(j) = -a(j) * rng.exponential();
        const double m = u.maxCoeff();
        for (Eigen::Index j = 0; j < d; ++j) z(i, j) = e + u(j) - m;
    }
    return z;
}

Eigen::MatrixXd simulate(const TailParams& params, int n, RngStream& rng) {
    Eigen::MatrixXd z = simulate_std(params.a, n, rng);
    Eigen::MatrixXd x(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        x.row(i) = from_std(z.row(i).transpose(), params).transpose();
    }
    return x;
}

double theoretical_chi(const Eigen::VectorXd& a) {
    if (a.size() != 2) throw UsageError("tail dependence coefficient needs d = 2");
    if (!(a.array() > 0.0).all()) throw UsageError("generator scales must be positive");
    const double lo = std::min(a(0), a(1));
    const double hi = std::max(a(0), a(1));
    const double prod = a(0) * a(1);
    const double base = (1.0 + lo) / (1.0 + hi);
    const double factor = std::pow(base, 1.0 + 1.0 / hi) * (hi / lo);
    return 1.0 - factor * prod / (prod + a(0) + a(1));
}

} // namespace mevmix
