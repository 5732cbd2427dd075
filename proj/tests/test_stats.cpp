#include "doctest.h"

#include <cmath>
#include <limits>

#include "mevmix/stats.hpp"
#include "oracles.hpp"

using namespace mevmix;

namespace {
const double kInf = std::numeric_limits<double>::infinity();
}

TEST_SUITE_BEGIN("stats");

TEST_CASE("correlation factor round trips and validates") {
    Eigen::VectorXd free1(1);
    free1 << 0.7;
    auto cc = CholCorr::from_free(free1, 2);
    REQUIRE(cc.has_value());
    CHECK(cc->upper_factor()(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(cc->upper_factor()(1, 1) == doctest::Approx(std::sqrt(0.51)).epsilon(1e-14));
    CHECK(cc->correlation()(0, 1) == doctest::Approx(0.7).epsilon(1e-14));
    CHECK(cc->log_det() == doctest::Approx(std::log(0.51)).epsilon(1e-14));
    CHECK(cc->free_entries()(0) == doctest::Approx(0.7));

    // A column whose off-diagonal norm reaches 1 cannot be completed.
    Eigen::VectorXd bad(1);
    bad << 1.0;
    CHECK_FALSE(CholCorr::from_free(bad, 2).has_value());

    SUBCASE("three dimensions") {
        Eigen::VectorXd f3(3);
        f3 << 0.3, 0.2, -0.4;
        auto c3 = CholCorr::from_free(f3, 3);
        REQUIRE(c3.has_value());
        const Eigen::MatrixXd c = c3->correlation();
        CHECK(c(0, 1) == doctest::Approx(0.3).epsilon(1e-13));
        CHECK(c(0, 2) == doctest::Approx(0.2).epsilon(1e-13));
        const double expected_c12 = 0.3 * 0.2 + std::sqrt(1.0 - 0.09) * (-0.4);
        CHECK(c(1, 2) == doctest::Approx(expected_c12).epsilon(1e-13));
        for (int i = 0; i < 3; ++i) CHECK(c(i, i) == doctest::Approx(1.0).epsilon(1e-13));

        // Factoring the correlation matrix recovers the same factor.
        CholCorr back = CholCorr::from_correlation(c);
        CHECK((back.upper_factor() - c3->upper_factor()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(c3->free_entries().isApprox(f3, 1e-12));
    }

    SUBCASE("invalid factors are rejected") {
        Eigen::MatrixXd not_unit(2, 2);
        not_unit << 1.0, 0.7, 0.0, 1.0;
        CHECK_THROWS_AS(CholCorr{not_unit}, UsageError);
        Eigen::MatrixXd lower(2, 2);
        lower << 1.0, 0.0, 0.7, std::sqrt(0.51);
        CHECK_THROWS_AS(CholCorr{lower}, UsageError);
    }
}

TEST_CASE("normal quantile inverts the CDF") {
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(normal_quantile(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-12));
    // The lower tail keeps full relative precision in p, so the round trip
    // is tight there; above ~5 sigma the quantity 1 - p loses resolution in
    // doubles, which bounds what any inverse can recover.
    for (double z = -8.0; z <= 5.0; z += 0.37) {
        const double p = normal_cdf(z);
        CHECK(normal_quantile(p) == doctest::Approx(z).epsilon(1e-9));
    }
    for (double z = 0.1; z <= 5.0; z += 0.37) {
        const double p = normal_cdf(-z);
        CHECK(normal_quantile(p) == doctest::Approx(-normal_quantile(1.0 - p)).epsilon(1e-8));
    }
    CHECK_THROWS_AS(normal_quantile(0.0), UsageError);
    CHECK_THROWS_AS(normal_quantile(1.0), UsageError);
}

TEST_CASE("multivariate normal log density matches the explicit inverse") {
    Eigen::VectorXd mean(2), sd(2), free1(1);
    mean << 3.5, 3.7;
    sd << 1.0, 1.5;
    free1 << 0.7;
    MvnParams p(mean, sd, *CholCorr::from_free(free1, 2));

    // At the mean the density is -log(2 pi) - 0.5 log det(Sigma).
    const double det = 1.0 * 2.25 * (1.0 - 0.49);
    CHECK(mvn_logpdf(mean, p) ==
          doctest::Approx(-std::log(2.0 * M_PI) - 0.5 * std::log(det)).epsilon(1e-13));

    // Away from the mean, compare with the hand-written 2x2 inverse.
    Eigen::VectorXd x(2);
    x << 4.2, 2.9;
    const Eigen::VectorXd diff = x - mean;
    const double s11 = 1.0, s22 = 2.25, s12 = 1.05;
    const double quad = (s22 * diff(0) * diff(0) - 2.0 * s12 * diff(0) * diff(1) +
                         s11 * diff(1) * diff(1)) / (s11 * s22 - s12 * s12);
    const double expected = -std::log(2.0 * M_PI) - 0.5 * std::log(det) - 0.5 * quad;
    CHECK(mvn_logpdf(x, p) == doctest::Approx(expected).epsilon(1e-13));

    SUBCASE("row batch agrees with single evaluations") {
        Eigen::MatrixXd pts(3, 2);
        pts << 4.2, 2.9, 3.5, 3.7, 1.0, 9.0;
        Eigen::VectorXd batch = mvn_logpdf_rows(pts, p);
        for (int i = 0; i < 3; ++i) {
            CHECK(batch(i) == doctest::Approx(mvn_logpdf(pts.row(i).transpose(), p))
                                  .epsilon(1e-13));
        }
    }

    SUBCASE("covariance round trip") {
        MvnParams q = MvnParams::from_moments(mean, p.covariance());
        CHECK(q.sd.isApprox(sd, 1e-12));
        CHECK(q.corr.correlation().isApprox(p.corr.correlation(), 1e-12));
    }
}

TEST_CASE("bivariate normal CDF against quadrature reference") {
    // Orthant closed form: P(X <= 0, Y <= 0) = 1/4 + asin(rho) / (2 pi).
    for (double rho : {-0.9, -0.5, 0.0, 0.3, 0.7, 0.95}) {
        const double expected = 0.25 + std::asin(rho) / (2.0 * M_PI);
        CHECK(bvn_cdf(0.0, 0.0, rho) == doctest::Approx(expected).epsilon(1e-13));
    }
    // Independence factorizes.
    CHECK(bvn_cdf(0.7, -1.2, 0.0) ==
          doctest::Approx(normal_cdf(0.7) * normal_cdf(-1.2)).epsilon(1e-14));

    const double rhos[] = {-0.999, -0.95, -0.926, -0.7, -0.3, 0.0,
                           0.3,    0.7,   0.9,    0.926, 0.999};
    const double bounds[] = {-3.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.5};
    for (double rho : rhos) {
        for (double h : bounds) {
            for (double k : bounds) {
                const double got = bvn_cdf(h, k, rho);
                const double want = oracles::bvn_cdf_reference(h, k, rho);
                CHECK(std::abs(got - want) < 5e-12);
            }
        }
    }

    SUBCASE("degenerate correlations") {
        CHECK(bvn_cdf(0.5, 1.0, 1.0) == doctest::Approx(normal_cdf(0.5)).epsilon(1e-14));
        CHECK(bvn_cdf(0.5, 1.0, -1.0) ==
              doctest::Approx(normal_cdf(0.5) - normal_cdf(-1.0)).epsilon(1e-13));
        // Countermonotone with an empty interval: P(-0.2 <= X <= -0.5) = 0.
        CHECK(bvn_cdf(-0.5, 0.2, -1.0) == 0.0);
        CHECK(bvn_cdf(0.5, -0.2, -1.0) ==
              doctest::Approx(normal_cdf(0.5) - normal_cdf(0.2)).epsilon(1e-13));
    }

    SUBCASE("infinite bounds collapse to the marginal") {
        CHECK(bvn_cdf(kInf, 0.3, 0.6) == doctest::Approx(normal_cdf(0.3)).epsilon(1e-14));
        CHECK(bvn_cdf(-kInf, 0.3, 0.6) == 0.0);
    }
}

TEST_CASE("multivariate normal CDF dispatch") {
    Eigen::VectorXd m1(1), s1(1), x1(1);
    m1 << 2.0;
    s1 << 3.0;
    x1 << 3.5;
    MvnParams p1(m1, s1, CholCorr::identity(1));
    CHECK(mvn_cdf(x1, p1) == doctest::Approx(normal_cdf(0.5)).epsilon(1e-14));

    Eigen::VectorXd mean(2), sd(2), free1(1), x(2);
    mean << 3.5, 3.7;
    sd << 1.0, 1.5;
    free1 << 0.7;
    x << 5.7, 7.5;
    MvnParams p2(mean, sd, *CholCorr::from_free(free1, 2));
    const double expected = oracles::bvn_cdf_reference(2.2, (7.5 - 3.7) / 1.5, 0.7);
    CHECK(mvn_cdf(x, p2) == doctest::Approx(expected).epsilon(1e-11));

    SUBCASE("three-dimensional lattice rule") {
        // Independent case factorizes exactly.
        Eigen::VectorXd m3 = Eigen::VectorXd::Zero(3);
        Eigen::VectorXd s3 = Eigen::VectorXd::Ones(3);
        MvnParams ind(m3, s3, CholCorr::identity(3));
        Eigen::VectorXd x3(3);
        x3 << 0.2, -0.4, 1.1;
        const double want = normal_cdf(0.2) * normal_cdf(-0.4) * normal_cdf(1.1);
        QmcResult r = mvn_cdf_qmc(x3, ind);
        CHECK(std::abs(r.value - want) < 1e-5);
        CHECK(std::abs(r.value - want) < std::max(r.error_estimate, 1e-6));

        // Equicorrelated orthant: P(all <= 0) = 1/8 + 3 asin(rho) / (4 pi).
        Eigen::MatrixXd c3 = Eigen::MatrixXd::Constant(3, 3, 0.5);
        c3.diagonal().setOnes();
        MvnParams eq(m3, s3, CholCorr::from_correlation(c3));
        const double orthant = 0.125 + 3.0 * std::asin(0.5) / (4.0 * M_PI);
        QmcResult r2 = mvn_cdf_qmc(Eigen::VectorXd::Zero(3), eq);
        CHECK(std::abs(r2.value - orthant) < 5e-5);
        CHECK(mvn_cdf(Eigen::VectorXd::Zero(3), eq) == doctest::Approx(r2.value));

        // The same call is bit-reproducible.
        QmcResult r3 = mvn_cdf_qmc(Eigen::VectorXd::Zero(3), eq);
        CHECK(r3.value == r2.value);
    }
}

TEST_CASE("truncated normal log density") {
    // Wide bounds recover the plain normal density.
    CHECK(truncnorm_logpdf(0.8, 0.3, 2.0, -1e10, 1e10) ==
          doctest::Approx(normal_logpdf(0.25) - std::log(2.0)).epsilon(1e-13));
    // Half line: the mass halves, the log density gains log 2.
    CHECK(truncnorm_logpdf(0.3, 0.0, 1.0, 0.0, 1e10) ==
          doctest::Approx(std::log(2.0) + normal_logpdf(0.3)).epsilon(1e-12));
    CHECK(truncnorm_logpdf(-0.1, 0.0, 1.0, 0.0, 1e10) == -kInf);
    CHECK(truncnorm_logpdf(11.0, 0.0, 1.0, 0.0, 10.0) == -kInf);

    SUBCASE("normalizes on the truncation interval") {
        struct Cfg { double m, s, lo, hi; };
        for (const Cfg& c : {Cfg{0.0, 1.0, 8.0, 9.0}, Cfg{2.0, 0.5, 1.0, 2.2},
                             Cfg{-3.0, 2.0, -20.0, -9.0}, Cfg{0.0, 1.0, -1.0, 0.5}}) {
            const double mass = oracles::integrate(
                [&](double x) { return std::exp(truncnorm_logpdf(x, c.m, c.s, c.lo, c.hi)); },
                c.lo, c.hi, 1e-12);
            CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
        }
    }

    SUBCASE("extreme tail truncation stays finite") {
        const double v = truncnorm_logpdf(39.5, 0.0, 1.0, 39.0, 40.0);
        CHECK(std::isfinite(v));
        // Scaling identity ties the shifted case to the standardized one.
        const double w = truncnorm_logpdf(4.95, 1.0, 0.1, 4.9, 5.0);
        CHECK(w == doctest::Approx(truncnorm_logpdf(39.5, 0.0, 1.0, 39.0, 40.0) -
                                   std::log(0.1)).epsilon(1e-10));
    }

    CHECK_THROWS_AS(truncnorm_logpdf(0.0, 0.0, -1.0, 0.0, 1.0), UsageError);
    CHECK_THROWS_AS(truncnorm_logpdf(0.0, 0.0, 1.0, 2.0, 1.0), UsageError);
}

TEST_CASE("generalized Pareto survival function") {
    CHECK(gpd_sf(1.2, 2.0, 0.0) == doctest::Approx(std::exp(-0.6)).epsilon(1e-14));
    CHECK(gpd_sf(3.0, 2.0, 0.5) == doctest::Approx(std::pow(1.75, -2.0)).epsilon(1e-14));
    // Negative shape has a finite endpoint at sigma / |gamma|.
    CHECK(gpd_sf(1.9, 1.0, -0.5) == doctest::Approx(0.0025).epsilon(1e-12));
    CHECK(gpd_sf(2.0, 1.0, -0.5) == 0.0);
    CHECK(gpd_sf(2.5, 1.0, -0.5) == 0.0);
    CHECK(gpd_sf(0.0, 1.0, 0.3) == 1.0);

    SUBCASE("smooth across the small-shape switch") {
        // The genuine sensitivity d sf/d gamma ~ 0.25 bounds the gap.
        const double left = gpd_sf(1.5, 1.0, 0.999e-8);
        const double right = gpd_sf(1.5, 1.0, 1.001e-8);
        CHECK(std::abs(left - right) < 1e-11);
    }

    CHECK_THROWS_AS(gpd_sf(1.0, 0.0, 0.1), UsageError);
    CHECK_THROWS_AS(gpd_sf(-0.5, 1.0, 0.1), UsageError);
}

TEST_CASE("LKJ factor density") {
    Eigen::VectorXd free1(1);
    free1 << 0.7;
    CholCorr cc = *CholCorr::from_free(free1, 2);
    // d = 2: exponent on the second diagonal entry is 2 delta - 2.
    CHECK(lkj_chol_logdensity(cc, 1.3) ==
          doctest::Approx(0.3 * std::log(0.51)).epsilon(1e-13));
    // delta = 1 is flat in two dimensions.
    CHECK(lkj_chol_logdensity(cc, 1.0) == doctest::Approx(0.0));

    SUBCASE("matches the known d = 2 marginal shape") {
        // For d = 2 the implied density of the correlation r is
        // proportional to (1 - r^2)^(delta - 1).
        const double delta = 1.7;
        for (double r : {-0.8, -0.2, 0.4, 0.9}) {
            Eigen::VectorXd fr(1);
            fr << r;
            const double lg = lkj_chol_logdensity(*CholCorr::from_free(fr, 2), delta);
            CHECK(lg == doctest::Approx((delta - 1.0) * std::log1p(-r * r)).epsilon(1e-12));
        }
    }

    SUBCASE("three dimensions uses per-column exponents") {
        Eigen::VectorXd f3(3);
        f3 << 0.3, 0.2, -0.4;
        CholCorr c3 = *CholCorr::from_free(f3, 3);
        const double delta = 1.3;
        const Eigen::MatrixXd& u = c3.upper_factor();
        const double expected = (2.0 + 2.0 * delta - 2.0) * std::log(u(0, 0)) +
                                (1.0 + 2.0 * delta - 2.0) * std::log(u(1, 1)) +
                                (0.0 + 2.0 * delta - 2.0) * std::log(u(2, 2));
        CHECK(lkj_chol_logdensity(c3, delta) == doctest::Approx(expected).epsilon(1e-13));
    }

    CHECK_THROWS_AS(lkj_chol_logdensity(cc, 0.0), UsageError);
}

TEST_SUITE_END();
