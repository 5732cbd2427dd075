#include "doctest.h"

#include <cmath>
#include <numbers>

#include "mevmix/inference.hpp"
#include "oracles.hpp"

using namespace mevmix;

namespace {

// A moderately dependent bivariate configuration with a mild tail, used as
// the generating truth for the sampler-facing tests.
ModelParams reference_params() {
    Eigen::VectorXd mean(2), sd(2), u(2), a(2), sigma(2), gamma(2);
    mean << 3.5, 4.0;
    sd << 1.0, 1.5;
    Eigen::VectorXd free(1);
    free << 0.6;
    auto corr = CholCorr::from_free(free, 2);
    u << 5.2, 6.5;
    a << 0.8, 1.2;
    sigma << 0.6, 0.9;
    gamma << 0.15, 0.1;
    return ModelParams(MvnParams(mean, sd, *corr), u,
                       TailParams(a, sigma, gamma));
}

PriorSpec reference_prior() {
    PriorSpec prior;
    prior.mean_loc = Eigen::VectorXd::Zero(2);
    prior.mean_scale = Eigen::VectorXd::Constant(2, 50.0);
    prior.sd_upper = Eigen::VectorXd::Constant(2, 50.0);
    prior.thresh_loc = Eigen::VectorXd::Zero(2);
    prior.thresh_loc << 5.2, 6.5;
    prior.thresh_scale = Eigen::VectorXd::Constant(2, 5.0);
    prior.thresh_lo = Eigen::VectorXd::Zero(2);
    prior.thresh_hi = Eigen::VectorXd::Zero(2);
    prior.thresh_lo << 4.0, 5.0;
    prior.thresh_hi << 7.0, 8.5;
    return prior;
}

Dataset reference_data(int n, std::uint64_t seed) {
    RngStream rng(seed, 77);
    return simulate_model(reference_params(), n, rng);
}

double toy_gauss_logpdf(const Eigen::VectorXd& x, double rho) {
    const double q = (x(0) * x(0) - 2.0 * rho * x(0) * x(1) + x(1) * x(1)) /
                     (1.0 - rho * rho);
    return -0.5 * q;
}

} // namespace

TEST_SUITE_BEGIN("inference");

TEST_CASE("sampler configuration validation") {
    SamplerConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.effective_adapt_interval() == 50);
    cfg.algorithm = Algorithm::FactorSlice;
    CHECK(cfg.effective_adapt_interval() == 200);
    cfg.adapt_interval = 37;
    CHECK(cfg.effective_adapt_interval() == 37);

    SamplerConfig bad = cfg;
    bad.burn_in = bad.n_iter;
    CHECK_THROWS_AS(bad.validate(), UsageError);
    bad = cfg;
    bad.thin = 0;
    CHECK_THROWS_AS(bad.validate(), UsageError);
    bad = cfg;
    bad.n_iter = bad.burn_in + 3;
    bad.thin = 10;
    CHECK_THROWS_AS(bad.validate(), UsageError);
    bad = cfg;
    bad.n_chains = 0;
    CHECK_THROWS_AS(bad.validate(), UsageError);
    bad = cfg;
    bad.target_accept = 1.0;
    CHECK_THROWS_AS(bad.validate(), UsageError);
    bad = cfg;
    bad.initial_scale = 0.0;
    CHECK_THROWS_AS(bad.validate(), UsageError);

    SamplerConfig counts;
    counts.n_iter = 1050;
    counts.burn_in = 1000;
    counts.thin = 10;
    CHECK(counts.n_stored() == 5);
}

TEST_CASE("parameter layout names, blocks and round trip") {
    const ParamLayout layout = ParamLayout::for_dim(2);
    CHECK(layout.dim() == 2);
    CHECK(layout.n_params() == 13);
    const std::vector<std::string> expected = {
        "mu_1", "mu_2", "s_1", "s_2", "U_1_2", "u_1", "u_2",
        "a_1",  "a_2",  "sigma_1", "sigma_2", "gamma_1", "gamma_2"};
    CHECK(layout.names() == expected);
    for (Eigen::Index i = 0; i < 5; ++i) {
        CHECK(layout.block(i) == ParamLayout::Block::Bulk);
    }
    for (Eigen::Index i = 5; i < 7; ++i) {
        CHECK(layout.block(i) == ParamLayout::Block::Threshold);
    }
    for (Eigen::Index i = 7; i < 13; ++i) {
        CHECK(layout.block(i) == ParamLayout::Block::Tail);
    }

    const ModelParams params = reference_params();
    const Eigen::VectorXd x = layout.pack(params);
    CHECK(x(0) == 3.5);
    CHECK(x(4) == 0.6);
    CHECK(x(6) == 6.5);
    CHECK(x(12) == 0.1);
    const auto back = layout.unpack(x);
    REQUIRE(back.has_value());
    CHECK(back->bulk.mean.isApprox(params.bulk.mean));
    CHECK(back->bulk.sd.isApprox(params.bulk.sd));
    CHECK(back->bulk.corr.upper_factor().isApprox(params.bulk.corr.upper_factor()));
    CHECK(back->u.isApprox(params.u));
    CHECK(back->tail.a.isApprox(params.tail.a));
    CHECK(back->tail.sigma.isApprox(params.tail.sigma));
    CHECK(back->tail.gamma.isApprox(params.tail.gamma));

    const ParamLayout three = ParamLayout::for_dim(3);
    CHECK(three.n_params() == 21);
    CHECK(three.names()[6] == "U_1_2");
    CHECK(three.names()[7] == "U_1_3");
    CHECK(three.names()[8] == "U_2_3");
    CHECK(three.block(8) == ParamLayout::Block::Bulk);
    CHECK(three.block(11) == ParamLayout::Block::Threshold);

    CHECK_THROWS_AS(ParamLayout::for_dim(0), UsageError);
    CHECK_THROWS_AS(layout.unpack(Eigen::VectorXd::Zero(7)), UsageError);
}

TEST_CASE("parameter layout rejects infeasible vectors") {
    const ParamLayout layout = ParamLayout::for_dim(2);
    const Eigen::VectorXd x = layout.pack(reference_params());

    Eigen::VectorXd bad = x;
    bad(2) = -0.5;  // nonpositive bulk sd
    CHECK_FALSE(layout.unpack(bad).has_value());
    bad = x;
    bad(4) = 1.0;  // correlation factor entry on the unit bound
    CHECK_FALSE(layout.unpack(bad).has_value());
    bad = x;
    bad(7) = 0.0;  // generator scale must be positive
    CHECK_FALSE(layout.unpack(bad).has_value());
    bad = x;
    bad(10) = -1.0;  // tail scale must be positive
    CHECK_FALSE(layout.unpack(bad).has_value());
}

TEST_CASE("initialization is deterministic and feasible") {
    const Dataset data = reference_data(800, 31);
    const PriorSpec prior = reference_prior();

    const ModelParams a = init_params(data, prior, 5);
    const ModelParams b = init_params(data, prior, 5);
    CHECK(a.bulk.mean.isApprox(b.bulk.mean));
    CHECK(a.u.isApprox(b.u));
    CHECK(a.tail.sigma.isApprox(b.tail.sigma));

    CHECK(std::isfinite(log_posterior(data, a, prior)));
    // Thresholds near the marginal 90th percentiles leave most rows below.
    const Partition part = make_partition(data.values, a.u);
    CHECK(part.bulk_rows.size() > 0.6 * data.n());
    CHECK(part.n_tail() > 0);
}

TEST_CASE("initialization rejects unusable data") {
    const PriorSpec prior = reference_prior();

    Dataset tiny(Eigen::MatrixXd::Random(10, 2), {});
    CHECK_THROWS_AS(init_params(tiny, prior, 1), InitializationError);

    Eigen::MatrixXd flat = Eigen::MatrixXd::Zero(60, 2);
    flat.col(1) = Eigen::VectorXd::LinSpaced(60, 4.9, 6.2);
    flat.col(0).setConstant(5.0);  // no spread in the first column
    Dataset degenerate(flat, {});
    CHECK_THROWS_AS(init_params(degenerate, prior, 1), InitializationError);
}

TEST_CASE("cached posterior tracks the full evaluation under proposals") {
    const Dataset data = reference_data(400, 9);
    const PriorSpec prior = reference_prior();
    const ParamLayout layout = ParamLayout::for_dim(2);
    const Eigen::VectorXd x0 = layout.pack(init_params(data, prior, 3));

    CachedPosterior target(data, prior, layout, x0);
    CHECK(target.lp() == doctest::Approx(target.full_lp()).epsilon(1e-10));

    RngStream rng(2024, 55);
    int accepted = 0;
    for (int step = 0; step < 600; ++step) {
        const Eigen::Index c = static_cast<Eigen::Index>(rng.below(13));
        const double scale = (c == 5 || c == 6) ? 0.05 : 0.15;
        const double value = target.x()(c) + scale * rng.normal();
        const double lp_new = target.propose(c, value);
        CHECK_FALSE(std::isnan(lp_new));
        if (std::log(rng.uniform()) < lp_new - target.lp()) {
            target.accept();
            ++accepted;
            // The incremental bookkeeping must agree with a from-scratch
            // evaluation at every accepted point.
            CHECK(target.lp() ==
                  doctest::Approx(target.full_lp()).epsilon(1e-9));
        }
    }
    CHECK(accepted > 50);

    // Proposals outside the prior box are reported as impossible.
    CHECK(target.propose(7, -1.0) == -std::numeric_limits<double>::infinity());
    CHECK(target.propose(5, 0.0) == -std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(target.accept(), UsageError);
}

TEST_CASE("threshold updates repartition the data correctly") {
    // Moving a threshold across observations changes the bulk/tail split;
    // the cached posterior must stay consistent through such moves.
    const Dataset data = reference_data(300, 12);
    const PriorSpec prior = reference_prior();
    const ParamLayout layout = ParamLayout::for_dim(2);
    Eigen::VectorXd x0 = layout.pack(init_params(data, prior, 3));

    CachedPosterior target(data, prior, layout, x0);
    RngStream rng(7, 1);
    for (double u1 : {5.0, 6.6, 4.3, 5.9, 5.2}) {
        const double lp_new = target.propose(5, u1);
        if (std::isfinite(lp_new)) {
            target.accept();
            CHECK(target.lp() ==
                  doctest::Approx(target.full_lp()).epsilon(1e-9));
        }
    }
}

TEST_CASE("function target guards its starting point") {
    auto logpdf = [](const Eigen::VectorXd& v) {
        return v(0) > 0.0 ? -v(0) : -std::numeric_limits<double>::infinity();
    };
    CHECK_THROWS_AS(FunctionTarget(logpdf, Eigen::VectorXd::Constant(1, -1.0)),
                    UsageError);
    FunctionTarget ok(logpdf, Eigen::VectorXd::Constant(1, 2.0));
    CHECK(ok.lp() == doctest::Approx(-2.0));
    CHECK(ok.propose(0, 1.0) == doctest::Approx(-1.0));
    ok.accept();
    CHECK(ok.x()(0) == 1.0);
    CHECK(ok.lp() == doctest::Approx(-1.0));
}

TEST_CASE("scale adaptation pushes rates toward the target") {
    Eigen::VectorXd scales = Eigen::VectorXd::Constant(3, 1.0);
    Eigen::VectorXd rates(3);
    rates << 0.9, 0.44, 0.1;
    const Eigen::VectorXd out = adapt_scales(scales, rates, 1, 0.44);
    CHECK(out(0) > 1.0);
    CHECK(out(1) == doctest::Approx(1.0));
    CHECK(out(2) < 1.0);

    // Later rounds move less.
    const Eigen::VectorXd late = adapt_scales(scales, rates, 100, 0.44);
    CHECK(std::abs(std::log(late(0))) < std::abs(std::log(out(0))));

    CHECK_THROWS_AS(adapt_scales(scales, rates.head(2), 1, 0.44), UsageError);
    CHECK_THROWS_AS(adapt_scales(scales, rates, 0, 0.44), UsageError);
}

TEST_CASE("random walk sweeps with adaptation sample a correlated gaussian") {
    const double rho = 0.7;
    auto logpdf = [rho](const Eigen::VectorXd& v) {
        return toy_gauss_logpdf(v, rho);
    };
    FunctionTarget target(logpdf, Eigen::VectorXd::Zero(2));
    RngStream rng(99, 3);
    Eigen::VectorXd scales = Eigen::VectorXd::Constant(2, 0.1);
    Eigen::VectorXi accepts = Eigen::VectorXi::Zero(2);

    // Burn in with Robbins-Monro adaptation every 50 sweeps.
    int round = 0;
    for (int iter = 0; iter < 2000; ++iter) {
        rwmh_sweep(target, scales, rng, accepts);
        if ((iter + 1) % 50 == 0) {
            const Eigen::VectorXd rates = accepts.cast<double>() / 50.0;
            scales = adapt_scales(scales, rates, ++round, 0.44);
            accepts.setZero();
        }
    }

    accepts.setZero();
    const int n_keep = 8000;
    Eigen::MatrixXd draws(n_keep, 2);
    for (int iter = 0; iter < n_keep; ++iter) {
        rwmh_sweep(target, scales, rng, accepts);
        draws.row(iter) = target.x().transpose();
    }
    const Eigen::VectorXd rates = accepts.cast<double>() / double(n_keep);
    CHECK(rates(0) > 0.25);
    CHECK(rates(0) < 0.65);
    CHECK(rates(1) > 0.25);
    CHECK(rates(1) < 0.65);

    CHECK(draws.col(0).mean() == doctest::Approx(0.0).epsilon(0.15));
    CHECK(oracles::variance(std::vector<double>(
              draws.col(0).data(), draws.col(0).data() + n_keep)) ==
          doctest::Approx(1.0).epsilon(0.2));
    const double cross =
        (draws.col(0).array() * draws.col(1).array()).mean();
    CHECK(cross == doctest::Approx(rho).epsilon(0.25));
}

TEST_CASE("slice updates leave a standard normal invariant") {
    auto logpdf = [](const Eigen::VectorXd& v) { return -0.5 * v(0) * v(0); };
    Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.3);
    double lp = logpdf(x);
    RngStream rng(4, 8);
    SliceCounters counters;
    const Eigen::VectorXd dir = Eigen::VectorXd::Ones(1);

    std::vector<double> draws;
    for (int iter = 0; iter < 15000; ++iter) {
        slice_along(logpdf, x, lp, dir, 3.0, rng, counters);
        if (iter % 5 == 4) draws.push_back(x(0));
    }
    CHECK(counters.steps == 15000);
    CHECK(counters.expansions + counters.contractions > 0);

    const auto ks = oracles::ks_test(
        draws, [](double t) { return 0.5 * std::erfc(-t / std::numbers::sqrt2); });
    CHECK(ks.p_value > 1e-4);

    CHECK_THROWS_AS(slice_along(logpdf, x, lp, dir, -1.0, rng, counters),
                    UsageError);
}

TEST_CASE("slice expansion detects an unbounded level set") {
    auto flat = [](const Eigen::VectorXd&) { return 0.0; };
    Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
    double lp = 0.0;
    RngStream rng(1, 1);
    SliceCounters counters;
    CHECK_THROWS_AS(
        slice_along(flat, x, lp, Eigen::VectorXd::Ones(1), 1.0, rng, counters),
        NumericPathologyError);
}

TEST_CASE("factor adaptation recovers the covariance eigenbasis") {
    // History drawn directly from a known gaussian: the adapted basis must
    // diagonalize its covariance and the widths must track the eigenvalues.
    const double rho = 0.9;
    RngStream rng(21, 5);
    const int n = 4000;
    Eigen::MatrixXd history(n, 2);
    const double b = std::sqrt(1.0 - rho * rho);
    for (int i = 0; i < n; ++i) {
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        history(i, 0) = z1;
        history(i, 1) = rho * z1 + b * z2;
    }

    Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(2, 2);
    Eigen::VectorXd widths = Eigen::VectorXd::Constant(2, 0.1);
    std::vector<SliceCounters> counters(2);
    afss_adapt(history, basis, widths, counters);

    // Eigenvectors of [[1, rho], [rho, 1]] are (1, -1) and (1, 1) up to
    // normalization, with eigenvalues 1 -+ rho.
    const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    Eigen::VectorXd minor(2), major(2);
    minor << inv_sqrt2, -inv_sqrt2;
    major << inv_sqrt2, inv_sqrt2;
    CHECK(std::abs(minor.dot(basis.col(0))) == doctest::Approx(1.0).epsilon(0.05));
    CHECK(std::abs(major.dot(basis.col(1))) == doctest::Approx(1.0).epsilon(0.05));
    CHECK(widths(0) == doctest::Approx(2.0 * std::sqrt(1.0 - rho)).epsilon(0.15));
    CHECK(widths(1) == doctest::Approx(2.0 * std::sqrt(1.0 + rho)).epsilon(0.15));
}

TEST_CASE("factor adaptation keeps the basis when the history is degenerate") {
    Eigen::MatrixXd history = Eigen::MatrixXd::Zero(100, 2);
    history.col(0) = Eigen::VectorXd::LinSpaced(100, -1.0, 1.0);
    // Second column constant: the covariance is singular.
    Eigen::MatrixXd basis(2, 2);
    basis << 0.6, -0.8, 0.8, 0.6;
    const Eigen::MatrixXd before = basis;
    Eigen::VectorXd widths = Eigen::VectorXd::Constant(2, 0.7);
    std::vector<SliceCounters> counters(2);
    counters[0] = {100, 0, 10};  // heavy expansion: width should grow
    counters[1] = {0, 100, 10};  // heavy contraction: width should shrink
    afss_adapt(history, basis, widths, counters);
    CHECK(basis.isApprox(before));
    CHECK(widths(0) == doctest::Approx(1.4));
    CHECK(widths(1) == doctest::Approx(0.35));
    CHECK(counters[0].steps == 0);

    // Effort inside the comfort band leaves the width alone.
    Eigen::VectorXd steady = Eigen::VectorXd::Constant(2, 0.7);
    std::vector<SliceCounters> mild(2);
    mild[0] = {2, 2, 2};
    mild[1] = {1, 2, 1};
    Eigen::MatrixXd small_hist = Eigen::MatrixXd::Zero(10, 2);
    afss_adapt(small_hist, basis, steady, mild);
    CHECK(steady(0) == doctest::Approx(0.7));
    CHECK(steady(1) == doctest::Approx(0.7));
}

TEST_CASE("factor slice sweeps sample a correlated gaussian") {
    const double rho = 0.9;
    auto logpdf = [rho](const Eigen::VectorXd& v) {
        return toy_gauss_logpdf(v, rho);
    };
    Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    double lp = logpdf(x);
    RngStream rng(17, 2);
    Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(2, 2);
    Eigen::VectorXd widths = Eigen::VectorXd::Constant(2, 1.0);
    std::vector<SliceCounters> counters(2);

    Eigen::MatrixXd history(500, 2);
    for (int iter = 0; iter < 500; ++iter) {
        afss_sweep(logpdf, x, lp, basis, widths, rng, counters);
        history.row(iter) = x.transpose();
    }
    afss_adapt(history.bottomRows(250), basis, widths, counters);

    const int n_keep = 4000;
    Eigen::MatrixXd draws(n_keep, 2);
    for (int iter = 0; iter < n_keep; ++iter) {
        afss_sweep(logpdf, x, lp, basis, widths, rng, counters);
        draws.row(iter) = x.transpose();
    }
    CHECK(draws.col(0).mean() == doctest::Approx(0.0).epsilon(0.12));
    CHECK(draws.col(1).mean() == doctest::Approx(0.0).epsilon(0.12));
    const double cross =
        (draws.col(0).array() * draws.col(1).array()).mean();
    CHECK(cross == doctest::Approx(rho).epsilon(0.2));
}

TEST_CASE("split half shrink factor sentinels and postcondition") {
    // Build a chain whose two halves are identical: all split sequences
    // coincide, so the between variance vanishes and the factor hits its
    // theoretical floor sqrt((L - 1) / L).
    const int half = 50;
    Eigen::VectorXd v(half);
    for (int i = 0; i < half; ++i) v(i) = std::sin(0.37 * i);
    ChainStore chain;
    chain.draws.resize(2 * half, 1);
    chain.draws.col(0) << v, v;
    chain.logpost = Eigen::VectorXd::Zero(2 * half);

    const double rhat = gelman_rubin({chain, chain}, 0);
    CHECK(rhat == doctest::Approx(std::sqrt((half - 1.0) / half)).epsilon(1e-12));

    // Separated chains blow the factor up.
    ChainStore shifted = chain;
    shifted.draws.array() += 25.0;
    CHECK(gelman_rubin({chain, shifted}, 0) > 5.0);

    // Constant chains at the same value are perfectly converged.
    ChainStore flat;
    flat.draws = Eigen::MatrixXd::Ones(40, 1);
    flat.logpost = Eigen::VectorXd::Zero(40);
    CHECK(gelman_rubin({flat, flat}, 0) == 1.0);

    // Constant but different chains diverge.
    ChainStore flat2 = flat;
    flat2.draws.array() += 1.0;
    CHECK(std::isinf(gelman_rubin({flat, flat2}, 0)));

    CHECK_THROWS_AS(gelman_rubin({}, 0), UsageError);
    CHECK_THROWS_AS(gelman_rubin({chain}, 3), UsageError);
}

TEST_CASE("effective sample size matches analytic autocorrelation") {
    RngStream rng(6, 6);

    // Independent draws: close to the nominal size.
    const int n = 4000;
    Eigen::VectorXd iid(n);
    for (int i = 0; i < n; ++i) iid(i) = rng.normal();
    const double ess_iid = effective_sample_size(iid);
    CHECK(ess_iid > 0.75 * n);
    CHECK(ess_iid < 1.55 * n);

    // AR(1) with phi = 0.9: the autocorrelation time is (1 + phi)/(1 - phi)
    // = 19, so the efficiency should sit near 1/19.
    const double phi = 0.9;
    const int m = 40000;
    Eigen::VectorXd ar(m);
    double state = 0.0;
    const double innov = std::sqrt(1.0 - phi * phi);
    for (int i = 0; i < m; ++i) {
        state = phi * state + innov * rng.normal();
        ar(i) = state;
    }
    const double ess_ar = effective_sample_size(ar);
    CHECK(ess_ar / m > 0.035);
    CHECK(ess_ar / m < 0.075);

    CHECK(effective_sample_size(Eigen::VectorXd::Ones(100)) == 0.0);
    CHECK_THROWS_AS(effective_sample_size(Eigen::VectorXd::Zero(3)), UsageError);
}

TEST_CASE("full chain runs are deterministic and well shaped") {
    const Dataset data = reference_data(300, 41);
    const PriorSpec prior = reference_prior();

    SamplerConfig cfg;
    cfg.n_iter = 700;
    cfg.burn_in = 400;
    cfg.thin = 3;
    cfg.n_chains = 2;
    cfg.seed = 11;

    const auto chains = run_chains(data, prior, cfg);
    REQUIRE(chains.size() == 2);
    for (const ChainStore& ch : chains) {
        CHECK(ch.draws.rows() == cfg.n_stored());
        CHECK(ch.draws.cols() == 13);
        CHECK(ch.logpost.size() == cfg.n_stored());
        CHECK(ch.param_names.size() == 13);
        CHECK(ch.param_names[0] == "mu_1");
        CHECK(ch.logpost.allFinite());
        CHECK(ch.accept_rate.minCoeff() > 0.01);
        CHECK(ch.accept_rate.maxCoeff() < 0.95);
        CHECK(ch.scale_trace.rows() == cfg.burn_in / cfg.effective_adapt_interval());
        CHECK_FALSE(ch.mixing_warning);
    }
    // Distinct chains explore distinct paths.
    CHECK_FALSE(chains[0].draws.isApprox(chains[1].draws));

    // Stored log posteriors match a from-scratch evaluation of the draw.
    const ParamLayout layout = ParamLayout::for_dim(2);
    const Eigen::Index last = chains[0].draws.rows() - 1;
    const auto params = layout.unpack(chains[0].draws.row(last).transpose());
    REQUIRE(params.has_value());
    CHECK(chains[0].logpost(last) ==
          doctest::Approx(log_posterior(data, *params, prior)).epsilon(1e-9));

    const auto again = run_chains(data, prior, cfg);
    CHECK((again[0].draws.array() == chains[0].draws.array()).all());
    CHECK((again[1].draws.array() == chains[1].draws.array()).all());
    CHECK((again[0].logpost.array() == chains[0].logpost.array()).all());
}

TEST_CASE("chain storage edge cases") {
    const Dataset data = reference_data(200, 8);
    const PriorSpec prior = reference_prior();

    SamplerConfig cfg;
    cfg.n_iter = 61;
    cfg.burn_in = 60;
    cfg.thin = 1;
    cfg.n_chains = 1;
    cfg.adapt_interval = 20;
    cfg.seed = 4;
    const auto chains = run_chains(data, prior, cfg);
    REQUIRE(chains.size() == 1);
    CHECK(chains[0].draws.rows() == 1);
    CHECK(chains[0].logpost.size() == 1);
}

TEST_CASE("factor slice chains run end to end") {
    const Dataset data = reference_data(200, 23);
    const PriorSpec prior = reference_prior();

    SamplerConfig cfg;
    cfg.n_iter = 260;
    cfg.burn_in = 200;
    cfg.thin = 2;
    cfg.n_chains = 1;
    cfg.algorithm = Algorithm::FactorSlice;
    cfg.adapt_interval = 100;
    cfg.initial_scale = 0.5;
    cfg.seed = 19;

    const auto chains = run_chains(data, prior, cfg);
    REQUIRE(chains.size() == 1);
    const ChainStore& ch = chains[0];
    CHECK(ch.draws.rows() == 30);
    CHECK(ch.logpost.allFinite());
    CHECK((ch.accept_rate.array() == 1.0).all());
    CHECK(ch.scale_trace.rows() == 2);
    CHECK_FALSE(ch.mixing_warning);

    const ParamLayout layout = ParamLayout::for_dim(2);
    const auto params = layout.unpack(ch.draws.row(10).transpose());
    REQUIRE(params.has_value());
    CHECK(ch.logpost(10) ==
          doctest::Approx(log_posterior(data, *params, prior)).epsilon(1e-9));

    const auto again = run_chains(data, prior, cfg);
    CHECK((again[0].draws.array() == ch.draws.array()).all());
}

TEST_SUITE_END();
